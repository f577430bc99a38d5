#pragma once
// Continuous eigenphase tracking of unitary paths starting at 1, the
// crossing count mu(theta; U), and the Pushnitski, a.c. and singular
// mu-invariants built from scattering matrices.

#include "ssfkit/resonance.hpp"
#include "ssfkit/scattering.hpp"

#include <functional>

namespace ssfkit {

class AmbiguousTheta : public Error {
public:
    using Error::Error;
};

class StartTolerance : public Error {
public:
    using Error::Error;
};

class MuInconsistency : public Error {
public:
    using Error::Error;
};

/// Samples U(t_i) of a unitary path, optionally backed by a generator that
/// is used to bisect steps whose phases jump too far.
struct UnitaryPath {
    std::vector<double> t;
    std::vector<CMatrix> U;
    std::function<CMatrix(double)> eval;             // may be empty
    std::vector<std::pair<double, double>> bridges;  // steps joined without refinement
    int budget = 4000;

    static UnitaryPath sampled(std::vector<double> t, std::vector<CMatrix> U) {
        UnitaryPath p;
        p.t = std::move(t);
        p.U = std::move(U);
        return p;
    }

    static UnitaryPath from_function(std::function<CMatrix(double)> f, const std::vector<double>& grid,
                                     int budget = 4000) {
        UnitaryPath p;
        p.t = grid;
        p.U.reserve(grid.size());
        for (double t : grid) p.U.push_back(f(t));
        p.eval = std::move(f);
        p.budget = budget;
        return p;
    }
};

struct EigenphaseTracks {
    std::vector<double> t;                   // accepted parameters, including refinements
    std::vector<std::vector<double>> theta;  // theta[j][i]
    int refinements = 0;
    int bridged = 0;                         // bridge steps actually crossed

    std::size_t size() const noexcept { return theta.size(); }
    double final_phase(std::size_t j) const { return theta[j].back(); }
    std::vector<double> final_phases() const {
        std::vector<double> out;
        for (const auto& tr : theta) out.push_back(tr.back());
        return out;
    }
};

namespace detail {

inline std::vector<Complex> unit_eigenvalues(const CMatrix& U) {
    if (U.size() == 0) return {};
    std::vector<Complex> ev = to_std(eig_general(U).eigenvalues);
    for (Complex& e : ev) e /= std::abs(e);
    return ev;
}

inline void require_unitary(const CMatrix& U, double tol = 1e-8) {
    if (U.size() == 0) return;
    require_square(U, "unitary path sample");
    const double defect = op_norm(U.adjoint() * U - CMatrix::Identity(U.rows(), U.cols()));
    if (defect > tol) throw NumericalFailure("unitary path sample is not unitary", defect);
}

/// Eigenvalues at the current end of the tracks, with the phase velocity
/// of the last accepted step (per unit t).
struct PhaseState {
    double t = 0.0;
    std::vector<Complex> ev;
    std::vector<double> velocity;
};

struct PhaseStep {
    std::vector<Complex> ev;  // next eigenvalues in track order
    std::vector<double> jump;
    double worst = 0.0;
};

/// Match by predicted positions, so that transversal crossings keep their
/// direction, and take each jump on the branch nearest the prediction.
inline PhaseStep phase_step(const PhaseState& from, double t_next, const CMatrix& U_next) {
    require_unitary(U_next);
    const std::vector<Complex> nxt = unit_eigenvalues(U_next);
    const double dt = t_next - from.t;
    std::vector<Complex> predicted(from.ev.size());
    std::vector<double> pred(from.ev.size());
    for (std::size_t j = 0; j < from.ev.size(); ++j) {
        pred[j] = from.velocity[j] * dt;
        predicted[j] = from.ev[j] * std::exp(kI * pred[j]);
    }
    const std::vector<std::size_t> perm = match_spectra(predicted, nxt);
    PhaseStep step;
    step.ev.resize(from.ev.size());
    step.jump.resize(from.ev.size());
    for (std::size_t j = 0; j < from.ev.size(); ++j) {
        step.ev[j] = nxt[perm[j]];
        step.jump[j] = pred[j] + std::arg(step.ev[j] / predicted[j]);
        step.worst = std::max(step.worst, std::abs(step.jump[j]));
    }
    return step;
}

inline PhaseState advance(const PhaseState& from, double t_next, const PhaseStep& step) {
    PhaseState s{t_next, step.ev, std::vector<double>(step.ev.size())};
    for (std::size_t j = 0; j < step.ev.size(); ++j) s.velocity[j] = step.jump[j] / (t_next - from.t);
    return s;
}

}  // namespace detail

/// Matched, unwrapped eigenphases with theta_j(t_0) = 0.  A step whose
/// largest matched phase jump reaches pi/2 is bisected when the path has a
/// generator.  With a generator every step is also checked against its
/// midpoint, which catches steps that alias a full turn.  Tracks that stay
/// within 1e-10 of 1 are pinned to 0.
inline EigenphaseTracks track_eigenphases(const UnitaryPath& path) {
    if (path.t.empty() || path.t.size() != path.U.size()) throw ShapeError("track_eigenphases: sample mismatch");
    const Index k = path.U.front().rows();
    if (path.U.front().size() > 0 && max_abs(path.U.front() - CMatrix::Identity(k, k)) > 1e-8)
        throw ParameterError("track_eigenphases: path must start at the identity");
    const std::size_t n = static_cast<std::size_t>(k);
    EigenphaseTracks out;
    detail::PhaseState state{path.t.front(), std::vector<Complex>(n, Complex(1.0, 0.0)), std::vector<double>(n, 0.0)};
    std::vector<double> phase(n, 0.0), far_from_one(n, 0.0);
    out.t.push_back(path.t.front());
    out.theta.assign(n, {0.0});

    auto is_bridge = [&](double a, double b) {
        for (const auto& [lo, hi] : path.bridges)
            if (a == lo && b == hi) return true;
        return false;
    };
    auto refine = [&](double t_next) {
        if (++out.refinements > path.budget)
            throw TrackingFailure("eigenphase tracking exhausted its refinement budget near t = " + std::to_string(t_next));
    };
    for (std::size_t i = 1; i < path.t.size(); ++i) {
        // Pending right endpoints, innermost last.
        std::vector<std::pair<double, CMatrix>> pending{{path.t[i], path.U[i]}};
        const bool bridge = is_bridge(path.t[i - 1], path.t[i]);
        while (!pending.empty()) {
            const double t_next = pending.back().first;
            const CMatrix U_next = pending.back().second;
            const detail::PhaseStep step = detail::phase_step(state, t_next, U_next);
            const bool may_refine = path.eval && !(bridge && pending.size() == 1);
            if (step.worst >= 0.5 * kPi) {
                if (!may_refine) {
                    if (!bridge)
                        throw TrackingFailure("eigenphase jump of " + std::to_string(step.worst) +
                                              " between samples without a generator");
                } else {
                    refine(t_next);
                    const double mid = 0.5 * (state.t + t_next);
                    pending.emplace_back(mid, path.eval(mid));
                    continue;
                }
            } else if (may_refine && n > 0) {
                const double mid = 0.5 * (state.t + t_next);
                CMatrix U_mid = path.eval(mid);
                const detail::PhaseStep first = detail::phase_step(state, mid, U_mid);
                const detail::PhaseStep second =
                    detail::phase_step(detail::advance(state, mid, first), t_next, U_next);
                double mismatch = first.worst >= 0.5 * kPi || second.worst >= 0.5 * kPi ? 1.0 : 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    mismatch = std::max(mismatch, std::abs(first.jump[j] + second.jump[j] - step.jump[j]));
                if (mismatch > 1e-7) {
                    refine(t_next);
                    pending.emplace_back(mid, std::move(U_mid));
                    continue;
                }
            }
            if (bridge && pending.size() == 1) ++out.bridged;
            for (std::size_t j = 0; j < n; ++j) {
                phase[j] += step.jump[j];
                far_from_one[j] = std::max(far_from_one[j], std::abs(step.ev[j] - 1.0));
                out.theta[j].push_back(phase[j]);
            }
            state = detail::advance(state, t_next, step);
            out.t.push_back(t_next);
            pending.pop_back();
        }
    }
    for (std::size_t j = 0; j < n; ++j)
        if (far_from_one[j] <= 1e-10) std::fill(out.theta[j].begin(), out.theta[j].end(), 0.0);
    return out;
}

/// Net number of eigenvalue crossings of e^{i theta}: sum_j ceil((theta_j(1) - theta) / 2 pi).
/// The ceiling is the boundary convention for which -(1/2pi) int mu = xi(U).
inline int mu(double theta, const std::vector<double>& final_phases, double guard = 1e-6) {
    if (!(theta > 0.0 && theta < 2.0 * kPi)) throw ParameterError("mu: theta must lie in (0, 2 pi)");
    int total = 0;
    for (double th : final_phases) {
        const double d = th - theta;
        if (std::abs(std::remainder(d, 2.0 * kPi)) < guard)
            throw AmbiguousTheta("mu: a final eigenphase lies within the guard of theta; shift theta");
        total += static_cast<int>(std::ceil(d / (2.0 * kPi)));
    }
    return total;
}

inline int mu(double theta, const EigenphaseTracks& tracks, double guard = 1e-6) {
    return mu(theta, tracks.final_phases(), guard);
}

/// xi(U) = -(1/2pi) sum_j theta_j(1).
inline double xi_of_path(const EigenphaseTracks& tracks) {
    double s = 0.0;
    for (double th : tracks.final_phases()) s += th;
    return -s / (2.0 * kPi);
}

/// U_a followed by U_b U_a(end); parameters of b are shifted to follow a.
inline UnitaryPath concatenate(const UnitaryPath& a, const UnitaryPath& b) {
    UnitaryPath out;
    const CMatrix end = a.U.back();
    const double shift = a.t.back() - b.t.front();
    out.t = a.t;
    out.U = a.U;
    for (std::size_t i = 1; i < b.t.size(); ++i) {
        out.t.push_back(b.t[i] + shift);
        out.U.push_back(b.U[i] * end);
    }
    out.bridges = a.bridges;
    for (const auto& [lo, hi] : b.bridges) out.bridges.emplace_back(lo + shift, hi + shift);
    if (a.eval && b.eval) {
        const double split = a.t.back();
        out.eval = [fa = a.eval, fb = b.eval, end, split, shift](double t) {
            return t <= split ? fa(t) : CMatrix(fb(t - shift) * end);
        };
    }
    out.budget = std::max(a.budget, b.budget);
    return out;
}

// ---------------------------------------------------------------- scattering paths

/// On-shell S(lambda) embedded in the full auxiliary space as S (+) 1.
inline CMatrix embedded_on_shell_S(const RiggedModel& model, double lambda, double r = 1.0,
                                   double rank_tol = kDefaultRankTol) {
    const ScatteringMatrix s = scattering_matrix(model, SpectralPoint{lambda, 0.0, Side::plus}, r, rank_tol);
    const Index k = model.k();
    return s.basis * s.S * s.basis.adjoint() + (CMatrix::Identity(k, k) - s.basis * s.basis.adjoint());
}

/// Smallest Y = 2^m >= 1 with ||S(lambda + iY) - 1||_1 <= start_tol.
inline double auto_y_max(const RiggedModel& model, double lambda, double start_tol = 1e-6) {
    const Index k = model.k();
    for (double Y = 1.0; Y <= 1e12; Y *= 2.0)
        if (trace_norm(scattering_full(model, SpectralPoint{lambda, Y, Side::plus}, 1.0) - CMatrix::Identity(k, k)) <=
            start_tol)
            return Y;
    throw StartTolerance("no Y_max below 1e12 brings S(lambda + iY) within the start tolerance of 1");
}

/// y -> S(lambda + iy; H_1, H_0) from y = infinity to y = 0.  Parameter
/// t in [-1, 0] covers y = Y_max / (1 + t) in [Y_max, infinity]; t in
/// [0, T] is geometric with ratio 1/2, shifted so that y(T) = 0 where the
/// endpoint is S(lambda) (+) 1.  T is chosen so that Y_max 2^{-T} <= 1e-9.
inline UnitaryPath pushnitski_path(const RiggedModel& model, double lambda, double y_max = 0.0,
                                   const NumericsConfig& cfg = {}, double start_tol = 1e-6) {
    const Index k = model.k();
    if (y_max <= 0.0) {
        y_max = auto_y_max(model, lambda, start_tol);
    } else if (trace_norm(scattering_full(model, SpectralPoint{lambda, y_max, Side::plus}, 1.0, cfg.rank_tol) -
                          CMatrix::Identity(k, k)) > start_tol) {
        throw StartTolerance("||S(lambda + i Y_max) - 1||_1 exceeds the start tolerance; increase Y_max");
    }
    const int T = static_cast<int>(std::ceil(std::log2(y_max / 1e-9)));
    const double floor_y = y_max * std::exp2(-T);
    const CMatrix endpoint = embedded_on_shell_S(model, lambda, 1.0, cfg.rank_tol);
    auto y_of = [=](double t) { return t < 0.0 ? y_max / (1.0 + t) : y_max * std::exp2(-t) - floor_y; };
    auto eval = [=, &model](double t) -> CMatrix {
        if (t <= -1.0) return CMatrix::Identity(k, k);
        if (t >= T) return endpoint;
        return scattering_full(model, SpectralPoint{lambda, y_of(t), Side::plus}, 1.0, cfg.rank_tol);
    };
    std::vector<double> grid{-1.0};
    for (int i = 0; i <= T; ++i) grid.push_back(static_cast<double>(i));
    return UnitaryPath::from_function(eval, grid);
}

/// r -> S(lambda; H_r, H_0) on the fibre of H_0, on a 64-interval grid over
/// [0, 1] graded towards poles close to the axis.  Around each real
/// resonance r* the grid jumps from r* - delta to r* + delta (a bridge, not
/// refined).
inline UnitaryPath ac_path(const RiggedModel& model, double lambda, const NumericsConfig& cfg = {}) {
    const RegularityInfo info = resonance_set(model, lambda, 0.0, 1.0, Side::plus, cfg.res_real_tol);
    for (double r : info.resonance_r_values)
        if (r < cfg.delta || r > 1.0 - cfg.delta) throw IllPosed("resonance point at an endpoint of the coupling interval");
    auto eval = [&model, lambda, rank_tol = cfg.rank_tol](double r) -> CMatrix {
        if (r == 0.0) {
            const Index d = fibre_basis(model, 0.0, lambda, rank_tol).dim();
            return CMatrix::Identity(d, d);
        }
        return scattering_matrix(model, SpectralPoint{lambda, 0.0, Side::plus}, r, rank_tol).S;
    };
    std::vector<double> grid;
    std::vector<std::pair<double, double>> bridges;
    for (int i = 0; i <= 64; ++i) {
        const double r = i / 64.0;
        bool inside = false;
        for (double rs : info.resonance_r_values) inside = inside || std::abs(r - rs) <= cfg.delta;
        if (!inside) grid.push_back(r);
    }
    auto bridged = [&](double r) {
        for (double rs : info.resonance_r_values)
            if (std::abs(r - rs) <= cfg.delta) return true;
        return false;
    };
    // A pole p near the real axis turns one eigenphase by almost 2 pi while r
    // crosses a window of width ~|Im p| around Re p; a uniform grid can step
    // over the whole turn.  Grade the grid geometrically towards Re p.
    for (const Complex& p : coupling_poles(model, SpectralPoint{lambda, 0.0, Side::plus})) {
        const double h = std::abs(p.imag());
        if (h == 0.0 || h >= 1.0 / 64.0 || p.real() < -1.0 / 64.0 || p.real() > 1.0 + 1.0 / 64.0) continue;
        std::vector<double> offsets{0.0};
        for (double s = 0.25 * h; s < 1.0 / 64.0; s *= 2.0) offsets.push_back(s);
        for (double s : offsets)
            for (double r : {p.real() - s, p.real() + s})
                if (r > 0.0 && r < 1.0 && !bridged(r)) grid.push_back(r);
    }
    for (double rs : info.resonance_r_values) {
        grid.push_back(rs - cfg.delta);
        grid.push_back(rs + cfg.delta);
        bridges.emplace_back(rs - cfg.delta, rs + cfg.delta);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    UnitaryPath p = UnitaryPath::from_function(eval, grid);
    p.bridges = std::move(bridges);
    return p;
}

inline int mu_pushnitski(const RiggedModel& model, double lambda, double theta, double y_max = 0.0,
                         const NumericsConfig& cfg = {}) {
    return mu(theta, track_eigenphases(pushnitski_path(model, lambda, y_max, cfg)), cfg.mu_guard);
}

inline int mu_ac(const RiggedModel& model, double lambda, double theta, const NumericsConfig& cfg = {}) {
    return mu(theta, track_eigenphases(ac_path(model, lambda, cfg)), cfg.mu_guard);
}

struct MuSingular {
    int value = 0;
    std::vector<double> thetas;
    std::vector<int> mu_pushnitski;
    std::vector<int> mu_ac;
    double xi_pushnitski = 0.0;  // xi of the y-path
    double xi_ac = 0.0;          // xi of the r-path
    int bridged = 0;
};

/// mu(theta; U_1) - mu(theta; U_2) at `samples` thetas; throws if it varies.
inline MuSingular mu_singular(const RiggedModel& model, double lambda, const NumericsConfig& cfg = {},
                              int samples = 8) {
    if (samples < 8) throw ParameterError("mu_singular: at least 8 theta samples");
    const EigenphaseTracks t1 = track_eigenphases(pushnitski_path(model, lambda, 0.0, cfg));
    const EigenphaseTracks t2 = track_eigenphases(ac_path(model, lambda, cfg));
    MuSingular out;
    out.xi_pushnitski = xi_of_path(t1);
    out.xi_ac = xi_of_path(t2);
    out.bridged = t2.bridged;
    for (int s = 0; s < samples; ++s) {
        double theta = 2.0 * kPi * (s + 0.5) / samples + 0.0123;
        for (int shift = 0;; ++shift) {
            try {
                const int a = mu(theta, t1, cfg.mu_guard);
                const int b = mu(theta, t2, cfg.mu_guard);
                out.thetas.push_back(theta);
                out.mu_pushnitski.push_back(a);
                out.mu_ac.push_back(b);
                break;
            } catch (const AmbiguousTheta&) {
                if (shift >= 10) throw;
                theta += 1e-3;
            }
        }
    }
    out.value = out.mu_pushnitski[0] - out.mu_ac[0];
    for (std::size_t s = 1; s < out.thetas.size(); ++s)
        if (out.mu_pushnitski[s] - out.mu_ac[s] != out.value) {
            std::string msg = "mu_singular depends on theta:";
            for (std::size_t q = 0; q < out.thetas.size(); ++q)
                msg += " (" + std::to_string(out.thetas[q]) + ", " + std::to_string(out.mu_pushnitski[q] - out.mu_ac[q]) + ")";
            throw MuInconsistency(msg);
        }
    return out;
}

}  // namespace ssfkit
