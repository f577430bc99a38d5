#pragma once
// Pole trajectories of r -> T_{lambda+iy}(H_r) as y decreases, grouping
// around resonance points, and the resonance index by sign counting and by
// a contour integral.

#include "ssfkit/quadrature.hpp"
#include "ssfkit/resolvent.hpp"
#include "ssfkit/ssf.hpp"

namespace ssfkit {

class TrackingFailure : public Error {
public:
    using Error::Error;
};

class AmbiguousSign : public Error {
public:
    using Error::Error;
};

class ContourCollision : public Error {
public:
    using Error::Error;
};

/// r = -1/sigma over the eigenvalues sigma != 0 of J T_{lambda+iy}(H_0).
/// Non-straight paths fall back to the companion pole set.
inline std::vector<Complex> poles_at(const RiggedModel& model, double lambda, double y, Side side = Side::plus) {
    const SpectralPoint at{lambda, y, side};
    if (!model.path().is_straight()) return coupling_poles(model, at);
    const CMatrix JT = model.path().direction().matrix() * T_base_matrix(model, at);
    std::vector<Complex> out;
    if (JT.rows() == 0) return out;
    for (const Complex& s : to_std(eig_general(JT).eigenvalues))
        if (std::abs(s) >= 1e-14) out.push_back(-1.0 / s);
    std::sort(out.begin(), out.end(), complex_less);
    return out;
}

struct PoleTrajectory {
    std::vector<double> ys;                 // decreasing
    std::vector<std::vector<Complex>> r;    // r[j][i]: trajectory j at ys[i]

    std::size_t size() const noexcept { return r.size(); }
    Complex last(std::size_t j) const { return r[j].back(); }
};

namespace detail {

inline std::vector<Complex> poles_for_tracking(const RiggedModel& model, double lambda, double y, Side side,
                                               std::size_t segment) {
    if (model.path().is_straight()) return poles_at(model, lambda, y, side);
    return segment_poles(PointResolvent(model, SpectralPoint{lambda, y, side}), segment);
}

inline double nearest_other(const std::vector<Complex>& v, std::size_t j) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < v.size(); ++l)
        if (l != j) d = std::min(d, std::abs(v[l] - v[j]));
    return d;
}

}  // namespace detail

/// Follow the poles along `ys` (positive, decreasing).  A step is accepted
/// when every pole moves less than 0.1 of its distance to the nearest other
/// pole; otherwise the step is halved in log y, and lengthened again after
/// each success.
inline PoleTrajectory track_poles(const RiggedModel& model, double lambda, const std::vector<double>& ys,
                                  Side side = Side::plus, std::size_t segment = 0, int max_refinements = 4000) {
    if (ys.empty()) throw ParameterError("track_poles: empty y grid");
    for (std::size_t i = 0; i < ys.size(); ++i)
        if (!(ys[i] > 0.0) || (i > 0 && !(ys[i] < ys[i - 1])))
            throw ParameterError("track_poles: y grid must be positive and decreasing");
    PoleTrajectory traj;
    std::vector<Complex> cur = detail::poles_for_tracking(model, lambda, ys[0], side, segment);
    traj.ys.push_back(ys[0]);
    traj.r.assign(cur.size(), {});
    for (std::size_t j = 0; j < cur.size(); ++j) traj.r[j].push_back(cur[j]);
    int refinements = 0;
    double y = ys[0];
    double q = 0.0;  // log-ratio of the last accepted step; 0 means "go to the grid point"
    for (std::size_t i = 1; i < ys.size(); ++i) {
        while (y > ys[i]) {
            const double target = q == 0.0 ? ys[i] : std::max(ys[i], y * std::exp(q));
            std::vector<Complex> next = detail::poles_for_tracking(model, lambda, target, side, segment);
            bool ok = next.size() == cur.size();
            std::vector<std::size_t> perm;
            if (ok) {
                perm = match_spectra(cur, next);
                for (std::size_t j = 0; j < cur.size() && ok; ++j)
                    ok = std::abs(next[perm[j]] - cur[j]) <= 0.1 * detail::nearest_other(cur, j);
            }
            if (!ok) {
                if (++refinements > max_refinements || target / y > 1.0 - 1e-9)
                    throw TrackingFailure("pole tracking could not resolve the matching near y = " +
                                          std::to_string(target));
                q = 0.5 * std::log(target / y);
                continue;
            }
            for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = next[perm[j]];
            y = target;
            if (q != 0.0) q *= 2.0;  // try a longer step next time
            if (y == ys[i]) {
                traj.ys.push_back(y);
                for (std::size_t j = 0; j < cur.size(); ++j) traj.r[j].push_back(cur[j]);
            }
        }
    }
    return traj;
}

inline std::vector<double> geometric_ys(double y0, double y_min, double ratio = 0.5) {
    std::vector<double> ys;
    for (double y = y0; y > y_min * (1.0 + 1e-12); y *= ratio) ys.push_back(y);
    ys.push_back(y_min);
    return ys;
}

struct ResonanceGroup {
    double r_lambda = 0.0;
    std::vector<std::size_t> members;  // trajectory indices
    std::vector<Complex> limits;       // member poles at the smallest y
    int N_plus = 0;
    int N_minus = 0;
    bool merged = false;               // limits of two resonance points closer than 2 group_tol
    bool monotone = true;              // members approach r_lambda monotonically over the last steps
    double y_used = 0.0;

    int index() const noexcept { return N_plus - N_minus; }
};

/// N_+ - N_- of a group.
inline int resonance_index_counting(const ResonanceGroup& group) { return group.N_plus - group.N_minus; }

namespace detail {

inline std::size_t segment_of(const CouplingPath& path, double r) {
    for (std::size_t s = 0; s < path.segment_count(); ++s) {
        const auto [b, e] = path.segment_range(s);
        if (r >= b && (r < e || s + 1 == path.segment_count())) return s;
    }
    return r < path.segment_range(0).first ? 0 : path.segment_count() - 1;
}

}  // namespace detail

/// Groups of pole trajectories converging to the resonance points r_lambda
/// in [r_lo, r_hi].  y_min is halved (up to 20 times) while a member's
/// imaginary part is too small to sign.
inline std::vector<ResonanceGroup> group_resonances(const RiggedModel& model, double lambda, double r_lo, double r_hi,
                                                    const NumericsConfig& cfg = {}, Side side = Side::plus) {
    const RegularityInfo info = resonance_set(model, lambda, r_lo, r_hi, side, cfg.res_real_tol);
    std::vector<ResonanceGroup> groups;
    const CouplingPath& path = model.path();
    for (std::size_t g = 0; g < info.resonance_r_values.size(); ++g) {
        const double rl = info.resonance_r_values[g];
        if (!groups.empty() && rl - groups.back().r_lambda < 2.0 * cfg.group_tol) {
            groups.back().merged = true;
            continue;
        }
        ResonanceGroup grp;
        grp.r_lambda = rl;
        const std::size_t seg = detail::segment_of(path, rl);
        double y_min = cfg.y_min;
        for (int attempt = 0;; ++attempt) {
            const PoleTrajectory tr = track_poles(model, lambda, geometric_ys(1.0, y_min), side, seg);
            grp.members.clear();
            grp.limits.clear();
            grp.N_plus = grp.N_minus = 0;
            grp.monotone = true;
            bool ambiguous = false;
            for (std::size_t j = 0; j < tr.size(); ++j) {
                const Complex r = tr.last(j);
                if (std::abs(r - rl) > cfg.group_tol) continue;
                grp.members.push_back(j);
                grp.limits.push_back(r);
                const auto& path_j = tr.r[j];
                const std::size_t n = path_j.size();
                for (std::size_t i = n >= 4 ? n - 4 : 0; i + 1 < n; ++i)
                    if (std::abs(path_j[i + 1] - rl) > std::abs(path_j[i] - rl) * (1.0 + 1e-9) + 1e-14)
                        grp.monotone = false;
                if (std::abs(r.imag()) < 1e-12 * std::max(1.0, std::abs(r))) ambiguous = true;
                else if (r.imag() > 0) ++grp.N_plus;
                else ++grp.N_minus;
            }
            grp.y_used = y_min;
            if (!ambiguous) break;
            if (attempt >= 20) throw AmbiguousSign("pole too close to the real axis to assign a half-plane");
            y_min *= 0.5;
        }
        // Side - reflects every pole; N_+ and N_- keep their side + meaning.
        if (side == Side::minus) std::swap(grp.N_plus, grp.N_minus);
        groups.push_back(std::move(grp));
    }
    return groups;
}

struct ContourValue {
    Complex value;  // (1/pi) times the closed contour integral
    double arc = 0.0;
    double diameter = 0.0;
};

/// (1/pi) times the integral of Tr(J'_r Im T_{lambda+iy}(H_r)), continued
/// analytically in r, over the boundary of the upper half-disk
/// |r - r_lambda| <= radius, counterclockwise.  The arc uses composite
/// Gauss-Legendre (32 panels x 20 nodes); the diameter, where poles sit at
/// distance ~y, uses adaptive Gauss-Kronrod graded at the poles.
inline ContourValue resonance_contour(const RiggedModel& model, double lambda, double r_lambda, double radius,
                                      double y, double quad_tol = 1e-12) {
    if (!(radius > 0.0) || !(y > 0.0)) throw ParameterError("resonance_contour: radius and y must be positive");
    const PointResolvent pr(model, SpectralPoint{lambda, y, Side::plus});
    const CouplingPath& path = model.path();
    std::vector<Complex> poles = coupling_poles(pr);
    const std::size_t n_direct = poles.size();
    for (std::size_t i = 0; i < n_direct; ++i) poles.push_back(std::conj(poles[i]));
    const double guard = 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r_lambda) + radius);
    for (const Complex& p : poles) {
        const bool on_arc = std::abs(std::abs(p - r_lambda) - radius) < guard && p.imag() >= -guard;
        const bool on_diameter = std::abs(p.imag()) < guard && std::abs(p.real() - r_lambda) <= radius + guard;
        if (on_arc || on_diameter) throw ContourCollision("a pole lies on the contour; adjust the radius");
    }
    auto integrand = [&](Complex r) -> Complex {
        return (path.Jdot(r) * pr.imT_continued(r)).trace();
    };
    ContourValue out;
    const Complex arc = integrate_gauss_legendre(
        [&](double phi) {
            const Complex e = std::exp(kI * phi);
            return integrand(r_lambda + radius * e) * (kI * radius * e);
        },
        0.0, kPi, 32);
    QuadOptions opt;
    opt.abs_tol = quad_tol;
    const double diam = integrate_adaptive([&](double r) { return integrand(Complex(r, 0.0)).real(); },
                                           r_lambda - radius, r_lambda + radius, path.breakpoints(),
                                           detail::pole_spikes(poles), opt)
                            .value;
    out.value = (arc + diam) / kPi;
    out.arc = arc.real() / kPi;
    out.diameter = diam / kPi;
    return out;
}

inline double resonance_index_contour(const RiggedModel& model, double lambda, double r_lambda, double radius,
                                      double y, double quad_tol = 1e-12) {
    return resonance_contour(model, lambda, r_lambda, radius, y, quad_tol).value.real();
}

/// Sum of the group indices over resonance points in [0,1].
inline int total_resonance_index(const RiggedModel& model, double lambda, const NumericsConfig& cfg = {}) {
    const RegularityInfo edge = resonance_set(model, lambda, -1e-10, 1.0 + 1e-10, Side::plus, cfg.res_real_tol);
    for (double r : edge.resonance_r_values)
        if (std::abs(r) <= 1e-10 || std::abs(r - 1.0) <= 1e-10)
            throw IllPosed("resonance point at an endpoint of the coupling interval");
    int total = 0;
    for (const ResonanceGroup& g : group_resonances(model, lambda, 0.0, 1.0, cfg)) total += g.index();
    return total;
}

}  // namespace ssfkit
