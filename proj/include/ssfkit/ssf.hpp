#pragma once
// Spectral shift function: infinitesimal measure, Birman-Solomyak
// quadrature, smoothed / pointwise / absolutely continuous / singular SSF.

#include "ssfkit/quadrature.hpp"
#include "ssfkit/resolvent.hpp"

namespace ssfkit {

class IllPosed : public Error {
public:
    using Error::Error;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

struct YGrid {
    double y0 = 1.0;
    double ratio = 0.5;
    int count = 24;
    int order = 2;

    static YGrid from(const NumericsConfig& cfg) {
        return {cfg.ygrid_y0, cfg.ygrid_ratio, cfg.ygrid_count, cfg.richardson_order};
    }

    std::vector<double> values() const {
        if (!(y0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < order + 2 || order < 0)
            throw ParameterError("YGrid: need y0 > 0, ratio in (0,1), count >= order + 2");
        std::vector<double> ys(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) ys[static_cast<std::size_t>(i)] = y0 * std::pow(ratio, i);
        if (!(ys.back() > 1e-12)) throw ParameterError("YGrid: smallest y must exceed 1e-12");
        return ys;
    }
};

struct SSFSample {
    double lambda = 0.0;
    double xi = 0.0;
    double xi_ac = 0.0;
    double xi_s = 0.0;
    long xi_s_rounded = 0;
    double residual = 0.0;
    bool near_resonance = false;
    double extrapolation_quality = 0.0;
    bool extrapolation_ok = true;
};

// ---------------------------------------------------------------- finite mode

/// Tr(E_{H_r}(supp phi) V'_r phi(H_r)) by eigendecomposition.
inline double issm(const RiggedModel& model, double r, const CompactFunction& phi) {
    if (!model.is_finite()) throw UnsupportedBackend("issm requires the finite backend");
    const SpectralDecomposition sd = eig_hermitian(model.H(r));
    const CMatrix Vd = model.Vdot(r).matrix();
    double acc = 0.0;
    for (Index j = 0; j < sd.eigenvalues.size(); ++j) {
        const double lam = sd.eigenvalues(j);
        if (lam < phi.lo || lam > phi.hi) continue;
        const Complex w = sd.eigenvectors.col(j).dot(Vd * sd.eigenvectors.col(j));
        acc += phi(lam) * w.real();
    }
    return acc;
}

inline double issm(const RiggedModel& model, double r, const TestFunction& phi) {
    return issm(model, r, phi.as_compact());
}

/// Birman-Solomyak: xi(phi) = int_0^1 issm(r)(phi) dr.
inline double ssf_measure(const RiggedModel& model, const CompactFunction& phi, double quad_tol = 1e-12) {
    if (!model.is_finite()) throw UnsupportedBackend("ssf_measure requires the finite backend");
    QuadOptions opt;
    opt.abs_tol = quad_tol;
    return integrate_adaptive([&](double r) { return issm(model, r, phi); }, 0.0, 1.0, model.path().breakpoints(), {},
                              opt)
        .value;
}

inline double ssf_measure(const RiggedModel& model, const TestFunction& phi, double quad_tol = 1e-12) {
    return ssf_measure(model, phi.as_compact(), quad_tol);
}

/// N_{H0}(lambda) - N_{H1}(lambda) with N the eigenvalue counting function.
inline long ssf_counting_oracle(const RiggedModel& model, double lambda) {
    if (!model.is_finite()) throw UnsupportedBackend("ssf_counting_oracle requires the finite backend");
    auto count = [&](double r) {
        const RVector ev = eig_hermitian(model.H(r)).eigenvalues;
        long n = 0;
        for (Index i = 0; i < ev.size(); ++i) {
            if (std::abs(ev(i) - lambda) <= 1e-10) throw IllPosed("lambda is within 1e-10 of an eigenvalue");
            if (ev(i) <= lambda) ++n;
        }
        return n;
    };
    return count(0.0) - count(1.0);
}

/// (Tr phi(H1) - Tr phi(H0), ssf_measure(phi')).
inline std::pair<double, double> trace_formula_check(const RiggedModel& model, const TestFunction& phi,
                                                     double quad_tol = 1e-12) {
    if (!model.is_finite()) throw UnsupportedBackend("trace_formula_check requires the finite backend");
    auto trace_phi = [&](double r) {
        const RVector ev = eig_hermitian(model.H(r)).eigenvalues;
        double s = 0.0;
        for (Index i = 0; i < ev.size(); ++i) s += phi(ev(i));
        return s;
    };
    const double lhs = trace_phi(1.0) - trace_phi(0.0);
    const double rhs = ssf_measure(model, phi.derivative_compact(), quad_tol);
    return {lhs, rhs};
}

// ---------------------------------------------------------------- smoothed SSF

namespace detail {

inline std::vector<Spike> pole_spikes(const std::vector<Complex>& poles) {
    std::vector<Spike> s;
    for (const Complex& p : poles) s.push_back({p.real(), std::max(std::abs(p.imag()), 1e-14)});
    return s;
}

inline double trace_product_real(const CMatrix& a, const CMatrix& b) {
    // Re Tr(a b) without forming the product.
    Complex t(0.0, 0.0);
    for (Index i = 0; i < a.rows(); ++i) t += a.row(i).transpose().cwiseProduct(b.col(i)).sum();
    return t.real();
}

}  // namespace detail

/// xi(lambda + iy; H_{r_hi}, H_{r_lo}) = (1/pi) int Tr(J'_r Im T_z(H_r)) dr.
inline double smoothed_ssf(const RiggedModel& model, const SpectralPoint& z, double quad_tol = 1e-12,
                           double r_lo = 0.0, double r_hi = 1.0) {
    if (!(z.y > 0.0)) throw ParameterError("smoothed_ssf requires y > 0");
    const PointResolvent pr(model, z);
    const CouplingPath& path = model.path();
    auto f = [&](double r) {
        const CMatrix t = pr.T(r);
        const CMatrix im = (t - t.adjoint()) / (2.0 * kI);
        return detail::trace_product_real(path.Jdot(r), im) / kPi;
    };
    QuadOptions opt;
    opt.abs_tol = quad_tol;
    const double sign = z.side == Side::plus ? 1.0 : -1.0;
    return sign * integrate_adaptive(f, r_lo, r_hi, path.breakpoints(), detail::pole_spikes(coupling_poles(pr)), opt).value;
}

struct PointwiseSSF {
    double xi = 0.0;
    double quality = 0.0;
    bool extrapolation_ok = true;
    std::vector<double> ys;
    std::vector<double> values;
};

/// Richardson table on a geometric sequence: eliminates terms y, y^2, ...
/// up to `order`.  Returns the final column.
inline std::vector<double> richardson_column(const std::vector<double>& values, double ratio, int order) {
    std::vector<double> col = values;
    double q = 1.0;
    for (int level = 1; level <= order; ++level) {
        q *= ratio;
        std::vector<double> next(col.size() - 1);
        for (std::size_t i = 0; i + 1 < col.size(); ++i) next[i] = (col[i + 1] - q * col[i]) / (1.0 - q);
        col = std::move(next);
    }
    return col;
}

inline PointwiseSSF ssf_pointwise(const RiggedModel& model, double lambda, const YGrid& grid = {},
                                  double quad_tol = 1e-12, double r_lo = 0.0, double r_hi = 1.0) {
    PointwiseSSF out;
    out.ys = grid.values();
    for (double y : out.ys)
        out.values.push_back(smoothed_ssf(model, SpectralPoint{lambda, y, Side::plus}, quad_tol, r_lo, r_hi));
    const std::vector<double> col = richardson_column(out.values, grid.ratio, grid.order);
    out.xi = col.back();
    const std::size_t n = col.size();
    out.quality = std::abs(col[n - 1] - col[n - 2]);
    // Divergent tail: the last three increments grow monotonically and are
    // not already at roundoff level.
    if (n >= 4) {
        const double d1 = std::abs(col[n - 3] - col[n - 4]);
        const double d2 = std::abs(col[n - 2] - col[n - 3]);
        const double d3 = out.quality;
        if (d3 > d2 && d2 > d1 && d3 > 1e-8) out.extrapolation_ok = false;
    }
    return out;
}

// ---------------------------------------------------------------- a.c. SSF

/// (1/pi) Tr(J'_r Im T_{lambda+i0}(H_r)).
inline double issm_ac_density(const RiggedModel& model, double r, double lambda) {
    const PointResolvent pr(model, SpectralPoint{lambda, 0.0, Side::plus});
    return detail::trace_product_real(model.path().Jdot(r), pr.imT(r).matrix()) / kPi;
}

namespace detail {

/// Least-squares polynomial through (x_i, f_i), evaluated by integrating
/// over [a,b].  Nodes are centred and scaled for conditioning.
inline double integrate_fit(const std::vector<double>& x, const std::vector<double>& f, int degree, double centre,
                            double scale, double a, double b) {
    const Index n = static_cast<Index>(x.size());
    Eigen::MatrixXd V(n, degree + 1);
    Eigen::VectorXd rhs(n);
    for (Index i = 0; i < n; ++i) {
        const double t = (x[static_cast<std::size_t>(i)] - centre) / scale;
        double p = 1.0;
        for (int d = 0; d <= degree; ++d) V(i, d) = p, p *= t;
        rhs(i) = f[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = V.colPivHouseholderQr().solve(rhs);
    const double ta = (a - centre) / scale, tb = (b - centre) / scale;
    double s = 0.0;
    for (int d = 0; d <= degree; ++d) s += c(d) * (std::pow(tb, d + 1) - std::pow(ta, d + 1)) / (d + 1);
    return s * scale;
}

}  // namespace detail

/// (1/pi) int_0^1 Tr(J'_r Im T_{lambda+i0}(H_r)) dr, with each resonance
/// window (r*-delta, r*+delta) filled by a degree-4 least-squares fit
/// through r* +- {1,2,3} delta.
inline double ac_ssf(const RiggedModel& model, double lambda, const NumericsConfig& cfg = {}) {
    if (model.is_finite()) return 0.0;  // Im T_{lambda+i0} vanishes identically.
    const PointResolvent pr(model, SpectralPoint{lambda, 0.0, Side::plus});
    const double delta = cfg.delta;
    const RegularityInfo info = resonance_set(model, lambda, -delta, 1.0 + delta, Side::plus, cfg.res_real_tol);
    const std::vector<double>& res = info.resonance_r_values;
    for (std::size_t i = 0; i + 1 < res.size(); ++i)
        if (res[i + 1] - res[i] < 4.0 * delta)
            throw ResolutionError("two resonance points closer than 4*delta; choose a smaller delta");
    const CouplingPath& path = model.path();
    auto f = [&](double r) { return detail::trace_product_real(path.Jdot(r), pr.imT(r).matrix()) / kPi; };

    // Complex poles at y = 0 produce spikes of width |Im r| on the real line.
    std::vector<Complex> poles = coupling_poles(pr);
    std::vector<Spike> spikes;
    for (const Complex& p : poles)
        if (std::abs(p.imag()) > cfg.res_real_tol) spikes.push_back({p.real(), std::abs(p.imag())});

    QuadOptions opt;
    opt.abs_tol = cfg.quad_tol;
    double total = 0.0;
    double cursor = 0.0;
    for (double rs : res) {
        const double wa = std::max(0.0, rs - delta), wb = std::min(1.0, rs + delta);
        if (wa > cursor) total += integrate_adaptive(f, cursor, wa, path.breakpoints(), spikes, opt).value;
        if (wb > wa) {
            std::vector<double> xs, fs;
            for (int j : {-3, -2, -1, 1, 2, 3}) {
                xs.push_back(rs + j * delta);
                fs.push_back(f(rs + j * delta));
            }
            total += detail::integrate_fit(xs, fs, 4, rs, delta, wa, wb);
        }
        cursor = std::max(cursor, wb);
    }
    if (cursor < 1.0) total += integrate_adaptive(f, cursor, 1.0, path.breakpoints(), spikes, opt).value;
    return total;
}

// ---------------------------------------------------------------- singular SSF

/// True if lambda lies within `margin` of a point where the set of
/// resonances in [0,1] changes (an eigenvalue of H_0 or H_1, or a pair of
/// resonances appearing), or of a band edge.
inline bool near_resonance_image(const RiggedModel& model, double lambda, double margin = 1e-3,
                                 const NumericsConfig& cfg = {}) {
    if (auto ess = model.essential_spectrum())
        if (std::abs(lambda - ess->first) <= margin || std::abs(lambda - ess->second) <= margin) return true;
    auto count = [&](double lam) -> long {
        try {
            const RegularityInfo info = resonance_set(model, lam, 0.0, 1.0, Side::plus, cfg.res_real_tol);
            long n = 0;
            for (int m : info.multiplicities) n += m;
            return n;
        } catch (const BoundaryValueUndefined&) {
            return -1;
        }
    };
    const long c0 = count(lambda);
    if (c0 != count(lambda - margin) || c0 != count(lambda + margin)) return true;
    // A resonance at or next to an endpoint of [0,1].
    try {
        const RegularityInfo info = resonance_set(model, lambda, -margin, 1.0 + margin, Side::plus, cfg.res_real_tol);
        for (double r : info.resonance_r_values)
            if (std::abs(r) <= margin || std::abs(r - 1.0) <= margin) return true;
    } catch (const BoundaryValueUndefined&) {
        return true;
    }
    return false;
}

inline SSFSample singular_ssf(const RiggedModel& model, double lambda, const NumericsConfig& cfg = {}) {
    SSFSample s;
    s.lambda = lambda;
    const PointwiseSSF pw = ssf_pointwise(model, lambda, YGrid::from(cfg), cfg.quad_tol);
    s.xi = pw.xi;
    s.extrapolation_quality = pw.quality;
    s.extrapolation_ok = pw.extrapolation_ok;
    s.xi_ac = ac_ssf(model, lambda, cfg);
    s.xi_s = s.xi - s.xi_ac;
    s.xi_s_rounded = std::lround(s.xi_s);
    s.residual = std::abs(s.xi_s - static_cast<double>(s.xi_s_rounded));
    s.near_resonance = near_resonance_image(model, lambda, 1e-3, cfg);
    return s;
}

}  // namespace ssfkit
