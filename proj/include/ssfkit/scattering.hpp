#pragma once
// Fibre spaces, evaluation operators, wave matrices and scattering matrices
// in k x k form, the coupling-constant ODE for S and its ordered
// exponential, and Birman-Krein residuals.

#include "ssfkit/resolvent.hpp"
#include "ssfkit/ssf.hpp"

namespace ssfkit {

class RankMismatch : public Error {
public:
    using Error::Error;
};

struct FibreBasis {
    double lambda = 0.0;
    double r = 0.0;
    CMatrix basis;   // k x d, orthonormal columns
    RVector values;  // retained eigenvalues of Im T, descending
    Index dim() const noexcept { return basis.cols(); }
};

namespace detail {

/// Eigenvectors of a PSD matrix above rank_tol * max, descending, each
/// with its largest-modulus entry made real positive.
inline FibreBasis range_basis(const HermMatrix& im, double rank_tol) {
    const SpectralDecomposition sd = eig_hermitian(im);
    const Index k = im.size();
    const double top = k == 0 ? 0.0 : sd.eigenvalues.cwiseAbs().maxCoeff();
    std::vector<Index> keep;
    for (Index i = k - 1; i >= 0; --i)
        if (top > 0.0 && sd.eigenvalues(i) > rank_tol * top) keep.push_back(i);
    FibreBasis fb;
    fb.basis.resize(k, static_cast<Index>(keep.size()));
    fb.values.resize(static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        CVector v = sd.eigenvectors.col(keep[c]);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        v *= std::conj(v(arg)) / std::abs(v(arg));
        v(arg) = std::abs(v(arg));
        fb.basis.col(static_cast<Index>(c)) = v;
        fb.values(static_cast<Index>(c)) = sd.eigenvalues(keep[c]);
    }
    return fb;
}

}  // namespace detail

/// Orthonormal basis of the range of Im T_{lambda+i0}(H_r).
inline FibreBasis fibre_basis(const RiggedModel& model, double r, double lambda, double rank_tol = kDefaultRankTol) {
    const PointResolvent pr(model, SpectralPoint{lambda, 0.0, Side::plus});
    FibreBasis fb = detail::range_basis(pr.imT(r), rank_tol);
    fb.lambda = lambda;
    fb.r = r;
    return fb;
}

struct EvaluationVector {
    double lambda = 0.0;
    CVector coords;  // fibre coordinates
};

/// Fibre coordinates of sqrt(Im T_{lambda+i0}(H_r) / pi) phi, for f = F* phi.
inline EvaluationVector evaluation_operator(const RiggedModel& model, double r, double lambda, const CVector& phi,
                                            double rank_tol = kDefaultRankTol) {
    if (phi.size() != model.k()) throw ShapeError("evaluation_operator: phi has the wrong length");
    const PointResolvent pr(model, SpectralPoint{lambda, 0.0, Side::plus});
    const HermMatrix im = pr.imT(r);
    const FibreBasis fb = detail::range_basis(im, rank_tol);
    const HermMatrix root = sqrt_psd(HermMatrix(im.matrix() / kPi), rank_tol);
    return {lambda, fb.basis.adjoint() * root.matrix() * phi};
}

/// Everything about H_r at one on-shell point that the wave and scattering
/// matrices need: T_{lambda +- i0}(H_r), sqrt(Im T) and its range.
struct OnShell {
    double r = 0.0;
    CMatrix T_plus;
    CMatrix T_minus;
    CMatrix root;   // sqrt(Im T_{lambda+i0}(H_r))
    CMatrix pinv;   // pseudo-inverse of root on its range
    CMatrix basis;  // fibre basis
};

class OnShellEvaluator {
public:
    OnShellEvaluator(const RiggedModel& model, double lambda, double rank_tol = kDefaultRankTol)
        : model_(&model),
          lambda_(lambda),
          rank_tol_(rank_tol),
          plus_(model, SpectralPoint{lambda, 0.0, Side::plus}),
          minus_(model, SpectralPoint{lambda, 0.0, Side::minus}) {}

    double lambda() const noexcept { return lambda_; }
    const RiggedModel& model() const noexcept { return *model_; }

    OnShell at(double r) const {
        OnShell s;
        s.r = r;
        s.T_plus = plus_.T(r);
        s.T_minus = minus_.T(r);
        const HermMatrix im = plus_.imT(r);
        const HermMatrix root = sqrt_psd(im, rank_tol_);
        s.root = root.matrix();
        s.pinv = pinv_on_range(root, std::sqrt(rank_tol_)).pinv;
        s.basis = detail::range_basis(im, rank_tol_).basis;
        return s;
    }

private:
    const RiggedModel* model_;
    double lambda_;
    double rank_tol_;
    PointResolvent plus_;
    PointResolvent minus_;
};

struct WaveMatrix {
    double lambda = 0.0;
    Side sign = Side::plus;
    double r1 = 0.0;
    double r0 = 0.0;
    CMatrix matrix;  // d1 x d0 in fibre bases
};

/// w_pm(lambda; H_{r1}, H_{r0}) from
/// w sqrt(Im T(H_{r0})) = sqrt(Im T(H_{r1})) (1 + (J_{r1} - J_{r0}) T_{lambda pm i0}(H_{r0})).
inline CMatrix wave_block(const RiggedModel& model, const OnShell& s1, const OnShell& s0, Side sign) {
    if (s1.basis.cols() != s0.basis.cols()) throw RankMismatch("fibre dimensions differ between r0 and r1");
    const Index k = model.k();
    const CMatrix dJ = model.path().J(s1.r) - model.path().J(s0.r);
    const CMatrix M = CMatrix::Identity(k, k) + dJ * (sign == Side::plus ? s0.T_plus : s0.T_minus);
    return s1.basis.adjoint() * s1.root * M * s0.pinv * s0.basis;
}

inline WaveMatrix wave_matrix(const RiggedModel& model, double lambda, double r1, double r0, Side sign,
                              double rank_tol = kDefaultRankTol) {
    const OnShellEvaluator ev(model, lambda, rank_tol);
    return {lambda, sign, r1, r0, wave_block(model, ev.at(r1), ev.at(r0), sign)};
}

struct ScatteringMatrix {
    double lambda = 0.0;
    double y = 0.0;
    double r = 0.0;
    bool on_shell = true;
    CMatrix S;      // d x d in the fibre basis on-shell; k x k off-axis
    CMatrix basis;  // fibre basis of H_0 (on-shell only)
    Complex det{1.0, 0.0};

    double unitarity_defect() const {
        return S.size() == 0 ? 0.0 : op_norm(S.adjoint() * S - CMatrix::Identity(S.cols(), S.cols()));
    }
};

/// k x k stationary formula S = 1 - 2i A J_r (1 + T J_r)^{-1} A with
/// T = T_z(H_0) and A = sqrt(Im T).
inline CMatrix scattering_full(const RiggedModel& model, const SpectralPoint& at, double r,
                              double rank_tol = kDefaultRankTol) {
    const PointResolvent pr(model, at);
    const Index k = model.k();
    const CMatrix& T0 = pr.T0();
    const HermMatrix im = imaginary_part(T0);
    if (at.side == Side::minus) throw ParameterError("scattering matrix uses the upper boundary value");
    const CMatrix A = sqrt_psd(im, rank_tol).matrix();
    const CMatrix J = model.path().J(r);
    Eigen::PartialPivLU<CMatrix> lu(CMatrix::Identity(k, k) + T0 * J);
    if (!(lu.rcond() > 1e-12)) throw ResonanceHit(r);
    return CMatrix::Identity(k, k) - 2.0 * kI * A * J * lu.solve(A);
}

/// S(z; H_r, H_0).  y > 0: full k x k matrix.  y = 0: compression to the
/// fibre of H_0 (the full matrix is S (+) 1).
inline ScatteringMatrix scattering_matrix(const RiggedModel& model, const SpectralPoint& at, double r,
                                          double rank_tol = kDefaultRankTol) {
    ScatteringMatrix out;
    out.lambda = at.lambda;
    out.y = at.y;
    out.r = r;
    out.on_shell = at.on_axis();
    const CMatrix full = scattering_full(model, at, r, rank_tol);
    if (out.on_shell) {
        out.basis = fibre_basis(model, 0.0, at.lambda, rank_tol).basis;
        out.S = out.basis.adjoint() * full * out.basis;
    } else {
        out.S = full;
    }
    out.det = determinant(out.S);
    return out;
}

/// || w_+(r,0)* w_-(r,0) - S(lambda; H_r, H_0) || on the fibre of H_0.
inline double cross_check_S(const RiggedModel& model, double lambda, double r, double rank_tol = kDefaultRankTol) {
    const OnShellEvaluator ev(model, lambda, rank_tol);
    const OnShell s0 = ev.at(0.0), s1 = ev.at(r);
    const CMatrix wp = wave_block(model, s1, s0, Side::plus);
    const CMatrix wm = wave_block(model, s1, s0, Side::minus);
    const ScatteringMatrix S = scattering_matrix(model, SpectralPoint{lambda, 0.0, Side::plus}, r, rank_tol);
    if (S.S.size() == 0) return 0.0;
    return op_norm(wp.adjoint() * wm - S.S);
}

namespace detail {

/// Omega(r) = -2i w_+(0,r) [A_r J'_r A_r] w_+(r,0) on the fibre of H_0, so
/// that dS/dr = Omega(r) S(r).
inline CMatrix ode_generator(const OnShellEvaluator& ev, const OnShell& s0, double r) {
    const RiggedModel& model = ev.model();
    const OnShell sr = ev.at(r);
    const CMatrix w_r0 = wave_block(model, sr, s0, Side::plus);
    const CMatrix w_0r = wave_block(model, s0, sr, Side::plus);
    const CMatrix a = sr.basis.adjoint() * sr.root * model.path().Jdot(r) * sr.root * sr.basis;
    return -2.0 * kI * w_0r * a * w_r0;
}

}  // namespace detail

/// -2i w_+(lambda;0,r) a(r) w_+(lambda;r,0) S(lambda;H_r,H_0) on the fibre of H_0.
inline CMatrix scattering_ode_rhs(const RiggedModel& model, double lambda, double r, double rank_tol = kDefaultRankTol) {
    const OnShellEvaluator ev(model, lambda, rank_tol);
    const CMatrix S = scattering_matrix(model, SpectralPoint{lambda, 0.0, Side::plus}, r, rank_tol).S;
    return detail::ode_generator(ev, ev.at(0.0), r) * S;
}

struct OrderedExpResult {
    ScatteringMatrix S;
    double unitarity_defect = 0.0;
    int steps = 0;
    int rejected = 0;
};

/// Integrate dS/dr = Omega(r) S from S(0) = 1 along `r_grid` with classical
/// RK4.  Each grid interval is accepted when one step and two half steps
/// agree to ode_tol; otherwise it is subdivided.
inline OrderedExpResult ordered_exp_S(const RiggedModel& model, double lambda, const std::vector<double>& r_grid,
                                      const NumericsConfig& cfg = {}) {
    if (r_grid.size() < 2) throw ParameterError("ordered_exp_S: grid needs at least two points");
    const double lo = r_grid.front(), hi = r_grid.back();
    if (!resonance_set(model, lambda, lo, hi, Side::plus, cfg.res_real_tol).resonance_r_values.empty())
        throw ResonanceHit(Complex(lo, 0.0));
    const OnShellEvaluator ev(model, lambda, cfg.rank_tol);
    const OnShell s0 = ev.at(0.0);
    const Index d = s0.basis.cols();
    auto omega = [&](double r) { return detail::ode_generator(ev, s0, r); };
    auto rk4 = [&](const CMatrix& S, double r, double h, const CMatrix& k1) {
        const CMatrix mid = omega(r + 0.5 * h);
        const CMatrix k2 = mid * (S + 0.5 * h * k1);
        const CMatrix k3 = mid * (S + 0.5 * h * k2);
        const CMatrix k4 = omega(r + h) * (S + h * k3);
        return CMatrix(S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    };
    OrderedExpResult out;
    CMatrix S = CMatrix::Identity(d, d);
    if (lo != 0.0) S = scattering_matrix(model, SpectralPoint{lambda, 0.0, Side::plus}, lo, cfg.rank_tol).S;
    for (std::size_t i = 0; i + 1 < r_grid.size(); ++i) {
        double r = r_grid[i];
        const double end = r_grid[i + 1];
        double h = end - r;
        while (r < end) {
            h = std::min(h, end - r);
            const CMatrix k1 = omega(r) * S;
            const CMatrix one = rk4(S, r, h, k1);
            const CMatrix half = rk4(S, r, 0.5 * h, k1);
            const CMatrix two = rk4(half, r + 0.5 * h, 0.5 * h, omega(r + 0.5 * h) * half);
            const double err = d == 0 ? 0.0 : max_abs(two - one);
            if (err > cfg.ode_tol && h > 1e-9) {
                h *= 0.5;
                ++out.rejected;
                continue;
            }
            S = two + (two - one) / 15.0;  // local extrapolation
            r += h;
            ++out.steps;
        }
    }
    out.S.lambda = lambda;
    out.S.r = hi;
    out.S.S = S;
    out.S.basis = s0.basis;
    out.S.det = determinant(S);
    out.unitarity_defect = out.S.unitarity_defect();
    return out;
}

inline std::vector<double> uniform_grid(double lo, double hi, double step) {
    const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / step - 1e-9)));
    std::vector<double> g(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / n;
    return g;
}

struct BirmanKreinResiduals {
    double res_xi = 0.0;
    double res_xia = 0.0;
    Complex det{1.0, 0.0};
    double xi = 0.0;
    double xi_ac = 0.0;
};

/// |det S(lambda) - exp(-2 pi i xi)| with xi from the pointwise SSF and from
/// the a.c. SSF.
inline BirmanKreinResiduals birman_krein_residuals(const RiggedModel& model, double lambda,
                                                   const NumericsConfig& cfg = {}) {
    BirmanKreinResiduals out;
    out.det = scattering_matrix(model, SpectralPoint{lambda, 0.0, Side::plus}, 1.0, cfg.rank_tol).det;
    out.xi = ssf_pointwise(model, lambda, YGrid::from(cfg), cfg.quad_tol).xi;
    out.xi_ac = ac_ssf(model, lambda, cfg);
    out.res_xi = std::abs(out.det - std::exp(-2.0 * kPi * kI * out.xi));
    out.res_xia = std::abs(out.det - std::exp(-2.0 * kPi * kI * out.xi_ac));
    return out;
}

/// |det S(z) - exp(-2 pi i xi(z))| for y > 0, det over the full k x k matrix.
inline double bk_offaxis_residual(const RiggedModel& model, const SpectralPoint& z, double quad_tol = 1e-12) {
    if (!(z.y > 0.0)) throw ParameterError("bk_offaxis_residual requires y > 0");
    const Complex det = scattering_matrix(model, z, 1.0).det;
    return std::abs(det - std::exp(-2.0 * kPi * kI * smoothed_ssf(model, z, quad_tol)));
}

/// (int_{-2}^{2} ||E_lambda F* phi||^2 d lambda, ||F* phi||^2) for the
/// lattice operator H_r, integrated in theta with lambda = 2 cos theta
/// (Gauss-Kronrod nodes never touch the band edges).  The two agree when
/// H_r has no eigenvalues.
inline std::pair<double, double> fibre_normalization(const RiggedModel& model, double r, const CVector& phi,
                                                     double quad_tol = 1e-12) {
    const LatticeBackend& lb = model.lattice();
    if (phi.size() != model.k()) throw ShapeError("fibre_normalization: phi has the wrong length");
    auto density = [&](double theta) {
        const double lam = 2.0 * std::cos(theta);
        const PointResolvent pr(model, SpectralPoint{lam, 0.0, Side::plus});
        const Complex q = phi.dot(pr.imT(r).matrix() * phi);
        return q.real() / kPi * 2.0 * std::sin(theta);
    };
    QuadOptions opt;
    opt.abs_tol = quad_tol;
    const double lhs = integrate_adaptive(density, 0.0, kPi, {}, {}, opt).value;
    double rhs = 0.0;
    for (Index i = 0; i < phi.size(); ++i) rhs += lb.weights[static_cast<std::size_t>(i)] * std::norm(phi(i));
    return {lhs, rhs};
}

}  // namespace ssfkit
