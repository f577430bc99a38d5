#pragma once
// Sandwiched resolvent T_z(H_r) = F (H_r - z)^{-1} F*, boundary values at
// z = lambda +- i0, regularity tests, and resonance sets.

#include "ssfkit/models.hpp"

#include <optional>
#include <sstream>

namespace ssfkit {

enum class Side { plus, minus };

/// z = lambda + i y (side plus) or lambda - i y (side minus).  y = 0 means
/// the boundary value from the chosen half-plane.
struct SpectralPoint {
    double lambda = 0.0;
    double y = 0.0;
    Side side = Side::plus;

    Complex z() const { return {lambda, side == Side::plus ? y : -y}; }
    SpectralPoint conjugate() const { return {lambda, y, side == Side::plus ? Side::minus : Side::plus}; }
    bool on_axis() const { return y == 0.0; }
};

class BoundaryValueUndefined : public Error {
public:
    using Error::Error;
};

class BranchPointError : public BoundaryValueUndefined {
public:
    using BoundaryValueUndefined::BoundaryValueUndefined;
};

class ResonanceHit : public Error {
public:
    explicit ResonanceHit(Complex r)
        : Error(describe(r)), r_(r) {}
    Complex r() const noexcept { return r_; }

private:
    static std::string describe(Complex r) {
        std::ostringstream os;
        os.precision(17);
        os << "resonance hit: 1 + T J_r is not invertible at r = " << r.real();
        if (r.imag() != 0.0) os << (r.imag() > 0 ? "+" : "") << r.imag() << "i";
        return os.str();
    }
    Complex r_;
};

struct NumericsConfig {
    double rank_tol = 1e-10;
    double quad_tol = 1e-12;
    double res_real_tol = 1e-8;
    double group_tol = 1e-3;
    double delta = 1e-4;
    double wave_tol = 1e-8;
    double ode_tol = 1e-10;
    double mu_guard = 1e-6;
    double y_min = 1e-6;
    // Pointwise SSF extrapolation grid.
    double ygrid_y0 = 1.0;
    double ygrid_ratio = 0.5;
    int ygrid_count = 24;
    int richardson_order = 2;
};

// ---------------------------------------------------------------- free lattice

/// Root of zeta^2 - z zeta + 1 = 0 with |zeta| < 1, continued to the
/// boundary: zeta = exp(-+i theta), lambda = 2 cos theta.
inline Complex lattice_zeta(const SpectralPoint& at) {
    const double lam = at.lambda;
    if (at.on_axis()) {
        if (lam == 2.0 || lam == -2.0) throw BranchPointError("lattice Green function: band edge is a branch point");
        if (std::abs(lam) < 2.0) {
            const double theta = std::acos(lam / 2.0);
            return std::polar(1.0, at.side == Side::plus ? -theta : theta);
        }
        // Real z outside the band: the real root inside the unit disk.
        const double disc = std::sqrt(lam * lam - 4.0);
        return lam > 0 ? (lam - disc) / 2.0 : (lam + disc) / 2.0;
    }
    const Complex z = at.z();
    const Complex s = std::sqrt(z * z - 4.0);
    Complex zeta = (z - s) / 2.0;
    if (std::abs(zeta) > 1.0) zeta = (z + s) / 2.0;
    // Recompute the small root from the product zeta1 * zeta2 = 1 to avoid
    // cancellation when |z| is large.
    const Complex big = 1.0 / zeta;
    if (std::abs(big) > 1.0) zeta = 1.0 / big;
    return zeta;
}

inline Complex green_free_lattice(const SpectralPoint& at, long m, long n) {
    const Complex zeta = lattice_zeta(at);
    const long d = m > n ? m - n : n - m;
    return std::pow(zeta, static_cast<int>(d)) / (zeta - 1.0 / zeta);
}

/// Off-axis or real-outside-band argument.
inline Complex green_free_lattice(Complex z, long m, long n) {
    if (z.imag() == 0.0) return green_free_lattice(SpectralPoint{z.real(), 0.0, Side::plus}, m, n);
    return green_free_lattice(SpectralPoint{z.real(), std::abs(z.imag()), z.imag() > 0 ? Side::plus : Side::minus},
                              m, n);
}

// ---------------------------------------------------------------- sandwiched resolvent

struct SandwichedResolvent {
    SpectralPoint at;
    double r = 0.0;
    CMatrix T;
    HermMatrix imT;
};

inline HermMatrix imaginary_part(const CMatrix& t) { return HermMatrix((t - t.adjoint()) / (2.0 * kI)); }

namespace detail {

inline CMatrix lattice_free_T(const LatticeBackend& lb, const SpectralPoint& at) {
    const Index k = static_cast<Index>(lb.window.size());
    CMatrix t(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j)
            t(i, j) = std::sqrt(lb.weights[static_cast<std::size_t>(i)] * lb.weights[static_cast<std::size_t>(j)]) *
                      green_free_lattice(at, lb.window[static_cast<std::size_t>(i)],
                                         lb.window[static_cast<std::size_t>(j)]);
    return t;
}

/// (1 + T0 J)^{-1} T0, or nullopt if the factor is numerically singular.
inline std::optional<CMatrix> fold(const CMatrix& T0, const CMatrix& J) {
    const Index k = T0.rows();
    const CMatrix factor = CMatrix::Identity(k, k) + T0 * J;
    Eigen::PartialPivLU<CMatrix> lu(factor);
    if (!(lu.rcond() > 1e-12)) return std::nullopt;
    return lu.solve(T0);
}

}  // namespace detail

inline CMatrix T_base_matrix(const RiggedModel& model, const SpectralPoint& at) {
    if (at.y < 0.0 || !std::isfinite(at.y) || !std::isfinite(at.lambda))
        throw BoundaryValueUndefined("spectral point must have finite lambda and y >= 0");
    if (model.is_finite()) {
        const FiniteBackend& fb = model.finite();
        const Complex z = at.z();
        const double scale = 1.0 + fb.h0_eigenvalues.cwiseAbs().maxCoeff();
        CVector inv(fb.h0_eigenvalues.size());
        for (Index i = 0; i < inv.size(); ++i) {
            const Complex d = fb.h0_eigenvalues(i) - z;
            if (std::abs(d) <= 1e-12 * scale)
                throw BoundaryValueUndefined("lambda is an eigenvalue of the base operator");
            inv(i) = 1.0 / d;
        }
        CMatrix t = fb.FU * inv.asDiagonal() * fb.FU.adjoint();
        if (at.on_axis()) t = (0.5 * (t + t.adjoint())).eval();  // exactly Hermitian, Im T = 0
        return t;
    }
    const LatticeBackend& lb = model.lattice();
    const CMatrix free = detail::lattice_free_T(lb, at);
    if (max_abs(lb.J_bg.matrix()) == 0.0) return free;
    auto folded = detail::fold(free, lb.J_bg.matrix());
    if (!folded) throw BoundaryValueUndefined("lambda is not regular for the base operator (background coupling)");
    // Outside the band T is Hermitian; drop the roundoff in its imaginary part.
    if (at.on_axis() && std::abs(at.lambda) > 2.0) return CMatrix(0.5 * (*folded + folded->adjoint()));
    return *folded;
}

inline SandwichedResolvent T_base(const RiggedModel& model, const SpectralPoint& at) {
    CMatrix t = T_base_matrix(model, at);
    HermMatrix im = imaginary_part(t);
    return {at, 0.0, std::move(t), std::move(im)};
}

/// Cached evaluator of r -> T_z(H_r) at a fixed spectral point.
class PointResolvent {
public:
    PointResolvent(const RiggedModel& model, const SpectralPoint& at)
        : model_(&model), at_(at), T0_(T_base_matrix(model, at)), T0adj_(T0_.adjoint()) {}

    const SpectralPoint& at() const noexcept { return at_; }
    const CMatrix& T0() const noexcept { return T0_; }
    const RiggedModel& model() const noexcept { return *model_; }

    /// T_z(H_r); complex r gives the meromorphic continuation.
    CMatrix T(Complex r) const {
        auto t = detail::fold(T0_, model_->path().J(r));
        if (!t) throw ResonanceHit(r);
        return *t;
    }

    /// T_{conj z}(H_r), continued in r.
    CMatrix T_conj(Complex r) const {
        auto t = detail::fold(T0adj_, model_->path().J(r));
        if (!t) throw ResonanceHit(r);
        return *t;
    }

    /// Im T via the product identity
    /// (1 + T0* J)^{-1} Im T0 (1 + J T0)^{-1}.
    HermMatrix imT(double r) const {
        const CMatrix J = model_->path().J(r);
        const Index k = T0_.rows();
        const CMatrix I = CMatrix::Identity(k, k);
        const CMatrix R = I + J * T0_;
        Eigen::PartialPivLU<CMatrix> left(I + T0adj_ * J);
        Eigen::PartialPivLU<CMatrix> right_adj(R.adjoint());
        if (!(left.rcond() > 1e-12) || !(right_adj.rcond() > 1e-12)) throw ResonanceHit(r);
        const CMatrix imT0 = (T0_ - T0adj_) / (2.0 * kI);
        const CMatrix a = left.solve(imT0);
        // a R^{-1} = (R^{-*} a*)*
        return HermMatrix(right_adj.solve(a.adjoint()).adjoint());
    }

    /// (T_z(H_r) - T_{conj z}(H_r)) / 2i, analytic in r; equals Im T for real r.
    CMatrix imT_continued(Complex r) const { return (T(r) - T_conj(r)) / (2.0 * kI); }

private:
    const RiggedModel* model_;
    SpectralPoint at_;
    CMatrix T0_;
    CMatrix T0adj_;
};

inline SandwichedResolvent T_at(const RiggedModel& model, double r, const SpectralPoint& at) {
    PointResolvent pr(model, at);
    CMatrix t = pr.T(r);
    HermMatrix im = imaginary_part(t);
    return {at, r, std::move(t), std::move(im)};
}

inline CMatrix T_continued(const RiggedModel& model, Complex r, const SpectralPoint& at) {
    return PointResolvent(model, at).T(r);
}

inline HermMatrix imT_at(const RiggedModel& model, double r, const SpectralPoint& at) {
    return PointResolvent(model, at).imT(r);
}

inline bool is_regular(const RiggedModel& model, double r, double lambda, Side side = Side::plus) {
    try {
        (void)T_at(model, r, SpectralPoint{lambda, 0.0, side});
        return true;
    } catch (const BoundaryValueUndefined&) {
        return false;
    } catch (const ResonanceHit&) {
        return false;
    }
}

// ---------------------------------------------------------------- poles in r

/// Poles of the polynomial continuation of segment `s` over the whole
/// complex plane (not restricted to the segment's r-range).
inline std::vector<Complex> segment_poles(const PointResolvent& pr, std::size_t s) {
    const CouplingPath& path = pr.model().path();
    const CMatrix& T0 = pr.T0();
    const Index k = T0.rows();
    const CMatrix I = CMatrix::Identity(k, k);
    std::vector<Complex> poles;
    {
        const auto [begin, end] = path.segment_range(s);
        const std::vector<CMatrix>& C = path.segment_coefficients(s);
        int d = static_cast<int>(C.size()) - 1;
        while (d > 0 && max_abs(C[static_cast<std::size_t>(d)]) == 0.0) --d;
        if (d == 0) return poles;
        // Expansion point t0 in the segment where 1 + T0 J is well conditioned.
        const double len = end - begin;
        double t0 = 0.0;
        Eigen::PartialPivLU<CMatrix> A0;
        double best = -1.0;
        for (double frac : {0.0, 0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875}) {
            const double t = frac * len;
            CMatrix Jt = CMatrix::Zero(k, k);
            for (int p = d; p >= 0; --p) Jt = (Jt * t + C[static_cast<std::size_t>(p)]).eval();
            Eigen::PartialPivLU<CMatrix> lu(I + T0 * Jt);
            const double rc = lu.rcond();
            if (rc > best) {
                best = rc;
                t0 = t;
                A0 = lu;
            }
            if (rc > 1e-3) break;
        }
        // Taylor coefficients about t0: D_q = sum_{p>=q} binom(p,q) t0^{p-q} C_p.
        std::vector<CMatrix> B(static_cast<std::size_t>(d) + 1);
        for (int q = 1; q <= d; ++q) {
            CMatrix Dq = CMatrix::Zero(k, k);
            for (int p = q; p <= d; ++p) {
                double binom = 1.0;
                for (int i = 0; i < q; ++i) binom = binom * (p - i) / (i + 1);
                Dq += binom * std::pow(t0, p - q) * C[static_cast<std::size_t>(p)];
            }
            B[static_cast<std::size_t>(q)] = A0.solve(T0 * Dq);
        }
        // mu^d + mu^{d-1} B_1 + ... + B_d with mu = 1/u, u = r - (begin + t0).
        const Index n = k * d;
        CMatrix comp = CMatrix::Zero(n, n);
        for (int q = 1; q <= d; ++q) comp.block(0, (q - 1) * k, k, k) = -B[static_cast<std::size_t>(q)];
        for (int q = 1; q < d; ++q) comp.block(q * k, (q - 1) * k, k, k) = I;
        const CVector mus = eig_general(comp).eigenvalues;
        const double tiny = 1e-14 * std::max(1.0, max_abs(comp));
        for (Index i = 0; i < mus.size(); ++i)
            if (std::abs(mus(i)) > tiny) poles.push_back(begin + t0 + 1.0 / mus(i));
    }
    std::sort(poles.begin(), poles.end(), complex_less);
    return poles;
}

/// All finite poles r of r -> T_z(H_r) (the zeros of det(1 + T0 J_r)).
/// Each polynomial segment is handled by a block-companion linearization of
/// the matrix polynomial; for piecewise paths only poles whose real part
/// lies in the segment are kept.
inline std::vector<Complex> coupling_poles(const PointResolvent& pr) {
    const CouplingPath& path = pr.model().path();
    std::vector<Complex> poles;
    for (std::size_t s = 0; s < path.segment_count(); ++s) {
        const auto [begin, end] = path.segment_range(s);
        const bool last = s + 1 == path.segment_count();
        for (const Complex& r : segment_poles(pr, s))
            if (path.segment_count() == 1 || (r.real() >= begin && (r.real() < end || last))) poles.push_back(r);
    }
    std::sort(poles.begin(), poles.end(), complex_less);
    return poles;
}

inline std::vector<Complex> coupling_poles(const RiggedModel& model, const SpectralPoint& at) {
    return coupling_poles(PointResolvent(model, at));
}

// ---------------------------------------------------------------- resonance sets

struct RegularityInfo {
    double lambda = 0.0;
    bool regular_base = false;
    std::vector<double> resonance_r_values;  // sorted, distinct
    std::vector<int> multiplicities;
    int p_class = 1;
};

inline RegularityInfo resonance_set(const RiggedModel& model, double lambda, double r_lo, double r_hi,
                                    Side side = Side::plus, double res_real_tol = 1e-8) {
    RegularityInfo info;
    info.lambda = lambda;
    PointResolvent pr(model, SpectralPoint{lambda, 0.0, side});  // throws if the base is not regular
    info.regular_base = true;
    std::vector<double> real;
    for (const Complex& r : coupling_poles(pr))
        if (std::abs(r.imag()) <= res_real_tol && r.real() >= r_lo && r.real() <= r_hi) real.push_back(r.real());
    std::sort(real.begin(), real.end());
    for (double r : real) {
        if (!info.resonance_r_values.empty() && r - info.resonance_r_values.back() <= 1e-9) {
            ++info.multiplicities.back();
            continue;
        }
        info.resonance_r_values.push_back(r);
        info.multiplicities.push_back(1);
    }
    return info;
}

}  // namespace ssfkit
