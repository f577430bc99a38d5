#pragma once
// Rigged operator families H_r = H_base + F* J_r F in three backends.

#include "ssfkit/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <utility>
#include <variant>
#include <vector>

namespace ssfkit {

class InvalidRigging : public Error {
public:
    using Error::Error;
};
class InvalidWindow : public Error {
public:
    using Error::Error;
};
class ParameterError : public Error {
public:
    using Error::Error;
};
class UnsupportedBackend : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------- coupling path

/// Piecewise polynomial path r -> J_r on [0,1] with J_0 = 0.  Each segment
/// stores Taylor coefficients about its left breakpoint, so that
/// J_r = sum_p (r - begin)^p C_p on that segment.
class CouplingPath {
public:
    static constexpr int kMaxDegree = 4;

    /// J_r = sum_{p>=1} r^p coefficients[p-1].
    static CouplingPath polynomial(const std::vector<HermMatrix>& coefficients) {
        if (coefficients.empty()) throw ShapeError("CouplingPath: need at least one coefficient");
        if (static_cast<int>(coefficients.size()) > kMaxDegree)
            throw ShapeError("CouplingPath: degree exceeds 4");
        const Index k = coefficients.front().size();
        Segment s{0.0, 1.0, {CMatrix::Zero(k, k)}};
        for (const HermMatrix& c : coefficients) {
            if (c.size() != k) throw ShapeError("CouplingPath: coefficient sizes differ");
            s.coeffs.push_back(c.matrix());
        }
        CouplingPath p;
        p.k_ = k;
        p.segments_.push_back(std::move(s));
        return p;
    }

    static CouplingPath straight(const HermMatrix& direction) { return polynomial({direction}); }

    /// Piecewise linear path through vertices J(t_0)=0, J(t_1), ..., J(t_m)
    /// with t_0 = 0 < t_1 < ... < t_m = 1.
    static CouplingPath polyline(const std::vector<HermMatrix>& vertices, const std::vector<double>& knots) {
        if (vertices.size() < 2 || vertices.size() != knots.size())
            throw ShapeError("CouplingPath::polyline: need matching vertices and knots (at least 2)");
        if (knots.front() != 0.0 || knots.back() != 1.0)
            throw ShapeError("CouplingPath::polyline: knots must run from 0 to 1");
        if (max_abs(vertices.front().matrix()) != 0.0)
            throw ShapeError("CouplingPath::polyline: first vertex must be 0");
        CouplingPath p;
        p.k_ = vertices.front().size();
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
            if (!(knots[i + 1] > knots[i])) throw ShapeError("CouplingPath::polyline: knots must increase");
            if (vertices[i + 1].size() != p.k_) throw ShapeError("CouplingPath::polyline: vertex sizes differ");
            const CMatrix slope = (vertices[i + 1].matrix() - vertices[i].matrix()) / (knots[i + 1] - knots[i]);
            p.segments_.push_back(Segment{knots[i], knots[i + 1], {vertices[i].matrix(), slope}});
        }
        return p;
    }

    Index dim() const noexcept { return k_; }

    int degree() const {
        int d = 0;
        for (const Segment& s : segments_) d = std::max(d, static_cast<int>(s.coeffs.size()) - 1);
        return d;
    }

    bool is_straight() const noexcept { return segments_.size() == 1 && segments_.front().coeffs.size() == 2; }

    /// Direction of a straight path (J_r = r * direction).
    const CMatrix& direction() const {
        if (!is_straight()) throw UnsupportedBackend("CouplingPath: path is not straight");
        return segments_.front().coeffs[1];
    }

    /// Interior breakpoints (empty for a single polynomial piece).
    std::vector<double> breakpoints() const {
        std::vector<double> b;
        for (std::size_t i = 1; i < segments_.size(); ++i) b.push_back(segments_[i].begin);
        return b;
    }

    std::size_t segment_count() const noexcept { return segments_.size(); }
    std::pair<double, double> segment_range(std::size_t s) const { return {segments_[s].begin, segments_[s].end}; }

    /// Taylor coefficients of segment s about its left breakpoint.
    const std::vector<CMatrix>& segment_coefficients(std::size_t s) const { return segments_[s].coeffs; }

    /// J at (possibly complex) r; the segment is chosen by Re r.
    CMatrix J(Complex r) const {
        const Segment& s = segment_for(r.real());
        return horner(s, r - s.begin, 0);
    }
    CMatrix J(double r) const { return J(Complex(r, 0.0)); }

    CMatrix Jdot(Complex r) const {
        const Segment& s = segment_for(r.real());
        return horner(s, r - s.begin, 1);
    }
    CMatrix Jdot(double r) const { return Jdot(Complex(r, 0.0)); }

private:
    struct Segment {
        double begin, end;
        std::vector<CMatrix> coeffs;
    };

    const Segment& segment_for(double r) const {
        for (const Segment& s : segments_)
            if (r < s.end) return s;
        return segments_.back();
    }

    // derivative_order 0 -> value, 1 -> first derivative.
    CMatrix horner(const Segment& s, Complex t, int derivative_order) const {
        CMatrix acc = CMatrix::Zero(k_, k_);
        const int top = static_cast<int>(s.coeffs.size()) - 1;
        for (int p = top; p >= derivative_order; --p) {
            const double factor = derivative_order == 1 ? static_cast<double>(p) : 1.0;
            acc = (acc * t).eval();
            acc += factor * s.coeffs[static_cast<std::size_t>(p)];
        }
        return acc;
    }

    Index k_ = 0;
    std::vector<Segment> segments_;
};

// ---------------------------------------------------------------- test functions

/// A function with compact support [lo, hi] (zero outside).
struct CompactFunction {
    double lo = 0.0;
    double hi = 0.0;
    std::function<double(double)> eval;
    double operator()(double x) const { return (x < lo || x > hi) ? 0.0 : eval(x); }
};

/// Smooth bump amplitude * exp(1 - 1/(1 - t^2)), t the affine image of
/// x in [a,b] onto [-1,1].  Peak value `amplitude` at the centre.
class TestFunction {
public:
    TestFunction(double a, double b, double amplitude = 1.0) : a_(a), b_(b), amp_(amplitude) {
        if (!(b > a)) throw ParameterError("TestFunction: support must satisfy a < b");
    }

    std::pair<double, double> support() const noexcept { return {a_, b_}; }
    double amplitude() const noexcept { return amp_; }

    double value(double x) const {
        const double t = local(x);
        if (!(std::abs(t) < 1.0)) return 0.0;
        return amp_ * std::exp(1.0 - 1.0 / (1.0 - t * t));
    }

    double derivative(double x) const {
        const double t = local(x);
        if (!(std::abs(t) < 1.0)) return 0.0;
        const double q = 1.0 - t * t;
        return value(x) * (-2.0 * t / (q * q)) * (2.0 / (b_ - a_));
    }

    double operator()(double x) const { return value(x); }

    CompactFunction as_compact() const {
        TestFunction self = *this;
        return {a_, b_, [self](double x) { return self.value(x); }};
    }
    CompactFunction derivative_compact() const {
        TestFunction self = *this;
        return {a_, b_, [self](double x) { return self.derivative(x); }};
    }

private:
    double local(double x) const { return (2.0 * x - a_ - b_) / (b_ - a_); }
    double a_, b_, amp_;
};

inline double eval_test_function(const TestFunction& phi, double x) { return phi.value(x); }
inline double eval_test_function_derivative(const TestFunction& phi, double x) { return phi.derivative(x); }

// ---------------------------------------------------------------- backends

struct FiniteBackend {
    HermMatrix H0;
    CMatrix F;
    // Cached spectral data of H0: H0 = U diag(e) U*, FU = F U.
    RVector h0_eigenvalues;
    CMatrix FU;
};

struct LatticeBackend {
    std::vector<long> window;
    std::vector<double> weights;
    HermMatrix J_bg;
};

struct SchrodingerDescriptor {
    std::vector<double> V0;
    std::vector<double> V;
    double h = 0.0;
    double x_min = 0.0;
    double epsilon = 0.0;
};

class RiggedModel {
public:
    enum class Kind { finite, lattice };

    Kind kind() const noexcept { return std::holds_alternative<FiniteBackend>(backend_) ? Kind::finite : Kind::lattice; }
    bool is_finite() const noexcept { return kind() == Kind::finite; }
    bool is_lattice() const noexcept { return kind() == Kind::lattice; }

    Index k() const noexcept { return path_.dim(); }
    const CouplingPath& path() const noexcept { return path_; }

    /// Essential spectrum: empty for finite models, [-2,2] for the lattice.
    std::optional<std::pair<double, double>> essential_spectrum() const {
        if (is_lattice()) return std::make_pair(-2.0, 2.0);
        return std::nullopt;
    }

    const FiniteBackend& finite() const {
        if (!is_finite()) throw UnsupportedBackend("operation requires the finite backend");
        return std::get<FiniteBackend>(backend_);
    }
    const LatticeBackend& lattice() const {
        if (!is_lattice()) throw UnsupportedBackend("operation requires the lattice backend");
        return std::get<LatticeBackend>(backend_);
    }
    const std::optional<SchrodingerDescriptor>& schrodinger() const noexcept { return schrod_; }

    /// Finite backend: V_r = F* J_r F.
    HermMatrix V(double r) const {
        const FiniteBackend& f = finite();
        return HermMatrix(f.F.adjoint() * path_.J(r) * f.F);
    }
    /// Finite backend: derivative of V_r in r.
    HermMatrix Vdot(double r) const {
        const FiniteBackend& f = finite();
        return HermMatrix(f.F.adjoint() * path_.Jdot(r) * f.F);
    }
    /// Finite backend: H_r = H0 + V_r.
    HermMatrix H(double r) const { return HermMatrix(finite().H0.matrix() + V(r).matrix()); }

    /// Same backend with a different coupling path.
    RiggedModel with_path(CouplingPath path) const {
        if (path.dim() != k()) throw ShapeError("with_path: dimension mismatch");
        RiggedModel m = *this;
        m.path_ = std::move(path);
        return m;
    }

private:
    friend RiggedModel build_finite(const HermMatrix&, const CMatrix&, const CouplingPath&);
    friend RiggedModel build_lattice(const std::vector<long>&, const std::vector<double>&, const HermMatrix&,
                                     const CouplingPath&);
    friend RiggedModel discretize_schrodinger(const SchrodingerDescriptor&);

    std::variant<FiniteBackend, LatticeBackend> backend_;
    CouplingPath path_;
    std::optional<SchrodingerDescriptor> schrod_;
};

inline RiggedModel build_finite(const HermMatrix& H0, const CMatrix& F, const CouplingPath& path) {
    const Index n = H0.size();
    if (F.rows() != n || F.cols() != n) throw ShapeError("build_finite: F must be n x n with n = dim H0");
    if (path.dim() != n) throw ShapeError("build_finite: path dimension must equal n");
    require_finite(F, "build_finite");
    const RVector s = singular_values(F);
    if (!(s(s.size() - 1) > 1e-14 * std::max(1.0, s(0)))) throw InvalidRigging("build_finite: F is singular");
    SpectralDecomposition sd = eig_hermitian(H0);
    RiggedModel m;
    m.backend_ = FiniteBackend{H0, F, sd.eigenvalues, F * sd.eigenvectors};
    m.path_ = path;
    return m;
}

inline RiggedModel build_lattice(const std::vector<long>& window, const std::vector<double>& weights,
                                 const HermMatrix& J_bg, const CouplingPath& path) {
    const Index k = static_cast<Index>(window.size());
    if (k == 0) throw InvalidWindow("build_lattice: empty window");
    if (std::set<long>(window.begin(), window.end()).size() != window.size())
        throw InvalidWindow("build_lattice: duplicate sites in window");
    if (static_cast<Index>(weights.size()) != k) throw ShapeError("build_lattice: weights size mismatch");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw InvalidWindow("build_lattice: weights must be positive");
    if (J_bg.size() != k || path.dim() != k) throw ShapeError("build_lattice: coupling dimension mismatch");
    RiggedModel m;
    m.backend_ = LatticeBackend{window, weights, J_bg};
    m.path_ = path;
    return m;
}

/// 1D finite-difference Schroedinger operator on a Dirichlet box, reduced to
/// the finite backend.  F = sqrt|V| + eps on the kernel sites of V, J = sign V,
/// straight path J_r = r J.
inline RiggedModel discretize_schrodinger(const SchrodingerDescriptor& d) {
    if (!(d.h > 0.0)) throw ParameterError("discretize_schrodinger: grid step must be positive");
    if (!(d.epsilon > 0.0)) throw ParameterError("discretize_schrodinger: regularizer must be positive");
    const std::size_t n = d.V.size();
    if (n == 0 || d.V0.size() != n) throw ShapeError("discretize_schrodinger: V0 and V must have equal nonzero length");
    const double c = 1.0 / (d.h * d.h);
    CMatrix H0 = CMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    CMatrix F = CMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    CMatrix J = CMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Index>(i);
        if (!std::isfinite(d.V0[i]) || !std::isfinite(d.V[i]))
            throw ParameterError("discretize_schrodinger: non-finite sample");
        H0(ii, ii) = 2.0 * c + d.V0[i];
        if (i + 1 < n) {
            H0(ii, ii + 1) = -c;
            H0(ii + 1, ii) = -c;
        }
        const double v = d.V[i];
        F(ii, ii) = v == 0.0 ? d.epsilon : std::sqrt(std::abs(v));
        J(ii, ii) = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    }
    RiggedModel m = build_finite(HermMatrix(H0), F, CouplingPath::straight(HermMatrix(J)));
    m.schrod_ = d;
    return m;
}

}  // namespace ssfkit
