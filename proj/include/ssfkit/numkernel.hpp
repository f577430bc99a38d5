#pragma once
// Dense complex kernels: eigensolvers, PSD roots, range pseudo-inverses,
// spectrum matching.  All auxiliary dimensions are small (k <= 64).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssfkit {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kDefaultRankTol = 1e-10;

// ---------------------------------------------------------------- errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NotPsdError : public Error {
public:
    NotPsdError(double min_eigenvalue)
        : Error("matrix is not positive semidefinite: eigenvalue " + std::to_string(min_eigenvalue)),
          min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

// ---------------------------------------------------------------- norms

inline double max_abs(const CMatrix& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline RVector singular_values(const CMatrix& a) {
    if (a.size() == 0) return RVector();
    Eigen::JacobiSVD<CMatrix> svd(a);
    return svd.singularValues();
}

inline double op_norm(const CMatrix& a) {
    RVector s = singular_values(a);
    return s.size() == 0 ? 0.0 : s(0);
}

inline double trace_norm(const CMatrix& a) {
    RVector s = singular_values(a);
    return s.sum();
}

inline void require_finite(const CMatrix& a, const char* what) {
    if (!a.allFinite()) throw NumericalFailure(std::string(what) + ": non-finite entries", INFINITY);
}

inline void require_square(const CMatrix& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw ShapeError(std::string(what) + ": expected a non-empty square matrix, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

// ---------------------------------------------------------------- HermMatrix

/// Hermitian matrix, symmetrized on construction.  The pre-symmetrization
/// defect is kept so callers can reject inputs that were far from Hermitian.
class HermMatrix {
public:
    HermMatrix() = default;

    explicit HermMatrix(const CMatrix& a) {
        require_square(a, "HermMatrix");
        require_finite(a, "HermMatrix");
        CMatrix adj = a.adjoint();
        residual_ = max_abs(a - adj);
        m_ = 0.5 * (a + adj);
    }

    static HermMatrix zero(Index n) { return HermMatrix(CMatrix::Zero(n, n)); }
    static HermMatrix identity(Index n) { return HermMatrix(CMatrix::Identity(n, n)); }
    static HermMatrix diagonal(const std::vector<double>& d) {
        CMatrix m = CMatrix::Zero(static_cast<Index>(d.size()), static_cast<Index>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<Index>(i), static_cast<Index>(i)) = d[i];
        return HermMatrix(m);
    }

    const CMatrix& matrix() const noexcept { return m_; }
    double hermiticity_residual() const noexcept { return residual_; }
    Index size() const noexcept { return m_.rows(); }

private:
    CMatrix m_;
    double residual_ = 0.0;
};

// ---------------------------------------------------------------- eigensolvers

struct SpectralDecomposition {
    RVector eigenvalues;   // ascending
    CMatrix eigenvectors;  // unitary, columns
};

inline SpectralDecomposition eig_hermitian(const HermMatrix& a) {
    const CMatrix& m = a.matrix();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    if (es.info() != Eigen::Success) throw NumericalFailure("eig_hermitian did not converge", INFINITY);
    SpectralDecomposition out{es.eigenvalues(), es.eigenvectors()};
    const double scale = max_abs(m);
    const double res = max_abs(m * out.eigenvectors - out.eigenvectors * out.eigenvalues.asDiagonal());
    if (res > 1e-10 * std::max(scale, std::numeric_limits<double>::min()) && res > 0.0)
        throw NumericalFailure("eig_hermitian residual too large", res);
    return out;
}

struct GeneralEigen {
    CVector eigenvalues;   // ascending by real part, ties by imaginary part
    CMatrix eigenvectors;  // empty unless requested
};

inline bool complex_less(const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

inline GeneralEigen eig_general(const CMatrix& a, bool with_vectors = false) {
    require_square(a, "eig_general");
    Eigen::ComplexEigenSolver<CMatrix> es(a, with_vectors);
    if (es.info() != Eigen::Success) throw NumericalFailure("eig_general did not converge", INFINITY);
    const CVector& ev = es.eigenvalues();
    std::vector<Index> order(static_cast<std::size_t>(ev.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return complex_less(ev(i), ev(j)); });
    GeneralEigen out;
    out.eigenvalues.resize(ev.size());
    if (with_vectors) out.eigenvectors.resize(a.rows(), a.cols());
    for (Index i = 0; i < ev.size(); ++i) {
        out.eigenvalues(i) = ev(order[static_cast<std::size_t>(i)]);
        if (with_vectors) out.eigenvectors.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }
    const double drift = std::abs(out.eigenvalues.sum() - a.trace());
    if (drift > 1e-8 * (1.0 + op_norm(a)) * static_cast<double>(a.rows()))
        throw NumericalFailure("eig_general trace check failed", drift);
    return out;
}

// ---------------------------------------------------------------- PSD helpers

inline HermMatrix sqrt_psd(const HermMatrix& a, double rank_tol = kDefaultRankTol) {
    SpectralDecomposition sd = eig_hermitian(a);
    const double scale = sd.eigenvalues.cwiseAbs().maxCoeff();
    RVector root(sd.eigenvalues.size());
    for (Index i = 0; i < root.size(); ++i) {
        const double ev = sd.eigenvalues(i);
        if (ev < -rank_tol * scale) throw NotPsdError(ev);
        // Eigenvalues at roundoff level are treated as zero; their square
        // roots would otherwise amplify noise to ~1e-8.
        root(i) = ev > rank_tol * scale ? std::sqrt(ev) : 0.0;
    }
    return HermMatrix(sd.eigenvectors * root.asDiagonal() * sd.eigenvectors.adjoint());
}

struct PseudoInverse {
    CMatrix pinv;
    Index rank = 0;
};

/// Pseudo-inverse of a PSD matrix on the span of eigenvalues above
/// rank_tol times the largest one.
inline PseudoInverse pinv_on_range(const HermMatrix& a, double rank_tol = kDefaultRankTol) {
    SpectralDecomposition sd = eig_hermitian(a);
    const Index n = a.size();
    const double top = sd.eigenvalues.cwiseAbs().maxCoeff();
    PseudoInverse out{CMatrix::Zero(n, n), 0};
    if (top == 0.0) return out;
    for (Index i = 0; i < n; ++i) {
        const double ev = sd.eigenvalues(i);
        if (std::abs(ev) > rank_tol * top) {
            out.pinv += (1.0 / ev) * sd.eigenvectors.col(i) * sd.eigenvectors.col(i).adjoint();
            ++out.rank;
        }
    }
    return out;
}

// ---------------------------------------------------------------- linear algebra

inline Complex determinant(const CMatrix& a) {
    if (a.size() == 0) return Complex(1.0, 0.0);
    require_square(a, "determinant");
    return a.partialPivLu().determinant();
}

/// Reciprocal condition estimate of a square matrix (1-norm).
inline double rcond(const CMatrix& a) {
    require_square(a, "rcond");
    return a.partialPivLu().rcond();
}

// ---------------------------------------------------------------- matching

/// Minimum-cost assignment for a dense square cost matrix (Hungarian method
/// with potentials).  Returns assignment[i] = column matched to row i.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

/// perm[i] is the index in `next` matched to prev[i], minimizing the total
/// distance sum |prev[i] - next[perm[i]]|.
inline std::vector<std::size_t> match_spectra(std::span<const Complex> prev, std::span<const Complex> next) {
    if (prev.size() != next.size()) throw ShapeError("match_spectra: lists differ in length");
    std::vector<std::vector<double>> cost(prev.size(), std::vector<double>(next.size()));
    for (std::size_t i = 0; i < prev.size(); ++i)
        for (std::size_t j = 0; j < next.size(); ++j) cost[i][j] = std::abs(prev[i] - next[j]);
    return min_cost_assignment(cost);
}

inline std::vector<Complex> to_std(const CVector& v) {
    return std::vector<Complex>(v.data(), v.data() + v.size());
}

}  // namespace ssfkit
