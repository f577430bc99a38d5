#pragma once
// Independent reference computations used by tests and verify suites:
// truncated-lattice checks of the Green function and eigenvalue sweeps.

#include "ssfkit/resolvent.hpp"

#include <algorithm>

namespace ssfkit {

/// Max residual of the three-term recurrence (H - z) G(., 0) = delta_0 over
/// the interior rows of an N-site truncation centred at 0.  Rows at the
/// truncation boundary involve sites outside the window and are skipped.
inline double truncated_lattice_residual(const SpectralPoint& at, long sites = 400) {
    const long lo = -sites / 2, hi = lo + sites - 1;
    const Complex z = at.z();
    double worst = 0.0;
    for (long n = lo + 1; n < hi; ++n) {
        const Complex lhs = green_free_lattice(at, n + 1, 0) + green_free_lattice(at, n - 1, 0) -
                            z * green_free_lattice(at, n, 0);
        worst = std::max(worst, std::abs(lhs - (n == 0 ? 1.0 : 0.0)));
    }
    return worst;
}

/// Solve the truncated Dirichlet problem (H_N - z) g = delta_0 by the Thomas
/// algorithm and return g on sites |n| <= reach.  Requires z off [-2,2].
inline std::vector<Complex> truncated_lattice_column(Complex z, long sites = 400, long reach = 20) {
    const long lo = -sites / 2;
    const auto n = static_cast<std::size_t>(sites);
    // Tridiagonal: off-diagonals 1, diagonal -z.
    std::vector<Complex> c(n), d(n), x(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = (lo + static_cast<long>(i) == 0) ? 1.0 : 0.0;
    Complex denom = -z;
    c[0] = 1.0 / denom;
    d[0] = d[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = -z - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (d[i] - d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    std::vector<Complex> out;
    for (long m = -reach; m <= reach; ++m) out.push_back(x[static_cast<std::size_t>(m - lo)]);
    return out;
}

/// Net number of eigenvalues of H_r (finite backend) that cross lambda
/// upward as r runs from r_lo to r_hi: N_{H_lo}(lambda) - N_{H_hi}(lambda).
inline int eigenvalue_crossings(const RiggedModel& model, double lambda, double r_lo, double r_hi) {
    auto count_below = [&](double r) {
        const RVector ev = eig_hermitian(model.H(r)).eigenvalues;
        return static_cast<int>((ev.array() <= lambda).count());
    };
    return count_below(r_lo) - count_below(r_hi);
}

/// Dense truncation of the lattice operator H_r to `sites` sites centred
/// at 0 (Dirichlet ends), including the background coupling.
inline HermMatrix lattice_truncation(const RiggedModel& model, double r, long sites = 400) {
    const LatticeBackend& lb = model.lattice();
    const long lo = -sites / 2;
    const Index n = static_cast<Index>(sites);
    CMatrix h = CMatrix::Zero(n, n);
    for (Index i = 0; i + 1 < n; ++i) h(i, i + 1) = h(i + 1, i) = 1.0;
    const CMatrix J = lb.J_bg.matrix() + model.path().J(r);
    const Index k = static_cast<Index>(lb.window.size());
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) {
            const Index ia = lb.window[static_cast<std::size_t>(a)] - lo;
            const Index ib = lb.window[static_cast<std::size_t>(b)] - lo;
            h(ia, ib) += std::sqrt(lb.weights[static_cast<std::size_t>(a)] * lb.weights[static_cast<std::size_t>(b)]) *
                         J(a, b);
        }
    return HermMatrix(h);
}

/// Lattice analogue of eigenvalue_crossings for lambda outside [-2,2],
/// computed on a large truncation where bound states are exponentially
/// accurate.
inline int lattice_eigenvalue_crossings(const RiggedModel& model, double lambda, double r_lo, double r_hi,
                                        long sites = 400) {
    auto count_below = [&](double r) {
        const RVector ev = eig_hermitian(lattice_truncation(model, r, sites)).eigenvalues;
        return static_cast<int>((ev.array() <= lambda).count());
    };
    return count_below(r_lo) - count_below(r_hi);
}

/// Weak form of H_r E_lambda = lambda E_lambda on the lattice.  With
/// g(m, n) = Im G_{lambda+i0}(H_r)(m, n), the identity (G H_r)(m, n) =
/// delta + z G(m, n) gives, for window sites n and any site m,
///   g(m, n-1) + g(m, n+1) + sum_p g(m, p) V(p, n) = lambda g(m, n).
/// g is read off a frozen model on the window enlarged by its neighbours.
/// Returns the largest residual over m, n.
inline double lattice_diagonalization_residual(const RiggedModel& model, double r, double lambda) {
    const LatticeBackend& lb = model.lattice();
    std::vector<long> sites = lb.window;
    for (long m : lb.window)
        for (long nb : {m - 1, m + 1})
            if (std::find(sites.begin(), sites.end(), nb) == sites.end()) sites.push_back(nb);
    const Index k = static_cast<Index>(lb.window.size());
    const Index K = static_cast<Index>(sites.size());
    // V on the window in site coordinates.
    const CMatrix J = lb.J_bg.matrix() + model.path().J(r);
    CMatrix Jbig = CMatrix::Zero(K, K);
    std::vector<double> w(static_cast<std::size_t>(K), 1.0);
    for (Index a = 0; a < k; ++a) {
        w[static_cast<std::size_t>(a)] = lb.weights[static_cast<std::size_t>(a)];
        for (Index b = 0; b < k; ++b) Jbig(a, b) = J(a, b);
    }
    const RiggedModel frozen =
        build_lattice(sites, w, HermMatrix(Jbig), CouplingPath::straight(HermMatrix::zero(K)));
    const CMatrix imT = imaginary_part(T_base_matrix(frozen, SpectralPoint{lambda, 0.0, Side::plus})).matrix();
    auto index_of = [&](long site) {
        return static_cast<Index>(std::find(sites.begin(), sites.end(), site) - sites.begin());
    };
    auto g = [&](Index a, Index b) {
        return imT(a, b) / std::sqrt(w[static_cast<std::size_t>(a)] * w[static_cast<std::size_t>(b)]);
    };
    double worst = 0.0;
    for (Index a = 0; a < K; ++a)
        for (Index n = 0; n < k; ++n) {
            const long site = sites[static_cast<std::size_t>(n)];
            Complex lhs = g(a, index_of(site - 1)) + g(a, index_of(site + 1));
            for (Index p = 0; p < k; ++p)
                lhs += g(a, p) * std::sqrt(w[static_cast<std::size_t>(p)] * w[static_cast<std::size_t>(n)]) * J(p, n);
            worst = std::max(worst, std::abs(lhs - lambda * g(a, n)));
        }
    return worst;
}

}  // namespace ssfkit
