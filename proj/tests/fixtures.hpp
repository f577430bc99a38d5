#pragma once
// Small models shared by the unit tests.

#include "ssfkit/models.hpp"
#include "ssfkit/random.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace fixtures {

using namespace ssfkit;

inline HermMatrix scalar(double v) { return HermMatrix(CMatrix::Constant(1, 1, v)); }

/// Lattice window {0}, unit weight, J_r = r v.
inline RiggedModel rank_one(double v) {
    return build_lattice({0}, {1.0}, HermMatrix::zero(1), CouplingPath::straight(scalar(v)));
}

/// H0 = 0, F = 1, J_r = r on C^1.
inline RiggedModel scalar_finite() {
    return build_finite(scalar(0.0), CMatrix::Identity(1, 1), CouplingPath::straight(scalar(1.0)));
}

/// diag(0,2) -> diag(1,2).
inline RiggedModel diag_pair() {
    return build_finite(HermMatrix::diagonal({0.0, 2.0}), CMatrix::Identity(2, 2),
                        CouplingPath::straight(HermMatrix::diagonal({1.0, 0.0})));
}

inline RiggedModel seeded_lattice(std::uint64_t seed, double bg = 0.3) {
    Rng rng(seed);
    return build_lattice({-1, 0, 2}, {0.8, 1.1, 0.6}, rng.hermitian(3, bg), CouplingPath::straight(rng.hermitian(3, 1.5)));
}

inline RiggedModel seeded_finite(std::uint64_t seed, Index n = 6, Index k = 6) {
    Rng rng(seed);
    CMatrix F = rng.matrix(k, n);
    for (Index i = 0; i < std::min(n, k); ++i) F(i, i) += 2.0;
    return build_finite(rng.hermitian(n), F, CouplingPath::straight(rng.hermitian(k, 0.4)));
}

/// Window {-1,0,1} with J_r = 2 r W, where (H_0 + W) delta_0 = lambda0 delta_0.
/// H_{1/2} therefore has the embedded eigenvalue lambda0 with eigenvector
/// delta_0, i.e. a real in-band resonance at r = 1/2.
inline RiggedModel embedded_eigenvalue(double lambda0) {
    CMatrix W = CMatrix::Zero(3, 3);
    W(0, 1) = W(1, 0) = W(1, 2) = W(2, 1) = -1.0;
    W(1, 1) = lambda0;
    return build_lattice({-1, 0, 1}, {1.0, 1.0, 1.0}, HermMatrix::zero(3), CouplingPath::straight(HermMatrix(2.0 * W)));
}

/// Independent real quadrature (Boost adaptive Gauss-Kronrod).
template <class F>
double gk(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
}

}  // namespace fixtures
