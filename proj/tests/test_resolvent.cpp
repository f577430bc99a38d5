#include "ssfkit/oracles.hpp"
#include "ssfkit/random.hpp"
#include "ssfkit/resolvent.hpp"

#include <gtest/gtest.h>

using namespace ssfkit;

namespace {

HermMatrix scalar(double v) { return HermMatrix(CMatrix::Constant(1, 1, v)); }

RiggedModel rank_one(double v) {
    return build_lattice({0}, {1.0}, HermMatrix::zero(1), CouplingPath::straight(scalar(v)));
}

RiggedModel scalar_finite() {
    return build_finite(scalar(0.0), CMatrix::Identity(1, 1), CouplingPath::straight(scalar(1.0)));
}

RiggedModel diag_pair() {
    return build_finite(HermMatrix::diagonal({0.0, 2.0}), CMatrix::Identity(2, 2),
                        CouplingPath::straight(HermMatrix::diagonal({1.0, 0.0})));
}

RiggedModel seeded_lattice(std::uint64_t seed, double bg = 0.3) {
    Rng rng(seed);
    return build_lattice({-1, 0, 2}, {0.8, 1.1, 0.6}, rng.hermitian(3, bg), CouplingPath::straight(rng.hermitian(3, 1.5)));
}

}  // namespace

// ---------------------------------------------------------------- Green function

TEST(GreenFreeLattice, OffAxisValueAndTruncationOracle) {
    const SpectralPoint at{0.0, 1.0, Side::plus};
    const Complex g = green_free_lattice(at, 0, 0);
    EXPECT_NEAR(std::abs(g - kI / std::sqrt(5.0)), 0.0, 1e-15);
    EXPECT_LE(truncated_lattice_residual(at), 1e-10);
    // Direct solve on the 400-site truncation.
    const auto col = truncated_lattice_column(at.z());
    for (long m = -20; m <= 20; ++m) EXPECT_NEAR(std::abs(col[static_cast<std::size_t>(m + 20)] - green_free_lattice(at, m, 0)), 0.0, 1e-12);
}

TEST(GreenFreeLattice, BoundaryValueAtBandCentre) {
    const SpectralPoint at{0.0, 0.0, Side::plus};
    EXPECT_NEAR(std::abs(green_free_lattice(at, 0, 0) - 0.5 * kI), 0.0, 1e-15);
    EXPECT_LE(truncated_lattice_residual(at), 1e-10);
    // Side minus is the complex conjugate.
    EXPECT_NEAR(std::abs(green_free_lattice(at.conjugate(), 0, 3) - std::conj(green_free_lattice(at, 0, 3))), 0.0, 1e-15);
}

TEST(GreenFreeLattice, RealOutsideBand) {
    const SpectralPoint at{2.5, 0.0, Side::plus};
    EXPECT_NEAR(std::abs(green_free_lattice(at, 0, 0) - (-2.0 / 3.0)), 0.0, 1e-15);
    EXPECT_LE(truncated_lattice_residual(at), 1e-10);
    const auto col = truncated_lattice_column(Complex(2.5, 0.0));
    for (long m = -20; m <= 20; ++m) EXPECT_NEAR(std::abs(col[static_cast<std::size_t>(m + 20)] - green_free_lattice(at, m, 0)), 0.0, 1e-12);
}

TEST(GreenFreeLattice, BoundaryValueIsLimitOfOffAxis) {
    for (double lam : {-1.7, -0.4, 0.9, 1.95}) {
        const Complex g0 = green_free_lattice(SpectralPoint{lam, 0.0, Side::plus}, 2, -1);
        const Complex gy = green_free_lattice(SpectralPoint{lam, 1e-9, Side::plus}, 2, -1);
        EXPECT_LE(std::abs(g0 - gy), 1e-6);
        EXPECT_GT(green_free_lattice(SpectralPoint{lam, 0.0, Side::plus}, 0, 0).imag(), 0.0);
    }
}

TEST(GreenFreeLattice, RandomPointsSatisfyRecurrence) {
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const SpectralPoint at{rng.uniform(-3, 3), rng.uniform(0.0, 2.0), i % 2 ? Side::plus : Side::minus};
        EXPECT_LE(truncated_lattice_residual(at), 1e-10);
    }
}

TEST(GreenFreeLattice, BandEdgesAreBranchPoints) {
    EXPECT_THROW(green_free_lattice(SpectralPoint{2.0, 0.0, Side::plus}, 0, 0), BranchPointError);
    EXPECT_THROW(green_free_lattice(SpectralPoint{-2.0, 0.0, Side::minus}, 0, 0), BranchPointError);
}

// ---------------------------------------------------------------- T_base / T_at

TEST(TBase, FiniteScalarOffAxis) {
    SandwichedResolvent t = T_base(scalar_finite(), {0.5, 0.5, Side::plus});
    EXPECT_NEAR(std::abs(t.T(0, 0) - Complex(-1.0, 1.0)), 0.0, 1e-15);
    EXPECT_GT(t.imT.matrix()(0, 0).real(), 0.0);
}

TEST(TBase, LatticeRankOneAtBandCentre) {
    SandwichedResolvent t = T_base(rank_one(2.0), {0.0, 0.0, Side::plus});
    EXPECT_NEAR(std::abs(t.T(0, 0) - 0.5 * kI), 0.0, 1e-15);
}

TEST(TBase, FiniteDiagonalOnAxis) {
    SandwichedResolvent t = T_base(diag_pair(), {1.0, 0.0, Side::plus});
    EXPECT_LE(max_abs(t.T - CMatrix(HermMatrix::diagonal({-1.0, 1.0}).matrix())), 1e-15);
    EXPECT_EQ(max_abs(t.imT.matrix()), 0.0);
}

TEST(TBase, EigenvalueOfFiniteBaseIsRejected) {
    EXPECT_THROW(T_base(diag_pair(), {2.0, 0.0, Side::plus}), BoundaryValueUndefined);
}

TEST(TAt, ZeroCouplingLeavesBaseUnchanged) {
    RiggedModel m = seeded_lattice(1);
    const SpectralPoint at{0.3, 0.0, Side::plus};
    EXPECT_LE(max_abs(T_at(m, 0.0, at).T - T_base(m, at).T), 1e-15);
}

TEST(TAt, LatticeRankOneScalarClosedForm) {
    SandwichedResolvent t = T_at(rank_one(2.0), 1.0, {0.0, 0.0, Side::plus});
    EXPECT_NEAR(std::abs(t.T(0, 0) - Complex(0.25, 0.25)), 0.0, 1e-15);
    EXPECT_NEAR(imT_at(rank_one(2.0), 1.0, {0.0, 0.0, Side::plus}).matrix()(0, 0).real(), 0.25, 1e-15);
    EXPECT_NEAR(imT_at(rank_one(2.0), 0.0, {0.0, 0.0, Side::plus}).matrix()(0, 0).real(), 0.5, 1e-15);
}

TEST(TAt, FiniteScalarClosedForm) {
    const Complex z(0.5, 0.5);
    SandwichedResolvent t = T_at(scalar_finite(), 1.0, {0.5, 0.5, Side::plus});
    EXPECT_NEAR(std::abs(t.T(0, 0) - 1.0 / (1.0 - z)), 0.0, 1e-15);
}

TEST(TAt, ResonanceHitCarriesR) {
    try {
        (void)T_at(rank_one(3.0), 0.5, {2.5, 0.0, Side::plus});
        FAIL() << "expected a resonance hit";
    } catch (const ResonanceHit& e) {
        EXPECT_DOUBLE_EQ(e.r().real(), 0.5);
    }
}

TEST(TAt, AgreesWithDirectFiniteInverse) {
    Rng rng(6);
    HermMatrix H0 = rng.hermitian(5);
    CMatrix F = rng.matrix(5, 5) + 2.0 * CMatrix::Identity(5, 5);
    RiggedModel m = build_finite(H0, F, CouplingPath::polynomial({rng.hermitian(5), rng.hermitian(5, 0.2)}));
    for (int i = 0; i < 5; ++i) {
        const double r = rng.uniform();
        const SpectralPoint at{rng.uniform(-2, 2), rng.uniform(0.1, 1.0), Side::plus};
        const CMatrix R = (m.H(r).matrix() - at.z() * CMatrix::Identity(5, 5)).inverse();
        EXPECT_LE(max_abs(T_at(m, r, at).T - F * R * F.adjoint()), 1e-10);
    }
}

TEST(TAt, LatticeBackgroundAgreesWithTruncationOffAxis) {
    // Off-axis with y = 1 the 400-site truncation is exponentially accurate.
    RiggedModel m = seeded_lattice(12);
    const SpectralPoint at{0.4, 1.0, Side::plus};
    const double r = 0.6;
    const CMatrix H = lattice_truncation(m, r, 400).matrix();
    const CMatrix R = (H - at.z() * CMatrix::Identity(400, 400)).partialPivLu().inverse();
    const LatticeBackend& lb = m.lattice();
    const CMatrix T = T_at(m, r, at).T;
    for (Index a = 0; a < 3; ++a)
        for (Index b = 0; b < 3; ++b) {
            const Complex ref = std::sqrt(lb.weights[a] * lb.weights[b]) * R(lb.window[a] + 200, lb.window[b] + 200);
            EXPECT_NEAR(std::abs(T(a, b) - ref), 0.0, 1e-10);
        }
}

// ---------------------------------------------------------------- Im T identities

TEST(ImT, FiniteBackendOnAxisIsZero) {
    EXPECT_EQ(max_abs(imT_at(diag_pair(), 0.3, {0.5, 0.0, Side::plus}).matrix()), 0.0);
}

TEST(ImT, ProductIdentityMatchesDirectRoute) {
    RiggedModel m = seeded_lattice(9);
    Rng rng(10);
    for (int i = 0; i < 30; ++i) {
        const SpectralPoint at{rng.uniform(-1.9, 1.9), i % 3 == 0 ? 0.0 : rng.uniform(0.0, 1.0), Side::plus};
        const double r = rng.uniform(-1.0, 2.0);
        try {
            const SandwichedResolvent t = T_at(m, r, at);
            const HermMatrix im = imT_at(m, r, at);
            EXPECT_LE(max_abs(im.matrix() - t.imT.matrix()), 1e-10 * std::max(1.0, max_abs(t.T)));
            EXPECT_GE(eig_hermitian(im).eigenvalues.minCoeff(), -1e-10 * std::max(1.0, max_abs(im.matrix())));
        } catch (const ResonanceHit&) {
        }
    }
}

TEST(ImT, ConjugationSymmetryAlongPath) {
    RiggedModel m = seeded_lattice(21);
    for (double r : {0.0, 0.4, 1.0})
        for (double y : {0.0, 0.01, 0.5}) {
            const SpectralPoint at{0.7, y, Side::plus};
            EXPECT_LE(max_abs(T_at(m, r, at.conjugate()).T - T_at(m, r, at).T.adjoint()), 1e-12);
        }
}

TEST(ImT, RankIsConstantBetweenResonances) {
    RiggedModel m = seeded_lattice(5);
    const SpectralPoint at{-0.3, 0.0, Side::plus};
    const RegularityInfo info = resonance_set(m, at.lambda, -3.0, 3.0);
    auto rank = [&](double r) { return pinv_on_range(imT_at(m, r, at)).rank; };
    std::vector<double> edges{-3.0};
    for (double r : info.resonance_r_values) edges.push_back(r);
    edges.push_back(3.0);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double a = edges[i] + 1e-3, b = edges[i + 1] - 1e-3;
        if (b <= a) continue;
        const Index r0 = rank(a);
        for (int j = 1; j <= 10; ++j) EXPECT_EQ(rank(a + (b - a) * j / 10.0), r0);
    }
}

// ---------------------------------------------------------------- regularity

TEST(IsRegular, Examples) {
    EXPECT_FALSE(is_regular(diag_pair(), 0.0, 0.0));
    EXPECT_FALSE(is_regular(rank_one(3.0), 0.5, 2.5));
    EXPECT_TRUE(is_regular(rank_one(3.0), 0.4, 2.5));
    EXPECT_FALSE(is_regular(rank_one(3.0), 0.0, 2.0));
}

TEST(ResonanceSet, RankOneOutsideBand) {
    RegularityInfo info = resonance_set(rank_one(3.0), 2.5, 0.0, 1.0);
    ASSERT_EQ(info.resonance_r_values.size(), 1u);
    EXPECT_NEAR(info.resonance_r_values[0], 0.5, 1e-14);
}

TEST(ResonanceSet, RankOneBandCentreHasNone) {
    for (double v : {0.5, 2.0, 7.0}) EXPECT_TRUE(resonance_set(rank_one(v), 0.0, -100.0, 100.0).resonance_r_values.empty());
}

TEST(ResonanceSet, FiniteEigenvalueCrossing) {
    RegularityInfo info = resonance_set(diag_pair(), 0.5, 0.0, 1.0);
    ASSERT_EQ(info.resonance_r_values.size(), 1u);
    EXPECT_NEAR(info.resonance_r_values[0], 0.5, 1e-14);
}

TEST(ResonanceSet, DualityWithRegularityOnScannedGrid) {
    RiggedModel m = seeded_lattice(3);
    for (double lam : {-1.5, -0.2, 0.8, 2.6}) {
        RegularityInfo info = resonance_set(m, lam, -2.0, 2.0);
        for (double r : info.resonance_r_values) {
            EXPECT_FALSE(is_regular(m, r, lam));
            EXPECT_TRUE(is_regular(m, r + 1e-6, lam));
        }
        for (int i = 0; i <= 400; ++i) {
            const double r = -2.0 + 4.0 * i / 400.0;
            bool near = false;
            for (double rr : info.resonance_r_values) near |= std::abs(r - rr) <= 1e-8;
            if (!near) {
                EXPECT_TRUE(is_regular(m, r, lam)) << lam << " " << r;
            }
        }
    }
}

TEST(ResonanceSet, PolynomialPathMatchesDeterminantZeros) {
    // Finite model: resonances are the r where lambda is an eigenvalue of H_r.
    Rng rng(44);
    RiggedModel m = build_finite(rng.hermitian(4), CMatrix::Identity(4, 4),
                                 CouplingPath::polynomial({rng.hermitian(4), rng.hermitian(4), rng.hermitian(4, 0.5)}));
    const double lam = 0.3;
    RegularityInfo info = resonance_set(m, lam, 0.0, 1.0);
    for (double r : info.resonance_r_values) {
        const RVector ev = eig_hermitian(m.H(r)).eigenvalues;
        EXPECT_LE((ev.array() - lam).abs().minCoeff(), 1e-9);
    }
    // Every sign change of det(H_r - lambda) on a fine grid is matched.
    int sign_changes = 0;
    double prev = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        const double r = i / 4000.0;
        const double d = (m.H(r).matrix() - lam * CMatrix::Identity(4, 4)).determinant().real();
        if (i > 0 && (d > 0) != (prev > 0)) ++sign_changes;
        prev = d;
    }
    int total = 0;
    for (int mult : info.multiplicities) total += mult;
    EXPECT_EQ(total, sign_changes);
}

TEST(ResonanceSet, BentPathSegmentsAreSearchedSeparately) {
    RiggedModel base = diag_pair();
    CouplingPath bent = CouplingPath::polyline(
        {HermMatrix::zero(2), HermMatrix::diagonal({2.0, 0.0}), HermMatrix::diagonal({1.0, 0.0})}, {0.0, 0.5, 1.0});
    RiggedModel m = base.with_path(bent);
    // Eigenvalue 4r on [0,0.5] passes 0.5 at r = 0.125; then 2 - 2(r-0.5) stays above 0.5.
    RegularityInfo info = resonance_set(m, 0.5, 0.0, 1.0);
    ASSERT_EQ(info.resonance_r_values.size(), 1u);
    EXPECT_NEAR(info.resonance_r_values[0], 0.125, 1e-12);
}
