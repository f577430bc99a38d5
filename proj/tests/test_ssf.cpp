#include "fixtures.hpp"

#include "ssfkit/ssf.hpp"

#include <gtest/gtest.h>

using namespace ssfkit;
using namespace fixtures;

namespace {

/// (1/pi) int phi(l) y Tr(R_{conj z} V' R_z) dl with R_z = (H_r - z)^{-1}
/// formed by direct inversion.
double poisson_issm(const RiggedModel& m, double r, const TestFunction& phi, double y) {
    const CMatrix H = m.H(r).matrix();
    const CMatrix Vd = m.Vdot(r).matrix();
    const Index n = H.rows();
    auto density = [&](double lam) {
        if (phi(lam) == 0.0) return 0.0;
        const CMatrix Rz = (H - Complex(lam, y) * CMatrix::Identity(n, n)).inverse();
        return phi(lam) * y * (Rz.adjoint() * Vd * Rz).trace().real() / kPi;
    };
    std::vector<Spike> spikes;
    const RVector ev = eig_hermitian(m.H(r)).eigenvalues;
    for (Index i = 0; i < ev.size(); ++i) spikes.push_back({ev(i), y});
    QuadOptions opt;
    opt.abs_tol = 1e-9;
    opt.max_evaluations = 2000000;
    const auto [a, b] = phi.support();
    return integrate_adaptive(density, a, b, {}, spikes, opt).value;
}

RiggedModel monotone_lattice(std::uint64_t seed) {
    Rng rng(seed);
    return build_lattice({-1, 0, 2}, {0.8, 1.1, 0.6}, rng.hermitian(3, 0.3), CouplingPath::straight(rng.psd(3, 3)));
}

}  // namespace

// ---------------------------------------------------------------- issm

TEST(Issm, ScalarEqualsTestFunctionValue) {
    const RiggedModel m = scalar_finite();
    const TestFunction phi(-1.0, 2.0, 1.7);
    for (double r : {0.1, 0.5, 0.9}) EXPECT_NEAR(issm(m, r, phi), phi(r), 1e-12);
}

TEST(Issm, VanishesAwayFromSpectrum) {
    const RiggedModel m = diag_pair();
    EXPECT_EQ(issm(m, 0.4, TestFunction(3.0, 4.0)), 0.0);
}

TEST(Issm, PoissonSmoothingOracleOnSeededModel) {
    const RiggedModel m = seeded_finite(17);
    const TestFunction phi(-1.5, 1.5);
    for (double r : {0.2, 0.7}) EXPECT_NEAR(issm(m, r, phi), poisson_issm(m, r, phi, 1e-5), 1e-3) << r;
}

TEST(Issm, RejectsLatticeBackend) {
    EXPECT_THROW(issm(rank_one(2.0), 0.5, TestFunction(-1.0, 1.0)), UnsupportedBackend);
}

// ---------------------------------------------------------------- ssf_measure

TEST(SsfMeasure, ScalarReducesToIntegralOfPhi) {
    const RiggedModel m = scalar_finite();
    for (const TestFunction& phi : {TestFunction(-0.5, 0.8), TestFunction(0.2, 0.6, 3.0), TestFunction(0.5, 3.0)}) {
        const auto [a, b] = phi.support();
        const double expect = gk([&](double x) { return phi(x); }, std::max(a, 0.0), std::min(b, 1.0));
        EXPECT_NEAR(ssf_measure(m, phi), expect, 1e-10);
    }
}

TEST(SsfMeasure, ZeroPathGivesZero) {
    const RiggedModel m = build_finite(HermMatrix::diagonal({0.0, 1.0}), CMatrix::Identity(2, 2),
                                       CouplingPath::straight(HermMatrix::zero(2)));
    EXPECT_EQ(ssf_measure(m, TestFunction(-1.0, 2.0)), 0.0);
}

TEST(SsfMeasure, NoEigenvalueEntersSupport) {
    EXPECT_EQ(ssf_measure(diag_pair(), TestFunction(1.5, 1.9)), 0.0);
}

TEST(SsfMeasure, PathIndependenceStraightVersusBent) {
    Rng rng(5);
    const HermMatrix H0 = rng.hermitian(6);
    CMatrix F = rng.matrix(6, 6) + 2.0 * CMatrix::Identity(6, 6);
    const HermMatrix J1 = rng.hermitian(6, 0.5);
    const HermMatrix mid = rng.hermitian(6, 0.8);
    const RiggedModel straight = build_finite(H0, F, CouplingPath::straight(J1));
    const RiggedModel bent = build_finite(H0, F, CouplingPath::polyline({HermMatrix::zero(6), mid, J1}, {0.0, 0.35, 1.0}));
    for (const TestFunction& phi : {TestFunction(-2.0, 0.5), TestFunction(-0.3, 2.4), TestFunction(-4.0, 4.0)})
        EXPECT_NEAR(ssf_measure(straight, phi), ssf_measure(bent, phi), 1e-8);
}

TEST(SsfMeasure, DensityIsTheCountingFunction) {
    const RiggedModel m = seeded_finite(23);
    const RVector e0 = eig_hermitian(m.H(0.0)).eigenvalues;
    const RVector e1 = eig_hermitian(m.H(1.0)).eigenvalues;
    for (const TestFunction& phi : {TestFunction(-1.2, 0.9), TestFunction(-3.0, 3.0, 0.6)}) {
        const auto [a, b] = phi.support();
        std::vector<double> cuts{a, b};
        for (Index i = 0; i < e0.size(); ++i) {
            if (e0(i) > a && e0(i) < b) cuts.push_back(e0(i));
            if (e1(i) > a && e1(i) < b) cuts.push_back(e1(i));
        }
        std::sort(cuts.begin(), cuts.end());
        double expect = 0.0;
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double mid = 0.5 * (cuts[j] + cuts[j + 1]);
            const long n = ssf_counting_oracle(m, mid);
            expect += static_cast<double>(n) * gk([&](double x) { return phi(x); }, cuts[j], cuts[j + 1]);
        }
        EXPECT_NEAR(ssf_measure(m, phi), expect, 1e-8);
    }
}

TEST(SsfMeasure, InvariancePrinciple) {
    const RiggedModel m = seeded_finite(29);
    auto g = [](double x) { return x + 0.3 * std::sin(x); };
    auto dg = [](double x) { return 1.0 + 0.3 * std::cos(x); };
    const RVector e0 = eig_hermitian(m.H(0.0)).eigenvalues;
    const RVector e1 = eig_hermitian(m.H(1.0)).eigenvalues;
    for (const TestFunction& f : {TestFunction(-1.0, 1.3), TestFunction(-2.5, 0.2, 2.0)}) {
        // Counting side for the pair (g(H1), g(H0)); sorted eigenvalues pair up.
        double lhs = 0.0;
        for (Index i = 0; i < e0.size(); ++i) lhs += gk([&](double x) { return f(x); }, g(e0(i)), g(e1(i)));
        const CompactFunction pulled{-50.0, 50.0, [&](double x) { return f(g(x)) * dg(x); }};
        EXPECT_NEAR(lhs, ssf_measure(m, pulled), 1e-8);
    }
}

// ---------------------------------------------------------------- counting oracle

TEST(CountingOracle, ScalarAndDiagonalExamples) {
    EXPECT_EQ(ssf_counting_oracle(scalar_finite(), 0.5), 1);
    EXPECT_EQ(ssf_counting_oracle(scalar_finite(), 2.0), 0);
    EXPECT_EQ(ssf_counting_oracle(diag_pair(), 0.5), 1);
}

TEST(CountingOracle, IllPosedAtEigenvalue) {
    EXPECT_THROW(ssf_counting_oracle(scalar_finite(), 1.0 + 1e-11), IllPosed);
}

// ---------------------------------------------------------------- trace formula

TEST(TraceFormula, ScalarAndDisjointSupport) {
    const TestFunction phi(-0.5, 1.5, 1.3);
    const auto [lhs, rhs] = trace_formula_check(scalar_finite(), phi);
    EXPECT_NEAR(lhs, phi(1.0) - phi(0.0), 1e-14);
    EXPECT_NEAR(lhs, rhs, 1e-10);
    const auto [l0, r0] = trace_formula_check(diag_pair(), TestFunction(5.0, 6.0));
    EXPECT_EQ(l0, 0.0);
    EXPECT_EQ(r0, 0.0);
}

TEST(TraceFormula, SeededSixBySix) {
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        const RiggedModel m = seeded_finite(seed);
        const auto [lhs, rhs] = trace_formula_check(m, TestFunction(-2.0, 1.5, 1.0));
        EXPECT_NEAR(lhs, rhs, 1e-8) << seed;
    }
}

// ---------------------------------------------------------------- smoothed / pointwise

TEST(SmoothedSsf, ScalarArctanClosedForm) {
    EXPECT_NEAR(smoothed_ssf(scalar_finite(), {0.5, 0.5, Side::plus}), 0.5, 1e-12);
    const double y = 0.2, lam = 0.3;
    const double expect = (std::atan((1.0 - lam) / y) + std::atan(lam / y)) / kPi;
    EXPECT_NEAR(smoothed_ssf(scalar_finite(), {lam, y, Side::plus}), expect, 1e-12);
}

TEST(SmoothedSsf, ZeroPathAndLatticeRankOne) {
    const RiggedModel zero = build_lattice({0}, {1.0}, HermMatrix::zero(1), CouplingPath::straight(scalar(0.0)));
    EXPECT_EQ(smoothed_ssf(zero, {0.3, 0.1, Side::plus}), 0.0);
    EXPECT_NEAR(smoothed_ssf(rank_one(2.0), {0.0, 0.01, Side::plus}), 0.25, 1e-2);
}

TEST(SmoothedSsf, RequiresPositiveY) {
    EXPECT_THROW(smoothed_ssf(scalar_finite(), {0.5, 0.0, Side::plus}), ParameterError);
}

TEST(PointwiseSsf, ScalarExamples) {
    const PointwiseSSF in = ssf_pointwise(scalar_finite(), 0.5);
    EXPECT_NEAR(in.xi, 1.0, 1e-6);
    EXPECT_TRUE(in.extrapolation_ok);
    EXPECT_NEAR(ssf_pointwise(scalar_finite(), 2.0).xi, 0.0, 1e-6);
}

TEST(PointwiseSsf, LatticeRankOneClosedForm) {
    const PointwiseSSF p = ssf_pointwise(rank_one(2.0), 0.0);
    EXPECT_NEAR(p.xi, 0.25, 1e-4);
    EXPECT_LE(p.quality, 1e-4);
}

TEST(PointwiseSsf, RichardsonRemovesLinearAndQuadraticTerms) {
    std::vector<double> v;
    for (int i = 0; i < 8; ++i) {
        const double y = std::pow(0.5, i);
        v.push_back(3.0 + 2.0 * y - 5.0 * y * y);
    }
    for (double x : richardson_column(v, 0.5, 2)) EXPECT_NEAR(x, 3.0, 1e-12);
}

TEST(PointwiseSsf, GridValidation) {
    EXPECT_THROW((YGrid{1.0, 1.5, 24, 2}.values()), ParameterError);
    EXPECT_THROW((YGrid{1.0, 0.1, 24, 2}.values()), ParameterError);  // reaches 1e-23
    EXPECT_THROW((YGrid{1.0, 0.5, 3, 2}.values()), ParameterError);
}

TEST(PointwiseSsf, AdditiveInEndpoints) {
    const RiggedModel m = seeded_lattice(11);
    for (double lam : {-1.1, 0.3, 1.4}) {
        const double ab = ssf_pointwise(m, lam, {}, 1e-12, 0.0, 0.4).xi;
        const double bc = ssf_pointwise(m, lam, {}, 1e-12, 0.4, 1.0).xi;
        const double ac = ssf_pointwise(m, lam, {}, 1e-12, 0.0, 1.0).xi;
        EXPECT_NEAR(ab + bc, ac, 1e-6) << lam;
    }
}

// ---------------------------------------------------------------- a.c. SSF

TEST(AcDensity, FiniteBackendVanishes) {
    EXPECT_EQ(issm_ac_density(diag_pair(), 0.3, 0.5), 0.0);
}

TEST(AcDensity, LatticeRankOneFormula) {
    for (double r : {0.0, 0.25, 0.8, 1.0})
        EXPECT_NEAR(issm_ac_density(rank_one(2.0), r, 0.0), (1.0 / kPi) / (1.0 + r * r), 1e-14);
}

TEST(AcDensity, NonNegativeForMonotonePath) {
    Rng pick(3);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const RiggedModel m = monotone_lattice(seed);
        for (int i = 0; i < 5; ++i) EXPECT_GE(issm_ac_density(m, pick.uniform(), pick.uniform(-1.9, 1.9)), -1e-12);
    }
}

TEST(AcSsf, ClosedFormForRankOne) {
    EXPECT_EQ(ac_ssf(scalar_finite(), 0.5), 0.0);
    for (double v : {1.0, 2.0, 4.0}) EXPECT_NEAR(ac_ssf(rank_one(v), 0.0), std::atan(v / 2.0) / kPi, 1e-8) << v;
}

TEST(AcSsf, ExclusionWindowAtEmbeddedEigenvalue) {
    const RiggedModel m = embedded_eigenvalue(0.5);
    const RegularityInfo info = resonance_set(m, 0.5, 0.0, 1.0);
    ASSERT_EQ(info.resonance_r_values.size(), 1u);
    EXPECT_NEAR(info.resonance_r_values[0], 0.5, 1e-10);
    // Gauss-Legendre nodes never land on r = 1/2, and the integrand is
    // analytic there, so a plain composite rule is an independent reference.
    const double reference =
        integrate_gauss_legendre([&](double r) { return Complex(issm_ac_density(m, r, 0.5)); }, 0.0, 1.0, 40).real();
    NumericsConfig cfg;
    EXPECT_NEAR(ac_ssf(m, 0.5, cfg), reference, 1e-8);
    cfg.delta = 1e-3;
    EXPECT_NEAR(ac_ssf(m, 0.5, cfg), reference, 1e-8);
}

TEST(AcSsf, ResolutionErrorForCloseResonances) {
    // J_r = a r (1 - r) with T0 = -2/3 at lambda = 2.5: resonances at
    // r = 1/2 -+ 1e-3.
    const double a = 1.5 / (0.25 - 1e-6);
    const RiggedModel m =
        build_lattice({0}, {1.0}, HermMatrix::zero(1), CouplingPath::polynomial({scalar(a), scalar(-a)}));
    NumericsConfig cfg;
    EXPECT_NO_THROW(ac_ssf(m, 2.5, cfg));
    cfg.delta = 1e-3;
    EXPECT_THROW(ac_ssf(m, 2.5, cfg), ResolutionError);
}

TEST(AcSsf, MonotonePathGivesNonNegativeValues) {
    for (std::uint64_t seed : {4u, 5u}) {
        const RiggedModel m = monotone_lattice(seed);
        for (double lam : {-1.7, -0.2, 0.9}) {
            EXPECT_GE(ac_ssf(m, lam), -1e-10);
            for (double y : {1.0, 0.1, 0.01}) EXPECT_GE(smoothed_ssf(m, {lam, y, Side::plus}), -1e-10);
        }
    }
}

// ---------------------------------------------------------------- singular SSF

TEST(SingularSsf, FiniteScalar) {
    const SSFSample s = singular_ssf(scalar_finite(), 0.5);
    EXPECT_EQ(s.xi_ac, 0.0);
    EXPECT_EQ(s.xi_s_rounded, 1);
    EXPECT_LE(s.residual, 1e-6);
}

TEST(SingularSsf, LatticeRankOneInBand) {
    const SSFSample s = singular_ssf(rank_one(2.0), 0.0);
    EXPECT_NEAR(s.xi_s, 0.0, 1e-4);
    EXPECT_FALSE(s.near_resonance);
}

TEST(SingularSsf, LatticeRankOneBoundState) {
    const SSFSample s = singular_ssf(rank_one(3.0), 2.5);
    EXPECT_NEAR(s.xi_ac, 0.0, 1e-12);
    EXPECT_EQ(s.xi_s_rounded, 1);
    EXPECT_LE(s.residual, 1e-6);
}

TEST(SingularSsf, DecompositionInvariants) {
    const RiggedModel m = seeded_lattice(19);
    for (double lam : {-2.6, -1.2, 0.4, 1.8, 2.7}) {
        const SSFSample s = singular_ssf(m, lam);
        EXPECT_NEAR(s.xi, s.xi_ac + s.xi_s, 1e-14);
        EXPECT_GE(s.residual, 0.0);
        EXPECT_LE(s.residual, 0.5);
    }
}

TEST(SingularSsf, EmbeddedEigenvalueIsFlagged) {
    EXPECT_TRUE(singular_ssf(embedded_eigenvalue(0.5), 0.5).near_resonance);
}
