#include "ssfkit/numkernel.hpp"
#include "ssfkit/quadrature.hpp"
#include "ssfkit/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace ssfkit;

namespace {

CMatrix diag(std::initializer_list<Complex> d) {
    CMatrix m = CMatrix::Zero(static_cast<Index>(d.size()), static_cast<Index>(d.size()));
    Index i = 0;
    for (Complex v : d) m(i, i) = v, ++i;
    return m;
}

double orthonormality_defect(const CMatrix& v) {
    return max_abs(v.adjoint() * v - CMatrix::Identity(v.cols(), v.cols()));
}

}  // namespace

TEST(EigHermitian, DiagonalGivesPermutedIdentity) {
    SpectralDecomposition sd = eig_hermitian(HermMatrix(diag({2.0, 0.0})));
    EXPECT_DOUBLE_EQ(sd.eigenvalues(0), 0.0);
    EXPECT_DOUBLE_EQ(sd.eigenvalues(1), 2.0);
    // Eigenvectors are e_2, e_1 up to phases.
    EXPECT_NEAR(std::abs(sd.eigenvectors(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(sd.eigenvectors(0, 1)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(sd.eigenvectors(0, 0)), 0.0, 1e-15);
}

TEST(EigHermitian, SwapMatrix) {
    CMatrix a(2, 2);
    a << 0.0, 1.0, 1.0, 0.0;
    SpectralDecomposition sd = eig_hermitian(HermMatrix(a));
    EXPECT_NEAR(sd.eigenvalues(0), -1.0, 1e-15);
    EXPECT_NEAR(sd.eigenvalues(1), 1.0, 1e-15);
}

TEST(EigHermitian, SeededReconstruction) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        HermMatrix a = rng.hermitian(6);
        SpectralDecomposition sd = eig_hermitian(a);
        const CMatrix back = sd.eigenvectors * sd.eigenvalues.asDiagonal() * sd.eigenvectors.adjoint();
        EXPECT_LE(max_abs(back - a.matrix()), 1e-10);
        EXPECT_LE(orthonormality_defect(sd.eigenvectors), 1e-12);
        EXPECT_TRUE(std::is_sorted(sd.eigenvalues.data(), sd.eigenvalues.data() + 6));
    }
}

TEST(HermMatrixType, SymmetrizesAndRecordsResidual) {
    CMatrix a(2, 2);
    a << 1.0, Complex(0.0, 1.0), Complex(0.0, -1.0 + 1e-3), 2.0;
    HermMatrix h(a);
    EXPECT_NEAR(h.hermiticity_residual(), 1e-3, 1e-15);
    EXPECT_LE(max_abs(h.matrix() - h.matrix().adjoint()), 1e-15);
}

TEST(HermMatrixType, RejectsNonSquare) { EXPECT_THROW(HermMatrix(CMatrix::Zero(2, 3)), ShapeError); }

TEST(EigGeneral, NilpotentJordanBlock) {
    CMatrix a(2, 2);
    a << 0.0, 1.0, 0.0, 0.0;
    CVector ev = eig_general(a).eigenvalues;
    EXPECT_EQ(std::abs(ev(0)), 0.0);
    EXPECT_EQ(std::abs(ev(1)), 0.0);
}

TEST(EigGeneral, DiagonalImaginaryOrderedByImagPart) {
    CVector ev = eig_general(diag({kI, -kI})).eigenvalues;
    EXPECT_NEAR(std::abs(ev(0) - (-kI)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(ev(1) - kI), 0.0, 1e-15);
}

TEST(EigGeneral, CompanionRootsOfQuadratic) {
    // z^2 - 3z + 2 = (z-1)(z-2)
    CMatrix c(2, 2);
    c << 3.0, -2.0, 1.0, 0.0;
    CVector ev = eig_general(c).eigenvalues;
    EXPECT_NEAR(std::abs(ev(0) - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(ev(1) - 2.0), 0.0, 1e-12);
}

TEST(EigGeneral, TraceConsistencyOnSeededMatrices) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        CMatrix a = rng.matrix(7, 7, 3.0);
        GeneralEigen g = eig_general(a, true);
        EXPECT_LE(std::abs(g.eigenvalues.sum() - a.trace()), 1e-8 * (1.0 + op_norm(a)));
        for (Index j = 0; j < 7; ++j)
            EXPECT_LE((a * g.eigenvectors.col(j) - g.eigenvalues(j) * g.eigenvectors.col(j)).norm(), 1e-10 * op_norm(a));
    }
}

TEST(SqrtPsd, Diagonal) {
    HermMatrix b = sqrt_psd(HermMatrix(diag({4.0, 1.0})));
    EXPECT_LE(max_abs(b.matrix() - diag({2.0, 1.0})), 1e-15);
}

TEST(SqrtPsd, ZeroMatrix) {
    HermMatrix b = sqrt_psd(HermMatrix::zero(3));
    EXPECT_EQ(max_abs(b.matrix()), 0.0);
}

TEST(SqrtPsd, SeededReconstruction) {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        HermMatrix a = rng.psd(5, 3);
        HermMatrix b = sqrt_psd(a);
        EXPECT_LE(max_abs(b.matrix() * b.matrix() - a.matrix()), 1e-10);
        EXPECT_GE(eig_hermitian(b).eigenvalues.minCoeff(), -1e-12);
    }
}

TEST(SqrtPsd, ProjectionIsItsOwnRoot) {
    Rng rng(3);
    const CMatrix q = rng.matrix(6, 2).householderQr().householderQ() * CMatrix::Identity(6, 2);
    HermMatrix p(q * q.adjoint());
    EXPECT_LE(max_abs(sqrt_psd(p).matrix() - p.matrix()), 1e-10);
}

TEST(SqrtPsd, RejectsIndefinite) { EXPECT_THROW(sqrt_psd(HermMatrix(diag({1.0, -0.5}))), NotPsdError); }

TEST(PinvOnRange, DiagonalRankOne) {
    PseudoInverse p = pinv_on_range(HermMatrix(diag({2.0, 0.0})));
    EXPECT_EQ(p.rank, 1);
    EXPECT_LE(max_abs(p.pinv - diag({0.5, 0.0})), 1e-15);
}

TEST(PinvOnRange, Identity) {
    PseudoInverse p = pinv_on_range(HermMatrix::identity(4));
    EXPECT_EQ(p.rank, 4);
    EXPECT_LE(max_abs(p.pinv - CMatrix::Identity(4, 4)), 1e-15);
}

TEST(PinvOnRange, ZeroMatrixHasRankZero) {
    PseudoInverse p = pinv_on_range(HermMatrix::zero(3));
    EXPECT_EQ(p.rank, 0);
    EXPECT_EQ(max_abs(p.pinv), 0.0);
}

TEST(PinvOnRange, SeededRankTwo) {
    Rng rng(23);
    HermMatrix a = rng.psd(4, 2);
    PseudoInverse p = pinv_on_range(a);
    EXPECT_EQ(p.rank, 2);
    EXPECT_LE(max_abs(a.matrix() * p.pinv * a.matrix() - a.matrix()), 1e-9);
}

TEST(MatchSpectra, NearestNeighbourSwap) {
    std::vector<Complex> prev{1.0, 2.0}, next{2.05, 1.05};
    auto perm = match_spectra(prev, next);
    EXPECT_EQ(perm, (std::vector<std::size_t>{1, 0}));
}

TEST(MatchSpectra, IdenticalListsGiveIdentity) {
    std::vector<Complex> a{Complex(0.3, 1.0), 2.0, Complex(-1.0, -4.0)};
    auto perm = match_spectra(a, a);
    EXPECT_EQ(perm, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(MatchSpectra, AgreesWithExhaustiveSearchOnPerturbedClouds) {
    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 8;
        std::vector<Complex> prev(n), next(n);
        for (auto& z : prev) z = rng.complex_uniform(1.0);
        std::vector<std::size_t> shuffle(n);
        std::iota(shuffle.begin(), shuffle.end(), 0);
        std::shuffle(shuffle.begin(), shuffle.end(), rng.engine());
        for (std::size_t i = 0; i < n; ++i) next[shuffle[i]] = prev[i] + 1e-3 * rng.complex_uniform(1.0) / std::sqrt(2.0);

        // Brute force over all 8! assignments.
        std::vector<std::size_t> p(n), best;
        std::iota(p.begin(), p.end(), 0);
        double best_cost = INFINITY;
        do {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c += std::abs(prev[i] - next[p[i]]);
            if (c < best_cost) best_cost = c, best = p;
        } while (std::next_permutation(p.begin(), p.end()));

        auto perm = match_spectra(prev, next);
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) cost += std::abs(prev[i] - next[perm[i]]);
        EXPECT_NEAR(cost, best_cost, 1e-14);
        EXPECT_EQ(perm, best);
        EXPECT_EQ(perm, shuffle);
    }
}

TEST(Determinant, EmptyAndDiagonal) {
    EXPECT_EQ(determinant(CMatrix(0, 0)), Complex(1.0, 0.0));
    EXPECT_NEAR(std::abs(determinant(diag({2.0, kI})) - 2.0 * kI), 0.0, 1e-15);
}

// ---------------------------------------------------------------- quadrature

TEST(AdaptiveQuadrature, NarrowLorentzianMatchesArctan) {
    for (double y : {1e-2, 1e-4, 1e-7}) {
        const double c = 0.37;
        auto f = [&](double x) { return y / ((x - c) * (x - c) + y * y); };
        const double exact = std::atan((1.0 - c) / y) + std::atan(c / y);
        const QuadResult q = integrate_adaptive(f, 0.0, 1.0, {}, {{c, y}});
        EXPECT_NEAR(q.value, exact, 1e-11) << y;
        EXPECT_FALSE(q.roundoff_limited);
    }
}

TEST(AdaptiveQuadrature, BreakpointsHandleKinks) {
    auto f = [](double x) { return std::abs(x - 0.3) + (x > 0.7 ? 1.0 : 0.0); };
    const QuadResult q = integrate_adaptive(f, 0.0, 1.0, {0.3, 0.7});
    EXPECT_NEAR(q.value, 0.5 * 0.09 + 0.5 * 0.49 + 0.3, 1e-14);
}

TEST(AdaptiveQuadrature, ReportsAchievedErrorWhenBudgetRunsOut) {
    QuadOptions opt;
    opt.max_evaluations = 200;
    opt.noise_tol = 0.0;
    auto f = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); };
    try {
        (void)integrate_adaptive(f, 0.0, 1.0, {}, {}, opt);
        FAIL() << "expected AccuracyError";
    } catch (const AccuracyError& e) {
        EXPECT_GT(e.achieved(), opt.abs_tol);
    }
}

TEST(AdaptiveQuadrature, NoisyIntegrandStopsAtNoiseFloor) {
    // Deterministic pseudo-noise of amplitude 1e-11 on a constant.
    auto f = [](double x) {
        const double s = std::sin(1e7 * x) * 43758.5453;
        return 1.0 + 1e-11 * (s - std::floor(s) - 0.5);
    };
    QuadOptions opt;
    opt.abs_tol = 1e-16;
    opt.rel_tol = 0.0;
    const QuadResult q = integrate_adaptive(f, 0.0, 1.0, {}, {}, opt);
    EXPECT_TRUE(q.roundoff_limited);
    EXPECT_NEAR(q.value, 1.0, 1e-10);
}

TEST(GradedMesh, SortedAndRefinedAroundSpike) {
    const std::vector<double> mesh = graded_mesh(0.0, 1.0, {0.5}, {{0.2, 1e-6}});
    EXPECT_TRUE(std::is_sorted(mesh.begin(), mesh.end()));
    EXPECT_EQ(mesh.front(), 0.0);
    EXPECT_EQ(mesh.back(), 1.0);
    EXPECT_NE(std::find(mesh.begin(), mesh.end(), 0.2), mesh.end());
    EXPECT_NE(std::find(mesh.begin(), mesh.end(), 0.5), mesh.end());
    EXPECT_GT(mesh.size(), 15u);
}

TEST(GaussLegendre, PolynomialExactnessAndOscillatoryIntegral) {
    auto p = [](double x) { return Complex(std::pow(x, 39) + 3.0 * x * x, x); };
    const Complex v = integrate_gauss_legendre(p, 0.0, 1.0, 1);
    EXPECT_NEAR(std::abs(v - Complex(1.0 / 40.0 + 1.0, 0.5)), 0.0, 1e-14);
    const Complex w = integrate_gauss_legendre([](double t) { return std::exp(kI * t); }, 0.0, kPi, 8);
    EXPECT_NEAR(std::abs(w - 2.0 * kI), 0.0, 1e-14);
}
