#pragma once
// Seeded generator with a portable double mapping.  std::mt19937_64 is fully
// specified by the standard, so a seed reproduces across platforms; the
// distributions below avoid <random>'s implementation-defined algorithms.

#include "ssfkit/numkernel.hpp"

#include <cstdint>
#include <random>

namespace ssfkit {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    long integer(long lo, long hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<long>(engine_() % span);
    }

    Complex complex_uniform(double scale = 1.0) { return {uniform(-scale, scale), uniform(-scale, scale)}; }

    CMatrix matrix(Index rows, Index cols, double scale = 1.0) {
        CMatrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = complex_uniform(scale);
        return m;
    }

    HermMatrix hermitian(Index n, double scale = 1.0) {
        const CMatrix a = matrix(n, n, scale);
        return HermMatrix(a + a.adjoint());
    }

    /// Real symmetric matrix with entries uniform in [-scale, scale].
    HermMatrix real_symmetric(Index n, double scale = 1.0) {
        CMatrix a = CMatrix::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = i; j < n; ++j) {
                const double v = uniform(-scale, scale);
                a(i, j) = v;
                a(j, i) = v;
            }
        return HermMatrix(a);
    }

    /// PSD matrix of the given rank.
    HermMatrix psd(Index n, Index rank, double scale = 1.0) {
        const CMatrix b = matrix(n, rank, scale);
        return HermMatrix(b * b.adjoint());
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace ssfkit
