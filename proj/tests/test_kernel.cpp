#include <gtest/gtest.h>

#include <random>

#include "starkloc/kernel.hpp"
#include "support/oracles.hpp"

using namespace starkloc;

TEST(Kernel, NearestNeighborReproducesLaplacianHopping) {
    const auto a = build_kernel(KernelFamily::NearestNeighbor);
    EXPECT_EQ(a(1), complex(1.0));
    EXPECT_EQ(a(-1), complex(1.0));
    EXPECT_EQ(a(0), complex(0.0));
    EXPECT_EQ(a(2), complex(0.0));
    EXPECT_EQ(a.support_radius(), 1);
}

TEST(Kernel, EmptyCustomListIsZeroKernel) {
    const auto a = build_kernel(KernelFamily::Custom, {});
    EXPECT_TRUE(a.is_zero());
    EXPECT_EQ(a.support_radius(), 0);
    EXPECT_EQ(norm_r(a, 0.0, 10).partial_sum, 0.0);
}

TEST(Kernel, PowerLawCoefficient) {
    const auto a = power_law_kernel(4.0);
    EXPECT_NEAR(a(3).real(), 0.012345679012345679, 1e-17);
    EXPECT_EQ(a(-3), a(3));
    EXPECT_FALSE(a.support_radius().has_value());
}

TEST(Kernel, RejectsNonzeroDiagonal) {
    KernelParams p;
    p.entries = {{0, 0.5}, {1, 1.0}};
    EXPECT_THROW(build_kernel(KernelFamily::Custom, p), InvalidKernel);
}

TEST(Kernel, RejectsConjugateSymmetryViolation) {
    KernelParams p;
    p.entries = {{2, complex(1.0, 0.5)}, {-2, complex(1.0, 0.5)}};
    EXPECT_THROW(build_kernel(KernelFamily::Custom, p), InvalidKernel);

    p.entries = {{2, complex(1.0, 0.5)}, {-2, complex(1.0, -0.5)}};
    const auto a = build_kernel(KernelFamily::Custom, p);
    EXPECT_EQ(a(-2), complex(1.0, -0.5));
}

TEST(Kernel, RejectsPowerLawExponentAtMostOne) {
    EXPECT_THROW(power_law_kernel(1.0), InvalidKernel);
    EXPECT_THROW(power_law_kernel(0.3), InvalidKernel);
}

TEST(Kernel, CustomHalfIsMirroredByConjugation) {
    KernelParams p;
    p.entries = {{-3, complex(0.0, 2.0)}};
    const auto a = build_kernel(KernelFamily::Custom, p);
    EXPECT_EQ(a(-3), complex(0.0, 2.0));
    EXPECT_EQ(a(3), complex(0.0, -2.0));
    EXPECT_FALSE(a.is_real());
}

TEST(Kernel, FiniteSupportFromPositiveHalf) {
    KernelParams p;
    p.positive_half = {complex(1.0, 1.0), 0.0, 0.25};
    const auto a = build_kernel(KernelFamily::FiniteSupport, p);
    EXPECT_EQ(a.support_radius(), 3);
    EXPECT_EQ(a(-1), complex(1.0, -1.0));
    EXPECT_EQ(a(2), complex(0.0));
    EXPECT_EQ(a(-3), complex(0.25));
}

TEST(KernelNorm, NearestNeighbor) {
    const auto a = build_kernel(KernelFamily::NearestNeighbor);
    EXPECT_EQ(norm_r(a, 0.0, 5).partial_sum, 2.0);
    EXPECT_EQ(norm_r(a, 3.0, 5).partial_sum, 2.0);
    EXPECT_EQ(norm_r(a, 3.0, 5).tail_bound, 0.0);
}

TEST(KernelNorm, PowerLawPartialSumBracketsZeta) {
    // ||a||_2 for a(m) = |m|^-4 is 2 zeta(2) = pi^2 / 3.
    const auto a = power_law_kernel(4.0);
    const auto n = norm_r(a, 2.0, 1'000'000);
    // partial sum frozen from an extended-precision evaluation of 2 (zeta(2) - zeta(2, 10^6 + 1))
    EXPECT_NEAR(n.partial_sum, 3.2898661336974528726, 1e-13);
    EXPECT_NEAR(n.tail_bound, 2e-6, 1e-18);
    EXPECT_LE(n.partial_sum, 2.0 * oracle::zeta2);
    EXPECT_GE(n.upper_bound(), 2.0 * oracle::zeta2);
}

TEST(KernelNorm, PowerLawDivergesAtOrBeyondCriticalExponent) {
    const auto a = power_law_kernel(4.0);
    EXPECT_TRUE(norm_r(a, 2.9, 100).finite());
    EXPECT_FALSE(norm_r(a, 3.0, 100).finite());
    EXPECT_FALSE(norm_r(a, 5.0, 100).finite());
}

TEST(KernelNorm, FiniteKernelTailIsExactRemainder) {
    KernelParams p;
    p.positive_half = {1.0, 0.5, 0.25};
    const auto a = build_kernel(KernelFamily::FiniteSupport, p);
    const auto n = norm_r(a, 1.0, 2);
    EXPECT_DOUBLE_EQ(n.partial_sum, 2.0 * (1.0 + 0.5 * 2.0));
    EXPECT_DOUBLE_EQ(n.tail_bound, 2.0 * 0.25 * 3.0);
}

TEST(KernelNorm, RejectsNegativeExponent) {
    const auto a = build_kernel(KernelFamily::NearestNeighbor);
    EXPECT_THROW(norm_r(a, -1.0, 3), std::invalid_argument);
    EXPECT_THROW(norm_r(a, 1.0, -1), std::invalid_argument);
}

// Monotone in cutoff and in r; the r = 0 norm dominates every |a(m)|.
TEST(KernelNormProperty, MonotoneAndDominatesSupremum) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_int_distribution<int> length(0, 12);
    std::uniform_real_distribution<double> expo(1.1, 6.0);
    for (int trial = 0; trial < 200; ++trial) {
        HoppingKernel a;
        if (trial % 3 == 0) {
            a = power_law_kernel(expo(rng));
        } else {
            KernelParams p;
            p.positive_half.resize(static_cast<std::size_t>(length(rng)));
            for (auto& c : p.positive_half) {
                c = complex(coef(rng), coef(rng));
            }
            a = build_kernel(KernelFamily::FiniteSupport, p);
        }
        double prev = -1.0;
        for (long cutoff = 0; cutoff <= 20; ++cutoff) {
            const double v = norm_r(a, 1.5, cutoff).partial_sum;
            EXPECT_GE(v, prev);
            prev = v;
        }
        double prev_r = -1.0;
        for (double r : {0.0, 0.5, 1.0, 2.0, 3.5}) {
            const double v = norm_r(a, r, 20).partial_sum;
            EXPECT_GE(v, prev_r);
            prev_r = v;
        }
        const double norm0 = norm_r(a, 0.0, 20).partial_sum;
        for (long m = -20; m <= 20; ++m) {
            EXPECT_GE(norm0, std::abs(a(m)));
            EXPECT_EQ(a(-m), std::conj(a(m)));
        }
    }
}
