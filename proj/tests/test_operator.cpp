#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "starkloc/lattice_operator.hpp"
#include "support/oracles.hpp"

using namespace starkloc;

namespace {

const auto unit_field = PotentialSpec::linear_field(1.0);

} // namespace

TEST(Operator, ZeroKernelIsDiagonalField) {
    const auto op = build_operator(HoppingKernel{}, unit_field, 2);
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(5, 5);
    for (int i = 0; i < 5; ++i) {
        expected(i, i) = i - 2.0;
    }
    EXPECT_EQ(op.matrix(), expected);
}

TEST(Operator, NearestNeighborSmallestBox) {
    const auto op = build_operator(build_kernel(KernelFamily::NearestNeighbor), unit_field, 1);
    Eigen::Matrix3cd expected;
    expected << -1, 1, 0, 1, 0, 1, 0, 1, 1;
    EXPECT_EQ(op.matrix(), Eigen::MatrixXcd(expected));
}

TEST(Operator, NearestNeighborIsTridiagonal) {
    const auto op = build_operator(build_kernel(KernelFamily::NearestNeighbor), unit_field, 20);
    const auto& m = op.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const auto gap = std::abs(i - j);
            const complex expected = gap == 0 ? complex(op.site_of_row(i)) : gap == 1 ? complex(1.0) : complex(0.0);
            EXPECT_EQ(m(i, j), expected);
        }
    }
}

TEST(Operator, PowerLawWithConstantShiftMatchesNaiveAssembly) {
    const auto kernel = power_law_kernel(4.0);
    const auto pot = PotentialSpec::linear_field(1.0, perturbation::Constant{0.3});
    const auto op = build_operator(kernel, pot, 3);

    EXPECT_NEAR(op.matrix()(op.row_of_site(-3), op.row_of_site(0)).real(), 1.0 / 81.0, 1e-17);
    EXPECT_NEAR(op.matrix()(op.row_of_site(2), op.row_of_site(2)).real(), 2.3, 1e-15);

    const auto naive = oracle::naive_operator(
        3, [](long m) { return oracle::cplx{1.0 / (double(m) * m * m * m), 0.0}; },
        [](long n) { return double(n) + 0.3; });
    EXPECT_LE((op.matrix() - naive).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Operator, ComplexKernelIsHermitianExactly) {
    KernelParams p;
    p.positive_half = {complex(0.3, 0.7), complex(-0.2, 0.1), complex(0.05, -0.4)};
    const auto op = build_operator(build_kernel(KernelFamily::FiniteSupport, p),
                                   PotentialSpec::linear_field(1.0, perturbation::UniformRandom{2.0, 11}), 15);
    const Eigen::MatrixXcd& m = op.matrix();
    EXPECT_EQ(m, Eigen::MatrixXcd(m.adjoint()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        EXPECT_EQ(m(i, i).imag(), 0.0);
    }
    EXPECT_FALSE(op.is_real());
}

TEST(Operator, OffDiagonalDependsOnlyOnSiteDifference) {
    const auto op = build_operator(power_law_kernel(2.5),
                                   PotentialSpec::linear_field(1.0, perturbation::UniformRandom{1.0, 3}), 10);
    const auto& m = op.matrix();
    for (Eigen::Index i = 1; i < m.rows(); ++i) {
        for (Eigen::Index j = 1; j < m.cols(); ++j) {
            if (i != j) {
                EXPECT_EQ(m(i, j), m(i - 1, j - 1)) << i << "," << j;
            }
        }
    }
}

TEST(Operator, SmallBoxIsCentralBlockOfLargerBox) {
    const auto kernel = power_law_kernel(3.0);
    const auto pot = PotentialSpec::linear_field(1.0, perturbation::UniformRandom{5.0, 42});
    const auto small = build_operator(kernel, pot, 12);
    const auto large = build_operator(kernel, pot, 30);
    const auto offset = large.row_of_site(-12);
    EXPECT_EQ(small.matrix(), Eigen::MatrixXcd(large.matrix().block(offset, offset, 25, 25)));
}

TEST(Potential, UniformRandomIsBoundedAndReproducible) {
    const auto pot = PotentialSpec::linear_field(1.0, perturbation::UniformRandom{0.5, 1234});
    double lo = 1.0;
    double hi = -1.0;
    for (long n = -5000; n <= 5000; ++n) {
        const double b = pot.perturbation_at(n);
        EXPECT_LE(std::abs(b), 0.5);
        EXPECT_EQ(b, pot.perturbation_at(n));
        lo = std::min(lo, b);
        hi = std::max(hi, b);
    }
    // 10^4 uniform draws fill the interval
    EXPECT_LT(lo, -0.49);
    EXPECT_GT(hi, 0.49);
    const auto other = PotentialSpec::linear_field(1.0, perturbation::UniformRandom{0.5, 1235});
    EXPECT_NE(pot.perturbation_at(0), other.perturbation_at(0));
}

TEST(Potential, SupIsRecomputedOverBox) {
    const auto pot = PotentialSpec::linear_field(1.0, perturbation::Explicit{-1, {0.5, -2.0, 0.25}});
    EXPECT_EQ(pot.perturbation_sup(1), 2.0);
    EXPECT_EQ(pot.perturbation_sup(5), 2.0);
    EXPECT_EQ(pot.perturbation_at(7), 0.0);
    const auto periodic = PotentialSpec::linear_field(1.0, perturbation::Periodic{{1.0, -3.0}});
    EXPECT_EQ(periodic.perturbation_at(-1), -3.0);
    EXPECT_EQ(periodic.perturbation_at(4), 1.0);
    EXPECT_EQ(periodic.perturbation_sup(3), 3.0);
}

TEST(Potential, MarylandReplacesField) {
    const MarylandParams mp{2.0, 0.5 * (std::sqrt(5.0) - 1.0), 0.1};
    const auto pot = PotentialSpec::maryland(mp);
    EXPECT_TRUE(pot.is_maryland());
    EXPECT_NEAR(pot.field(3), 2.0 * std::tan(std::numbers::pi * (0.1 + 3 * mp.frequency)), 1e-12);
    EXPECT_NO_THROW(build_operator(HoppingKernel{}, pot, 50));
}

TEST(Potential, MarylandResonanceGuard) {
    // phase + 2 * 0.25 = 0.5 hits the pole of tan at site 2
    const auto pot = PotentialSpec::maryland({1.0, 0.25, 0.0});
    try {
        build_operator(HoppingKernel{}, pot, 3);
        FAIL() << "expected MarylandResonance";
    } catch (const MarylandResonance& e) {
        EXPECT_EQ(std::abs(e.site()), 2);
    }
}

TEST(Operator, DimensionOverflow) {
    AssemblyOptions options;
    options.max_dimension = 101;
    EXPECT_THROW(build_operator(HoppingKernel{}, unit_field, 100, options), DimensionOverflow);
    EXPECT_THROW(build_operator(HoppingKernel{}, unit_field, 0), std::invalid_argument);
}

TEST(Operator, BinaryDumpIsRowMajorComplexPairs) {
    KernelParams p;
    p.positive_half = {complex(0.0, 1.0)};
    const auto op = build_operator(build_kernel(KernelFamily::FiniteSupport, p), unit_field, 2);
    const auto path = std::filesystem::temp_directory_path() / "starkloc_matrix_dump.bin";
    write_matrix_dump(path, op);
    EXPECT_EQ(std::filesystem::file_size(path), 5u * 5u * 16u);

    std::ifstream in(path, std::ios::binary);
    double raw[4];
    in.read(reinterpret_cast<char*>(raw), sizeof raw);
    // row 0 = site -2: (-2, 0), then entry (0, 1) = a(-1) = conj(i) = -i
    EXPECT_EQ(raw[0], -2.0);
    EXPECT_EQ(raw[1], 0.0);
    EXPECT_EQ(raw[2], 0.0);
    EXPECT_EQ(raw[3], -1.0);
    EXPECT_EQ(read_matrix_dump(path, 5), op.matrix());
    std::filesystem::remove(path);
}
