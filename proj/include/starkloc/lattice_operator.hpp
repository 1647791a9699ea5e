#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

#include <Eigen/Dense>

#include "starkloc/errors.hpp"
#include "starkloc/kernel.hpp"
#include "starkloc/potential.hpp"

namespace starkloc {

struct AssemblyOptions {
    long max_dimension = 8001;
};

/**
 Restriction of H = T_a + V + b to the sites {-N, ..., N} with hard
 (Dirichlet) truncation. Row i holds site i - N.
 */
class TruncatedOperator {
public:
    int half_width() const noexcept { return half_width_; }
    Eigen::Index dimension() const noexcept { return matrix_.rows(); }
    const Eigen::MatrixXcd& matrix() const noexcept { return matrix_; }

    long site_of_row(Eigen::Index row) const noexcept { return static_cast<long>(row) - half_width_; }
    Eigen::Index row_of_site(long site) const noexcept { return static_cast<Eigen::Index>(site + half_width_); }
    bool contains_site(long site) const noexcept { return site >= -half_width_ && site <= half_width_; }

    const HoppingKernel& kernel() const noexcept { return *kernel_; }
    const PotentialSpec& potential() const noexcept { return *potential_; }

    /// True when every entry has zero imaginary part.
    bool is_real() const noexcept { return real_; }

private:
    friend TruncatedOperator build_operator(const HoppingKernel&, const PotentialSpec&, int,
                                            const AssemblyOptions&);

    int half_width_ = 0;
    Eigen::MatrixXcd matrix_;
    bool real_ = true;
    std::shared_ptr<const HoppingKernel> kernel_;
    std::shared_ptr<const PotentialSpec> potential_;
};

inline TruncatedOperator build_operator(const HoppingKernel& kernel, const PotentialSpec& potential,
                                        int half_width, const AssemblyOptions& options = {}) {
    if (half_width < 1) {
        throw std::invalid_argument("half-width must be >= 1");
    }
    const long dim = 2L * half_width + 1;
    if (dim > options.max_dimension) {
        throw DimensionOverflow(dim, options.max_dimension);
    }
    potential.check_resonance(half_width);

    TruncatedOperator op;
    op.half_width_ = half_width;
    op.kernel_ = std::make_shared<const HoppingKernel>(kernel);
    op.potential_ = std::make_shared<const PotentialSpec>(potential);

    // a(1..2N) suffices: offsets of two box sites never exceed 2N
    const auto hopping = kernel.leading_coefficients(dim - 1);
    op.real_ = kernel.is_real();

    const auto d = static_cast<Eigen::Index>(dim);
    op.matrix_.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        op.matrix_(j, j) = complex{potential.onsite(op.site_of_row(j)), 0.0};
        for (Eigen::Index i = j + 1; i < d; ++i) {
            // entry (i, j) = a(site_i - site_j), with site_i > site_j
            const complex a = hopping[static_cast<std::size_t>(i - j)];
            op.matrix_(i, j) = a;
            op.matrix_(j, i) = std::conj(a);
        }
    }
    return op;
}

namespace detail {

inline void write_le_double(std::ostream& out, double value) {
    auto bits = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
}

inline double read_le_double(std::istream& in) {
    char bytes[8];
    in.read(bytes, 8);
    if (!in) {
        throw Error("unexpected end of binary payload");
    }
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return std::bit_cast<double>(bits);
}

} // namespace detail

/// Dump the matrix row-major as (re, im) pairs of little-endian 64-bit floats.
inline void write_matrix_dump(const std::filesystem::path& path, const TruncatedOperator& op) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    const auto& m = op.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            detail::write_le_double(out, m(i, j).real());
            detail::write_le_double(out, m(i, j).imag());
        }
    }
}

inline Eigen::MatrixXcd read_matrix_dump(const std::filesystem::path& path, Eigen::Index dimension) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    Eigen::MatrixXcd m(dimension, dimension);
    for (Eigen::Index i = 0; i < dimension; ++i) {
        for (Eigen::Index j = 0; j < dimension; ++j) {
            const double re = detail::read_le_double(in);
            m(i, j) = complex{re, detail::read_le_double(in)};
        }
    }
    return m;
}

} // namespace starkloc
