#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "starkloc/errors.hpp"

namespace starkloc {

using complex = std::complex<double>;

enum class KernelFamily { NearestNeighbor, PowerLaw, FiniteSupport, Custom };

inline std::string_view to_string(KernelFamily family) {
    switch (family) {
    case KernelFamily::NearestNeighbor: return "nearest_neighbor";
    case KernelFamily::PowerLaw: return "power_law";
    case KernelFamily::FiniteSupport: return "finite_support";
    case KernelFamily::Custom: return "custom";
    }
    return "unknown";
}

/// Parameters consumed by build_kernel. Only the fields relevant to the
/// requested family are read.
struct KernelParams {
    /// PowerLaw: a(m) = |m|^-exponent, exponent > 1.
    double exponent = 0.0;
    /// FiniteSupport: a(1), a(2), ..., a(M); the m < 0 half is the conjugate mirror.
    std::vector<complex> positive_half;
    /// Custom: explicit (m, a(m)) pairs. A missing mirror entry is filled in by
    /// conjugation; a supplied one must match.
    std::vector<std::pair<long, complex>> entries;
};

/**
 Hopping kernel a(m) of the translation-invariant operator
 (T_a u)(n) = sum_m a(n - m) u(m).

 Every kernel satisfies a(0) = 0 and a(-m) = conj(a(m)). Finite kernels keep
 their nonzero coefficients explicitly; PowerLaw kernels are generated on
 demand and have infinite support, so callers pick a cutoff radius when they
 need a finite object (see assembly_cutoff).
 */
class HoppingKernel {
public:
    /// The zero kernel.
    HoppingKernel() = default;

    KernelFamily family() const noexcept { return family_; }
    double exponent() const noexcept { return exponent_; }
    bool has_finite_support() const noexcept { return family_ != KernelFamily::PowerLaw; }

    /// Largest |m| with a(m) != 0; nullopt for infinite support.
    std::optional<long> support_radius() const {
        if (!has_finite_support()) {
            return std::nullopt;
        }
        return coefficients_.empty() ? 0L : coefficients_.rbegin()->first;
    }

    complex operator()(long m) const {
        if (m == 0) {
            return {0.0, 0.0};
        }
        if (family_ == KernelFamily::PowerLaw) {
            return {std::pow(static_cast<double>(m < 0 ? -m : m), -exponent_), 0.0};
        }
        auto it = coefficients_.find(m < 0 ? -m : m);
        if (it == coefficients_.end()) {
            return {0.0, 0.0};
        }
        return m < 0 ? std::conj(it->second) : it->second;
    }

    bool is_real() const {
        for (const auto& [m, value] : coefficients_) {
            if (value.imag() != 0.0) {
                return false;
            }
        }
        return true;
    }

    bool is_zero() const noexcept { return has_finite_support() && coefficients_.empty(); }

    /// Nonzero coefficients a(m) for m > 0 (finite kernels only; empty for PowerLaw).
    const std::map<long, complex>& positive_coefficients() const noexcept { return coefficients_; }

    /// a(0), a(1), ..., a(cutoff).
    std::vector<complex> leading_coefficients(long cutoff) const {
        std::vector<complex> out(static_cast<std::size_t>(cutoff) + 1);
        for (long m = 1; m <= cutoff; ++m) {
            out[static_cast<std::size_t>(m)] = (*this)(m);
        }
        return out;
    }

private:
    friend HoppingKernel build_kernel(KernelFamily, const KernelParams&);

    KernelFamily family_ = KernelFamily::Custom;
    double exponent_ = 0.0;
    std::map<long, complex> coefficients_; // m > 0 only
};

namespace detail {

inline bool conjugate_match(complex a, complex b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - std::conj(b)) <= 1e-12 * scale;
}

} // namespace detail

/// Construct a validated kernel. Throws InvalidKernel on a(0) != 0, on a
/// conjugate-symmetry violation, or on a PowerLaw exponent <= 1.
inline HoppingKernel build_kernel(KernelFamily family, const KernelParams& params = {}) {
    HoppingKernel kernel;
    kernel.family_ = family;
    switch (family) {
    case KernelFamily::NearestNeighbor:
        kernel.coefficients_[1] = 1.0;
        break;
    case KernelFamily::PowerLaw:
        if (!(params.exponent > 1.0) || !std::isfinite(params.exponent)) {
            throw InvalidKernel("power-law exponent must be > 1, got " +
                                std::to_string(params.exponent));
        }
        kernel.exponent_ = params.exponent;
        break;
    case KernelFamily::FiniteSupport:
        for (std::size_t i = 0; i < params.positive_half.size(); ++i) {
            if (params.positive_half[i] != complex{}) {
                kernel.coefficients_[static_cast<long>(i) + 1] = params.positive_half[i];
            }
        }
        break;
    case KernelFamily::Custom: {
        std::map<long, complex> given;
        for (const auto& [m, value] : params.entries) {
            if (m == 0) {
                if (value != complex{}) {
                    throw InvalidKernel("a(0) must vanish");
                }
                continue;
            }
            if (!given.emplace(m, value).second) {
                throw InvalidKernel("duplicate kernel entry for offset " + std::to_string(m));
            }
        }
        for (const auto& [m, value] : given) {
            auto mirror = given.find(-m);
            if (mirror != given.end() && !detail::conjugate_match(value, mirror->second)) {
                throw InvalidKernel("conjugate symmetry a(m) = conj(a(-m)) violated at m = " +
                                    std::to_string(m));
            }
            const long key = m < 0 ? -m : m;
            const complex positive = m < 0 ? std::conj(value) : value;
            if (positive != complex{} && !kernel.coefficients_.contains(key)) {
                kernel.coefficients_[key] = positive;
            }
        }
        break;
    }
    }
    return kernel;
}

inline HoppingKernel nearest_neighbor_kernel() { return build_kernel(KernelFamily::NearestNeighbor); }

inline HoppingKernel power_law_kernel(double exponent) {
    KernelParams params;
    params.exponent = exponent;
    return build_kernel(KernelFamily::PowerLaw, params);
}

/// Cutoff radius used when assembling on sites {-N..N}; offsets beyond 2N
/// never connect two sites of the box.
constexpr long assembly_cutoff(int half_width) noexcept { return 2L * half_width + 1; }

/// Weighted norm sum_{0<|m|<=cutoff} |a(m)| |m|^r together with a bound on
/// the remainder sum over |m| > cutoff.
struct KernelNorm {
    double partial_sum = 0.0;
    /// Exact remainder for finite kernels, the integral majorant
    /// 2 * int_cutoff^inf x^(r-p) dx for PowerLaw, +inf when the norm diverges.
    double tail_bound = 0.0;

    double upper_bound() const noexcept { return partial_sum + tail_bound; }
    bool finite() const noexcept { return std::isfinite(tail_bound); }
};

inline KernelNorm norm_r(const HoppingKernel& kernel, double r, long cutoff) {
    if (!(r >= 0.0)) {
        throw std::invalid_argument("norm exponent r must be nonnegative");
    }
    if (cutoff < 0) {
        throw std::invalid_argument("norm cutoff must be nonnegative");
    }
    KernelNorm out;
    if (kernel.family() == KernelFamily::PowerLaw) {
        const double power = r - kernel.exponent();
        // descending order keeps the small terms from being swamped
        for (long m = cutoff; m >= 1; --m) {
            out.partial_sum += 2.0 * std::pow(static_cast<double>(m), power);
        }
        if (power < -1.0) {
            const double start = std::max<double>(static_cast<double>(cutoff), 1.0);
            const double head = cutoff == 0 ? 2.0 : 0.0; // m = 1 terms when nothing was summed
            out.tail_bound = head + 2.0 * std::pow(start, power + 1.0) / (-power - 1.0);
        } else {
            out.tail_bound = std::numeric_limits<double>::infinity();
        }
        return out;
    }
    for (const auto& [m, value] : kernel.positive_coefficients()) {
        const double term = 2.0 * std::abs(value) * std::pow(static_cast<double>(m), r);
        (m <= cutoff ? out.partial_sum : out.tail_bound) += term;
    }
    return out;
}

} // namespace starkloc
