#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "starkloc/errors.hpp"

namespace starkloc {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Counter-based uniform draw in [0, 1) keyed on (seed, site). The same site
/// always receives the same value, whatever box it is assembled into.
inline double site_uniform(std::uint64_t seed, long site) noexcept {
    const std::uint64_t key =
        detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(site)));
    return static_cast<double>(key >> 11) * 0x1.0p-53;
}

namespace perturbation {

struct None {};

struct Constant {
    double value = 0.0;
};

/// i.i.d. uniform on [-amplitude, amplitude].
struct UniformRandom {
    double amplitude = 0.0;
    std::uint64_t seed = 0;
};

/// b(n) = values[n mod L].
struct Periodic {
    std::vector<double> values;
};

/// b(first_site + i) = values[i]; zero outside the listed range.
struct Explicit {
    long first_site = 0;
    std::vector<double> values;
};

} // namespace perturbation

using Perturbation = std::variant<perturbation::None, perturbation::Constant,
                                  perturbation::UniformRandom, perturbation::Periodic,
                                  perturbation::Explicit>;

inline double evaluate(const Perturbation& b, long site) {
    struct Visitor {
        long n;
        double operator()(const perturbation::None&) const { return 0.0; }
        double operator()(const perturbation::Constant& c) const { return c.value; }
        double operator()(const perturbation::UniformRandom& u) const {
            return u.amplitude * (2.0 * site_uniform(u.seed, n) - 1.0);
        }
        double operator()(const perturbation::Periodic& p) const {
            const long len = static_cast<long>(p.values.size());
            return p.values[static_cast<std::size_t>(((n % len) + len) % len)];
        }
        double operator()(const perturbation::Explicit& e) const {
            const long i = n - e.first_site;
            if (i < 0 || i >= static_cast<long>(e.values.size())) {
                return 0.0;
            }
            return e.values[static_cast<std::size_t>(i)];
        }
    };
    return std::visit(Visitor{site}, b);
}

/// V(n) = coupling * tan(pi (phase + n frequency)).
struct MarylandParams {
    double coupling = 1.0;
    double frequency = 0.0;
    double phase = 0.0;
};

/// Minimum distance of phase + n*frequency from a half-integer, below which a
/// Maryland site is rejected as resonant.
inline constexpr double maryland_resonance_guard = 1e-6;

/**
 On-site potential V(n) + b(n): either a linear field V(n) = slope * n or a
 Maryland potential, plus a bounded perturbation b. The two kinds of V are
 mutually exclusive by construction.
 */
class PotentialSpec {
public:
    PotentialSpec() = default;

    static PotentialSpec linear_field(double slope, Perturbation b = perturbation::None{}) {
        validate(b);
        PotentialSpec spec;
        spec.slope_ = slope;
        spec.perturbation_ = std::move(b);
        return spec;
    }

    static PotentialSpec maryland(MarylandParams params, Perturbation b = perturbation::None{}) {
        validate(b);
        PotentialSpec spec;
        spec.slope_ = 0.0;
        spec.maryland_ = params;
        spec.perturbation_ = std::move(b);
        return spec;
    }

    bool is_maryland() const noexcept { return maryland_.has_value(); }
    double field_slope() const noexcept { return slope_; }
    const std::optional<MarylandParams>& maryland_params() const noexcept { return maryland_; }
    const Perturbation& perturbation() const noexcept { return perturbation_; }

    double field(long site) const {
        if (maryland_) {
            const auto& m = *maryland_;
            return m.coupling * std::tan(std::numbers::pi * (m.phase + static_cast<double>(site) * m.frequency));
        }
        return slope_ * static_cast<double>(site);
    }

    double perturbation_at(long site) const { return evaluate(perturbation_, site); }

    double onsite(long site) const { return field(site) + perturbation_at(site); }

    /// sup over sites -N..N of |b(n)|, recomputed from the perturbation itself.
    double perturbation_sup(int half_width) const {
        double sup = 0.0;
        for (long n = -half_width; n <= half_width; ++n) {
            sup = std::max(sup, std::abs(perturbation_at(n)));
        }
        return sup;
    }

    /// Throws MarylandResonance when a site of the box is too close to a pole.
    void check_resonance(int half_width) const {
        if (!maryland_) {
            return;
        }
        for (long n = -half_width; n <= half_width; ++n) {
            const double x = maryland_->phase + static_cast<double>(n) * maryland_->frequency;
            const double offset = x - 0.5;
            const double distance = std::abs(offset - std::round(offset));
            if (distance <= maryland_resonance_guard) {
                throw MarylandResonance(static_cast<int>(n), distance);
            }
        }
    }

private:
    static void validate(const Perturbation& b) {
        if (const auto* u = std::get_if<perturbation::UniformRandom>(&b)) {
            if (!(u->amplitude >= 0.0) || !std::isfinite(u->amplitude)) {
                throw InvalidPotential("uniform perturbation amplitude must be finite and >= 0");
            }
        }
        if (const auto* p = std::get_if<perturbation::Periodic>(&b)) {
            if (p->values.empty()) {
                throw InvalidPotential("periodic perturbation needs at least one value");
            }
        }
    }

    double slope_ = 1.0;
    std::optional<MarylandParams> maryland_;
    Perturbation perturbation_ = perturbation::None{};
};

} // namespace starkloc
