#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "starkloc/errors.hpp"
#include "starkloc/kernel.hpp"
#include "starkloc/potential.hpp"
#include "starkloc/spectral.hpp"

namespace starkloc {

/// Theorem checks on eigenvalue pinning and decay need the unit linear field.
inline void require_unit_field(const PotentialSpec& potential) {
    if (potential.is_maryland()) {
        throw WrongPotentialFamily("check requires the linear electric field, got a Maryland potential");
    }
    if (potential.field_slope() != 1.0) {
        throw WrongPotentialFamily("check requires field slope 1, got " +
                                   std::to_string(potential.field_slope()));
    }
}

/// (max - min) / max over a set of nonnegative constants; 0 for an empty or all-zero set.
inline double relative_spread(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
}

/// |a - b| / max(|a|, |b|); 0 when both vanish.
inline double relative_drift(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

struct AsymptoticsReport {
    int half_width = 0;
    double gamma_observed = 0.0;
    /// ||a||_0 at the assembly cutoff; with ||b||_inf it gives the Schur bound on ||T_a + b||.
    double kernel_norm0 = 0.0;
    double perturbation_sup = 0.0;
    std::vector<std::pair<long, double>> per_index_deviation;

    double operator_bound() const noexcept { return kernel_norm0 + perturbation_sup; }
    double gamma_theoretical() const noexcept { return operator_bound() + 1.0; }
    bool pass() const noexcept { return gamma_observed <= gamma_theoretical(); }

    std::size_t violation_count() const {
        const double bound = gamma_theoretical();
        return static_cast<std::size_t>(std::count_if(per_index_deviation.begin(), per_index_deviation.end(),
                                                      [&](const auto& p) { return std::abs(p.second) > bound; }));
    }
};

/// Deviation lambda_n - n over interior paper indices, against ||a||_0 + ||b||_inf + 1.
inline AsymptoticsReport check_eigenvalue_asymptotics(const SpectralData& sd, const HoppingKernel& kernel,
                                                      const PotentialSpec& potential) {
    require_unit_field(potential);
    AsymptoticsReport report;
    report.half_width = sd.half_width;
    report.kernel_norm0 = norm_r(kernel, 0.0, assembly_cutoff(sd.half_width)).partial_sum;
    report.perturbation_sup = potential.perturbation_sup(sd.half_width);
    for (const auto p : sd.interior_positions()) {
        const long n = sd.paper_index(p);
        const double deviation = sd.eigenvalues(p) - static_cast<double>(n);
        report.per_index_deviation.emplace_back(n, deviation);
        report.gamma_observed = std::max(report.gamma_observed, std::abs(deviation));
    }
    return report;
}

/// gamma for the recursive decay inequality: it must dominate
/// |lambda_m - m - b(n)| for all interior m and all n, and be at least 1/2.
inline double bootstrap_gamma(const AsymptoticsReport& report) {
    return std::max(0.5, report.gamma_observed + report.perturbation_sup);
}

struct ModeConstant {
    long paper_index = 0;
    long center = 0;
    double eigenvalue = 0.0;
    /// sup_{n != center} |phi(n)| |n - center|^alpha
    double gamma_center = 0.0;
    /// sup_{n != m} |phi(n)| |n - m|^alpha with m the paper index
    double gamma_index = 0.0;
    /// Least-squares decay exponent; NaN when not fitted.
    double fit_alpha = std::numeric_limits<double>::quiet_NaN();
};

struct ULEReport {
    double alpha = 0.0;
    double gamma_alpha = 0.0;
    double gamma_alpha_index = 0.0;
    std::vector<ModeConstant> modes;
};

struct ULEOptions {
    /// Restrict to interior modes with |center| <= this radius (used to compare
    /// runs at different N on a common set of modes).
    std::optional<long> max_center_radius;
    /// Amplitudes below this are treated as roundoff and left out of decay fits.
    double fit_floor = 1e-13;
};

namespace detail {

inline double fit_decay_exponent(const Eigen::Ref<const Eigen::VectorXcd>& phi, long center, int half_width,
                                 double floor) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        const long dist = std::abs(static_cast<long>(i) - half_width - center);
        const double mod = std::abs(phi(i));
        if (dist < 2 || 2 * dist > half_width || !(mod > floor)) {
            continue;
        }
        const double x = std::log(static_cast<double>(dist));
        const double y = std::log(mod);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    const double denom = count * sxx - sx * sx;
    if (count < 3 || denom <= 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return -(count * sxy - sx * sy) / denom;
}

} // namespace detail

inline ULEReport ule_constants(const SpectralData& sd, double alpha, const ULEOptions& options = {}) {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("decay exponent alpha must be > 0");
    }
    ULEReport report;
    report.alpha = alpha;
    for (const auto p : sd.interior_positions()) {
        const long center = sd.centers[static_cast<std::size_t>(p)];
        if (options.max_center_radius && std::abs(center) > *options.max_center_radius) {
            continue;
        }
        ModeConstant mode;
        mode.paper_index = sd.paper_index(p);
        mode.center = center;
        mode.eigenvalue = sd.eigenvalues(p);
        const auto phi = sd.eigenvectors.col(p);
        for (Eigen::Index i = 0; i < phi.size(); ++i) {
            const long site = sd.site_of_row(i);
            const double mod = std::abs(phi(i));
            if (site != center) {
                mode.gamma_center = std::max(mode.gamma_center,
                                             mod * std::pow(static_cast<double>(std::abs(site - center)), alpha));
            }
            if (site != mode.paper_index) {
                mode.gamma_index = std::max(
                    mode.gamma_index, mod * std::pow(static_cast<double>(std::abs(site - mode.paper_index)), alpha));
            }
        }
        if (!sd.is_degenerate(p)) {
            mode.fit_alpha = detail::fit_decay_exponent(phi, center, sd.half_width, options.fit_floor);
        }
        report.gamma_alpha = std::max(report.gamma_alpha, mode.gamma_center);
        report.gamma_alpha_index = std::max(report.gamma_alpha_index, mode.gamma_index);
        report.modes.push_back(mode);
    }
    if (report.modes.empty()) {
        throw NoInteriorModes("no interior modes at N=" + std::to_string(sd.half_width) + " with window " +
                              std::to_string(sd.window));
    }
    return report;
}

struct BootstrapViolation {
    long paper_index = 0;
    long site = 0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct BootstrapResult {
    double gamma = 0.0;
    double base_slack = 1e-8;
    /// sum_{|k| > 2N} |a(k)|, the part of the convolution no box site can see.
    double kernel_tail = 0.0;
    std::size_t pairs_checked = 0;
    std::vector<BootstrapViolation> violations;

    bool pass() const noexcept { return violations.empty(); }
};

/**
 Evaluates |phi_m(n)| <= 4 gamma sum_k |a(k)| |phi_m(n-k)| / |m - n| for every
 interior mode (m its paper index) and every box site with |m - n| > 2 gamma.
 Out-of-box amplitudes count as zero; the slack per mode is
 base_slack + kernel_tail * max_n |phi_m(n)|.
 */
inline BootstrapResult bootstrap_inequality_check(const SpectralData& sd, const HoppingKernel& kernel,
                                                  const PotentialSpec& potential, double gamma,
                                                  double base_slack = 1e-8) {
    require_unit_field(potential);
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("bootstrap gamma must be > 0");
    }
    BootstrapResult result;
    result.gamma = gamma;
    result.base_slack = base_slack;
    const long far = 2L * sd.half_width;
    result.kernel_tail = norm_r(kernel, 0.0, far).tail_bound;

    const auto positions = sd.interior_positions();
    const auto d = sd.eigenvectors.rows();
    if (positions.empty() || d == 0) {
        return result;
    }

    Eigen::MatrixXd abs_hopping(d, d);
    const auto hopping = kernel.leading_coefficients(far);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            abs_hopping(i, j) = std::abs(hopping[static_cast<std::size_t>(std::abs(i - j))]);
        }
    }
    Eigen::MatrixXd abs_modes(d, static_cast<Eigen::Index>(positions.size()));
    for (std::size_t c = 0; c < positions.size(); ++c) {
        abs_modes.col(static_cast<Eigen::Index>(c)) = sd.eigenvectors.col(positions[c]).cwiseAbs();
    }
    // subnormal tails are dropped: they change either side by far less than the slack
    abs_modes = (abs_modes.array() < 1e-150).select(0.0, abs_modes);
    const Eigen::MatrixXd convolution = abs_hopping * abs_modes;

    for (std::size_t c = 0; c < positions.size(); ++c) {
        const auto col = static_cast<Eigen::Index>(c);
        const long m = sd.paper_index(positions[c]);
        const double slack = base_slack + result.kernel_tail * abs_modes.col(col).maxCoeff();
        for (Eigen::Index i = 0; i < d; ++i) {
            const long n = sd.site_of_row(i);
            const double distance = static_cast<double>(std::abs(m - n));
            if (!(distance > 2.0 * gamma)) {
                continue;
            }
            ++result.pairs_checked;
            const double lhs = abs_modes(i, col);
            const double rhs = 4.0 * gamma * convolution(i, col) / distance;
            if (lhs > rhs + slack) {
                result.violations.push_back({m, n, lhs, rhs});
            }
        }
    }
    return result;
}

} // namespace starkloc
