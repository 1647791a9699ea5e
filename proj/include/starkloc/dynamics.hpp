#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "starkloc/errors.hpp"
#include "starkloc/localization.hpp"
#include "starkloc/parallel.hpp"
#include "starkloc/spectral.hpp"

namespace starkloc {

/// State e^{-itH} psi on the box; amplitudes are indexed by row (site = row - N).
struct WavePacket {
    Eigen::VectorXcd amplitudes;
    double time = 0.0;
    long source = 0;
    int half_width = 0;

    double norm() const { return amplitudes.norm(); }
    complex at(long site) const { return amplitudes(static_cast<Eigen::Index>(site + half_width)); }
};

namespace detail {

inline constexpr double negligible_amplitude = 1e-150;

inline void require_interior_source(const SpectralData& sd, long k) {
    if (!sd.site_is_interior(k)) {
        throw SourceOutsideInterior(static_cast<int>(k), static_cast<int>(sd.interior_radius()));
    }
}

inline Eigen::VectorXcd propagate_coefficients(const SpectralData& sd, const Eigen::VectorXcd& coefficients,
                                               double t) {
    Eigen::VectorXcd phased(coefficients.size());
    for (Eigen::Index m = 0; m < coefficients.size(); ++m) {
        phased(m) = std::polar(1.0, -sd.eigenvalues(m) * t) * coefficients(m);
    }
    return sd.eigenvectors * phased;
}

} // namespace detail

/// e^{-itH} delta_k: amplitude(n) = sum_m e^{-i lambda_m t} conj(phi_m(k)) phi_m(n).
inline WavePacket evolve(const SpectralData& sd, long k, double t) {
    detail::require_interior_source(sd, k);
    const Eigen::VectorXcd coefficients = sd.eigenvectors.row(sd.row_of_site(k)).adjoint();
    return {detail::propagate_coefficients(sd, coefficients, t), t, k, sd.half_width};
}

/// Evolve an existing packet by dt after re-expanding it in the eigenbasis.
inline WavePacket evolve(const SpectralData& sd, const WavePacket& packet, double dt) {
    const Eigen::VectorXcd coefficients = sd.eigenvectors.adjoint() * packet.amplitudes;
    return {detail::propagate_coefficients(sd, coefficients, dt), packet.time + dt, packet.source, sd.half_width};
}

/// sum over box sites of |n|^q |amplitude(n)|^2.
inline double moment(const WavePacket& packet, double q) {
    if (!(q > 0.0)) {
        throw std::invalid_argument("moment order q must be > 0");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < packet.amplitudes.size(); ++i) {
        const long site = static_cast<long>(i) - packet.half_width;
        if (site != 0) {
            total += std::pow(static_cast<double>(std::abs(site)), q) * std::norm(packet.amplitudes(i));
        }
    }
    return total;
}

/**
 Sampling times for moment curves: the regular grid {0, step, ..., horizon}
 merged with `quasi_random_count` points of the golden-ratio sequence scaled
 to [0, quasi_random_horizon], sorted ascending.
 */
struct TimeGrid {
    double step = 0.05;
    double horizon = 1000.0;
    int quasi_random_count = 100;
    double quasi_random_horizon = 1e6;

    std::vector<double> times() const {
        std::vector<double> out;
        if (step > 0.0) {
            const auto count = static_cast<long>(std::floor(horizon / step + 1e-9));
            for (long i = 0; i <= count; ++i) {
                out.push_back(static_cast<double>(i) * step);
            }
        } else {
            out.push_back(0.0);
        }
        const double golden = std::numbers::phi - 1.0;
        for (int j = 1; j <= quasi_random_count; ++j) {
            const double x = static_cast<double>(j) * golden;
            out.push_back(quasi_random_horizon * (x - std::floor(x)));
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

struct MomentSeries {
    double q = 0.0;
    long source = 0;
    std::vector<double> times;
    std::vector<double> values;
    double running_sup = 0.0;
};

struct EnvelopeMoment {
    double q = 0.0;
    /// E_q = sum_n |n|^q B(n,k)^2
    double value = 0.0;
    /// share of E_q carried by sites with |n| > N - W
    double boundary_share = 0.0;
};

/// Time-independent majorant B(n,k) = sum_m |phi_m(k)| |phi_m(n)| of |<e^{-itH} delta_k, delta_n>|.
struct EnvelopeBound {
    long source = 0;
    int half_width = 0;
    Eigen::VectorXd majorant;
    std::vector<EnvelopeMoment> moments;

    double at(long site) const { return majorant(static_cast<Eigen::Index>(site + half_width)); }
    double diagonal() const { return at(source); }

    const EnvelopeMoment* find(double q) const {
        for (const auto& m : moments) {
            if (m.q == q) {
                return &m;
            }
        }
        return nullptr;
    }
};

inline EnvelopeBound envelope(const SpectralData& sd, long k, std::span<const double> q_list) {
    detail::require_interior_source(sd, k);
    EnvelopeBound env;
    env.source = k;
    env.half_width = sd.half_width;
    const Eigen::VectorXd weights = sd.eigenvectors.row(sd.row_of_site(k)).cwiseAbs().transpose();
    env.majorant = sd.eigenvectors.cwiseAbs() * weights;
    for (const double q : q_list) {
        if (!(q > 0.0)) {
            throw std::invalid_argument("moment order q must be > 0");
        }
        double total = 0.0;
        double boundary = 0.0;
        for (Eigen::Index i = 0; i < env.majorant.size(); ++i) {
            const long site = sd.site_of_row(i);
            if (site == 0) {
                continue;
            }
            const double term = std::pow(static_cast<double>(std::abs(site)), q) * env.majorant(i) * env.majorant(i);
            total += term;
            if (!sd.site_is_interior(site)) {
                boundary += term;
            }
        }
        env.moments.push_back({q, total, total > 0.0 ? boundary / total : 0.0});
    }
    return env;
}

struct MomentRunOptions {
    unsigned threads = 1;
    /// Number of time points propagated together in one matrix product.
    Eigen::Index block = 64;
    /// When set, the run also measures max_{t,n} (|amplitude(n,t)| - B(n,k)).
    const EnvelopeBound* envelope = nullptr;
};

struct MomentRun {
    std::vector<MomentSeries> series;
    double max_norm_defect = 0.0;
    /// max over sampled (t, n) of |amplitude| - B(n,k); <= 0 up to roundoff when dominated.
    std::optional<double> max_domination_excess;
};

/**
 Moment curves M_q(t) for the packet launched at site k, one series per q.
 Blocks of time points are independent; the result does not depend on the
 thread count.
 */
inline MomentRun moment_series(const SpectralData& sd, long k, std::span<const double> q_list,
                               const std::vector<double>& times, const MomentRunOptions& options = {}) {
    detail::require_interior_source(sd, k);
    for (const double q : q_list) {
        if (!(q > 0.0)) {
            throw std::invalid_argument("moment order q must be > 0");
        }
    }
    const auto d = sd.eigenvectors.rows();
    // Far tails of fast-decaying eigenvectors sit in the subnormal range, where
    // arithmetic is orders of magnitude slower; entries that small cannot move
    // any moment, so the working copies drop them.
    const auto drop_tiny = [](auto x) { return std::abs(x) < detail::negligible_amplitude ? decltype(x)(0) : x; };
    const Eigen::MatrixXcd vectors = sd.eigenvectors.unaryExpr(drop_tiny);
    const Eigen::VectorXcd coefficients = vectors.row(sd.row_of_site(k)).adjoint();
    const bool real_basis = vectors.imag().cwiseAbs().maxCoeff() == 0.0;
    const Eigen::MatrixXd basis = real_basis ? Eigen::MatrixXd(vectors.real()) : Eigen::MatrixXd();

    Eigen::MatrixXd site_weights(d, static_cast<Eigen::Index>(q_list.size()));
    for (Eigen::Index i = 0; i < d; ++i) {
        const double dist = static_cast<double>(std::abs(sd.site_of_row(i)));
        for (std::size_t j = 0; j < q_list.size(); ++j) {
            site_weights(i, static_cast<Eigen::Index>(j)) = dist == 0.0 ? 0.0 : std::pow(dist, q_list[j]);
        }
    }

    const auto total = static_cast<Eigen::Index>(times.size());
    const Eigen::Index block = std::max<Eigen::Index>(options.block, 1);
    const auto block_count = static_cast<std::size_t>((total + block - 1) / block);

    Eigen::MatrixXd values(total, static_cast<Eigen::Index>(q_list.size()));
    std::vector<double> norm_defect(block_count, 0.0);
    std::vector<double> excess(block_count, -std::numeric_limits<double>::infinity());

    parallel_for(block_count, options.threads, [&](std::size_t b) {
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * block;
        const Eigen::Index width = std::min(block, total - begin);
        Eigen::MatrixXcd phased(d, width);
        for (Eigen::Index j = 0; j < width; ++j) {
            const double t = times[static_cast<std::size_t>(begin + j)];
            for (Eigen::Index m = 0; m < d; ++m) {
                phased(m, j) = std::polar(1.0, -sd.eigenvalues(m) * t) * coefficients(m);
            }
        }
        Eigen::MatrixXd probabilities;
        if (real_basis) {
            // two real products cost half of one complex product; contiguous
            // copies keep Eigen on its vectorized kernel
            const Eigen::MatrixXd re_in = phased.real();
            const Eigen::MatrixXd im_in = phased.imag();
            const Eigen::MatrixXd re = basis * re_in;
            const Eigen::MatrixXd im = basis * im_in;
            probabilities = re.cwiseAbs2() + im.cwiseAbs2();
        } else {
            probabilities = (vectors * phased).cwiseAbs2();
        }
        values.middleRows(begin, width) = probabilities.transpose() * site_weights;
        for (Eigen::Index j = 0; j < width; ++j) {
            norm_defect[b] = std::max(norm_defect[b], std::abs(std::sqrt(probabilities.col(j).sum()) - 1.0));
            if (options.envelope) {
                const double e = (probabilities.col(j).cwiseSqrt() - options.envelope->majorant).maxCoeff();
                excess[b] = std::max(excess[b], e);
            }
        }
    });

    MomentRun run;
    for (std::size_t j = 0; j < q_list.size(); ++j) {
        MomentSeries s;
        s.q = q_list[j];
        s.source = k;
        s.times = times;
        s.values.resize(times.size());
        for (Eigen::Index i = 0; i < total; ++i) {
            s.values[static_cast<std::size_t>(i)] = values(i, static_cast<Eigen::Index>(j));
        }
        s.running_sup = s.values.empty() ? 0.0 : *std::max_element(s.values.begin(), s.values.end());
        run.series.push_back(std::move(s));
    }
    run.max_norm_defect = norm_defect.empty() ? 0.0 : *std::max_element(norm_defect.begin(), norm_defect.end());
    if (options.envelope) {
        run.max_domination_excess =
            excess.empty() ? 0.0 : *std::max_element(excess.begin(), excess.end());
    }
    return run;
}

enum class VerdictStatus { HypothesisNotSatisfied, Inconclusive, NoDoubling, Bounded, Unstable };

inline std::string_view to_string(VerdictStatus status) {
    switch (status) {
    case VerdictStatus::HypothesisNotSatisfied: return "hypothesis not satisfied";
    case VerdictStatus::Inconclusive: return "inconclusive";
    case VerdictStatus::NoDoubling: return "n/a";
    case VerdictStatus::Bounded: return "bounded";
    case VerdictStatus::Unstable: return "unstable";
    }
    return "unknown";
}

struct VerdictThresholds {
    double boundary_share = 0.01;
    double doubling_ratio = 1.1;
};

/// Outcome of the "decay exponent alpha > 3/2 + q/2 implies bounded q-moments" check.
struct MomentVerdict {
    double alpha = 0.0;
    double q = 0.0;
    long source = 0;
    bool hypothesis = false;
    double gamma_alpha = 0.0;
    double envelope_moment = 0.0;
    double boundary_share = 0.0;
    std::optional<double> doubling_ratio;
    VerdictStatus status = VerdictStatus::HypothesisNotSatisfied;

    /// Only an unstable doubling ratio under a satisfied hypothesis counts as failure.
    bool pass() const noexcept { return status != VerdictStatus::Unstable; }
};

inline bool ule_hypothesis(double alpha, double q) { return alpha > 1.5 + q / 2.0; }

/**
 `base` is the envelope at half-width N, `doubled` (optional) the envelope at
 2N for the same source. The finiteness surrogate is E_q(2N) / E_q(N) below
 the threshold, asserted only when the hypothesis holds and the boundary share
 is small enough to trust the box.
 */
inline MomentVerdict ule_implies_bounded_moments_check(const ULEReport& ule, double q, const EnvelopeBound& base,
                                                       const EnvelopeBound* doubled = nullptr,
                                                       const VerdictThresholds& thresholds = {}) {
    MomentVerdict v;
    v.alpha = ule.alpha;
    v.q = q;
    v.source = base.source;
    v.gamma_alpha = ule.gamma_alpha;
    v.hypothesis = ule_hypothesis(ule.alpha, q);
    const auto* em = base.find(q);
    if (!em) {
        throw std::invalid_argument("envelope lacks moment order q");
    }
    v.envelope_moment = em->value;
    v.boundary_share = em->boundary_share;
    if (doubled) {
        const auto* dm = doubled->find(q);
        if (!dm) {
            throw std::invalid_argument("doubled envelope lacks moment order q");
        }
        if (em->value > 0.0) {
            v.doubling_ratio = dm->value / em->value;
        } else {
            v.doubling_ratio = dm->value == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        }
    }

    if (!v.hypothesis) {
        v.status = VerdictStatus::HypothesisNotSatisfied;
    } else if (v.boundary_share >= thresholds.boundary_share) {
        v.status = VerdictStatus::Inconclusive;
    } else if (!v.doubling_ratio) {
        v.status = VerdictStatus::NoDoubling;
    } else {
        v.status = *v.doubling_ratio < thresholds.doubling_ratio ? VerdictStatus::Bounded : VerdictStatus::Unstable;
    }
    return v;
}

} // namespace starkloc
