#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "starkloc/errors.hpp"
#include "starkloc/kernel.hpp"
#include "starkloc/lattice_operator.hpp"

namespace starkloc {

struct SpectralOptions {
    double residual_tolerance = 1e-10;
    double orthonormality_tolerance = 1e-10;
    double degeneracy_gap = 1e-12;
    /// Interior window W; computed by interior_window() when unset.
    std::optional<int> window;
};

enum class AnchorStatus { Regular, AllNegative, AllPositive };

inline std::string_view to_string(AnchorStatus status) {
    switch (status) {
    case AnchorStatus::Regular: return "regular";
    case AnchorStatus::AllNegative: return "all_negative";
    case AnchorStatus::AllPositive: return "all_positive";
    }
    return "unknown";
}

/**
 Complete eigendecomposition of a truncated operator.

 Eigenvalues are ascending and column k of `eigenvectors` belongs to
 eigenvalue k. Paper index n sits at position n + anchor, so index 0 is the
 smallest nonnegative eigenvalue. Each eigenvector is phase-fixed so that its
 largest-modulus entry is real and positive.
 */
struct SpectralData {
    int half_width = 0;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXcd eigenvectors;

    Eigen::Index anchor = 0;
    AnchorStatus anchor_status = AnchorStatus::Regular;

    std::vector<long> centers;
    std::vector<bool> interior_mask;
    int window = 0;

    Eigen::VectorXd residuals;
    double orthonormality_error = 0.0;
    double spectral_radius = 0.0;
    /// Consecutive positions whose eigenvalue gap is below the degeneracy threshold.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> degenerate_pairs;

    Eigen::Index size() const noexcept { return eigenvalues.size(); }
    long site_of_row(Eigen::Index row) const noexcept { return static_cast<long>(row) - half_width; }
    Eigen::Index row_of_site(long site) const noexcept { return static_cast<Eigen::Index>(site + half_width); }
    long interior_radius() const noexcept { return static_cast<long>(half_width) - window; }
    bool site_is_interior(long site) const noexcept {
        return std::abs(site) <= interior_radius();
    }

    long paper_index(Eigen::Index position) const noexcept { return static_cast<long>(position - anchor); }
    std::optional<Eigen::Index> position_of(long index) const noexcept {
        const auto pos = static_cast<Eigen::Index>(index) + anchor;
        if (pos < 0 || pos >= size()) {
            return std::nullopt;
        }
        return pos;
    }

    bool is_degenerate(Eigen::Index position) const {
        return std::any_of(degenerate_pairs.begin(), degenerate_pairs.end(), [&](const auto& p) {
            return p.first == position || p.second == position;
        });
    }

    double max_residual() const { return residuals.size() ? residuals.maxCoeff() : 0.0; }

    /// Residual bound tol * max(1, spectral radius).
    double residual_bound(double tolerance) const { return tolerance * std::max(1.0, spectral_radius); }

    std::vector<Eigen::Index> interior_positions() const {
        std::vector<Eigen::Index> out;
        for (Eigen::Index p = 0; p < size(); ++p) {
            if (interior_mask[static_cast<std::size_t>(p)]) {
                out.push_back(p);
            }
        }
        return out;
    }
};

/// W = max(ceil(N/4), ceil(10 (||a||_0 + ||b||_inf + 1))).
inline int interior_window(int half_width, double kernel_norm0, double perturbation_sup) {
    const double quarter = std::ceil(half_width / 4.0);
    const double scale = std::ceil(10.0 * (kernel_norm0 + perturbation_sup + 1.0));
    return static_cast<int>(std::max(quarter, scale));
}

inline int interior_window(const TruncatedOperator& op) {
    const double norm0 = norm_r(op.kernel(), 0.0, assembly_cutoff(op.half_width())).partial_sum;
    return interior_window(op.half_width(), norm0, op.potential().perturbation_sup(op.half_width()));
}

/// Relative accuracy at which an eigenvalue counts as zero when anchoring.
inline constexpr double anchor_zero_tolerance = 1e-10;

/**
 Anchor paper index 0 at the smallest nonnegative eigenvalue. Zero counts as
 nonnegative; an eigenvalue within anchor_zero_tolerance * max(1, max|lambda|)
 below zero is taken to be zero, since the solver cannot resolve its sign.
 */
inline SpectralData assign_paper_indices(SpectralData sd) {
    const auto& ev = sd.eigenvalues;
    const double radius = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
    const double zero = -anchor_zero_tolerance * std::max(1.0, radius);
    const auto* first_nonneg = std::find_if(ev.data(), ev.data() + ev.size(), [&](double x) { return x >= zero; });
    const auto pos = static_cast<Eigen::Index>(first_nonneg - ev.data());
    if (pos == ev.size()) {
        sd.anchor = std::max<Eigen::Index>(ev.size() - 1, 0);
        sd.anchor_status = AnchorStatus::AllNegative;
    } else {
        sd.anchor = pos;
        sd.anchor_status = pos == 0 ? AnchorStatus::AllPositive : AnchorStatus::Regular;
    }
    return sd;
}

/// Moduli within this relative distance of the maximum count as tied.
inline constexpr double center_tie_tolerance = 1e-10;

/// Center of each eigenvector = site of maximal modulus; ties (up to
/// center_tie_tolerance) go to the smaller site. Interior iff |center| <= N - window.
inline SpectralData localization_centers(SpectralData sd, int window) {
    sd.window = window;
    sd.centers.assign(static_cast<std::size_t>(sd.eigenvectors.cols()), 0);
    sd.interior_mask.assign(static_cast<std::size_t>(sd.eigenvectors.cols()), false);
    for (Eigen::Index k = 0; k < sd.eigenvectors.cols(); ++k) {
        const Eigen::VectorXd mod = sd.eigenvectors.col(k).cwiseAbs();
        const double threshold = mod.maxCoeff() * (1.0 - center_tie_tolerance);
        Eigen::Index best = 0;
        while (mod(best) < threshold) {
            ++best;
        }
        const long center = sd.site_of_row(best);
        sd.centers[static_cast<std::size_t>(k)] = center;
        sd.interior_mask[static_cast<std::size_t>(k)] = sd.site_is_interior(center);
    }
    return sd;
}

namespace detail {

template <class Matrix>
void fix_phases(Matrix& vectors) {
    for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
        Eigen::Index best = 0;
        double best_mod = -1.0;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            const double mod = std::abs(vectors(i, k));
            if (mod > best_mod) {
                best_mod = mod;
                best = i;
            }
        }
        if (best_mod > 0.0) {
            using Scalar = typename Matrix::Scalar;
            if constexpr (std::is_same_v<Scalar, double>) {
                if (vectors(best, k) < 0.0) {
                    vectors.col(k) *= -1.0;
                }
            } else {
                vectors.col(k) *= Scalar(std::conj(vectors(best, k)) / best_mod);
            }
        }
    }
}

template <class Matrix>
void fill_quality(SpectralData& sd, const Matrix& h, const Matrix& vectors) {
    const Matrix defect = h * vectors - vectors * sd.eigenvalues.asDiagonal();
    sd.residuals = defect.colwise().norm().transpose();
    const Matrix gram = vectors.adjoint() * vectors;
    sd.orthonormality_error = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

} // namespace detail

/**
 Full Hermitian eigendecomposition (Householder tridiagonalization followed by
 implicit-shift QL/QR iteration) with residuals, orthonormality error, paper
 indices and localization centers filled in. Real operators take the real
 symmetric path.
 */
inline SpectralData diagonalize(const TruncatedOperator& op, const SpectralOptions& options = {}) {
    SpectralData sd;
    sd.half_width = op.half_width();
    const auto provenance = [&] {
        return "N=" + std::to_string(op.half_width()) + ", kernel=" +
               std::string(to_string(op.kernel().family()));
    };

    if (op.is_real()) {
        const Eigen::MatrixXd h = op.matrix().real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
        if (solver.info() != Eigen::Success) {
            throw ConvergenceFailure("eigensolver did not converge (" + provenance() + ")");
        }
        sd.eigenvalues = solver.eigenvalues();
        Eigen::MatrixXd vectors = solver.eigenvectors();
        detail::fix_phases(vectors);
        detail::fill_quality(sd, h, vectors);
        sd.eigenvectors = vectors.cast<complex>();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(op.matrix());
        if (solver.info() != Eigen::Success) {
            throw ConvergenceFailure("eigensolver did not converge (" + provenance() + ")");
        }
        sd.eigenvalues = solver.eigenvalues();
        Eigen::MatrixXcd vectors = solver.eigenvectors();
        detail::fix_phases(vectors);
        detail::fill_quality(sd, op.matrix(), vectors);
        sd.eigenvectors = std::move(vectors);
    }

    sd.spectral_radius = sd.eigenvalues.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k + 1 < sd.size(); ++k) {
        if (sd.eigenvalues(k + 1) - sd.eigenvalues(k) < options.degeneracy_gap) {
            sd.degenerate_pairs.emplace_back(k, k + 1);
        }
    }
    sd = assign_paper_indices(std::move(sd));
    return localization_centers(std::move(sd), options.window.value_or(interior_window(op)));
}

/// Residual and orthonormality checks against the given tolerances.
struct SolverQuality {
    double max_residual = 0.0;
    double residual_bound = 0.0;
    double orthonormality_error = 0.0;
    double orthonormality_tolerance = 0.0;

    bool pass() const noexcept {
        return max_residual <= residual_bound && orthonormality_error <= orthonormality_tolerance;
    }
};

inline SolverQuality solver_quality(const SpectralData& sd, const SpectralOptions& options = {}) {
    return {sd.max_residual(), sd.residual_bound(options.residual_tolerance), sd.orthonormality_error,
            options.orthonormality_tolerance};
}

/// Largest |center(paper index n) - n| over interior modes.
inline long max_center_offset(const SpectralData& sd) {
    long worst = 0;
    for (Eigen::Index p = 0; p < sd.size(); ++p) {
        if (sd.interior_mask[static_cast<std::size_t>(p)]) {
            worst = std::max(worst, std::abs(sd.centers[static_cast<std::size_t>(p)] - sd.paper_index(p)));
        }
    }
    return worst;
}

} // namespace starkloc
