#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "starkloc/errors.hpp"
#include "starkloc/lattice_operator.hpp"
#include "starkloc/spectral.hpp"

namespace starkloc {

namespace io {

using json = nlohmann::json;

/// %.17g, enough to round-trip any double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Comma-separated table with a header row. Doubles are written with 17 significant digits.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) {
            throw Error("cannot write " + path.string());
        }
        for (std::size_t i = 0; i < header.size(); ++i) {
            out_ << (i ? "," : "") << header[i];
        }
        out_ << '\n';
    }

    CsvWriter& cell(double x) { return put(format_double(x)); }
    CsvWriter& cell(long x) { return put(std::to_string(x)); }
    CsvWriter& cell(int x) { return put(std::to_string(x)); }
    CsvWriter& cell(const std::string& s) { return put(s); }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& put(const std::string& s) {
        out_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }

    std::ofstream out_;
    bool first_ = true;
};

inline void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << doc.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    return json::parse(in);
}

/// JSON number, or null for NaN / infinity (which JSON cannot carry).
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline std::string spectrum_stem(int half_width) { return "spectrum_N" + std::to_string(half_width); }

/**
 Writes `<stem>.json` (header) and `<stem>.bin` (payload). The payload holds,
 as little-endian float64: the d eigenvalues, the d residuals, then the
 eigenvectors column by column as (re, im) pairs.
 */
inline void write_spectrum(const std::filesystem::path& dir, const SpectralData& sd, const json& provenance,
                           const SpectralOptions& options) {
    const auto stem = spectrum_stem(sd.half_width);
    const auto d = sd.size();
    {
        std::ofstream out(dir / (stem + ".bin"), std::ios::binary);
        if (!out) {
            throw Error("cannot write " + (dir / (stem + ".bin")).string());
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            starkloc::detail::write_le_double(out, sd.eigenvalues(i));
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            starkloc::detail::write_le_double(out, sd.residuals(i));
        }
        for (Eigen::Index c = 0; c < d; ++c) {
            for (Eigen::Index r = 0; r < d; ++r) {
                starkloc::detail::write_le_double(out, sd.eigenvectors(r, c).real());
                starkloc::detail::write_le_double(out, sd.eigenvectors(r, c).imag());
            }
        }
    }
    const auto quality = solver_quality(sd, options);
    json degenerate = json::array();
    for (const auto& [a, b] : sd.degenerate_pairs) {
        degenerate.push_back({sd.paper_index(a), sd.paper_index(b)});
    }
    const json header = {
        {"half_width", sd.half_width},
        {"dimension", d},
        {"provenance", provenance},
        {"payload", stem + ".bin"},
        {"payload_layout", "float64 LE: eigenvalues[d], residuals[d], eigenvectors column-major (re, im)[d*d]"},
        {"anchor", sd.anchor},
        {"anchor_status", to_string(sd.anchor_status)},
        {"window", sd.window},
        {"interior_radius", sd.interior_radius()},
        {"spectral_radius", sd.spectral_radius},
        {"max_residual", quality.max_residual},
        {"residual_bound", quality.residual_bound},
        {"orthonormality_error", quality.orthonormality_error},
        {"tolerances",
         {{"residual", options.residual_tolerance},
          {"orthonormality", options.orthonormality_tolerance},
          {"degeneracy_gap", options.degeneracy_gap}}},
        {"quality_pass", quality.pass()},
        {"degenerate_pairs", degenerate},
        {"max_center_offset", max_center_offset(sd)},
    };
    write_json(dir / (stem + ".json"), header);
}

/// Reload a dump written by write_spectrum; indices, centers and degeneracy flags are recomputed.
inline SpectralData read_spectrum(const std::filesystem::path& dir, int half_width, const SpectralOptions& options) {
    const auto stem = spectrum_stem(half_width);
    const auto header = read_json(dir / (stem + ".json"));
    const auto d = header.at("dimension").get<Eigen::Index>();
    if (header.at("half_width").get<int>() != half_width || d != 2 * half_width + 1) {
        throw Error("spectrum header " + stem + ".json does not match N=" + std::to_string(half_width));
    }
    std::ifstream in(dir / header.at("payload").get<std::string>(), std::ios::binary);
    if (!in) {
        throw Error("cannot read payload of " + stem);
    }
    SpectralData sd;
    sd.half_width = half_width;
    sd.eigenvalues.resize(d);
    sd.residuals.resize(d);
    sd.eigenvectors.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        sd.eigenvalues(i) = starkloc::detail::read_le_double(in);
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        sd.residuals(i) = starkloc::detail::read_le_double(in);
    }
    for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index r = 0; r < d; ++r) {
            const double re = starkloc::detail::read_le_double(in);
            const double im = starkloc::detail::read_le_double(in);
            sd.eigenvectors(r, c) = {re, im};
        }
    }
    if (!in) {
        throw Error("truncated payload in " + stem + ".bin");
    }
    sd.orthonormality_error = header.at("orthonormality_error").get<double>();
    sd.spectral_radius = header.at("spectral_radius").get<double>();
    for (Eigen::Index k = 0; k + 1 < d; ++k) {
        if (sd.eigenvalues(k + 1) - sd.eigenvalues(k) < options.degeneracy_gap) {
            sd.degenerate_pairs.emplace_back(k, k + 1);
        }
    }
    sd = assign_paper_indices(std::move(sd));
    return localization_centers(std::move(sd), header.at("window").get<int>());
}

} // namespace io

} // namespace starkloc
