#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "starkloc/config.hpp"
#include "starkloc/dynamics.hpp"
#include "starkloc/io.hpp"
#include "starkloc/localization.hpp"
#include "starkloc/parallel.hpp"
#include "starkloc/spectral.hpp"
#include "starkloc/version.hpp"

namespace starkloc {

enum class Stage { Spectrum, Asymptotics, Ule, Bootstrap, Dynamics, Study };

inline constexpr Stage all_stages[] = {Stage::Spectrum, Stage::Asymptotics, Stage::Ule,
                                      Stage::Bootstrap, Stage::Dynamics,    Stage::Study};

inline std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::Spectrum: return "spectrum";
    case Stage::Asymptotics: return "asymptotics";
    case Stage::Ule: return "ule";
    case Stage::Bootstrap: return "bootstrap";
    case Stage::Dynamics: return "dynamics";
    case Stage::Study: return "study";
    }
    return "unknown";
}

struct RunOptions {
    /// Stages the caller asks for; each still has to be enabled by the config.
    std::set<Stage> stages{std::begin(all_stages), std::end(all_stages)};
    /// Reload spectra from a previous run with the same config hash instead of re-diagonalizing.
    bool reuse_spectra = true;
    /// Fail the spectrum stage instead of diagonalizing when no reusable dumps exist.
    bool require_stored_spectra = false;
    std::string command = "run";
};

struct StageRecord {
    Stage stage = Stage::Spectrum;
    /// ok, reused, failed, skipped or disabled
    std::string status = "disabled";
    std::string error;
    double seconds = 0.0;
};

struct RunResult {
    nlohmann::json manifest;
    std::vector<StageRecord> stages;
    bool checks_passed = true;

    bool stage_failed() const {
        return std::any_of(stages.begin(), stages.end(), [](const auto& s) { return s.status == "failed"; });
    }
    const StageRecord& record(Stage stage) const {
        for (const auto& s : stages) {
            if (s.stage == stage) {
                return s;
            }
        }
        throw std::out_of_range("no such stage");
    }
    /// 0 success, 2 stage failure, 3 theorem-check failure.
    int exit_code() const { return stage_failed() ? 2 : checks_passed ? 0 : 3; }
};

namespace detail {

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Compact label for file names: 2 -> "2", 2.5 -> "2.5".
inline std::string label(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

class Pipeline {
public:
    Pipeline(const ExperimentConfig& config, const RunOptions& options)
        : config_(config),
          options_(options),
          dir_(config.output_dir),
          kernel_(config.build_kernel()),
          potential_(config.build_potential()),
          spectral_options_(config.spectral_options()) {}

    RunResult run() {
        const auto started = utc_now();
        std::filesystem::create_directories(dir_);
        const bool reusable = prepare_directory();

        RunResult result;
        for (const Stage stage : all_stages) {
            StageRecord record;
            record.stage = stage;
            if (!options_.stages.contains(stage) || !enabled(stage)) {
                record.status = "disabled";
            } else if (blocked(stage, result.stages)) {
                record.status = "skipped";
            } else {
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    record.status = execute(stage, reusable);
                } catch (const std::exception& e) {
                    const StageFailure failure(std::string(to_string(stage)), e.what());
                    record.status = "failed";
                    record.error = failure.what();
                }
                record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
            result.stages.push_back(record);
        }
        flush_localization();

        result.checks_passed = std::all_of(checks_.begin(), checks_.end(), [](const auto& c) { return c.second; });
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& s : result.stages) {
            nlohmann::json entry = {{"name", to_string(s.stage)}, {"status", s.status}, {"seconds", s.seconds}};
            if (!s.error.empty()) {
                entry["error"] = s.error;
            }
            stages.push_back(entry);
        }
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& [name, pass] : checks_) {
            checks.push_back({{"name", name}, {"pass", pass}});
        }
        nlohmann::json artifacts = nlohmann::json::array();
        for (const auto& [path, stage] : artifacts_) {
            artifacts.push_back({{"path", path}, {"stage", stage}});
        }
        result.manifest = {{"tool", "starkloc"},
                           {"version", version},
                           {"command", options_.command},
                           {"config_hash", hex(config_hash(config_))},
                           {"seed", config_.seed},
                           {"started_at", started},
                           {"finished_at", utc_now()},
                           {"config", to_json(config_)},
                           {"stages", stages},
                           {"checks", checks},
                           {"checks_passed", result.checks_passed},
                           {"exit_code", result.exit_code()},
                           {"artifacts", artifacts}};
        io::write_json(dir_ / "manifest.json", result.manifest);
        return result;
    }

private:
    bool enabled(Stage stage) const {
        switch (stage) {
        case Stage::Spectrum: return true;
        case Stage::Asymptotics: return config_.asymptotics;
        case Stage::Ule: return config_.ule.has_value();
        case Stage::Bootstrap: return config_.bootstrap.has_value();
        case Stage::Dynamics: return config_.dynamics.has_value();
        case Stage::Study: return config_.half_widths.size() >= 2;
        }
        return false;
    }

    static bool blocked(Stage stage, const std::vector<StageRecord>& done) {
        const auto bad = [&](Stage s) {
            for (const auto& r : done) {
                if (r.stage == s) {
                    return r.status == "failed" || r.status == "skipped";
                }
            }
            return false;
        };
        if (stage == Stage::Spectrum) {
            return false;
        }
        if (bad(Stage::Spectrum)) {
            return true;
        }
        return stage == Stage::Bootstrap && bad(Stage::Asymptotics);
    }

    /// Removes artifacts of a previous run in this directory, keeping its spectra when they can be reused.
    bool prepare_directory() {
        const auto manifest_path = dir_ / "manifest.json";
        if (!std::filesystem::exists(manifest_path)) {
            return false;
        }
        nlohmann::json previous;
        try {
            previous = io::read_json(manifest_path);
        } catch (const std::exception&) {
            return false;
        }
        bool reusable = options_.reuse_spectra && previous.value("config_hash", "") == hex(config_hash(config_));
        if (reusable) {
            reusable = false;
            for (const auto& s : previous.value("stages", nlohmann::json::array())) {
                if (s.value("name", "") == "spectrum") {
                    reusable = s.value("status", "") == "ok" || s.value("status", "") == "reused";
                }
            }
        }
        for (const auto& a : previous.value("artifacts", nlohmann::json::array())) {
            const auto path = a.value("path", "");
            if (path.empty() || (reusable && a.value("stage", "") == "spectrum")) {
                continue;
            }
            std::filesystem::remove(dir_ / path);
        }
        return reusable;
    }

    void add_artifact(const std::string& path, Stage stage) {
        artifacts_.emplace_back(path, std::string(to_string(stage)));
    }

    void add_check(const std::string& name, bool pass) { checks_.emplace_back(name, pass); }

    std::string execute(Stage stage, bool reusable) {
        switch (stage) {
        case Stage::Spectrum: return spectrum(reusable);
        case Stage::Asymptotics: return asymptotics();
        case Stage::Ule: return ule();
        case Stage::Bootstrap: return bootstrap();
        case Stage::Dynamics: return dynamics();
        case Stage::Study: return study();
        }
        return "disabled";
    }

    const SpectralData& spectrum_at(std::size_t i) const { return spectra_.at(i); }

    std::string spectrum(bool reusable) {
        const auto& widths = config_.half_widths;
        spectra_.assign(widths.size(), SpectralData{});
        const bool reuse = reusable && std::all_of(widths.begin(), widths.end(), [&](int n) {
            return std::filesystem::exists(dir_ / (io::spectrum_stem(n) + ".json")) &&
                   std::filesystem::exists(dir_ / (io::spectrum_stem(n) + ".bin"));
        });
        if (!reuse && options_.require_stored_spectra) {
            throw Error("no stored spectra for this configuration in " + dir_.string());
        }
        const nlohmann::json provenance = {{"config_hash", hex(config_hash(config_))},
                                           {"kernel", to_json(config_)["kernel"]},
                                           {"potential", to_json(config_)["potential"]},
                                           {"seed", config_.seed}};
        AssemblyOptions assembly;
        assembly.max_dimension = config_.max_dimension;
        parallel_for(widths.size(), config_.threads, [&](std::size_t i) {
            if (reuse) {
                spectra_[i] = io::read_spectrum(dir_, widths[i], spectral_options_);
            } else {
                spectra_[i] = diagonalize(build_operator(kernel_, potential_, widths[i], assembly), spectral_options_);
                io::write_spectrum(dir_, spectra_[i], provenance, spectral_options_);
            }
        });
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const auto stem = io::spectrum_stem(widths[i]);
            add_artifact(stem + ".json", Stage::Spectrum);
            add_artifact(stem + ".bin", Stage::Spectrum);
            add_check("solver_quality N=" + std::to_string(widths[i]),
                      solver_quality(spectra_[i], spectral_options_).pass());
        }
        return reuse ? "reused" : "ok";
    }

    std::string asymptotics() {
        io::CsvWriter csv(dir_ / "asymptotics.csv", {"N", "paper_index", "eigenvalue", "deviation"});
        add_artifact("asymptotics.csv", Stage::Asymptotics);
        auto& summary = localization_["asymptotics"] = nlohmann::json::array();
        for (std::size_t i = 0; i < spectra_.size(); ++i) {
            const auto report = check_eigenvalue_asymptotics(spectra_[i], kernel_, potential_);
            for (const auto& [n, dev] : report.per_index_deviation) {
                const auto pos = *spectra_[i].position_of(n);
                csv.cell(report.half_width).cell(n).cell(spectra_[i].eigenvalues(pos)).cell(dev);
                csv.end_row();
            }
            summary.push_back({{"N", report.half_width},
                               {"gamma_observed", report.gamma_observed},
                               {"gamma_theoretical", report.gamma_theoretical()},
                               {"kernel_norm0", report.kernel_norm0},
                               {"perturbation_sup", report.perturbation_sup},
                               {"interior_indices", report.per_index_deviation.size()},
                               {"violations", report.violation_count()},
                               {"pass", report.pass()}});
            add_check("asymptotics N=" + std::to_string(report.half_width), report.pass());
            asymptotics_.push_back(report);
        }
        return "ok";
    }

    const ULEReport& ule_report(std::size_t i, double alpha) {
        const auto key = std::make_pair(i, alpha);
        auto it = ule_cache_.find(key);
        if (it == ule_cache_.end()) {
            it = ule_cache_.emplace(key, ule_constants(spectra_[i], alpha)).first;
        }
        return it->second;
    }

    std::string ule() {
        io::CsvWriter csv(dir_ / "ule.csv", {"N", "alpha", "paper_index", "eigenvalue", "deviation", "center",
                                             "mode_gamma", "mode_gamma_index", "fit_alpha"});
        add_artifact("ule.csv", Stage::Ule);
        auto& summary = localization_["ule"] = nlohmann::json::array();
        for (std::size_t i = 0; i < spectra_.size(); ++i) {
            for (const double alpha : config_.ule->alphas) {
                const auto& report = ule_report(i, alpha);
                for (const auto& m : report.modes) {
                    csv.cell(spectra_[i].half_width).cell(alpha).cell(m.paper_index).cell(m.eigenvalue);
                    csv.cell(m.eigenvalue - static_cast<double>(m.paper_index)).cell(m.center);
                    csv.cell(m.gamma_center).cell(m.gamma_index).cell(m.fit_alpha);
                    csv.end_row();
                }
                nlohmann::json entry = {{"N", spectra_[i].half_width},
                                        {"alpha", alpha},
                                        {"gamma_alpha", report.gamma_alpha},
                                        {"gamma_alpha_index", report.gamma_alpha_index},
                                        {"modes", report.modes.size()},
                                        {"max_center_offset", max_center_offset(spectra_[i])}};
                if (i + 1 < spectra_.size()) {
                    entry["doubling"] = ule_drift(i, alpha);
                } else {
                    entry["doubling"] = "n/a";
                }
                summary.push_back(entry);
            }
        }
        if (spectra_.size() < 2) {
            localization_["ule_doubling"] = "n/a";
        }
        return "ok";
    }

    /// gamma_alpha at N_i and N_{i+1} over the modes both runs trust.
    nlohmann::json ule_drift(std::size_t i, double alpha) {
        ULEOptions common;
        common.max_center_radius = std::min(spectra_[i].interior_radius(), spectra_[i + 1].interior_radius());
        const auto small = ule_constants(spectra_[i], alpha, common);
        const auto large = ule_constants(spectra_[i + 1], alpha, common);
        return {{"N", spectra_[i].half_width},
                {"N_next", spectra_[i + 1].half_width},
                {"center_radius", *common.max_center_radius},
                {"gamma_alpha", small.gamma_alpha},
                {"gamma_alpha_next", large.gamma_alpha},
                {"relative_drift", relative_drift(small.gamma_alpha, large.gamma_alpha)}};
    }

    std::string bootstrap() {
        auto& summary = localization_["bootstrap"] = nlohmann::json::array();
        for (std::size_t i = 0; i < spectra_.size(); ++i) {
            double gamma = 0.0;
            if (config_.bootstrap->gamma) {
                gamma = *config_.bootstrap->gamma;
            } else {
                gamma = bootstrap_gamma(i < asymptotics_.size()
                                            ? asymptotics_[i]
                                            : check_eigenvalue_asymptotics(spectra_[i], kernel_, potential_));
            }
            const auto result = bootstrap_inequality_check(spectra_[i], kernel_, potential_, gamma,
                                                           config_.tolerances.bootstrap_slack);
            nlohmann::json worst = nlohmann::json::array();
            for (std::size_t v = 0; v < std::min<std::size_t>(result.violations.size(), 20); ++v) {
                const auto& bad = result.violations[v];
                worst.push_back({{"paper_index", bad.paper_index}, {"site", bad.site}, {"lhs", bad.lhs},
                                 {"rhs", bad.rhs}});
            }
            summary.push_back({{"N", spectra_[i].half_width},
                               {"gamma", gamma},
                               {"base_slack", result.base_slack},
                               {"kernel_tail", result.kernel_tail},
                               {"pairs_checked", result.pairs_checked},
                               {"violations", result.violations.size()},
                               {"first_violations", worst},
                               {"pass", result.pass()}});
            add_check("bootstrap N=" + std::to_string(spectra_[i].half_width), result.pass());
        }
        return "ok";
    }

    void flush_localization() {
        if (localization_.empty()) {
            return;
        }
        localization_["tolerances"] = to_json(config_)["tolerances"];
        localization_["half_widths"] = config_.half_widths;
        io::write_json(dir_ / "localization.json", localization_);
        add_artifact("localization.json", localization_.contains("asymptotics") ? Stage::Asymptotics
                                          : localization_.contains("ule")       ? Stage::Ule
                                                                                : Stage::Bootstrap);
    }

    std::string dynamics() {
        const auto& dyn = *config_.dynamics;
        const auto times = dyn.time_grid.times();
        const std::size_t last = spectra_.size() - 1;
        nlohmann::json sources = nlohmann::json::array();
        nlohmann::json verdicts = nlohmann::json::array();

        for (const long k : dyn.sources) {
            std::vector<EnvelopeBound> envelopes;
            for (const auto& sd : spectra_) {
                envelopes.push_back(envelope(sd, k, dyn.q));
            }
            MomentRunOptions run_options;
            run_options.threads = config_.threads;
            run_options.envelope = &envelopes[last];
            const auto run = moment_series(spectra_[last], k, dyn.q, times, run_options);

            nlohmann::json per_n = nlohmann::json::array();
            for (std::size_t i = 0; i < envelopes.size(); ++i) {
                nlohmann::json moments = nlohmann::json::array();
                for (const auto& m : envelopes[i].moments) {
                    moments.push_back({{"q", m.q}, {"E_q", m.value}, {"boundary_share", m.boundary_share}});
                }
                per_n.push_back({{"N", spectra_[i].half_width},
                                 {"B_kk", envelopes[i].diagonal()},
                                 {"moments", moments}});
            }
            nlohmann::json series = nlohmann::json::array();
            bool dominated = *run.max_domination_excess <= config_.tolerances.domination;
            for (const auto& s : run.series) {
                const auto name = "moments_q" + label(s.q) + "_k" + std::to_string(k) + ".csv";
                io::CsvWriter csv(dir_ / name, {"t", "M_q"});
                for (std::size_t j = 0; j < s.times.size(); ++j) {
                    csv.cell(s.times[j]).cell(s.values[j]);
                    csv.end_row();
                }
                add_artifact(name, Stage::Dynamics);
                const double e_q = envelopes[last].find(s.q)->value;
                const bool below = s.running_sup <= e_q + config_.tolerances.domination;
                dominated = dominated && below;
                series.push_back({{"q", s.q},
                                  {"file", name},
                                  {"running_sup", s.running_sup},
                                  {"E_q", e_q},
                                  {"sup_below_E_q", below}});
            }
            const bool unitary = run.max_norm_defect <= config_.tolerances.norm_defect;
            add_check("envelope domination k=" + std::to_string(k), dominated);
            add_check("unitarity k=" + std::to_string(k), unitary);
            sources.push_back({{"k", k},
                               {"N", spectra_[last].half_width},
                               {"envelopes", per_n},
                               {"series", series},
                               {"max_domination_excess", *run.max_domination_excess},
                               {"max_norm_defect", run.max_norm_defect}});

            if (config_.ule) {
                for (const double alpha : config_.ule->alphas) {
                    for (const double q : dyn.q) {
                        for (std::size_t i = 0; i < spectra_.size(); ++i) {
                            const auto v = ule_implies_bounded_moments_check(
                                ule_report(i, alpha), q, envelopes[i],
                                i + 1 < spectra_.size() ? &envelopes[i + 1] : nullptr,
                                config_.verdict_thresholds());
                            if (i + 1 < spectra_.size() || spectra_.size() == 1) {
                                verdicts.push_back(verdict_json(v, spectra_[i].half_width,
                                                                i + 1 < spectra_.size() ? spectra_[i + 1].half_width
                                                                                        : 0));
                                add_check("moment verdict k=" + std::to_string(k) + " alpha=" + label(alpha) +
                                              " q=" + label(q) + " N=" + std::to_string(spectra_[i].half_width),
                                          v.pass());
                            }
                        }
                    }
                }
            }
        }
        const auto& g = dyn.time_grid;
        io::write_json(dir_ / "envelope.json",
                       {{"time_grid",
                         {{"step", g.step},
                          {"horizon", g.horizon},
                          {"quasi_random_count", g.quasi_random_count},
                          {"quasi_random_horizon", g.quasi_random_horizon},
                          {"points", times.size()}}},
                        {"tolerances",
                         {{"domination", config_.tolerances.domination},
                          {"norm_defect", config_.tolerances.norm_defect},
                          {"boundary_share", config_.tolerances.boundary_share},
                          {"doubling_ratio", config_.tolerances.doubling_ratio}}},
                        {"sources", sources},
                        {"verdicts", verdicts}});
        add_artifact("envelope.json", Stage::Dynamics);
        return "ok";
    }

    static nlohmann::json verdict_json(const MomentVerdict& v, int n, int n_next) {
        nlohmann::json out = {{"k", v.source},
                              {"alpha", v.alpha},
                              {"q", v.q},
                              {"N", n},
                              {"hypothesis", v.hypothesis},
                              {"gamma_alpha", v.gamma_alpha},
                              {"E_q", v.envelope_moment},
                              {"boundary_share", v.boundary_share},
                              {"status", to_string(v.status)},
                              {"pass", v.pass()}};
        if (v.doubling_ratio) {
            out["N_next"] = n_next;
            out["doubling_ratio"] = io::number(*v.doubling_ratio);
        } else {
            out["doubling_ratio"] = "n/a";
        }
        return out;
    }

    std::string study() {
        nlohmann::json pairs = nlohmann::json::array();
        for (std::size_t i = 0; i + 1 < spectra_.size(); ++i) {
            const auto& small = spectra_[i];
            const auto& large = spectra_[i + 1];
            double drift = 0.0;
            for (const auto p : small.interior_positions()) {
                const auto q = large.position_of(small.paper_index(p));
                drift = std::max(drift, q ? std::abs(small.eigenvalues(p) - large.eigenvalues(*q))
                                          : std::numeric_limits<double>::infinity());
            }
            nlohmann::json entry = {{"N", small.half_width},
                                    {"N_next", large.half_width},
                                    {"max_interior_eigenvalue_drift", io::number(drift)}};
            if (config_.ule) {
                nlohmann::json ule = nlohmann::json::array();
                for (const double alpha : config_.ule->alphas) {
                    ule.push_back(ule_drift(i, alpha));
                }
                entry["gamma_alpha"] = ule;
            }
            if (config_.dynamics) {
                nlohmann::json ratios = nlohmann::json::array();
                for (const long k : config_.dynamics->sources) {
                    const auto a = envelope(small, k, config_.dynamics->q);
                    const auto b = envelope(large, k, config_.dynamics->q);
                    for (std::size_t j = 0; j < a.moments.size(); ++j) {
                        const double ea = a.moments[j].value;
                        const double eb = b.moments[j].value;
                        const double ratio = ea > 0.0 ? eb / ea : eb == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
                        ratios.push_back({{"k", k},
                                          {"q", a.moments[j].q},
                                          {"E_q", ea},
                                          {"E_q_next", eb},
                                          {"ratio", io::number(ratio)},
                                          {"relative_drift", relative_drift(ea, eb)},
                                          {"below_threshold", ratio < config_.tolerances.doubling_ratio}});
                    }
                }
                entry["envelope_moments"] = ratios;
            }
            pairs.push_back(entry);
        }
        io::write_json(dir_ / "study.json", {{"half_widths", config_.half_widths},
                                             {"doubling_ratio_threshold", config_.tolerances.doubling_ratio},
                                             {"pairs", pairs}});
        add_artifact("study.json", Stage::Study);
        return "ok";
    }

    const ExperimentConfig& config_;
    RunOptions options_;
    std::filesystem::path dir_;
    HoppingKernel kernel_;
    PotentialSpec potential_;
    SpectralOptions spectral_options_;

    std::vector<SpectralData> spectra_;
    std::vector<AsymptoticsReport> asymptotics_;
    std::map<std::pair<std::size_t, double>, ULEReport> ule_cache_;
    nlohmann::json localization_ = nlohmann::json::object();
    std::vector<std::pair<std::string, std::string>> artifacts_;
    std::vector<std::pair<std::string, bool>> checks_;
};

} // namespace detail

/// Runs the enabled stages in order and writes manifest.json into the output directory.
inline RunResult run(const ExperimentConfig& config, const RunOptions& options = {}) {
    return detail::Pipeline(config, options).run();
}

} // namespace starkloc
