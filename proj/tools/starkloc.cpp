// starkloc command line: spectrum, localize, evolve, study, report.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "starkloc/pipeline.hpp"

using namespace starkloc;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& common, bool config_required) {
    auto* opt = cmd->add_option("--config", common.config, "experiment config (JSON)");
    if (config_required) {
        opt->required();
    }
    cmd->add_option("--out", common.out, "output directory (overrides output_dir)");
    cmd->add_option("--seed", common.seed, "seed for random perturbations (overrides seed)");
    cmd->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& common) {
    ExperimentConfig config;
    if (!common.config.empty()) {
        config = load_config(common.config);
    } else {
        // report without --config: take the resolved config stored by the earlier run
        const auto manifest = std::filesystem::path(common.out.empty() ? "run" : common.out) / "manifest.json";
        if (!std::filesystem::exists(manifest)) {
            throw ConfigInvalid("--config", "no config given and no manifest at " + manifest.string());
        }
        config = parse_config(io::read_json(manifest).at("config"));
    }
    if (!common.out.empty()) {
        config.output_dir = common.out;
    }
    if (common.seed) {
        config.seed = *common.seed;
    }
    if (common.threads) {
        config.threads = *common.threads;
    }
    return config;
}

void print_summary(const RunResult& result, const ExperimentConfig& config) {
    std::cout << "output: " << config.output_dir.string() << '\n';
    for (const auto& s : result.stages) {
        if (s.status == "disabled") {
            continue;
        }
        std::cout << "  " << to_string(s.stage) << ": " << s.status;
        if (s.status == "ok" || s.status == "reused") {
            char buf[32];
            std::snprintf(buf, sizeof buf, " (%.2f s)", s.seconds);
            std::cout << buf;
        }
        std::cout << '\n';
        if (!s.error.empty()) {
            std::cout << "    " << s.error << '\n';
        }
    }
    for (const auto& c : result.manifest.at("checks")) {
        if (!c.at("pass").get<bool>()) {
            std::cout << "  check failed: " << c.at("name").get<std::string>() << '\n';
        }
    }
    std::cout << (result.checks_passed ? "all checks passed" : "some checks failed") << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral and dynamical localization experiments for lattice Schroedinger operators"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    Common common;
    auto* spectrum = app.add_subcommand("spectrum", "diagonalize every half-width and store the spectra");
    auto* localize = app.add_subcommand("localize", "eigenvalue asymptotics, decay constants, bootstrap check");
    auto* evolve = app.add_subcommand("evolve", "moment curves and envelope bounds");
    auto* study = app.add_subcommand("study", "all enabled analyses plus the convergence study across N");
    auto* report = app.add_subcommand("report", "recompute reports from stored spectra");
    for (auto* cmd : {spectrum, localize, evolve, study}) {
        add_common(cmd, common, true);
    }
    add_common(report, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    RunOptions options;
    options.command = app.get_subcommands().front()->get_name();
    if (options.command == "spectrum") {
        options.stages = {Stage::Spectrum};
    } else if (options.command == "localize") {
        options.stages = {Stage::Spectrum, Stage::Asymptotics, Stage::Ule, Stage::Bootstrap};
    } else if (options.command == "evolve") {
        options.stages = {Stage::Spectrum, Stage::Dynamics};
    } else if (options.command == "report") {
        options.require_stored_spectra = true;
    }

    ExperimentConfig config;
    try {
        config = resolve(common);
        if (options.command == "study" && config.half_widths.size() < 2) {
            throw ConfigInvalid("half_widths", "a convergence study needs at least two half-widths");
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const auto result = run(config, options);
        print_summary(result, config);
        return result.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
