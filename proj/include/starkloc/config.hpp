#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "starkloc/dynamics.hpp"
#include "starkloc/errors.hpp"
#include "starkloc/kernel.hpp"
#include "starkloc/lattice_operator.hpp"
#include "starkloc/potential.hpp"
#include "starkloc/spectral.hpp"

namespace starkloc {

using json = nlohmann::json;

struct KernelConfig {
    KernelFamily family = KernelFamily::NearestNeighbor;
    KernelParams params;
};

struct PerturbationConfig {
    std::string kind = "none";
    double value = 0.0;            // constant
    double amplitude = 0.0;        // uniform_random
    std::vector<double> values;    // periodic, explicit
    long first_site = 0;           // explicit
};

struct PotentialConfig {
    std::string kind = "linear_field";
    double slope = 1.0;
    MarylandParams maryland;
    PerturbationConfig perturbation;
};

struct UleConfig {
    std::vector<double> alphas;
};

struct BootstrapConfig {
    /// Taken from the asymptotics report when unset.
    std::optional<double> gamma;
};

struct DynamicsConfig {
    std::vector<long> sources{0};
    std::vector<double> q{2.0};
    TimeGrid time_grid;
};

struct Tolerances {
    double residual = 1e-10;
    double orthonormality = 1e-10;
    double degeneracy_gap = 1e-12;
    double bootstrap_slack = 1e-8;
    double boundary_share = 0.01;
    double doubling_ratio = 1.1;
    double domination = 1e-10;
    double norm_defect = 1e-10;
    std::optional<int> window;
};

struct ExperimentConfig {
    KernelConfig kernel;
    PotentialConfig potential;
    std::vector<int> half_widths;
    bool asymptotics = false;
    std::optional<UleConfig> ule;
    std::optional<BootstrapConfig> bootstrap;
    std::optional<DynamicsConfig> dynamics;
    Tolerances tolerances;
    std::filesystem::path output_dir = "run";
    std::uint64_t seed = 0;
    unsigned threads = 1;
    int max_dimension = AssemblyOptions{}.max_dimension;

    HoppingKernel build_kernel() const { return starkloc::build_kernel(kernel.family, kernel.params); }
    PotentialSpec build_potential() const;
    SpectralOptions spectral_options() const {
        SpectralOptions o;
        o.residual_tolerance = tolerances.residual;
        o.orthonormality_tolerance = tolerances.orthonormality;
        o.degeneracy_gap = tolerances.degeneracy_gap;
        o.window = tolerances.window;
        return o;
    }
    VerdictThresholds verdict_thresholds() const { return {tolerances.boundary_share, tolerances.doubling_ratio}; }
};

inline PotentialSpec ExperimentConfig::build_potential() const {
    const auto& p = potential.perturbation;
    Perturbation b = perturbation::None{};
    if (p.kind == "constant") {
        b = perturbation::Constant{p.value};
    } else if (p.kind == "uniform_random") {
        b = perturbation::UniformRandom{p.amplitude, seed};
    } else if (p.kind == "periodic") {
        b = perturbation::Periodic{p.values};
    } else if (p.kind == "explicit") {
        b = perturbation::Explicit{p.first_site, p.values};
    }
    if (potential.kind == "maryland") {
        return PotentialSpec::maryland(potential.maryland, b);
    }
    return PotentialSpec::linear_field(potential.slope, b);
}

namespace detail {

/// Reads one JSON object, tracking which keys were consumed so leftovers can be rejected.
class ObjectReader {
public:
    ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ConfigInvalid(path_, "expected an object");
        }
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) {
            throw ConfigInvalid(child(key), "missing required field");
        }
        return node_.at(key);
    }

    double number(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) {
            throw ConfigInvalid(child(key), "expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            throw ConfigInvalid(child(key), "expected a finite number");
        }
        return x;
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

    long integer(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number_integer()) {
            throw ConfigInvalid(child(key), "expected an integer");
        }
        return v.get<long>();
    }

    long integer(const std::string& key, long fallback) { return has(key) ? integer(key) : mark(key, fallback); }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) {
            return mark(key, fallback);
        }
        const auto& v = raw(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigInvalid(child(key), "expected a nonnegative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) {
            return mark(key, fallback);
        }
        const auto& v = raw(key);
        if (!v.is_boolean()) {
            throw ConfigInvalid(child(key), "expected true or false");
        }
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) {
            throw ConfigInvalid(child(key), "expected a string");
        }
        return v.get<std::string>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : mark(key, fallback);
    }

    const json& array(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) {
            throw ConfigInvalid(child(key), "expected an array");
        }
        return v;
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        const auto& arr = array(key);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number() || !std::isfinite(arr[i].get<double>())) {
                throw ConfigInvalid(child(key) + "[" + std::to_string(i) + "]", "expected a finite number");
            }
            out.push_back(arr[i].get<double>());
        }
        return out;
    }

    std::vector<long> integers(const std::string& key) {
        std::vector<long> out;
        const auto& arr = array(key);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number_integer()) {
                throw ConfigInvalid(child(key) + "[" + std::to_string(i) + "]", "expected an integer");
            }
            out.push_back(arr[i].get<long>());
        }
        return out;
    }

    /// Optional sub-object: absent, null or false disable it; true asks for defaults.
    const json* section(const std::string& key, bool allow_true) {
        seen_.insert(key);
        if (!node_.contains(key) || node_.at(key).is_null()) {
            return nullptr;
        }
        const auto& v = node_.at(key);
        if (v.is_boolean()) {
            if (v.get<bool>() && !allow_true) {
                throw ConfigInvalid(child(key), "needs an object with its parameters");
            }
            return v.get<bool>() ? &empty_object() : nullptr;
        }
        return &v;
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigInvalid(child(key), "unknown field");
            }
        }
    }

private:
    static const json& empty_object() {
        static const json empty = json::object();
        return empty;
    }

    template <class T>
    T mark(const std::string& key, T value) {
        seen_.insert(key);
        return value;
    }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

inline complex parse_complex(const json& v, const std::string& path) {
    if (v.is_number()) {
        return {v.get<double>(), 0.0};
    }
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        return {v[0].get<double>(), v[1].get<double>()};
    }
    throw ConfigInvalid(path, "expected a number or a [re, im] pair");
}

inline KernelConfig parse_kernel(const json& node) {
    ObjectReader r(node, "kernel");
    KernelConfig k;
    const auto family = r.string("family");
    if (family == "nearest_neighbor") {
        k.family = KernelFamily::NearestNeighbor;
    } else if (family == "power_law") {
        k.family = KernelFamily::PowerLaw;
        k.params.exponent = r.number("exponent");
        if (!(k.params.exponent > 1.0)) {
            throw ConfigInvalid("kernel.exponent", "power-law exponent must be > 1");
        }
    } else if (family == "finite_support") {
        k.family = KernelFamily::FiniteSupport;
        const auto& arr = r.array("coefficients");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            k.params.positive_half.push_back(parse_complex(arr[i], "kernel.coefficients[" + std::to_string(i) + "]"));
        }
    } else if (family == "custom") {
        k.family = KernelFamily::Custom;
        const auto& arr = r.array("entries");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "kernel.entries[" + std::to_string(i) + "]";
            ObjectReader e(arr[i], path);
            const long offset = e.integer("offset");
            const complex value = parse_complex(e.raw("value"), path + ".value");
            e.finish();
            k.params.entries.emplace_back(offset, value);
        }
    } else {
        throw ConfigInvalid("kernel.family",
                            "expected nearest_neighbor, power_law, finite_support or custom, got '" + family + "'");
    }
    r.finish();
    try {
        starkloc::build_kernel(k.family, k.params);
    } catch (const InvalidKernel& e) {
        throw ConfigInvalid("kernel", e.what());
    }
    return k;
}

inline PerturbationConfig parse_perturbation(const json& node, const std::string& path) {
    ObjectReader r(node, path);
    PerturbationConfig p;
    p.kind = r.string("kind");
    if (p.kind == "constant") {
        p.value = r.number("value");
    } else if (p.kind == "uniform_random") {
        p.amplitude = r.number("amplitude");
        if (p.amplitude < 0.0) {
            throw ConfigInvalid(r.child("amplitude"), "amplitude must be >= 0");
        }
    } else if (p.kind == "periodic") {
        p.values = r.numbers("values");
        if (p.values.empty()) {
            throw ConfigInvalid(r.child("values"), "periodic perturbation needs at least one value");
        }
    } else if (p.kind == "explicit") {
        p.first_site = r.integer("first_site");
        p.values = r.numbers("values");
    } else if (p.kind != "none") {
        throw ConfigInvalid(r.child("kind"),
                            "expected none, constant, uniform_random, periodic or explicit, got '" + p.kind + "'");
    }
    r.finish();
    return p;
}

inline PotentialConfig parse_potential(const json& node) {
    ObjectReader r(node, "potential");
    PotentialConfig p;
    p.kind = r.string("kind");
    if (p.kind == "linear_field") {
        p.slope = r.number("slope", 1.0);
    } else if (p.kind == "maryland") {
        p.maryland.coupling = r.number("coupling", 1.0);
        p.maryland.frequency = r.number("frequency");
        p.maryland.phase = r.number("phase", 0.0);
    } else {
        throw ConfigInvalid("potential.kind", "expected linear_field or maryland, got '" + p.kind + "'");
    }
    if (const auto* b = r.section("perturbation", false)) {
        p.perturbation = parse_perturbation(*b, "potential.perturbation");
    }
    r.finish();
    return p;
}

inline TimeGrid parse_time_grid(const json& node) {
    ObjectReader r(node, "analyses.dynamics.time_grid");
    TimeGrid g;
    g.step = r.number("step", g.step);
    g.horizon = r.number("horizon", g.horizon);
    g.quasi_random_count = static_cast<int>(r.integer("quasi_random_count", g.quasi_random_count));
    g.quasi_random_horizon = r.number("quasi_random_horizon", g.quasi_random_horizon);
    r.finish();
    if (!(g.step > 0.0)) {
        throw ConfigInvalid("analyses.dynamics.time_grid.step", "step must be > 0");
    }
    if (g.horizon < 0.0 || g.quasi_random_horizon < 0.0) {
        throw ConfigInvalid("analyses.dynamics.time_grid", "horizons must be >= 0");
    }
    if (g.quasi_random_count < 0) {
        throw ConfigInvalid("analyses.dynamics.time_grid.quasi_random_count", "must be >= 0");
    }
    if (g.horizon / g.step > 1e7) {
        throw ConfigInvalid("analyses.dynamics.time_grid", "more than 10^7 regular time points");
    }
    return g;
}

inline void parse_analyses(const json& node, ExperimentConfig& c) {
    ObjectReader r(node, "analyses");
    c.asymptotics = r.boolean("asymptotics", false);
    if (const auto* node_ule = r.section("ule", false)) {
        ObjectReader u(*node_ule, "analyses.ule");
        UleConfig ule;
        ule.alphas = u.numbers("alphas");
        u.finish();
        if (ule.alphas.empty()) {
            throw ConfigInvalid("analyses.ule.alphas", "at least one decay exponent is required");
        }
        for (std::size_t i = 0; i < ule.alphas.size(); ++i) {
            if (!(ule.alphas[i] > 0.0)) {
                throw ConfigInvalid("analyses.ule.alphas[" + std::to_string(i) + "]", "alpha must be > 0");
            }
        }
        c.ule = ule;
    }
    if (const auto* node_boot = r.section("bootstrap", true)) {
        ObjectReader br(*node_boot, "analyses.bootstrap");
        BootstrapConfig bc;
        if (br.has("gamma")) {
            bc.gamma = br.number("gamma");
            if (!(*bc.gamma > 0.0)) {
                throw ConfigInvalid("analyses.bootstrap.gamma", "gamma must be > 0");
            }
        } else {
            br.section("gamma", false);
        }
        br.finish();
        c.bootstrap = bc;
    }
    if (const auto* node_dyn = r.section("dynamics", true)) {
        ObjectReader d(*node_dyn, "analyses.dynamics");
        DynamicsConfig dyn;
        if (d.has("sources")) {
            dyn.sources = d.integers("sources");
        }
        if (d.has("q")) {
            dyn.q = d.numbers("q");
        }
        if (const auto* grid = d.section("time_grid", true)) {
            dyn.time_grid = parse_time_grid(*grid);
        }
        d.finish();
        if (dyn.sources.empty()) {
            throw ConfigInvalid("analyses.dynamics.sources", "at least one source site is required");
        }
        if (dyn.q.empty()) {
            throw ConfigInvalid("analyses.dynamics.q", "at least one moment order is required");
        }
        for (std::size_t i = 0; i < dyn.q.size(); ++i) {
            if (!(dyn.q[i] > 0.0)) {
                throw ConfigInvalid("analyses.dynamics.q[" + std::to_string(i) + "]", "q must be > 0");
            }
        }
        c.dynamics = dyn;
    }
    r.finish();
}

inline Tolerances parse_tolerances(const json& node) {
    ObjectReader r(node, "tolerances");
    Tolerances t;
    const auto positive = [&](const std::string& key, double fallback) {
        const double v = r.number(key, fallback);
        if (!(v > 0.0)) {
            throw ConfigInvalid(r.child(key), "must be > 0");
        }
        return v;
    };
    t.residual = positive("residual", t.residual);
    t.orthonormality = positive("orthonormality", t.orthonormality);
    t.degeneracy_gap = positive("degeneracy_gap", t.degeneracy_gap);
    t.bootstrap_slack = positive("bootstrap_slack", t.bootstrap_slack);
    t.boundary_share = positive("boundary_share", t.boundary_share);
    t.doubling_ratio = positive("doubling_ratio", t.doubling_ratio);
    t.domination = positive("domination", t.domination);
    t.norm_defect = positive("norm_defect", t.norm_defect);
    if (r.has("window")) {
        const long w = r.integer("window");
        if (w < 0) {
            throw ConfigInvalid("tolerances.window", "window must be >= 0");
        }
        t.window = static_cast<int>(w);
    } else {
        r.section("window", false);
    }
    r.finish();
    return t;
}

} // namespace detail

/// Validate a parsed JSON document. Every failure names the offending field.
inline ExperimentConfig parse_config(const json& doc) {
    detail::ObjectReader r(doc, "");
    ExperimentConfig c;
    c.kernel = detail::parse_kernel(r.raw("kernel"));
    c.potential = detail::parse_potential(r.raw("potential"));

    const auto widths = r.integers("half_widths");
    if (widths.empty()) {
        throw ConfigInvalid("half_widths", "at least one half-width is required");
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] < 1) {
            throw ConfigInvalid("half_widths[" + std::to_string(i) + "]", "half-width must be >= 1");
        }
        if (i > 0 && widths[i] <= widths[i - 1]) {
            throw ConfigInvalid("half_widths[" + std::to_string(i) + "]", "half-widths must be strictly ascending");
        }
        c.half_widths.push_back(static_cast<int>(widths[i]));
    }

    if (const auto* a = r.section("analyses", false)) {
        detail::parse_analyses(*a, c);
    }
    if (const auto* t = r.section("tolerances", true)) {
        c.tolerances = detail::parse_tolerances(*t);
    }
    c.output_dir = r.string("output_dir", c.output_dir.string());
    c.seed = r.unsigned_integer("seed", c.seed);
    const auto threads = r.integer("threads", c.threads);
    if (threads < 1) {
        throw ConfigInvalid("threads", "need at least one thread");
    }
    c.threads = static_cast<unsigned>(threads);
    c.max_dimension = static_cast<int>(r.integer("max_dimension", c.max_dimension));
    r.finish();

    if (2L * c.half_widths.back() + 1 > c.max_dimension) {
        throw ConfigInvalid("half_widths", "largest box has dimension " + std::to_string(2L * c.half_widths.back() + 1) +
                                               ", above max_dimension " + std::to_string(c.max_dimension));
    }
    if (c.potential.kind == "maryland") {
        try {
            c.build_potential().check_resonance(c.half_widths.back());
        } catch (const MarylandResonance& e) {
            throw ConfigInvalid("potential", e.what());
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigInvalid("<file>", "cannot open config file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigInvalid("<file>", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

namespace detail {

inline json complex_json(complex z) {
    if (z.imag() == 0.0) {
        return z.real();
    }
    return json::array({z.real(), z.imag()});
}

} // namespace detail

/// The fully resolved configuration, every default written out.
inline json to_json(const ExperimentConfig& c) {
    json kernel = {{"family", to_string(c.kernel.family)}};
    switch (c.kernel.family) {
    case KernelFamily::PowerLaw: kernel["exponent"] = c.kernel.params.exponent; break;
    case KernelFamily::FiniteSupport: {
        json arr = json::array();
        for (const auto& z : c.kernel.params.positive_half) {
            arr.push_back(detail::complex_json(z));
        }
        kernel["coefficients"] = arr;
        break;
    }
    case KernelFamily::Custom: {
        json arr = json::array();
        for (const auto& [m, z] : c.kernel.params.entries) {
            arr.push_back({{"offset", m}, {"value", detail::complex_json(z)}});
        }
        kernel["entries"] = arr;
        break;
    }
    case KernelFamily::NearestNeighbor: break;
    }

    const auto& p = c.potential.perturbation;
    json pert = {{"kind", p.kind}};
    if (p.kind == "constant") {
        pert["value"] = p.value;
    } else if (p.kind == "uniform_random") {
        pert["amplitude"] = p.amplitude;
    } else if (p.kind == "periodic") {
        pert["values"] = p.values;
    } else if (p.kind == "explicit") {
        pert["first_site"] = p.first_site;
        pert["values"] = p.values;
    }
    json potential = {{"kind", c.potential.kind}, {"perturbation", pert}};
    if (c.potential.kind == "maryland") {
        potential["coupling"] = c.potential.maryland.coupling;
        potential["frequency"] = c.potential.maryland.frequency;
        potential["phase"] = c.potential.maryland.phase;
    } else {
        potential["slope"] = c.potential.slope;
    }

    json analyses = {{"asymptotics", c.asymptotics}};
    analyses["ule"] = c.ule ? json{{"alphas", c.ule->alphas}} : json(false);
    if (c.bootstrap) {
        analyses["bootstrap"] = {{"gamma", c.bootstrap->gamma ? json(*c.bootstrap->gamma) : json(nullptr)}};
    } else {
        analyses["bootstrap"] = false;
    }
    if (c.dynamics) {
        const auto& g = c.dynamics->time_grid;
        analyses["dynamics"] = {{"sources", c.dynamics->sources},
                                {"q", c.dynamics->q},
                                {"time_grid",
                                 {{"step", g.step},
                                  {"horizon", g.horizon},
                                  {"quasi_random_count", g.quasi_random_count},
                                  {"quasi_random_horizon", g.quasi_random_horizon}}}};
    } else {
        analyses["dynamics"] = false;
    }

    const auto& t = c.tolerances;
    json tolerances = {{"residual", t.residual},
                       {"orthonormality", t.orthonormality},
                       {"degeneracy_gap", t.degeneracy_gap},
                       {"bootstrap_slack", t.bootstrap_slack},
                       {"boundary_share", t.boundary_share},
                       {"doubling_ratio", t.doubling_ratio},
                       {"domination", t.domination},
                       {"norm_defect", t.norm_defect},
                       {"window", t.window ? json(*t.window) : json(nullptr)}};

    return {{"kernel", kernel},
            {"potential", potential},
            {"half_widths", c.half_widths},
            {"analyses", analyses},
            {"tolerances", tolerances},
            {"output_dir", c.output_dir.string()},
            {"seed", c.seed},
            {"threads", c.threads},
            {"max_dimension", c.max_dimension}};
}

/// 64-bit FNV-1a over the resolved config, leaving out fields that cannot change results.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    json doc = to_json(c);
    doc.erase("output_dir");
    doc.erase("threads");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : doc.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t value) {
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << value;
    return out.str();
}

} // namespace starkloc
