#pragma once

// TOML experiment configuration. One file fully describes one experiment.

#include "tmdp/error.hpp"
#include "tmdp/format.hpp"
#include "tmdp/sailing.hpp"
#include "tmdp/transfer.hpp"

#include <toml++/toml.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tmdp::bench {

/// Environment variable that replaces the configured output root.
inline constexpr const char* kOutputDirEnv = "TRANSFER_MDP_OUTPUT_DIR";

enum class ExperimentKind { TransferSweep, HardcaseFigures, Warmstart, HullSweep };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::TransferSweep: return "transfer-sweep";
    case ExperimentKind::HardcaseFigures: return "hardcase-figures";
    case ExperimentKind::Warmstart: return "warmstart";
    case ExperimentKind::HullSweep: return "hull-sweep";
    }
    return "?";
}

struct Range {
    double from = 0.0;
    double to = 0.0;
    std::size_t count = 0;

    /// count evenly spaced points including both ends.
    std::vector<double> points() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < count; ++i)
            out.push_back(count == 1 ? from
                                     : from + (to - from) * static_cast<double>(i) /
                                                  static_cast<double>(count - 1));
        return out;
    }
};

struct TransferSweepConfig {
    /// Ranked-action instance, used unless prior_file is set.
    std::size_t states = 6;
    std::size_t actions = 8;
    double gamma = 0.9;
    double gap = 0.14;
    std::size_t single_action_states = 0;
    std::uint64_t instance_seed = 1;
    std::optional<std::filesystem::path> prior_file;
    /// "perturbed": target drawn inside the ball per seed; "prior": target = prior.
    std::string truth = "perturbed";

    double beta = 0.002;
    double eps = 0.2;
    double delta = 0.05;
    std::vector<double> budget_scales{1.0};
    ThresholdVariant variant = ThresholdVariant::Transfer;

    double min_success_rate = 0.95;
    std::optional<double> max_kept_fraction;
    bool expect_singletons = false;
    bool require_prior_policy_optimal = false;
    bool require_full_sets = false;
    bool monotone_success = false;
};

struct HardcaseInstanceConfig {
    double beta = 0.2;
    double gamma = 0.9;
    double eps = 0.01;
    std::vector<std::vector<double>> p0;
};

struct HardcaseFiguresConfig {
    Range betas{0.01, 1.9, 64};
    Range gammas{0.41, 0.99, 30};
    double eps_fraction = 0.5;
    std::vector<HardcaseInstanceConfig> instances;
    double min_correlation = 0.99;
};

struct WarmstartConfig {
    SailingInstance sailing;
    std::uint64_t instance_seed = 1;
    double beta = 0.3;
    double eps = 0.05;
    std::size_t sweeps = 2000;
    std::size_t checkpoint_every = 50;
    double step_h = 50.0;
    double min_jumpstart_fraction = 0.9;
    double final_gap_multiplier = 2.0;
    double min_final_fraction = 1.0;
};

struct HullSweepConfig {
    std::size_t bases = 3;
    std::size_t states = 6;
    std::size_t actions = 2;
    double gamma = 0.9;
    std::uint64_t instance_seed = 1;
    std::vector<double> coefficients{0.3, 0.3, 0.4};
    std::size_t noise_free_trials = 1000;
    std::vector<std::uint64_t> sample_sizes{1000, 4000, 16000};
    double eps = 0.1;
    double delta = 0.05;
    double sample_scale = 1e-4;
    double noise_free_tol = 1e-9;
    double min_ratio = 0.35;
    double max_ratio = 0.7;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::TransferSweep;
    std::string name;
    std::filesystem::path output_dir;
    std::vector<std::uint64_t> seeds;
    /// 0 = one worker per hardware thread.
    std::size_t workers = 0;
    TransferSweepConfig transfer;
    HardcaseFiguresConfig hardcase;
    WarmstartConfig warmstart;
    HullSweepConfig hull;

    /// Output directory after applying the environment override.
    std::filesystem::path resolved_output_dir() const {
        if (const char* root = std::getenv(kOutputDirEnv); root && *root)
            return std::filesystem::path(root) / name;
        return output_dir;
    }
};

namespace detail {

inline std::string where(const toml::node& node) {
    const auto& src = node.source();
    return src.begin.line ? " (line " + std::to_string(src.begin.line) + ")" : "";
}

/// Reads fields from one table and rejects keys it never consumed.
class Section {
public:
    Section(const toml::table& table, std::string path) : table_(&table), path_(std::move(path)) {}

    bool has(const std::string& key) const { return table_->contains(key); }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        const toml::node* node = table_->get(key);
        throw ConfigError("config field " + field(key) + ": " + message +
                          (node ? where(*node) : std::string{}));
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        if (!node) {
            if (fallback)
                return *fallback;
            fail(key, "is required");
        }
        if (auto v = node->value<double>())
            return *v;
        fail(key, "must be a number");
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        if (!node) {
            if (fallback)
                return *fallback;
            fail(key, "is required");
        }
        if (auto v = node->value_exact<std::int64_t>())
            return *v;
        fail(key, "must be an integer");
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) {
        const std::int64_t v = integer(key, fallback ? std::optional<std::int64_t>(
                                                           static_cast<std::int64_t>(*fallback))
                                                     : std::nullopt);
        if (v < 0)
            fail(key, "must be nonnegative");
        return static_cast<std::size_t>(v);
    }

    bool boolean(const std::string& key, bool fallback) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        if (!node)
            return fallback;
        if (auto v = node->value_exact<bool>())
            return *v;
        fail(key, "must be true or false");
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        if (!node) {
            if (fallback)
                return *fallback;
            fail(key, "is required");
        }
        if (auto v = node->value_exact<std::string>())
            return *v;
        fail(key, "must be a string");
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        if (!node)
            return fallback;
        const toml::array* arr = node->as_array();
        if (!arr)
            fail(key, "must be an array of numbers");
        std::vector<double> out;
        for (const auto& item : *arr) {
            auto v = item.value<double>();
            if (!v)
                fail(key, "must be an array of numbers");
            out.push_back(*v);
        }
        return out;
    }

    std::vector<std::vector<double>> matrix(const std::string& key) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        if (!node)
            fail(key, "is required");
        const toml::array* arr = node->as_array();
        if (!arr)
            fail(key, "must be an array of number arrays");
        std::vector<std::vector<double>> out;
        for (const auto& row : *arr) {
            const toml::array* r = row.as_array();
            if (!r)
                fail(key, "must be an array of number arrays");
            out.emplace_back();
            for (const auto& item : *r) {
                auto v = item.value<double>();
                if (!v)
                    fail(key, "must be an array of number arrays");
                out.back().push_back(*v);
            }
        }
        return out;
    }

    Range range(const std::string& key, Range fallback) {
        if (!has(key)) {
            used_.insert(key);
            return fallback;
        }
        Section sub = table(key);
        Range r{sub.number("from"), sub.number("to"), sub.count("count")};
        sub.finish();
        if (r.count == 0)
            fail(key, "count must be positive");
        return r;
    }

    Section table(const std::string& key) {
        used_.insert(key);
        const toml::node* node = table_->get(key);
        static const toml::table empty;
        if (!node)
            return Section(empty, field(key));
        const toml::table* t = node->as_table();
        if (!t)
            fail(key, "must be a table");
        return Section(*t, field(key));
    }

    const toml::node* raw(const std::string& key) {
        used_.insert(key);
        return table_->get(key);
    }

    /// Throws on the first key that was present but never read.
    void finish() const {
        for (const auto& [key, node] : *table_) {
            const std::string k(key.str());
            if (!used_.count(k))
                throw ConfigError("config field " + field(k) + ": unknown key" + where(node));
        }
    }

private:
    const toml::table* table_;
    std::string path_;
    std::set<std::string> used_;
};

inline std::vector<std::uint64_t> parse_seeds(Section& root) {
    const toml::node* node = root.raw("seeds");
    if (!node)
        root.fail("seeds", "is required");
    std::vector<std::uint64_t> seeds;
    if (const toml::array* arr = node->as_array()) {
        for (const auto& item : *arr) {
            auto v = item.value_exact<std::int64_t>();
            if (!v || *v < 0)
                root.fail("seeds", "must hold nonnegative integers");
            seeds.push_back(static_cast<std::uint64_t>(*v));
        }
    } else if (const toml::table* t = node->as_table()) {
        Section sub(*t, "seeds");
        const std::size_t first = sub.count("first");
        const std::size_t count = sub.count("count");
        sub.finish();
        for (std::size_t i = 0; i < count; ++i)
            seeds.push_back(first + i);
    } else {
        root.fail("seeds", "must be an array or a {first, count} table");
    }
    if (seeds.empty())
        root.fail("seeds", "must not be empty");
    return seeds;
}

inline void require(bool ok, Section& s, const std::string& key, const std::string& message) {
    if (!ok)
        s.fail(key, message);
}

inline void parse_transfer(Section& root, TransferSweepConfig& c,
                           const std::filesystem::path& base_dir) {
    Section inst = root.table("instance");
    if (inst.has("prior_file")) {
        c.prior_file = base_dir / inst.text("prior_file");
        if (!std::filesystem::exists(*c.prior_file))
            inst.fail("prior_file", "file " + c.prior_file->string() + " does not exist");
    } else {
        c.states = inst.count("states", c.states);
        c.actions = inst.count("actions", c.actions);
        c.gamma = inst.number("gamma", c.gamma);
        c.gap = inst.number("gap", c.gap);
        c.single_action_states = inst.count("single_action_states", c.single_action_states);
        c.instance_seed = inst.count("seed", c.instance_seed);
        require(c.states > 0, inst, "states", "must be positive");
        require(c.actions > 0, inst, "actions", "must be positive");
        require(c.gamma > 0.0 && c.gamma < 1.0, inst, "gamma", "must lie in (0,1)");
        require(c.gap >= 0.0 && c.gap * static_cast<double>(c.actions - 1) <= 1.0, inst, "gap",
                "must satisfy 0 <= gap * (actions - 1) <= 1");
        require(c.single_action_states <= c.states, inst, "single_action_states",
                "cannot exceed states");
    }
    c.truth = inst.text("truth", c.truth);
    require(c.truth == "perturbed" || c.truth == "prior", inst, "truth",
            "must be \"perturbed\" or \"prior\"");
    inst.finish();

    Section t = root.table("transfer");
    c.beta = t.number("beta", c.beta);
    c.eps = t.number("eps", c.eps);
    c.delta = t.number("delta", c.delta);
    c.budget_scales = t.numbers("budget_scales", c.budget_scales);
    const std::string variant = t.text("variant", "transfer");
    require(variant == "transfer" || variant == "soundness", t, "variant",
            "must be \"transfer\" or \"soundness\"");
    c.variant = variant == "transfer" ? ThresholdVariant::Transfer : ThresholdVariant::Soundness;
    require(c.beta > 0.0, t, "beta", "must be positive");
    require(c.eps > 0.0, t, "eps", "must be positive");
    require(c.delta > 0.0 && c.delta < 1.0, t, "delta", "must lie in (0,1)");
    require(!c.budget_scales.empty(), t, "budget_scales", "must not be empty");
    for (double s : c.budget_scales)
        require(s > 0.0, t, "budget_scales", "entries must be positive");
    t.finish();

    Section cr = root.table("criteria");
    c.min_success_rate = cr.number("min_success_rate", c.min_success_rate);
    if (cr.has("max_kept_fraction"))
        c.max_kept_fraction = cr.number("max_kept_fraction");
    c.expect_singletons = cr.boolean("singletons", c.expect_singletons);
    c.require_prior_policy_optimal = cr.boolean("prior_policy_optimal", false);
    c.require_full_sets = cr.boolean("full_sets", false);
    c.monotone_success = cr.boolean("monotone_success", false);
    cr.finish();
}

inline void parse_hardcase(Section& root, HardcaseFiguresConfig& c) {
    Section g = root.table("grid");
    c.betas = g.range("beta", c.betas);
    c.gammas = g.range("gamma", c.gammas);
    c.eps_fraction = g.number("eps_fraction", c.eps_fraction);
    require(c.eps_fraction > 0.0 && c.eps_fraction < 1.0, g, "eps_fraction", "must lie in (0,1)");
    g.finish();

    if (const toml::node* node = root.raw("instances")) {
        const toml::array* arr = node->as_array();
        if (!arr)
            root.fail("instances", "must be an array of tables");
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const toml::table* t = (*arr)[i].as_table();
            if (!t)
                root.fail("instances", "must be an array of tables");
            Section s(*t, "instances[" + std::to_string(i) + "]");
            HardcaseInstanceConfig h;
            h.beta = s.number("beta");
            h.gamma = s.number("gamma");
            h.eps = s.number("eps");
            h.p0 = s.matrix("p0");
            s.finish();
            c.instances.push_back(std::move(h));
        }
    }

    Section cr = root.table("criteria");
    c.min_correlation = cr.number("min_correlation", c.min_correlation);
    cr.finish();
}

inline void parse_warmstart(Section& root, WarmstartConfig& c) {
    Section s = root.table("sailing");
    c.sailing.width = s.count("width", c.sailing.width);
    c.sailing.height = s.count("height", c.sailing.height);
    c.sailing.wind_directions = s.count("wind_directions", c.sailing.wind_directions);
    c.sailing.wind_change = s.number("wind_change", c.sailing.wind_change);
    c.sailing.goal_x = s.count("goal_x", c.sailing.width - 1);
    c.sailing.goal_y = s.count("goal_y", c.sailing.height - 1);
    c.sailing.gamma = s.number("gamma", c.sailing.gamma);
    c.instance_seed = s.count("seed", c.instance_seed);
    try {
        c.sailing.validate();
    } catch (const ModelError& e) {
        throw ConfigError(std::string("config table sailing: ") + e.what());
    }
    s.finish();

    Section q = root.table("learning");
    c.beta = q.number("beta", c.beta);
    c.eps = q.number("eps", c.eps);
    c.sweeps = q.count("sweeps", c.sweeps);
    c.checkpoint_every = q.count("checkpoint_every", c.checkpoint_every);
    c.step_h = q.number("step_h", c.step_h);
    require(c.beta > 0.0 && c.beta <= 2.0, q, "beta", "must lie in (0,2]");
    require(c.eps > 0.0, q, "eps", "must be positive");
    require(c.sweeps > 0, q, "sweeps", "must be positive");
    require(c.checkpoint_every > 0, q, "checkpoint_every", "must be positive");
    require(c.step_h > 0.0, q, "step_h", "must be positive");
    q.finish();

    Section cr = root.table("criteria");
    c.min_jumpstart_fraction = cr.number("min_jumpstart_fraction", c.min_jumpstart_fraction);
    c.final_gap_multiplier = cr.number("final_gap_multiplier", c.final_gap_multiplier);
    c.min_final_fraction = cr.number("min_final_fraction", c.min_final_fraction);
    cr.finish();
}

inline void parse_hull(Section& root, HullSweepConfig& c) {
    Section h = root.table("hull");
    c.bases = h.count("bases", c.bases);
    c.states = h.count("states", c.states);
    c.actions = h.count("actions", c.actions);
    c.gamma = h.number("gamma", c.gamma);
    c.instance_seed = h.count("seed", c.instance_seed);
    c.coefficients = h.numbers("coefficients", c.coefficients);
    c.noise_free_trials = h.count("noise_free_trials", c.noise_free_trials);
    const auto sizes = h.numbers("sample_sizes", {1000, 4000, 16000});
    c.sample_sizes.clear();
    for (double v : sizes) {
        require(v >= 1.0 && v == std::floor(v), h, "sample_sizes", "entries must be positive integers");
        c.sample_sizes.push_back(static_cast<std::uint64_t>(v));
    }
    c.eps = h.number("eps", c.eps);
    c.delta = h.number("delta", c.delta);
    c.sample_scale = h.number("sample_scale", c.sample_scale);
    require(c.bases > 0, h, "bases", "must be positive");
    require(c.states > 0 && c.actions > 0, h, "states", "states and actions must be positive");
    require(c.gamma > 0.0 && c.gamma < 1.0, h, "gamma", "must lie in (0,1)");
    require(c.coefficients.size() == c.bases, h, "coefficients", "must have one entry per base");
    double sum = 0.0;
    for (double v : c.coefficients) {
        require(v >= 0.0, h, "coefficients", "must be nonnegative");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-12, h, "coefficients", "must sum to 1");
    require(c.eps > 0.0, h, "eps", "must be positive");
    require(c.delta > 0.0 && c.delta < 1.0, h, "delta", "must lie in (0,1)");
    require(c.sample_scale > 0.0, h, "sample_scale", "must be positive");
    h.finish();

    Section cr = root.table("criteria");
    c.noise_free_tol = cr.number("noise_free_tol", c.noise_free_tol);
    c.min_ratio = cr.number("min_ratio", c.min_ratio);
    c.max_ratio = cr.number("max_ratio", c.max_ratio);
    cr.finish();
}

} // namespace detail

/// Parses a config document. prior_file resolves against `base_dir`; output_dir
/// is taken relative to the working directory.
inline ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                                     const std::string& source_name = "config") {
    toml::table doc;
    try {
        doc = toml::parse(text, source_name);
    } catch (const toml::parse_error& e) {
        throw ConfigError("config " + source_name + " (line " +
                          std::to_string(e.source().begin.line) + "): " +
                          std::string(e.description()));
    }
    detail::Section root(doc, "");
    ExperimentConfig cfg;
    const std::string kind = root.text("kind");
    if (kind == "transfer-sweep")
        cfg.kind = ExperimentKind::TransferSweep;
    else if (kind == "hardcase-figures")
        cfg.kind = ExperimentKind::HardcaseFigures;
    else if (kind == "warmstart")
        cfg.kind = ExperimentKind::Warmstart;
    else if (kind == "hull-sweep")
        cfg.kind = ExperimentKind::HullSweep;
    else
        root.fail("kind", "must be one of transfer-sweep, hardcase-figures, warmstart, hull-sweep");
    cfg.name = root.text("name");
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos)
        root.fail("name", "must be a nonempty plain directory name");
    cfg.output_dir = root.text("output_dir", "results/" + cfg.name);
    cfg.workers = root.count("workers", 0);

    switch (cfg.kind) {
    case ExperimentKind::TransferSweep:
        cfg.seeds = detail::parse_seeds(root);
        detail::parse_transfer(root, cfg.transfer, base_dir);
        break;
    case ExperimentKind::HardcaseFigures:
        if (root.has("seeds"))
            cfg.seeds = detail::parse_seeds(root);
        else
            cfg.seeds = {0};
        detail::parse_hardcase(root, cfg.hardcase);
        break;
    case ExperimentKind::Warmstart:
        cfg.seeds = detail::parse_seeds(root);
        detail::parse_warmstart(root, cfg.warmstart);
        break;
    case ExperimentKind::HullSweep:
        cfg.seeds = detail::parse_seeds(root);
        detail::parse_hull(root, cfg.hull);
        break;
    }
    root.finish();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path(), path.string());
}

} // namespace tmdp::bench
