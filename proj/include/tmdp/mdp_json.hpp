#pragma once

// JSON model files:
//   {"gamma": g, "states": S, "actions": [[labels of state 0], ...],
//    "transitions": {"s,a": [p(0|s,a), ..., p(S-1|s,a)]},
//    "rewards": {"s,a,s'": r}}
// Rewards not listed are zero.

#include "tmdp/format.hpp"
#include "tmdp/mdp.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tmdp {

struct Diagnostic {
    std::size_t line = 0; ///< 1-based; 0 when no location is known
    std::string message;
};

/// A model file failed to parse or validate. Carries every problem found.
class ModelFileError : public ModelError {
public:
    explicit ModelFileError(std::vector<Diagnostic> diagnostics)
        : ModelError(format(diagnostics)), diagnostics_(std::move(diagnostics)) {}

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string format(const std::vector<Diagnostic>& diagnostics) {
        std::string out;
        for (const auto& d : diagnostics) {
            if (!out.empty())
                out += '\n';
            out += d.line ? "line " + std::to_string(d.line) + ": " + d.message : d.message;
        }
        return out;
    }

    std::vector<Diagnostic> diagnostics_;
};

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset; ++i)
        if (text[i] == '\n')
            ++line;
    return line;
}

/// Line of the first occurrence of "key" (quoted) in the raw text.
inline std::size_t line_of_key(std::string_view text, const std::string& key) {
    const std::string quoted = "\"" + key + "\"";
    const auto pos = text.find(quoted);
    return pos == std::string_view::npos ? 0 : line_of_offset(text, pos);
}

inline bool parse_index_list(std::string_view key, std::vector<std::size_t>& out) {
    out.clear();
    std::size_t start = 0;
    while (start <= key.size()) {
        const std::size_t comma = key.find(',', start);
        const std::size_t end = comma == std::string_view::npos ? key.size() : comma;
        std::size_t value = 0;
        const char* first = key.data() + start;
        const char* last = key.data() + end;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last || first == last)
            return false;
        out.push_back(value);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return true;
}

} // namespace detail

inline nlohmann::ordered_json to_json(const Mdp& mdp) {
    nlohmann::ordered_json j;
    const Layout& layout = mdp.layout();
    const std::size_t n = mdp.num_states();
    j["gamma"] = mdp.gamma();
    j["states"] = n;
    j["actions"] = layout.action_lists();
    nlohmann::ordered_json transitions = nlohmann::ordered_json::object();
    nlohmann::ordered_json rewards = nlohmann::ordered_json::object();
    for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) {
        const std::string key = std::to_string(layout.state_of_pair(pair)) + "," +
                                std::to_string(layout.action_of_pair(pair));
        const auto p = mdp.transition(pair);
        transitions[key] = std::vector<double>(p.begin(), p.end());
        const auto r = mdp.rewards(pair);
        for (StateId t = 0; t < n; ++t)
            if (r[t] != 0.0)
                rewards[key + "," + std::to_string(t)] = r[t];
    }
    j["transitions"] = std::move(transitions);
    j["rewards"] = std::move(rewards);
    return j;
}

inline std::string dump_mdp(const Mdp& mdp) { return to_json(mdp).dump(1) + "\n"; }

/// Parses and validates a model file, collecting every problem with its line.
inline Mdp parse_mdp(std::string_view text) {
    using nlohmann::json;
    std::vector<Diagnostic> diag;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelFileError({{detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0),
                               std::string("malformed JSON: ") + e.what()}});
    }
    auto fail = [&](const std::string& key, std::string message) {
        diag.push_back({detail::line_of_key(text, key), std::move(message)});
    };
    if (!j.is_object())
        throw ModelFileError({{1, "top level must be an object"}});
    for (const char* key : {"gamma", "states", "actions", "transitions"})
        if (!j.contains(key))
            diag.push_back({0, std::string("missing required field \"") + key + "\""});
    if (!diag.empty())
        throw ModelFileError(std::move(diag));

    double gamma = 0.0;
    if (!j["gamma"].is_number() || !((gamma = j["gamma"].get<double>()) > 0.0 && gamma < 1.0))
        fail("gamma", "\"gamma\" must be a number in (0,1)");

    std::size_t num_states = 0;
    if (!j["states"].is_number_unsigned() || (num_states = j["states"].get<std::size_t>()) == 0)
        fail("states", "\"states\" must be a positive integer");

    std::vector<std::vector<ActionId>> actions;
    const json& ja = j["actions"];
    if (!ja.is_array() || ja.size() != num_states) {
        fail("actions", "\"actions\" must list one action array per state");
    } else {
        for (std::size_t s = 0; s < ja.size(); ++s) {
            std::vector<ActionId> list;
            bool ok = ja[s].is_array() && !ja[s].empty();
            if (ok)
                for (const auto& a : ja[s]) {
                    if (!a.is_number_unsigned()) {
                        ok = false;
                        break;
                    }
                    const auto label = a.get<ActionId>();
                    if (!list.empty() && label <= list.back()) {
                        ok = false;
                        break;
                    }
                    list.push_back(label);
                }
            if (!ok)
                fail("actions", "actions of state " + std::to_string(s) +
                                    " must be a nonempty, strictly increasing list of "
                                    "nonnegative integers");
            actions.push_back(std::move(list));
        }
    }
    if (!diag.empty())
        throw ModelFileError(std::move(diag));

    const Layout layout(actions);
    const std::size_t n = num_states;
    std::vector<double> p(layout.num_pairs() * n, 0.0), r(layout.num_pairs() * n, 0.0);
    std::vector<bool> seen(layout.num_pairs(), false);
    std::vector<std::size_t> idx;

    const json& jt = j["transitions"];
    if (!jt.is_object()) {
        fail("transitions", "\"transitions\" must be an object keyed by \"s,a\"");
    } else {
        for (auto it = jt.begin(); it != jt.end(); ++it) {
            const std::string& key = it.key();
            if (!detail::parse_index_list(key, idx) || idx.size() != 2 || idx[0] >= n ||
                !layout.find_slot(idx[0], idx[1])) {
                fail(key, "transition key \"" + key + "\" is not an available (state,action) pair");
                continue;
            }
            const std::size_t pair = layout.pair_of(idx[0], idx[1]);
            seen[pair] = true;
            const json& row = it.value();
            if (!row.is_array() || row.size() != n) {
                fail(key, "transition row \"" + key + "\" must have " + std::to_string(n) +
                              " entries");
                continue;
            }
            double sum = 0.0;
            bool ok = true;
            for (std::size_t t = 0; t < n; ++t) {
                if (!row[t].is_number()) {
                    ok = false;
                    break;
                }
                const double v = row[t].get<double>();
                if (!std::isfinite(v) || v < 0.0)
                    ok = false;
                p[pair * n + t] = v;
                sum += v;
            }
            if (!ok)
                fail(key, "transition row \"" + key + "\" must hold finite nonnegative numbers");
            else if (std::abs(sum - 1.0) > kProbabilityTolerance)
                fail(key, "transition row \"" + key + "\" sums to " + format_double(sum) +
                              ", not 1");
        }
        for (std::size_t pair = 0; pair < layout.num_pairs(); ++pair)
            if (!seen[pair])
                diag.push_back({detail::line_of_key(text, "transitions"),
                                "missing transition row for pair \"" +
                                    std::to_string(layout.state_of_pair(pair)) + "," +
                                    std::to_string(layout.action_of_pair(pair)) + "\""});
    }

    if (j.contains("rewards")) {
        const json& jr = j["rewards"];
        if (!jr.is_object()) {
            fail("rewards", "\"rewards\" must be an object keyed by \"s,a,s'\"");
        } else {
            for (auto it = jr.begin(); it != jr.end(); ++it) {
                const std::string& key = it.key();
                if (!detail::parse_index_list(key, idx) || idx.size() != 3 || idx[0] >= n ||
                    idx[2] >= n || !layout.find_slot(idx[0], idx[1])) {
                    fail(key, "reward key \"" + key + "\" is not a valid (state,action,next) triple");
                    continue;
                }
                const json& v = it.value();
                const double value = v.is_number() ? v.get<double>() : -1.0;
                if (!(value >= 0.0 && value <= 1.0)) {
                    fail(key, "reward \"" + key + "\" must be a number in [0,1]");
                    continue;
                }
                r[layout.pair_of(idx[0], idx[1]) * n + idx[2]] = value;
            }
        }
    }
    if (!diag.empty())
        throw ModelFileError(std::move(diag));
    return Mdp(layout, std::move(p), std::move(r), gamma);
}

inline Mdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ModelFileError({{0, "cannot open " + path.string()}});
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_mdp(buffer.str());
}

inline void save_mdp(const Mdp& mdp, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << dump_mdp(mdp);
}

} // namespace tmdp
