// Structured-text configuration: an INI dialect mapping 1:1 onto SimConfig,
// plus the experiment-spec envelope (sweep, repetitions, outputs).
//
// Layout: top-level [experiment] block, a [sim] block, and nested blocks
// [sim.latency], [sim.selection], [sim.meritrank]. '#' and ';' start
// comments. Unknown sections or keys are hard errors — a typo must never
// silently fall back to a default.

#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopnet/simnet.hpp"

namespace coopnet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
    std::string name = "experiment";
    SimConfig base;
    std::string sweep_key;                  // empty: single point
    std::vector<std::string> sweep_values;  // raw tokens, applied per run
    std::uint32_t repetitions = 1;
    std::vector<std::string> outputs;  // metric selectors; empty = everything
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    return x;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0' || v.find('-') != std::string::npos)
        throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" + v +
                          "'");
    return static_cast<std::uint64_t>(x);
}

inline std::uint32_t parse_u32(const std::string& key, const std::string& v) {
    const auto x = parse_u64(key, v);
    if (x > 0xffffffffULL)
        throw ConfigError("config: key '" + key + "' out of 32-bit range: '" + v + "'");
    return static_cast<std::uint32_t>(x);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Flat key/value view of a config file: "section.key" -> value.
using KvMap = std::map<std::string, std::string>;

inline KvMap parse_kv(std::istream& in) {
    KvMap kv;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) line.erase(cut);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: bad section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config: empty section name at line " + std::to_string(lineno));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected 'key = value' at line " + std::to_string(lineno));
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key at line " + std::to_string(lineno));
        const auto full = section.empty() ? key : section + "." + key;
        if (!kv.emplace(full, value).second)
            throw ConfigError("config: duplicate key '" + full + "'");
    }
    return kv;
}

}  // namespace detail

// Assign one SimConfig field by its config-file name ("share_ratio",
// "selection.final_gamma", ...). This is also the sweep mechanism, so every
// scalar knob listed here is sweepable. Unknown keys throw.
inline void set_config_key(SimConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_u32;
    using detail::parse_u64;

    if (key == "n_peers") cfg.n_peers = parse_u32(key, value);
    else if (key == "sim_duration") cfg.sim_duration = parse_double(key, value);
    else if (key == "workload_duration") cfg.workload_duration = parse_double(key, value);
    else if (key == "measure_after") cfg.measure_after = parse_double(key, value);
    else if (key == "tx_rate") cfg.tx_rate = parse_double(key, value);
    else if (key == "spam_probability") cfg.spam_probability = parse_double(key, value);
    else if (key == "block_interval_mean") cfg.block_interval_mean = parse_double(key, value);
    else if (key == "fanout") cfg.fanout = parse_u32(key, value);
    else if (key == "gossip_period") cfg.gossip_period = parse_double(key, value);
    else if (key == "crawl_period") cfg.crawl_period = parse_double(key, value);
    else if (key == "crawl_batch") cfg.crawl_batch = parse_u32(key, value);
    else if (key == "round_length") cfg.round_length = parse_double(key, value);
    else if (key == "loss_probability") cfg.loss_probability = parse_double(key, value);
    else if (key == "selfish_fraction") cfg.selfish_fraction = parse_double(key, value);
    else if (key == "share_ratio") cfg.share_ratio = parse_double(key, value);
    else if (key == "sybil_mode") {
        if (value == "none") cfg.sybil_mode = SybilMode::None;
        else if (value == "passive") cfg.sybil_mode = SybilMode::Passive;
        else if (value == "active") cfg.sybil_mode = SybilMode::Active;
        else throw ConfigError("config: sybil_mode must be none|passive|active, got '" + value + "'");
    } else if (key == "sybil_count") cfg.sybil_count = parse_u32(key, value);
    else if (key == "sybil_topology") {
        if (value == "mesh") cfg.sybil_topology = SybilTopology::Mesh;
        else if (value == "ring") cfg.sybil_topology = SybilTopology::Ring;
        else throw ConfigError("config: sybil_topology must be mesh|ring, got '" + value + "'");
    } else if (key == "attacker_index") cfg.attacker_index = parse_u32(key, value);
    else if (key == "sybil_cert_units") cfg.sybil_cert_units = parse_u64(key, value);
    else if (key == "crypto") {
        if (value == "nullhash") cfg.crypto = CryptoMode::NullHash;
        else if (value == "ed25519") cfg.crypto = CryptoMode::Ed25519;
        else throw ConfigError("config: crypto must be nullhash|ed25519, got '" + value + "'");
    } else if (key == "master_seed") cfg.master_seed = parse_u64(key, value);
    else if (key == "trace_path") cfg.trace_path = value;
    else if (key == "latency.median_ms") cfg.latency.median_s = parse_double(key, value) / 1000.0;
    else if (key == "latency.sigma") cfg.latency.sigma = parse_double(key, value);
    else if (key == "latency.jitter_ms") cfg.latency.jitter_s = parse_double(key, value) / 1000.0;
    else if (key == "latency.table") {
        std::ifstream table(value);
        if (!table) throw ConfigError("config: cannot open latency table '" + value + "'");
        const double jitter = cfg.latency.jitter_s;
        try {
            cfg.latency = load_latency_table(table, jitter);
        } catch (const std::runtime_error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    } else if (key == "selection.slots") cfg.selection.slots = parse_u32(key, value);
    else if (key == "selection.bootstrap_rounds")
        cfg.selection.bootstrap.bootstrap_rounds = parse_u64(key, value);
    else if (key == "selection.final_gamma")
        cfg.selection.bootstrap.final_gamma = parse_u32(key, value);
    else if (key == "selection.mode") {
        if (value == "proportional") cfg.selection.mode = SelectionMode::Proportional;
        else if (value == "topk") cfg.selection.mode = SelectionMode::TopK;
        else throw ConfigError("config: selection.mode must be proportional|topk, got '" + value + "'");
    } else if (key == "selection.push_gate") {
        if (value == "slotclass") cfg.selection.push_gate = PushGate::SlotClass;
        else if (value == "fullness") cfg.selection.push_gate = PushGate::FullnessOnly;
        else throw ConfigError("config: selection.push_gate must be slotclass|fullness, got '" +
                               value + "'");
    } else if (key == "meritrank.alpha") cfg.alpha = parse_double(key, value);
    else if (key == "meritrank.walks") cfg.walks = parse_u64(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline ExperimentSpec parse_experiment_spec(std::istream& in) {
    auto kv = detail::parse_kv(in);
    ExperimentSpec spec;

    auto take = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) return "";
        auto v = it->second;
        kv.erase(it);
        return v;
    };

    if (auto v = take("experiment.name"); !v.empty()) spec.name = v;
    if (auto v = take("experiment.sweep_key"); !v.empty()) spec.sweep_key = v;
    if (auto v = take("experiment.sweep_values"); !v.empty())
        spec.sweep_values = detail::split_list(v);
    if (auto v = take("experiment.repetitions"); !v.empty())
        spec.repetitions = detail::parse_u32("experiment.repetitions", v);
    if (auto v = take("experiment.outputs"); !v.empty()) spec.outputs = detail::split_list(v);

    // Everything else must be a sim key.
    for (auto it = kv.begin(); it != kv.end();) {
        const auto& full = it->first;
        if (full.rfind("sim.", 0) != 0)
            throw ConfigError("config: unknown key '" + full + "'");
        set_config_key(spec.base, full.substr(4), it->second);
        it = kv.erase(it);
    }

    if (spec.repetitions < 1) throw ConfigError("config: repetitions must be at least 1");
    if (!spec.sweep_key.empty() && spec.sweep_values.empty())
        throw ConfigError("config: sweep_key set but sweep_values empty");
    if (spec.sweep_key.empty() && !spec.sweep_values.empty())
        throw ConfigError("config: sweep_values set but sweep_key missing");
    if (!spec.sweep_key.empty()) {
        // The sweep parameter must exist; dry-apply every value now so a bad
        // sweep fails before any simulation starts.
        for (const auto& v : spec.sweep_values) {
            SimConfig probe = spec.base;
            set_config_key(probe, spec.sweep_key, v);
        }
    }
    spec.base.validate();
    return spec;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    try {
        return parse_experiment_spec(in);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (" + path + ")");
    }
}

inline SimConfig parse_sim_config(std::istream& in) { return parse_experiment_spec(in).base; }

// Canonical text form: every field, fixed order, %.17g doubles. Equal configs
// serialize identically, so the FNV hash of this string labels a run.
inline std::string serialize_sim_config(const SimConfig& cfg) {
    std::string out;
    char buf[64];
    auto num = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
        out += buf;
    };
    auto integer = [&](const char* key, std::uint64_t v) {
        std::snprintf(buf, sizeof buf, "%s = %llu\n", key, static_cast<unsigned long long>(v));
        out += buf;
    };
    auto word = [&](const char* key, const std::string& v) { out += key; out += " = "; out += v; out += '\n'; };

    out += "[sim]\n";
    integer("n_peers", cfg.n_peers);
    num("sim_duration", cfg.sim_duration);
    num("workload_duration", cfg.workload_duration);
    num("measure_after", cfg.measure_after);
    num("tx_rate", cfg.tx_rate);
    num("spam_probability", cfg.spam_probability);
    num("block_interval_mean", cfg.block_interval_mean);
    integer("fanout", cfg.fanout);
    num("gossip_period", cfg.gossip_period);
    num("crawl_period", cfg.crawl_period);
    integer("crawl_batch", cfg.crawl_batch);
    num("round_length", cfg.round_length);
    num("loss_probability", cfg.loss_probability);
    num("selfish_fraction", cfg.selfish_fraction);
    num("share_ratio", cfg.share_ratio);
    word("sybil_mode", cfg.sybil_mode == SybilMode::None
                           ? "none"
                           : cfg.sybil_mode == SybilMode::Passive ? "passive" : "active");
    integer("sybil_count", cfg.sybil_count);
    word("sybil_topology", cfg.sybil_topology == SybilTopology::Mesh ? "mesh" : "ring");
    integer("attacker_index", cfg.attacker_index);
    integer("sybil_cert_units", cfg.sybil_cert_units);
    word("crypto", cfg.crypto == CryptoMode::NullHash ? "nullhash" : "ed25519");
    integer("master_seed", cfg.master_seed);
    out += "[sim.latency]\n";
    num("median_ms", cfg.latency.median_s * 1000.0);
    num("sigma", cfg.latency.sigma);
    num("jitter_ms", cfg.latency.jitter_s * 1000.0);
    if (cfg.latency.empirical()) {
        integer("regions", cfg.latency.regions());
        for (std::size_t i = 0; i < cfg.latency.regions(); ++i)
            for (std::size_t j = 0; j < cfg.latency.regions(); ++j) {
                std::snprintf(buf, sizeof buf, "cell_%zu_%zu = %.17g\n", i, j,
                              cfg.latency.table_s[i][j]);
                out += buf;
            }
    }
    out += "[sim.selection]\n";
    integer("slots", cfg.selection.slots);
    integer("bootstrap_rounds", cfg.selection.bootstrap.bootstrap_rounds);
    integer("final_gamma", cfg.selection.bootstrap.final_gamma);
    word("mode", cfg.selection.mode == SelectionMode::Proportional ? "proportional" : "topk");
    word("push_gate", cfg.selection.push_gate == PushGate::SlotClass ? "slotclass" : "fullness");
    out += "[sim.meritrank]\n";
    num("alpha", cfg.alpha);
    integer("walks", cfg.walks);
    return out;
}

inline std::string config_hash(const SimConfig& cfg) {
    const auto text = serialize_sim_config(cfg);
    const auto h = fnv1a64(text.data(), text.size());
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace coopnet
