// Experiment runner and metrics layer on top of the simulator: heat maps,
// ranking-loss sweeps, convergence penalties, Sybil gain, misreport
// resistance, and overhead accounting, emitted as CSV (sweeps) + JSON
// (full per-run reports).
//
// Output discipline: CSV content is a pure function of (config, seed) — no
// wall-clock numbers — so re-runs are byte-identical. Timing lives in the
// JSON report only.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coopnet/config.hpp"
#include "coopnet/meritrank.hpp"
#include "coopnet/simnet.hpp"

namespace coopnet {

// ---------------------------------------------------------------------------
// Heat map

// Entry (i, j) = subjective score of j in i's final ranking table; diagonal 0.
inline std::vector<std::vector<double>> heatmap_matrix(const World& w) {
    const auto n = w.base_peer_count();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j)
            if (i != j) m[i][j] = w.peers()[i].ranking.score_of(w.id_of(j));
    return m;
}

// ---------------------------------------------------------------------------
// Sybil gain

// The attack's effect on the ranking itself, isolated from gossip noise: take
// the materialized certificate graph of the attacked run and compare scores
// with and without the Sybil region (the no-attack counterfactual of the very
// same run, so "same seed" holds by construction). Monte Carlo evaluators
// reuse identical walk streams on both graphs, so a passive attack measures
// exactly zero rather than "small".
struct SybilGainReport {
    double gain_mc_pct = 0.0;
    double gain_exact_pct = 0.0;
    bool exact_available = false;  // oracle refuses graphs beyond its node cap
    double deserved_mc = 0.0;
    double attacked_mc = 0.0;
    double deserved_exact = 0.0;
    double attacked_exact = 0.0;
    // max over evaluators of (Sybil-set score − attacker score); ≤ 0 means the
    // bottleneck bound held everywhere.
    double worst_bottleneck_slack = 0.0;
};

namespace detail {

inline ContributionGraph strip_nodes(const ContributionGraph& g, const std::set<PeerId>& gone) {
    ContributionGraph out;
    for (const auto& n : g.nodes)
        if (!gone.count(n)) out.add_node(n);
    for (const auto& [from, row] : g.out_edges) {
        if (gone.count(from)) continue;
        for (const auto& [to, w] : row)
            if (!gone.count(to)) out.add_edge(from, to, w);
    }
    return out;
}

}  // namespace detail

inline SybilGainReport sybil_gain(const World& w, std::uint64_t walks = 20000) {
    SybilGainReport rep;
    const auto sybils = w.ids_with(Behavior::Sybil);
    const auto& attacker = w.id_of(w.config().attacker_index);

    const auto attacked_graph = w.union_graph();
    const std::set<PeerId> region(sybils.begin(), sybils.end());
    const auto base_graph = detail::strip_nodes(attacked_graph, region);

    std::vector<PeerId> evaluators;
    for (const auto& p : w.peers())
        if (p.behavior == Behavior::Honest) evaluators.push_back(p.keys.peer_id);

    // Monte Carlo, same stream on both graphs per evaluator.
    for (std::size_t e = 0; e < evaluators.size(); ++e) {
        const auto& id = evaluators[e];
        if (!base_graph.has_node(id)) continue;
        Rng r1 = Rng::stream(w.config().master_seed, "sybil_gain.eval", e);
        Rng r2 = Rng::stream(w.config().master_seed, "sybil_gain.eval", e);
        const auto with = compute_scores(attacked_graph, id, w.config().alpha, walks, r1);
        const auto without = compute_scores(base_graph, id, w.config().alpha, walks, r2);
        rep.deserved_mc += without.score_of(attacker);
        rep.attacked_mc += with.score_of(attacker);
        for (const auto& s : sybils) rep.attacked_mc += with.score_of(s);
    }
    if (rep.deserved_mc > 0.0)
        rep.gain_mc_pct = 100.0 * (rep.attacked_mc - rep.deserved_mc) / rep.deserved_mc;

    // Exact oracle, when the graph fits.
    if (attacked_graph.node_count() <= kExactOracleNodeCap) {
        rep.exact_available = true;
        rep.worst_bottleneck_slack = -1.0;
        for (const auto& id : evaluators) {
            if (!base_graph.has_node(id)) continue;
            const auto with = exact_scores(attacked_graph, id, w.config().alpha);
            const auto without = exact_scores(base_graph, id, w.config().alpha);
            rep.deserved_exact += without.score_of(attacker);
            rep.attacked_exact += with.score_of(attacker);
            for (const auto& s : sybils) rep.attacked_exact += with.score_of(s);
            if (!sybils.empty()) {
                const double set_p = exact_set_score(attacked_graph, id, w.config().alpha, region);
                rep.worst_bottleneck_slack = std::max(
                    rep.worst_bottleneck_slack, set_p - with.score_of(attacker));
            }
        }
        if (rep.deserved_exact > 0.0)
            rep.gain_exact_pct =
                100.0 * (rep.attacked_exact - rep.deserved_exact) / rep.deserved_exact;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Misreport resistance

// Punish everyone whose mean honest-evaluator exact score falls below tau.
// Then ask: which threshold tau' under the attacked graph reproduces that
// punishment set on the original nodes? Report |tau - tau'| together with the
// best-achievable set disagreement.
struct MisreportReport {
    double tau = 0.0;
    double tau_prime = 0.0;
    double gap = 0.0;
    std::size_t punished = 0;
    std::size_t mismatch = 0;  // members differing under tau_prime
    bool within_epsilon = false;
};

namespace detail {

// Mean exact score per pre-existing node, over honest evaluators (self
// excluded). Requires the oracle cap.
inline std::map<PeerId, double> mean_exact_scores(const ContributionGraph& g,
                                                  const std::vector<PeerId>& evaluators,
                                                  const std::vector<PeerId>& nodes,
                                                  double alpha) {
    std::map<PeerId, double> mean;
    std::map<PeerId, std::size_t> counts;
    for (const auto& e : evaluators) {
        if (!g.has_node(e)) continue;
        const auto t = exact_scores(g, e, alpha);
        for (const auto& n : nodes) {
            if (n == e) continue;
            mean[n] += t.score_of(n);
            ++counts[n];
        }
    }
    for (auto& [n, v] : mean)
        if (counts[n] > 0) v /= double(counts[n]);
    return mean;
}

}  // namespace detail

inline MisreportReport misreport_resistance_check(const ContributionGraph& base,
                                                  const ContributionGraph& attacked,
                                                  const std::vector<PeerId>& evaluators,
                                                  const std::vector<PeerId>& nodes, double alpha,
                                                  double tau, double epsilon) {
    MisreportReport rep;
    rep.tau = tau;

    const auto before = detail::mean_exact_scores(base, evaluators, nodes, alpha);
    const auto after = detail::mean_exact_scores(attacked, evaluators, nodes, alpha);

    std::set<PeerId> punished;
    for (const auto& n : nodes)
        if (before.at(n) < tau) punished.insert(n);
    rep.punished = punished.size();

    // Candidate thresholds: tau itself plus midpoints between adjacent
    // attacked-graph scores (and both extremes).
    std::vector<double> values;
    for (const auto& n : nodes) values.push_back(after.at(n));
    std::sort(values.begin(), values.end());
    std::vector<double> candidates{tau, values.front() - 1e-9, values.back() + 1e-9};
    for (std::size_t i = 1; i < values.size(); ++i)
        candidates.push_back(0.5 * (values[i - 1] + values[i]));

    std::size_t best_mismatch = nodes.size() + 1;
    double best_tau = tau;
    for (const double cand : candidates) {
        std::size_t mismatch = 0;
        for (const auto& n : nodes) {
            const bool now = after.at(n) < cand;
            if (now != (punished.count(n) != 0)) ++mismatch;
        }
        if (mismatch < best_mismatch ||
            (mismatch == best_mismatch && std::abs(cand - tau) < std::abs(best_tau - tau))) {
            best_mismatch = mismatch;
            best_tau = cand;
        }
    }
    rep.tau_prime = best_tau;
    rep.mismatch = best_mismatch;
    rep.gap = std::abs(tau - best_tau);
    rep.within_epsilon = rep.gap <= epsilon && best_mismatch == 0;
    return rep;
}

// ---------------------------------------------------------------------------
// Overhead

struct OverheadReport {
    double exchanged_bytes_per_peer = 0.0;  // Inserted/Replaced ingests x wire size
    double stored_bytes_per_peer = 0.0;
    double cert_count_per_peer = 0.0;
    double ranking_ms = 0.0;  // one compute_scores call on the union graph
    double extrapolated_bytes_full_scale = 0.0;
    std::uint32_t extrapolation_n = 7518;
};

inline OverheadReport overhead_report(const World& w, std::uint32_t full_scale_n = 7518) {
    OverheadReport rep;
    rep.extrapolation_n = full_scale_n;
    const auto n = w.base_peer_count();
    for (std::uint32_t i = 0; i < n; ++i) {
        rep.exchanged_bytes_per_peer += double(w.peers()[i].store.ingested_bytes());
        rep.stored_bytes_per_peer += double(w.peers()[i].store.stored_bytes());
        rep.cert_count_per_peer += double(w.peers()[i].store.size());
    }
    rep.exchanged_bytes_per_peer /= n;
    rep.stored_bytes_per_peer /= n;
    rep.cert_count_per_peer /= n;
    // Certificate volume grows with the number of contributing pairs a peer
    // tracks, which is linear in network size at fixed degree.
    rep.extrapolated_bytes_full_scale =
        rep.exchanged_bytes_per_peer * double(full_scale_n) / double(n);

    const auto graph = w.union_graph();
    if (graph.has_node(w.id_of(0))) {
        Rng rng = Rng::stream(w.config().master_seed, "overhead.timing");
        const auto t0 = std::chrono::steady_clock::now();
        (void)compute_scores(graph, w.id_of(0), w.config().alpha, w.config().walks, rng);
        const auto t1 = std::chrono::steady_clock::now();
        rep.ranking_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    return rep;
}

// Random graph at a given scale for ranking-cost measurements: `degree`
// outgoing edges per node toward uniformly random targets, unit-ish weights.
inline ContributionGraph synthetic_graph(std::uint32_t n, std::uint32_t degree, Rng& rng) {
    if (n < 2) throw std::invalid_argument("synthetic_graph: need at least two nodes");
    std::vector<PeerId> ids(n);
    for (std::uint32_t k = 0; k < n; ++k) {
        std::uint64_t state = fnv1a64(&k, sizeof k, 0x9e3779b9u);
        for (int w = 0; w < 4; ++w) {
            const std::uint64_t v = splitmix64(state);
            for (int b = 0; b < 8; ++b)
                ids[k].bytes[static_cast<std::size_t>(w * 8 + b)] =
                    static_cast<std::uint8_t>(v >> (8 * b));
        }
    }
    ContributionGraph g;
    for (const auto& id : ids) g.add_node(id);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t d = 0; d < degree; ++d) {
            auto j = static_cast<std::uint32_t>(rng.below(n - 1));
            if (j >= i) ++j;
            g.add_edge(ids[i], ids[j], Weight::from_units(1 + rng.below(20)));
        }
    return g;
}

// ---------------------------------------------------------------------------
// Experiment runner

struct MetricsReport {
    std::string experiment;
    std::string sweep_key;
    std::string sweep_value;
    std::uint64_t seed = 0;
    std::string cfg_hash;

    std::size_t transactions = 0;
    double mean_delay = 0.0;
    std::size_t flagged = 0;
    std::vector<double> loss_series;
    std::optional<double> ranking_loss_final;
    std::optional<SybilGainReport> sybil;
    OverheadReport overhead;
    std::uint64_t trace_hash = 0;
    std::uint64_t messages_sent = 0;
    std::uint64_t messages_lost = 0;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline bool wants(const ExperimentSpec& spec, const std::string& metric) {
    if (spec.outputs.empty()) return true;
    for (const auto& o : spec.outputs)
        if (o == metric) return true;
    return false;
}

}  // namespace detail

// One world per (sweep value, seed); returns the reports and, when out_dir is
// non-empty, writes <name>.csv and <name>.json there.
inline std::vector<MetricsReport> run_experiment(const ExperimentSpec& spec,
                                                 const std::string& out_dir = "",
                                                 std::optional<std::uint64_t> seed_override = {},
                                                 bool want_heatmap = false) {
    std::vector<MetricsReport> reports;
    nlohmann::json jruns = nlohmann::json::array();

    std::vector<std::string> sweep_points = spec.sweep_values;
    if (sweep_points.empty()) sweep_points.push_back("");

    const std::uint64_t seed_base = seed_override.value_or(spec.base.master_seed);

    std::string heat_csv;
    for (const auto& value : sweep_points) {
        for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep) {
            SimConfig cfg = spec.base;
            if (!value.empty()) set_config_key(cfg, spec.sweep_key, value);
            cfg.master_seed = seed_base + rep;
            cfg.validate();

            World w(cfg);
            w.run();

            MetricsReport r;
            r.experiment = spec.name;
            r.sweep_key = spec.sweep_key;
            r.sweep_value = value;
            r.seed = cfg.master_seed;
            r.cfg_hash = config_hash(cfg);
            const auto conv = w.convergence();
            r.transactions = conv.transactions;
            r.mean_delay = conv.mean_delay;
            r.flagged = conv.flagged;
            r.loss_series = w.loss_series();
            if (!r.loss_series.empty()) r.ranking_loss_final = r.loss_series.back();
            if (cfg.sybil_mode != SybilMode::None && detail::wants(spec, "sybil_gain"))
                r.sybil = sybil_gain(w);
            r.overhead = overhead_report(w);
            r.trace_hash = w.trace_hash();
            r.messages_sent = w.messages_sent();
            r.messages_lost = w.messages_lost();
            reports.push_back(r);

            if (want_heatmap) {
                const auto m = heatmap_matrix(w);
                for (std::uint32_t i = 0; i < m.size(); ++i)
                    for (std::uint32_t j = 0; j < m.size(); ++j)
                        heat_csv += spec.name + "," + value + "," + std::to_string(cfg.master_seed) +
                                    "," + std::to_string(i) + "," + std::to_string(j) + "," +
                                    detail::fmt_double(m[i][j]) + "\n";
            }

            nlohmann::json j;
            j["experiment"] = r.experiment;
            j["sweep_key"] = r.sweep_key;
            j["sweep_value"] = r.sweep_value;
            j["seed"] = r.seed;
            j["config_hash"] = r.cfg_hash;
            j["transactions"] = r.transactions;
            j["mean_delay_s"] = r.mean_delay;
            j["flagged"] = r.flagged;
            j["ranking_loss_series"] = r.loss_series;
            if (r.ranking_loss_final) j["ranking_loss"] = *r.ranking_loss_final;
            if (r.sybil) {
                j["sybil_gain_mc_pct"] = r.sybil->gain_mc_pct;
                if (r.sybil->exact_available) {
                    j["sybil_gain_exact_pct"] = r.sybil->gain_exact_pct;
                    j["bottleneck_slack"] = r.sybil->worst_bottleneck_slack;
                }
            }
            j["exchanged_bytes_per_peer"] = r.overhead.exchanged_bytes_per_peer;
            j["stored_bytes_per_peer"] = r.overhead.stored_bytes_per_peer;
            j["cert_count_per_peer"] = r.overhead.cert_count_per_peer;
            j["extrapolated_bytes_full_scale"] = r.overhead.extrapolated_bytes_full_scale;
            j["ranking_ms"] = r.overhead.ranking_ms;  // wall clock: JSON only
            j["trace_hash"] = r.trace_hash;
            j["messages_sent"] = r.messages_sent;
            j["messages_lost"] = r.messages_lost;
            jruns.push_back(std::move(j));
        }
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const auto stem = std::filesystem::path(out_dir) / spec.name;

        std::ofstream csv(stem.string() + ".csv");
        csv << "experiment,sweep_key,sweep_value,seed,config_hash,transactions,mean_delay_s,"
               "flagged,ranking_loss,sybil_gain_mc_pct,sybil_gain_exact_pct,"
               "exchanged_bytes_per_peer,stored_bytes_per_peer,cert_count_per_peer,trace_hash\n";
        for (const auto& r : reports) {
            csv << r.experiment << ',' << r.sweep_key << ',' << r.sweep_value << ',' << r.seed
                << ',' << r.cfg_hash << ',' << r.transactions << ','
                << detail::fmt_double(r.mean_delay) << ',' << r.flagged << ','
                << (r.ranking_loss_final ? detail::fmt_double(*r.ranking_loss_final) : "") << ','
                << (r.sybil ? detail::fmt_double(r.sybil->gain_mc_pct) : "") << ','
                << (r.sybil && r.sybil->exact_available
                        ? detail::fmt_double(r.sybil->gain_exact_pct)
                        : "")
                << ',' << detail::fmt_double(r.overhead.exchanged_bytes_per_peer) << ','
                << detail::fmt_double(r.overhead.stored_bytes_per_peer) << ','
                << detail::fmt_double(r.overhead.cert_count_per_peer) << ',' << r.trace_hash
                << '\n';
        }

        std::ofstream json_out(stem.string() + ".json");
        json_out << jruns.dump(2) << '\n';

        if (want_heatmap) {
            std::ofstream heat(stem.string() + "_heatmap.csv");
            heat << "experiment,sweep_value,seed,evaluator,target,score\n" << heat_csv;
        }
    }
    return reports;
}

}  // namespace coopnet
