// coopnet: experiment runner for the cooperation-ranking simulator.
//
//   coopnet run <spec.ini> [--out DIR] [--seed S] [--scale desk|paper]
//   coopnet heatmap <spec.ini> [--out DIR] [--seed S]
//   coopnet verify
//
// `run` executes an experiment spec and writes CSV + JSON reports. `heatmap`
// additionally dumps the N x N subjective score matrix. `verify` runs a fast
// self-contained invariant and oracle suite and exits nonzero on any failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "coopnet/config.hpp"
#include "coopnet/experiments.hpp"

namespace {

using namespace coopnet;

// Full-scale parameters from the measurement setup the simulator models. The
// run takes hours; desk scale is the default for a reason.
void apply_paper_scale(SimConfig& cfg) {
    cfg.n_peers = 7518;
    cfg.sim_duration = 30.0 * 86400.0;
    cfg.workload_duration = -1.0;
    cfg.round_length = 86400.0;
    cfg.tx_rate = 2.5;
    cfg.block_interval_mean = 600.0;
    cfg.fanout = 8;
    cfg.gossip_period = 0.5;
}

int cmd_run(const std::string& spec_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, const std::string& scale, bool want_heatmap) {
    ExperimentSpec spec;
    try {
        spec = load_experiment_spec(spec_path);
        if (scale == "paper") {
            apply_paper_scale(spec.base);
            spec.base.validate();
            std::fprintf(stderr, "note: paper scale selected (N=%u, %.0f days); this is long-running\n",
                         spec.base.n_peers, spec.base.sim_duration / 86400.0);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    try {
        const auto reports = run_experiment(spec, out_dir, seed, want_heatmap);
        for (const auto& r : reports) {
            std::printf("%s sweep=%s seed=%llu txs=%zu mean_delay=%.4fs", r.experiment.c_str(),
                        r.sweep_value.empty() ? "-" : r.sweep_value.c_str(),
                        static_cast<unsigned long long>(r.seed), r.transactions, r.mean_delay);
            if (r.ranking_loss_final) std::printf(" ranking_loss=%.4f", *r.ranking_loss_final);
            if (r.sybil) {
                std::printf(" sybil_gain_mc=%.3f%%", r.sybil->gain_mc_pct);
                if (r.sybil->exact_available)
                    std::printf(" sybil_gain_exact=%.3f%%", r.sybil->gain_exact_pct);
            }
            std::printf("\n");
        }
        if (!out_dir.empty())
            std::printf("wrote %s/%s.{csv,json}%s\n", out_dir.c_str(), spec.name.c_str(),
                        want_heatmap ? " + heatmap csv" : "");
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

// ---------------------------------------------------------------------------
// verify: quick invariant/oracle sweep

struct Verifier {
    int failures = 0;
    void check(const char* name, bool ok) {
        std::printf("%s  %s\n", ok ? "ok " : "FAIL", name);
        if (!ok) ++failures;
    }
};

int cmd_verify() {
    Verifier v;
    CryptoSuite suite(CryptoMode::Ed25519);

    // Certificates: canonical encoding, signature binding, merge direction.
    {
        const auto a = suite.generate_keypair(1), b = suite.generate_keypair(2);
        auto cert = create_certificate(suite, a, b.peer_id, Weight::from_units(42), 7);
        const auto wire = encode_certificate(cert);
        v.check("certificate wire size is the documented constant",
                wire.size() == kCertificateWireSize && kCertificateWireSize <= 220);
        const auto back = decode_certificate(wire);
        v.check("certificate decode(encode) round-trips",
                back && *back == cert && verify_certificate(suite, *back));
        auto tampered = wire;
        tampered[40] ^= 1;
        const auto bad = decode_certificate(tampered);
        v.check("tampered certificate fails verification",
                bad && !verify_certificate(suite, *bad));

        CertificateStore s1(suite), s2(suite);
        auto newer = create_certificate(suite, a, b.peer_id, Weight::from_units(50), 9);
        s1.ingest(cert);
        s1.ingest(newer);
        s2.ingest(newer);
        s2.ingest(cert);
        v.check("certificate merge is order-independent", s1.dump() == s2.dump());
    }

    // Ranking: Monte Carlo after the exact oracle, on a fixed random graph.
    {
        Rng rng(99);
        const auto g = synthetic_graph(12, 3, rng);
        const auto seed_id = *g.nodes.begin();
        const auto exact = exact_scores(g, seed_id, 0.2);
        Rng mc_rng(100);
        const auto mc = compute_scores(g, seed_id, 0.2, 20000, mc_rng);
        double worst = 0.0;
        for (const auto& n : g.nodes)
            if (n != seed_id)
                worst = std::max(worst, std::abs(exact.score_of(n) - mc.score_of(n)));
        v.check("Monte Carlo matches the exact oracle within 0.02", worst < 0.02);

        const auto attack = inject_passive_graph(g, seed_id, 6);
        const auto after = exact_scores(attack.graph, seed_id, 0.2);
        bool unchanged = true;
        for (const auto& n : g.nodes)
            unchanged = unchanged && exact.score_of(n) == after.score_of(n);
        v.check("passive sybil region cannot move exact scores", unchanged);

        const auto active = inject_active_graph(g, seed_id, 6);
        const auto evaluator = *std::next(g.nodes.begin(), 3);
        const std::set<PeerId> region(active.sybil_ids.begin(), active.sybil_ids.end());
        const auto table = exact_scores(active.graph, evaluator, 0.2);
        const double set_p = exact_set_score(active.graph, evaluator, 0.2, region);
        v.check("active sybil set score obeys the bottleneck bound",
                set_p <= table.score_of(seed_id) + 1e-12);
    }

    // Selection: gamma schedule and the beta >= 1 floor.
    {
        BootstrapSchedule sched{5, 100};
        v.check("gamma stays zero through bootstrap",
                effective_gamma(sched, 0) == 0 && effective_gamma(sched, 4) == 0);
        v.check("gamma ramps after bootstrap and caps at its target",
                effective_gamma(sched, 5) > 0 && effective_gamma(sched, 1000) == 100);
        Rng rng(7);
        SelectionConfig sel;
        sel.slots = 8;
        sel.bootstrap = {0, 8};
        CryptoSuite nh(CryptoMode::NullHash);
        SlotTable table(nh.generate_keypair(1).peer_id, sel, 3, rng);
        v.check("at least one stranger slot survives any gamma", table.beta() >= 1);
    }

    // Simulation: bit-for-bit determinism of a small world.
    {
        SimConfig cfg;
        cfg.n_peers = 8;
        cfg.sim_duration = 200.0;
        cfg.workload_duration = 120.0;
        cfg.tx_rate = 0.5;
        cfg.block_interval_mean = 60.0;
        cfg.gossip_period = 1.0;
        cfg.crawl_period = 4.0;
        cfg.round_length = 40.0;
        cfg.loss_probability = 0.05;
        cfg.selfish_fraction = 0.25;
        cfg.share_ratio = 0.5;
        cfg.walks = 200;
        cfg.master_seed = 321;
        World w1(cfg), w2(cfg);
        w1.run();
        w2.run();
        v.check("same config and seed reproduce the event trace",
                w1.trace_hash() == w2.trace_hash());
        bool conserved = true;
        for (const auto& [id, rec] : w1.transactions())
            conserved = conserved && rec.credits <= cfg.n_peers - 1 &&
                        (rec.fee > 0 || rec.credits == 0);
        v.check("per-transaction credit conservation", conserved);
    }

    std::printf("%s (%d failure%s)\n", v.failures == 0 ? "verify passed" : "verify FAILED",
                v.failures, v.failures == 1 ? "" : "s");
    return v.failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cooperation-ranking network simulator"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, scale = "desk";
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run an experiment spec");
    run->add_option("spec", spec_path, "experiment spec file")->required();
    run->add_option("--out", out_dir, "output directory for CSV/JSON");
    run->add_option("--seed", seed, "override the base master seed");
    run->add_option("--scale", scale, "desk (as configured) or paper (full size)")
        ->check(CLI::IsMember({"desk", "paper"}));

    auto* heat = app.add_subcommand("heatmap", "run and dump subjective score matrices");
    heat->add_option("spec", spec_path, "experiment spec file")->required();
    heat->add_option("--out", out_dir, "output directory for CSV/JSON");
    heat->add_option("--seed", seed, "override the base master seed");

    auto* verify = app.add_subcommand("verify", "run the fast invariant/oracle suite");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(spec_path, out_dir, seed, scale, false);
    if (heat->parsed()) return cmd_run(spec_path, out_dir, seed, "desk", true);
    if (verify->parsed()) return cmd_verify();
    return 1;
}
