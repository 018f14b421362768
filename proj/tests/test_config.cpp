#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "coopnet/config.hpp"

using namespace coopnet;

namespace {
ExperimentSpec parse(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_spec(in);
}
}  // namespace

TEST_CASE("full experiment file parses into every field") {
    const std::string text = R"(
# ranking loss sweep
[experiment]
name = loss_sweep
sweep_key = share_ratio
sweep_values = 1.0, 0.9, 0.7
repetitions = 10
outputs = ranking_loss, convergence

[sim]
n_peers = 100
sim_duration = 9000
workload_duration = 6000
measure_after = 1200
tx_rate = 0.2
spam_probability = 0.02
block_interval_mean = 900
fanout = 6
gossip_period = 2
crawl_period = 8       ; pull anti-entropy cadence
crawl_batch = 40
round_length = 600
loss_probability = 0.01
selfish_fraction = 0.25
share_ratio = 0.9
sybil_mode = active
sybil_count = 7
sybil_topology = ring
attacker_index = 3
sybil_cert_units = 50
crypto = nullhash
master_seed = 42

[sim.latency]
median_ms = 100
sigma = 0.5
jitter_ms = 2

[sim.selection]
slots = 10
bootstrap_rounds = 2
final_gamma = 8
mode = topk
push_gate = fullness

[sim.meritrank]
alpha = 0.25
walks = 500
)";
    const auto spec = parse(text);
    CHECK(spec.name == "loss_sweep");
    CHECK(spec.sweep_key == "share_ratio");
    CHECK(spec.sweep_values == std::vector<std::string>{"1.0", "0.9", "0.7"});
    CHECK(spec.repetitions == 10);
    CHECK(spec.outputs == std::vector<std::string>{"ranking_loss", "convergence"});

    const auto& c = spec.base;
    CHECK(c.n_peers == 100);
    CHECK(c.sim_duration == 9000.0);
    CHECK(c.workload_duration == 6000.0);
    CHECK(c.measure_after == 1200.0);
    CHECK(c.tx_rate == 0.2);
    CHECK(c.spam_probability == 0.02);
    CHECK(c.block_interval_mean == 900.0);
    CHECK(c.fanout == 6);
    CHECK(c.gossip_period == 2.0);
    CHECK(c.crawl_period == 8.0);
    CHECK(c.crawl_batch == 40);
    CHECK(c.round_length == 600.0);
    CHECK(c.loss_probability == 0.01);
    CHECK(c.selfish_fraction == 0.25);
    CHECK(c.share_ratio == 0.9);
    CHECK(c.sybil_mode == SybilMode::Active);
    CHECK(c.sybil_count == 7);
    CHECK(c.sybil_topology == SybilTopology::Ring);
    CHECK(c.attacker_index == 3);
    CHECK(c.sybil_cert_units == 50);
    CHECK(c.crypto == CryptoMode::NullHash);
    CHECK(c.master_seed == 42);
    CHECK(c.latency.median_s == 0.100);
    CHECK(c.latency.sigma == 0.5);
    CHECK(c.latency.jitter_s == 0.002);
    CHECK(c.selection.slots == 10);
    CHECK(c.selection.bootstrap.bootstrap_rounds == 2);
    CHECK(c.selection.bootstrap.final_gamma == 8);
    CHECK(c.selection.mode == SelectionMode::TopK);
    CHECK(c.selection.push_gate == PushGate::FullnessOnly);
    CHECK(c.alpha == 0.25);
    CHECK(c.walks == 500);
}

TEST_CASE("omitted keys keep their defaults") {
    const auto spec = parse("[sim]\nn_peers = 7\n");
    CHECK(spec.name == "experiment");
    CHECK(spec.repetitions == 1);
    CHECK(spec.sweep_key.empty());
    CHECK(spec.base.n_peers == 7);
    const SimConfig fresh;
    CHECK(spec.base.tx_rate == fresh.tx_rate);
    CHECK(spec.base.walks == fresh.walks);
    CHECK(spec.base.selection.slots == fresh.selection.slots);

    std::istringstream plain("[sim]\nn_peers = 9\n");
    CHECK(parse_sim_config(plain).n_peers == 9);
}

TEST_CASE("unknown keys and sections are rejected") {
    CHECK_THROWS_AS(parse("[sim]\nn_peerz = 7\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim]\nn_peers = 7\n[simulation]\ntx_rate = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("stray = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nrepetition = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim.meritrank]\nalpha = 0.2\nbeta = 0.1\n"), ConfigError);
}

TEST_CASE("syntax errors carry line diagnostics") {
    CHECK_THROWS_WITH(parse("[sim\nn_peers = 7\n"),
                      Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse("[sim]\nn_peers\n"), Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_AS(parse("[sim]\nn_peers = 7\nn_peers = 8\n"), ConfigError);
    CHECK_THROWS_AS(parse("[]\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim]\n= 4\n"), ConfigError);
}

TEST_CASE("values are validated while parsing") {
    CHECK_THROWS_AS(parse("[sim]\ntx_rate = fast\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim]\nn_peers = -4\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim]\nn_peers = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim]\nsybil_mode = aggressive\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim]\ncrypto = sha1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sim.selection]\nmode = best\n"), ConfigError);
    // Structurally fine, semantically invalid: caught before any simulation.
    CHECK_THROWS_AS(parse("[sim]\nn_peers = 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("[sim]\nshare_ratio = 1.5\n"), std::invalid_argument);
}

TEST_CASE("sweep declarations are checked up front") {
    const auto ok = parse(
        "[experiment]\nsweep_key = share_ratio\nsweep_values = 0.5, 1.0\n[sim]\nn_peers = 5\n");
    CHECK(ok.sweep_values.size() == 2);

    CHECK_THROWS_AS(
        parse("[experiment]\nsweep_key = warp_factor\nsweep_values = 1\n[sim]\nn_peers = 5\n"),
        ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nsweep_key = share_ratio\n[sim]\nn_peers = 5\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nsweep_values = 1, 2\n[sim]\nn_peers = 5\n"),
                    ConfigError);
    // Sweep values must be valid for the key, even before running.
    CHECK_THROWS_AS(
        parse("[experiment]\nsweep_key = share_ratio\nsweep_values = 0.5, two\n[sim]\nn_peers = 5\n"),
        ConfigError);

    SimConfig cfg;
    set_config_key(cfg, "selection.final_gamma", "12");
    CHECK(cfg.selection.bootstrap.final_gamma == 12);
    CHECK_THROWS_AS(set_config_key(cfg, "nonsense", "1"), ConfigError);
}

TEST_CASE("canonical serialization round-trips and hashes stably") {
    SimConfig cfg;
    cfg.n_peers = 33;
    cfg.tx_rate = 0.125;
    cfg.share_ratio = 0.7;
    cfg.sybil_mode = SybilMode::Passive;
    cfg.sybil_count = 4;
    cfg.selection.bootstrap.final_gamma = 5;
    cfg.master_seed = 99;

    const auto text = serialize_sim_config(cfg);
    std::istringstream in(text);
    const auto back = parse_sim_config(in);
    CHECK(serialize_sim_config(back) == text);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(config_hash(cfg).size() == 16);

    auto other = cfg;
    other.walks = cfg.walks + 1;
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("empirical latency tables load through the config layer") {
    const auto path = std::string("/tmp/coopnet_latency_test.csv");
    {
        std::ofstream out(path);
        out << "0,0,80\n0,1,120\n1,0,110\n1,1,60\n";
    }
    SimConfig cfg;
    set_config_key(cfg, "latency.jitter_ms", "5");
    set_config_key(cfg, "latency.table", path);
    REQUIRE(cfg.latency.empirical());
    CHECK(cfg.latency.regions() == 2);
    CHECK(cfg.latency.table_s[0][1] == 0.120);
    CHECK(cfg.latency.jitter_s == 0.005);

    CHECK_THROWS_AS(set_config_key(cfg, "latency.table", "/nonexistent/nowhere.csv"),
                    ConfigError);
    {
        std::ofstream out(path);
        out << "0,0,80\n1,1,60\n";  // missing cross pairs
    }
    CHECK_THROWS_AS(set_config_key(cfg, "latency.table", path), ConfigError);
}
