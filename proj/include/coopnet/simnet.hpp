// Deterministic discrete-event simulation of a Bitcoin-like gossip network
// with contribution accounting layered on top.
//
// Peers exchange transactions and blocks through slot-limited gossip, credit
// utility to whoever delivered a useful message first, certify those credits
// once per round, crawl certificates from neighbors, rank everyone with
// alpha-terminating walks over their subjective contribution graph, and let
// that ranking drive next round's slot selection.
//
// Determinism contract: every source of randomness is an Rng stream named
// (master_seed, purpose[, index]) — workload, transport, one stream per peer,
// one per walk. Event ties are broken by scheduling sequence number. The same
// (config, master_seed) therefore yields the same event trace bit for bit;
// run() maintains an FNV hash of the trace to make that checkable.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coopnet/identity.hpp"
#include "coopnet/ledger.hpp"
#include "coopnet/meritrank.hpp"
#include "coopnet/rng.hpp"
#include "coopnet/selection.hpp"

namespace coopnet {

// ---------------------------------------------------------------------------
// Latency model

struct LatencyModel {
    // Log-normal defaults; used whenever `table_s` is empty.
    double median_s = 0.120;
    double sigma = 0.6;
    // Empirical region-to-region table (seconds) with uniform jitter on top.
    std::vector<std::vector<double>> table_s;
    double jitter_s = 0.0;

    bool empirical() const { return !table_s.empty(); }
    std::size_t regions() const { return table_s.size(); }
};

// CSV columns: src_region, dst_region, latency_ms. Regions must form a dense
// 0..R-1 square with every pair present.
inline LatencyModel load_latency_table(std::istream& in, double jitter_s = 0.0) {
    std::map<std::pair<std::size_t, std::size_t>, double> cells;
    std::size_t max_region = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::size_t src = 0, dst = 0;
        double ms = 0.0;
        char extra;
        if (std::sscanf(line.c_str(), "%zu , %zu , %lf %c", &src, &dst, &ms, &extra) != 3 &&
            std::sscanf(line.c_str(), "%zu,%zu,%lf", &src, &dst, &ms) != 3)
            throw std::runtime_error("latency table: malformed line " + std::to_string(lineno));
        if (ms <= 0.0)
            throw std::runtime_error("latency table: non-positive latency at line " +
                                     std::to_string(lineno));
        cells[{src, dst}] = ms / 1000.0;
        max_region = std::max(max_region, std::max(src, dst));
    }
    if (cells.empty()) throw std::runtime_error("latency table: empty");
    const std::size_t r = max_region + 1;
    LatencyModel model;
    model.jitter_s = jitter_s;
    model.table_s.assign(r, std::vector<double>(r, 0.0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            auto it = cells.find({i, j});
            if (it == cells.end())
                throw std::runtime_error("latency table: missing pair " + std::to_string(i) +
                                         "->" + std::to_string(j));
            model.table_s[i][j] = it->second;
        }
    return model;
}

inline double sample_latency(const LatencyModel& model, std::uint32_t src, std::uint32_t dst,
                             Rng& rng) {
    if (src == dst) throw std::invalid_argument("sample_latency: src == dst");
    if (model.empirical()) {
        const auto r = model.regions();
        double v = model.table_s[src % r][dst % r];
        if (model.jitter_s > 0.0) v += rng.uniform(0.0, model.jitter_s);
        return v;
    }
    return rng.lognormal_median(model.median_s, model.sigma);
}

// ---------------------------------------------------------------------------
// Event queue

template <typename E>
class EventQueue {
  public:
    void schedule(double delay, E payload) {
        if (delay < 0.0) throw std::invalid_argument("EventQueue: negative delay");
        schedule_at(now_ + delay, std::move(payload));
    }

    void schedule_at(double time, E payload) {
        heap_.push(Item{time, next_seq_++, std::move(payload)});
    }

    double now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

    std::optional<std::pair<double, E>> pop() {
        if (heap_.empty()) return std::nullopt;
        Item top = heap_.top();
        heap_.pop();
        now_ = top.time;
        return std::make_pair(top.time, std::move(top.payload));
    }

    // Drain in (time, sequence) order until the queue is empty or the next
    // event lies beyond `until`.
    template <typename Handler>
    void run(double until, Handler&& handler) {
        while (!heap_.empty() && heap_.top().time <= until) {
            Item top = heap_.top();
            heap_.pop();
            now_ = top.time;
            handler(top.time, top.payload);
        }
    }

  private:
    struct Item {
        double time;
        std::uint64_t seq;
        E payload;
        bool operator>(const Item& o) const {
            if (time != o.time) return time > o.time;
            return seq > o.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Messages and events

enum class MsgKind : std::uint8_t {
    Transaction,
    Block,
    CertBatch,
    CrawlRequest,
    SlotRequest,
    SlotReply
};

// How many round ticks a first-sighted message keeps being re-announced.
inline constexpr std::uint32_t kReannounceRounds = 3;

struct Message {
    MsgKind kind = MsgKind::Transaction;
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint64_t id = 0;      // transaction or block id
    std::uint64_t fee = 0;     // transactions; 0 marks spam
    std::uint64_t height = 0;  // blocks
    std::uint64_t parent = 0;  // blocks
    std::vector<ContributionCertificate> certs;
    bool accept = false;     // SlotReply verdict
    std::uint32_t slot = 0;  // requester's pull slot, echoed in the reply

    std::size_t size_bytes() const {
        switch (kind) {
            case MsgKind::Transaction: return 250;
            case MsgKind::Block: return 80;
            case MsgKind::CertBatch: return 4 + certs.size() * kCertificateWireSize;
            case MsgKind::CrawlRequest: return 40;
            case MsgKind::SlotRequest: return 40;
            case MsgKind::SlotReply: return 41;
        }
        return 0;
    }
};

enum class EvKind : std::uint8_t {
    TxCreate,
    BlockCreate,
    GossipTick,
    CrawlTick,
    RoundTick,
    Deliver
};

struct SimEvent {
    EvKind kind = EvKind::TxCreate;
    std::uint32_t peer = 0;  // deliver target, tick owner, or originator
    Message msg;
};

// ---------------------------------------------------------------------------
// Configuration

enum class SybilMode { None, Passive, Active };
enum class SybilTopology { Mesh, Ring };

struct SimConfig {
    std::uint32_t n_peers = 200;
    double sim_duration = 2.0 * 86400.0;
    double workload_duration = -1.0;  // < 0: same as sim_duration
    double measure_after = 0.0;       // convergence stats ignore earlier transactions
    double tx_rate = 2.5;
    double spam_probability = 0.01;
    double block_interval_mean = 600.0;
    std::uint32_t fanout = 8;
    double gossip_period = 0.5;
    double crawl_period = -1.0;  // < 0: same as gossip_period
    std::uint32_t crawl_batch = 50;
    double round_length = 86400.0;
    LatencyModel latency;
    double loss_probability = 0.01;
    double selfish_fraction = 0.0;
    double share_ratio = 1.0;
    SybilMode sybil_mode = SybilMode::None;
    std::uint32_t sybil_count = 0;
    SybilTopology sybil_topology = SybilTopology::Mesh;
    std::uint32_t attacker_index = 0;
    std::uint64_t sybil_cert_units = 0;  // 0: ten times the mean honest edge weight
    SelectionConfig selection;
    double alpha = kDefaultAlpha;
    std::uint64_t walks = kDefaultWalkCount;
    CryptoMode crypto = CryptoMode::NullHash;
    std::uint64_t master_seed = 1;
    std::string trace_path;  // non-empty: line-delimited event dump

    double effective_workload_duration() const {
        return workload_duration < 0.0 ? sim_duration : workload_duration;
    }
    double effective_crawl_period() const {
        return crawl_period < 0.0 ? gossip_period : crawl_period;
    }

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("SimConfig: " + what); };
        if (n_peers < 1) fail("n_peers must be positive");
        if (sim_duration <= 0.0) fail("sim_duration must be positive");
        if (tx_rate < 0.0) fail("tx_rate must be non-negative");
        if (block_interval_mean <= 0.0) fail("block_interval_mean must be positive");
        if (fanout < 1) fail("fanout must be positive");
        if (gossip_period <= 0.0) fail("gossip_period must be positive");
        if (crawl_period == 0.0) fail("crawl_period must be positive");
        if (round_length <= 0.0) fail("round_length must be positive");
        if (loss_probability < 0.0 || loss_probability > 1.0) fail("loss_probability outside [0,1]");
        if (selfish_fraction < 0.0 || selfish_fraction > 1.0) fail("selfish_fraction outside [0,1]");
        if (share_ratio < 0.0 || share_ratio > 1.0) fail("share_ratio outside [0,1]");
        if (spam_probability < 0.0 || spam_probability > 1.0) fail("spam_probability outside [0,1]");
        if (attacker_index >= n_peers) fail("attacker_index out of range");
        if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha outside (0,1)");
        if (walks < 1) fail("walks must be positive");
        if (selection.slots < 1) fail("selection.slots must be positive");
        if (measure_after < 0.0) fail("measure_after must be non-negative");
        if (workload_duration > sim_duration) fail("workload_duration exceeds sim_duration");
    }
};

// ---------------------------------------------------------------------------
// Workload

struct WorkloadEvent {
    double time = 0.0;
    bool is_block = false;
    std::uint32_t originator = 0;
    std::uint64_t id = 0;
    std::uint64_t fee = 0;
};

// Poisson transaction arrivals and exponential block intervals, pre-generated
// so the sequence survives any event interleaving.
inline std::vector<WorkloadEvent> generate_workload(const SimConfig& cfg, Rng& rng) {
    std::vector<WorkloadEvent> tx, blocks;
    const double horizon = cfg.effective_workload_duration();
    if (cfg.tx_rate > 0.0) {
        double t = rng.exponential(1.0 / cfg.tx_rate);
        std::uint64_t next_id = 1;
        while (t <= horizon) {
            WorkloadEvent e;
            e.time = t;
            e.originator = static_cast<std::uint32_t>(rng.below(cfg.n_peers));
            e.id = next_id++;
            e.fee = rng.bernoulli(cfg.spam_probability) ? 0 : 1 + rng.below(1000);
            tx.push_back(e);
            t += rng.exponential(1.0 / cfg.tx_rate);
        }
    }
    {
        double t = rng.exponential(cfg.block_interval_mean);
        std::uint64_t next_id = 1;  // block id 0 is the genesis block
        while (t <= horizon) {
            WorkloadEvent e;
            e.time = t;
            e.is_block = true;
            e.originator = static_cast<std::uint32_t>(rng.below(cfg.n_peers));
            e.id = next_id++;
            blocks.push_back(e);
            t += rng.exponential(cfg.block_interval_mean);
        }
    }
    std::vector<WorkloadEvent> merged;
    merged.reserve(tx.size() + blocks.size());
    std::size_t i = 0, j = 0;
    while (i < tx.size() || j < blocks.size()) {
        const bool take_tx =
            j >= blocks.size() || (i < tx.size() && tx[i].time <= blocks[j].time);
        merged.push_back(take_tx ? tx[i++] : blocks[j++]);
    }
    return merged;
}

// ---------------------------------------------------------------------------
// Peers

enum class Behavior : std::uint8_t { Honest, Selfish, SybilAttacker, Sybil };

struct SimPeer {
    Keypair keys;
    Behavior behavior = Behavior::Honest;
    double share_ratio = 1.0;
    Rng rng{0};

    std::set<std::uint64_t> mempool;
    std::map<std::uint64_t, std::uint64_t> blocks{{0, 0}};  // id -> height, genesis known
    std::uint64_t tip_height = 0;
    std::uint64_t tip_id = 0;

    std::vector<Message> outbox;
    // First-sighted messages with their remaining re-announce budget. Each
    // round tick re-offers them to the fresh slot neighbors; without a few
    // repeats a peer missed on consecutive waves could be stranded for good.
    std::vector<std::pair<std::uint32_t, Message>> recent;
    std::map<std::pair<MsgKind, std::uint64_t>, bool> share_decisions;

    CertificateStore store;
    UtilityAccumulator accumulator;
    std::map<PeerId, Weight> cumulative;
    std::optional<SlotTable> slots;
    RankingTable ranking;
    std::uint32_t pull_retries = 0;  // re-plan budget left this round

    explicit SimPeer(CryptoSuite suite) : store(suite) {}

    // Selfish peers decide once per message and never reverse a withhold;
    // everyone else always shares.
    bool decides_to_share(MsgKind kind, std::uint64_t id) {
        if (behavior != Behavior::Selfish) return true;
        const auto key = std::make_pair(kind, id);
        auto it = share_decisions.find(key);
        if (it != share_decisions.end()) return it->second;
        const bool share = rng.bernoulli(share_ratio);
        share_decisions.emplace(key, share);
        return share;
    }
};

// ---------------------------------------------------------------------------
// World

struct TxRecord {
    double created = 0.0;
    std::uint64_t fee = 0;
    std::uint32_t honest_seen = 0;
    std::uint32_t total_seen = 0;
    std::uint32_t credits = 0;
    double t99 = -1.0;
    bool flagged = false;  // never reached coverage; stamped with sim end
};

struct ConvergenceStats {
    double mean_delay = 0.0;
    std::size_t transactions = 0;
    std::size_t flagged = 0;
};

class World {
  public:
    explicit World(SimConfig cfg)
        : cfg_(std::move(cfg)), suite_(cfg_.crypto) {
        cfg_.validate();
        const std::uint32_t selfish =
            static_cast<std::uint32_t>(std::llround(cfg_.selfish_fraction * cfg_.n_peers));
        for (std::uint32_t i = 0; i < cfg_.n_peers; ++i) {
            SimPeer p(suite_);
            p.keys = suite_.generate_keypair(i + 1);
            p.rng = Rng::stream(cfg_.master_seed, "peer", i);
            if (i < selfish) {
                p.behavior = Behavior::Selfish;
                p.share_ratio = cfg_.share_ratio;
            }
            peers_.push_back(std::move(p));
        }
        if (cfg_.sybil_mode != SybilMode::None && peers_[cfg_.attacker_index].behavior ==
                                                      Behavior::Honest)
            peers_[cfg_.attacker_index].behavior = Behavior::SybilAttacker;

        for (std::uint32_t i = 0; i < peers_.size(); ++i) {
            id_index_.emplace(peers_[i].keys.peer_id, i);
            known_ids_.insert(peers_[i].keys.peer_id);
        }
        honest_count_ = 0;
        for (const auto& p : peers_)
            if (p.behavior == Behavior::Honest) ++honest_count_;

        if (cfg_.sybil_mode == SybilMode::Passive)
            inject_passive_sybils(cfg_.attacker_index, cfg_.sybil_count);
        else if (cfg_.sybil_mode == SybilMode::Active)
            inject_active_sybils(cfg_.attacker_index, cfg_.sybil_count);
    }

    // Sybils join discovery and answer crawls but do no honest work. Each
    // passive Sybil certifies only the attacker.
    void inject_passive_sybils(std::uint32_t attacker, std::uint32_t count) {
        const auto sybils = add_sybil_peers(count);
        const auto& target = peers_[attacker].keys.peer_id;
        const auto w = sybil_weight();
        for (auto s : sybils) {
            auto cert = create_certificate(suite_, peers_[s].keys, target, w, 0);
            peers_[s].store.ingest(cert);
            oracle_store().ingest(cert);
        }
    }

    // Active Sybils additionally mesh (or ring) among themselves and the
    // attacker acknowledges every Sybil, creating the attack edges.
    void inject_active_sybils(std::uint32_t attacker, std::uint32_t count) {
        const auto sybils = add_sybil_peers(count);
        const auto w = sybil_weight();
        auto issue = [&](std::uint32_t from, std::uint32_t to) {
            auto cert =
                create_certificate(suite_, peers_[from].keys, peers_[to].keys.peer_id, w, 0);
            peers_[from].store.ingest(cert);
            oracle_store().ingest(cert);
        };
        for (std::size_t a = 0; a < sybils.size(); ++a) {
            issue(sybils[a], attacker);
            issue(attacker, sybils[a]);
            if (cfg_.sybil_topology == SybilTopology::Mesh) {
                for (std::size_t b = 0; b < sybils.size(); ++b)
                    if (a != b) issue(sybils[a], sybils[b]);
            } else if (sybils.size() > 1) {
                issue(sybils[a], sybils[(a + 1) % sybils.size()]);
            }
        }
    }

    void run() {
        if (ran_) throw std::logic_error("World::run called twice");
        ran_ = true;

        std::ofstream trace;
        if (!cfg_.trace_path.empty()) trace.open(cfg_.trace_path);

        Rng workload_rng = Rng::stream(cfg_.master_seed, "workload");
        transport_rng_ = Rng::stream(cfg_.master_seed, "transport");

        for (const auto& w : generate_workload(cfg_, workload_rng)) {
            SimEvent ev;
            ev.kind = w.is_block ? EvKind::BlockCreate : EvKind::TxCreate;
            ev.peer = w.originator;
            ev.msg.id = w.id;
            ev.msg.fee = w.fee;
            queue_.schedule_at(w.time, ev);
        }
        for (std::uint32_t i = 0; i < cfg_.n_peers; ++i) {
            const double phase = (i + 1) / double(cfg_.n_peers);
            queue_.schedule_at(cfg_.gossip_period * phase,
                               SimEvent{EvKind::GossipTick, i, {}});
            queue_.schedule_at(cfg_.effective_crawl_period() * phase,
                               SimEvent{EvKind::CrawlTick, i, {}});
        }
        const auto rounds =
            static_cast<std::uint64_t>(std::floor(cfg_.sim_duration / cfg_.round_length));
        for (std::uint64_t k = 1; k <= rounds; ++k)
            queue_.schedule_at(double(k) * cfg_.round_length, SimEvent{EvKind::RoundTick, 0, {}});

        // Round 0 setup: slot tables exist from t=0, bootstrap gamma applies.
        for (std::uint32_t i = 0; i < cfg_.n_peers; ++i) {
            auto& p = peers_[i];
            p.slots.emplace(p.keys.peer_id, cfg_.selection, 0, p.rng);
            p.pull_retries = 3 * cfg_.selection.slots;
            send_pull_requests(i);
        }

        queue_.run(cfg_.sim_duration, [&](double t, const SimEvent& ev) {
            hash_event(t, ev);
            if (trace.is_open()) dump_event(trace, t, ev);
            dispatch(t, ev);
        });

        for (auto& [id, rec] : tx_records_)
            if (rec.t99 < 0.0) {
                rec.t99 = cfg_.sim_duration;
                rec.flagged = true;
            }
    }

    // --- queries -----------------------------------------------------------

    const SimConfig& config() const { return cfg_; }
    const CryptoSuite& suite() const { return suite_; }
    const std::vector<SimPeer>& peers() const { return peers_; }
    std::uint32_t base_peer_count() const { return cfg_.n_peers; }
    std::uint64_t trace_hash() const { return trace_hash_; }
    const std::map<std::uint64_t, TxRecord>& transactions() const { return tx_records_; }
    const std::vector<double>& loss_series() const { return loss_series_; }
    std::uint64_t messages_sent() const { return messages_sent_; }
    std::uint64_t messages_lost() const { return messages_lost_; }

    const PeerId& id_of(std::uint32_t index) const { return peers_[index].keys.peer_id; }

    std::set<PeerId> ids_with(Behavior b) const {
        std::set<PeerId> out;
        for (const auto& p : peers_)
            if (p.behavior == b) out.insert(p.keys.peer_id);
        return out;
    }

    // Every certificate ever issued anywhere, attack certificates included.
    ContributionGraph union_graph() const {
        std::set<PeerId> all;
        for (const auto& p : peers_) all.insert(p.keys.peer_id);
        return graph_view(*oracle_store_, all);
    }

    ContributionGraph subjective_graph(std::uint32_t peer) const {
        return graph_view(peers_[peer].store, {peers_[peer].keys.peer_id});
    }

    // Mean creation -> 99%-honest-coverage delay over transactions created in
    // [measure_after, workload end]. Unconverged transactions carry sim-end
    // time and are flagged.
    ConvergenceStats convergence() const {
        ConvergenceStats s;
        for (const auto& [id, rec] : tx_records_) {
            if (rec.created < cfg_.measure_after) continue;
            s.mean_delay += rec.t99 - rec.created;
            if (rec.flagged) ++s.flagged;
            ++s.transactions;
        }
        if (s.transactions > 0) s.mean_delay /= double(s.transactions);
        return s;
    }

    std::size_t transactions_fully_covered() const {
        std::size_t n = 0;
        for (const auto& [id, rec] : tx_records_)
            if (rec.total_seen == cfg_.n_peers) ++n;
        return n;
    }

    bool stores_identical() const {
        for (std::uint32_t i = 1; i < cfg_.n_peers; ++i)
            if (peers_[i].store.dump() != peers_[0].store.dump()) return false;
        return true;
    }

  private:
    // --- construction helpers ----------------------------------------------

    std::vector<std::uint32_t> add_sybil_peers(std::uint32_t count) {
        std::vector<std::uint32_t> indices;
        for (std::uint32_t k = 0; k < count; ++k) {
            const auto idx = static_cast<std::uint32_t>(peers_.size());
            SimPeer p(suite_);
            p.keys = suite_.generate_keypair(idx + 1);
            p.rng = Rng::stream(cfg_.master_seed, "peer", idx);
            p.behavior = Behavior::Sybil;
            peers_.push_back(std::move(p));
            id_index_.emplace(peers_[idx].keys.peer_id, idx);
            known_ids_.insert(peers_[idx].keys.peer_id);
            indices.push_back(idx);
        }
        return indices;
    }

    // Attack certificate weight: explicit config value, or ten times the mean
    // honest edge weight seen so far (100 units when no edges exist yet).
    Weight sybil_weight() const {
        if (cfg_.sybil_cert_units > 0) return Weight::from_units(cfg_.sybil_cert_units);
        std::uint64_t total = 0, edges = 0;
        for (const auto& [key, cert] : oracle_store()) {
            if (cert.weight.is_zero()) continue;
            total += cert.weight.raw();
            ++edges;
        }
        if (edges == 0) return Weight::from_units(100);
        return Weight::from_raw(10 * (total / edges));
    }

    CertificateStore& oracle_store() {
        if (!oracle_store_) oracle_store_.emplace(suite_);
        return *oracle_store_;
    }
    const CertificateStore& oracle_store() const {
        const_cast<World*>(this)->oracle_store();
        return *oracle_store_;
    }

    // --- transport ----------------------------------------------------------

    void send(std::uint32_t src, std::uint32_t dst, Message msg) {
        if (src == dst) return;
        ++messages_sent_;
        if (cfg_.loss_probability > 0.0 && transport_rng_.bernoulli(cfg_.loss_probability)) {
            ++messages_lost_;
            return;
        }
        msg.src = src;
        msg.dst = dst;
        const double lat = sample_latency(cfg_.latency, src, dst, transport_rng_);
        queue_.schedule(lat, SimEvent{EvKind::Deliver, dst, std::move(msg)});
    }

    std::vector<std::uint32_t> connected_indices(const SimPeer& p) const {
        std::vector<std::uint32_t> out;
        if (!p.slots) return out;
        for (const auto& id : p.slots->connected_peers()) out.push_back(id_index_.at(id));
        return out;
    }

    // --- event dispatch ------------------------------------------------------

    void dispatch(double t, const SimEvent& ev) {
        switch (ev.kind) {
            case EvKind::TxCreate: return on_tx_create(t, ev.peer, ev.msg);
            case EvKind::BlockCreate: return on_block_create(t, ev.peer, ev.msg);
            case EvKind::GossipTick: return on_gossip_tick(t, ev.peer);
            case EvKind::CrawlTick: return on_crawl_tick(t, ev.peer);
            case EvKind::RoundTick: return on_round_tick(t);
            case EvKind::Deliver: return on_deliver(t, ev.peer, ev.msg);
        }
    }

    void on_tx_create(double t, std::uint32_t origin, const Message& proto) {
        auto& p = peers_[origin];
        p.mempool.insert(proto.id);
        TxRecord rec;
        rec.created = t;
        rec.fee = proto.fee;
        rec.total_seen = 1;
        rec.honest_seen = p.behavior == Behavior::Honest ? 1 : 0;
        maybe_mark_converged(rec, t);
        tx_records_.emplace(proto.id, rec);

        // Originators always announce their own transactions; withholding
        // applies to relayed traffic.
        Message m;
        m.kind = MsgKind::Transaction;
        m.id = proto.id;
        m.fee = proto.fee;
        p.outbox.push_back(m);
        p.recent.emplace_back(kReannounceRounds, m);
    }

    void on_block_create(double t, std::uint32_t miner, const Message& proto) {
        auto& p = peers_[miner];
        const std::uint64_t height = p.tip_height + 1;
        const std::uint64_t parent = p.tip_id;
        p.blocks.emplace(proto.id, height);
        p.tip_height = height;
        p.tip_id = proto.id;

        Message m;
        m.kind = MsgKind::Block;
        m.id = proto.id;
        m.height = height;
        m.parent = parent;
        p.outbox.push_back(m);
        p.recent.emplace_back(kReannounceRounds, m);
        (void)t;
    }

    void on_gossip_tick(double t, std::uint32_t i) {
        auto& p = peers_[i];
        if (!p.outbox.empty()) {
            const auto targets = connected_indices(p);
            if (!targets.empty()) {
                for (auto& m : p.outbox) {
                    const auto picks =
                        p.rng.sample_indices(targets.size(), cfg_.fanout);
                    for (auto k : picks) send(i, targets[k], m);
                }
                p.outbox.clear();
            }
            // No neighbors yet: keep the outbox for the next tick.
        }
        queue_.schedule_at(t + cfg_.gossip_period, SimEvent{EvKind::GossipTick, i, {}});
        (void)t;
    }

    void on_crawl_tick(double t, std::uint32_t i) {
        auto& p = peers_[i];
        const auto targets = connected_indices(p);
        if (!targets.empty() && cfg_.crawl_batch > 0) {
            const auto pick = targets[p.rng.below(targets.size())];
            Message m;
            m.kind = MsgKind::CrawlRequest;
            send(i, pick, m);
        }
        queue_.schedule_at(t + cfg_.effective_crawl_period(), SimEvent{EvKind::CrawlTick, i, {}});
    }

    void on_round_tick(double) {
        for (std::uint32_t i = 0; i < cfg_.n_peers; ++i) round_tick_peer(i);

        // Ranking-loss sample for this round, honest evaluators only.
        const auto selfish = ids_with(Behavior::Selfish);
        const auto honest = ids_with(Behavior::Honest);
        if (!selfish.empty() && !honest.empty()) {
            std::vector<RankingTable> tables;
            for (const auto& p : peers_)
                if (p.behavior == Behavior::Honest) tables.push_back(p.ranking);
            std::set<PeerId> targets = selfish;
            targets.insert(honest.begin(), honest.end());
            const auto agg = aggregate_scores(tables, targets);
            double hm = 0.0;
            for (const auto& h : honest) hm += agg.at(h);
            if (hm > 0.0)
                loss_series_.push_back(ranking_loss(agg, selfish, honest));
        }
    }

    void round_tick_peer(std::uint32_t i) {
        auto& p = peers_[i];
        const std::uint64_t concluded = p.slots->round();

        // Certify the round's utility at cumulative weights, tell the subject.
        for (const auto& [subject, delta] : p.accumulator) {
            p.cumulative[subject] += delta;
            auto cert = create_certificate(suite_, p.keys, subject, p.cumulative[subject],
                                           concluded);
            p.store.ingest(cert);
            oracle_store().ingest(cert);
            Message m;
            m.kind = MsgKind::CertBatch;
            m.certs.push_back(std::move(cert));
            send(i, id_index_.at(subject), std::move(m));
        }
        p.accumulator.clear();

        const auto graph = graph_view(p.store, {p.keys.peer_id});
        p.ranking = compute_scores(graph, p.keys.peer_id, cfg_.alpha, cfg_.walks, p.rng);

        p.slots->advance_round(p.rng);
        p.pull_retries = 3 * cfg_.selection.slots;
        send_pull_requests(i);

        // Re-announce recent sightings to next round's fresh neighbors.
        // Receivers dedup, so the only cost is bounded chatter; the gain is
        // gossip liveness across re-partitions.
        std::vector<std::pair<std::uint32_t, Message>> keep;
        for (auto& [left, m] : p.recent) {
            p.outbox.push_back(m);
            if (left > 1) keep.emplace_back(left - 1, m);
        }
        p.recent.swap(keep);
    }

    void send_pull_requests(std::uint32_t i) {
        auto& p = peers_[i];
        for (const auto& [target, slot] : p.slots->plan_pull_requests(p.ranking, known_ids_, p.rng)) {
            Message m;
            m.kind = MsgKind::SlotRequest;
            m.slot = slot;
            send(i, id_index_.at(target), std::move(m));
        }
    }

    void on_deliver(double t, std::uint32_t i, const Message& msg) {
        auto& p = peers_[i];
        switch (msg.kind) {
            case MsgKind::Transaction: {
                if (p.behavior == Behavior::Sybil) return;  // no honest work at all
                if (p.mempool.count(msg.id)) return;        // duplicate: no credit, no relay
                p.mempool.insert(msg.id);
                auto& rec = tx_records_.at(msg.id);
                ++rec.total_seen;
                if (p.behavior == Behavior::Honest) {
                    ++rec.honest_seen;
                    maybe_mark_converged(rec, t);
                }
                if (msg.fee == 0) return;  // spam: useless
                ++rec.credits;
                record_utility(p.accumulator, peers_[msg.src].keys.peer_id,
                               Weight::from_units(1));
                if (p.decides_to_share(MsgKind::Transaction, msg.id)) {
                    Message m;
                    m.kind = MsgKind::Transaction;
                    m.id = msg.id;
                    m.fee = msg.fee;
                    p.outbox.push_back(m);
                    p.recent.emplace_back(kReannounceRounds, m);
                }
                return;
            }
            case MsgKind::Block: {
                if (p.behavior == Behavior::Sybil) return;
                if (p.blocks.count(msg.id)) return;
                const bool orphan = p.blocks.count(msg.parent) == 0;
                if (orphan) return;  // dropped, never stored
                const bool stale = msg.height <= p.tip_height;
                p.blocks.emplace(msg.id, msg.height);
                if (!stale) {
                    p.tip_height = msg.height;
                    p.tip_id = msg.id;
                    record_utility(p.accumulator, peers_[msg.src].keys.peer_id,
                                   Weight::from_units(10));
                    if (p.decides_to_share(MsgKind::Block, msg.id)) {
                        Message m;
                        m.kind = MsgKind::Block;
                        m.id = msg.id;
                        m.height = msg.height;
                        m.parent = msg.parent;
                        p.outbox.push_back(m);
                        p.recent.emplace_back(kReannounceRounds, m);
                    }
                }
                return;
            }
            case MsgKind::CertBatch: {
                for (const auto& c : msg.certs) p.store.ingest(c);
                return;
            }
            case MsgKind::CrawlRequest: {
                Message reply;
                reply.kind = MsgKind::CertBatch;
                reply.certs = p.store.select_gossip_batch(cfg_.crawl_batch, p.rng);
                if (!reply.certs.empty()) send(i, msg.src, std::move(reply));
                return;
            }
            case MsgKind::SlotRequest: {
                Message reply;
                reply.kind = MsgKind::SlotReply;
                reply.slot = msg.slot;
                const auto& requester = peers_[msg.src].keys.peer_id;
                if (p.behavior == Behavior::Sybil) {
                    reply.accept = true;  // sybils welcome anyone who will crawl them
                } else {
                    reply.accept =
                        p.slots->handle_push_request(requester, p.ranking.score_of(requester))
                            .has_value();
                }
                send(i, msg.src, std::move(reply));
                return;
            }
            case MsgKind::SlotReply: {
                if (!msg.accept && p.slots) {
                    p.slots->release_pull(msg.slot, peers_[msg.src].keys.peer_id);
                    // A declined pull leaves the slot empty for the rest of
                    // the round, which starves the peer's inbound wave; retry
                    // against a fresh draw while the budget lasts.
                    if (p.pull_retries > 0) {
                        --p.pull_retries;
                        send_pull_requests(i);
                    }
                }
                return;
            }
        }
    }

    void maybe_mark_converged(TxRecord& rec, double t) {
        const std::uint32_t target = static_cast<std::uint32_t>(
            std::max<std::uint64_t>(1, (honest_count_ * 99 + 99) / 100));  // ceil(0.99 n)
        if (rec.t99 < 0.0 && rec.honest_seen >= target) rec.t99 = t;
    }

    void hash_event(double t, const SimEvent& ev) {
        std::uint64_t tb;
        std::memcpy(&tb, &t, sizeof tb);
        std::uint8_t buf[8 + 1 + 4 + 1 + 4 + 4 + 8];
        std::memcpy(buf, &tb, 8);
        buf[8] = static_cast<std::uint8_t>(ev.kind);
        std::memcpy(buf + 9, &ev.peer, 4);
        buf[13] = static_cast<std::uint8_t>(ev.msg.kind);
        std::memcpy(buf + 14, &ev.msg.src, 4);
        std::memcpy(buf + 18, &ev.msg.dst, 4);
        std::memcpy(buf + 22, &ev.msg.id, 8);
        trace_hash_ = fnv1a64(buf, sizeof buf, trace_hash_);
    }

    static void dump_event(std::ofstream& out, double t, const SimEvent& ev) {
        static const char* kinds[] = {"tx_create", "block_create", "gossip_tick",
                                      "crawl_tick", "round_tick",  "deliver"};
        out << t << ' ' << kinds[static_cast<int>(ev.kind)] << ' ' << ev.msg.src << ' '
            << ev.msg.dst << ' ' << ev.msg.id << '\n';
    }

    SimConfig cfg_;
    CryptoSuite suite_;
    std::vector<SimPeer> peers_;
    std::map<PeerId, std::uint32_t> id_index_;
    std::set<PeerId> known_ids_;
    std::uint32_t honest_count_ = 0;

    EventQueue<SimEvent> queue_;
    Rng transport_rng_{0};
    bool ran_ = false;

    std::map<std::uint64_t, TxRecord> tx_records_;
    std::vector<double> loss_series_;
    mutable std::optional<CertificateStore> oracle_store_;
    std::uint64_t trace_hash_ = 0xcbf29ce484222325ULL;
    std::uint64_t messages_sent_ = 0;
    std::uint64_t messages_lost_ = 0;
};

// ---------------------------------------------------------------------------
// Graph-level attack injection, for oracle analysis of materialized graphs.

inline PeerId synthetic_sybil_id(std::uint32_t k) {
    PeerId id;
    std::uint64_t state = fnv1a64(&k, sizeof k, 0x53b11u);
    for (int w = 0; w < 4; ++w) {
        const std::uint64_t v = splitmix64(state);
        for (int b = 0; b < 8; ++b)
            id.bytes[static_cast<std::size_t>(w * 8 + b)] =
                static_cast<std::uint8_t>(v >> (8 * b));
    }
    return id;
}

inline Weight default_attack_weight(const ContributionGraph& g) {
    std::uint64_t total = 0, edges = 0;
    for (const auto& [from, row] : g.out_edges)
        for (const auto& [to, w] : row) {
            total += w.raw();
            ++edges;
        }
    if (edges == 0) return Weight::from_units(100);
    return Weight::from_raw(10 * (total / edges));
}

struct GraphAttack {
    ContributionGraph graph;
    std::vector<PeerId> sybil_ids;
};

// Each Sybil acknowledges only the attacker: no path leads into the region.
inline GraphAttack inject_passive_graph(const ContributionGraph& base, const PeerId& attacker,
                                        std::uint32_t count, Weight weight = Weight{}) {
    if (!base.has_node(attacker))
        throw std::invalid_argument("inject_passive_graph: attacker not in graph");
    GraphAttack out{base, {}};
    const Weight w = weight.is_zero() ? default_attack_weight(base) : weight;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto s = synthetic_sybil_id(k);
        out.sybil_ids.push_back(s);
        out.graph.add_edge(s, attacker, w);
    }
    return out;
}

// Mutual attacker<->Sybil edges plus a Sybil mesh or ring.
inline GraphAttack inject_active_graph(const ContributionGraph& base, const PeerId& attacker,
                                       std::uint32_t count,
                                       SybilTopology topology = SybilTopology::Mesh,
                                       Weight weight = Weight{}) {
    if (!base.has_node(attacker))
        throw std::invalid_argument("inject_active_graph: attacker not in graph");
    GraphAttack out{base, {}};
    const Weight w = weight.is_zero() ? default_attack_weight(base) : weight;
    for (std::uint32_t k = 0; k < count; ++k) out.sybil_ids.push_back(synthetic_sybil_id(k));
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto& s = out.sybil_ids[k];
        out.graph.add_edge(s, attacker, w);
        out.graph.add_edge(attacker, s, w);
        if (topology == SybilTopology::Mesh) {
            for (std::uint32_t j = 0; j < count; ++j)
                if (j != k) out.graph.add_edge(s, out.sybil_ids[j], w);
        } else if (count > 1) {
            out.graph.add_edge(s, out.sybil_ids[(k + 1) % count], w);
        }
    }
    return out;
}

}  // namespace coopnet
