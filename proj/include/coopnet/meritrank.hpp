// Personalized cooperation scores over a contribution graph.
//
// score_seed(j) = probability that an alpha-terminating random walk started
// at `seed` visits j at least once. Monte Carlo estimation (compute_scores)
// is the production path; exact_scores solves the first-passage linear system
// directly and exists to verify the sampler and to give experiments a
// noise-free ground truth on desk-scale graphs.
//
// Exact method: with P the row-normalized weight matrix and
// A = I - (1-alpha) P, the vector g = A^-1 (1-alpha) P e_j holds the expected
// number of visits to j from every start node. Binary (first-passage)
// probabilities follow as h_u = g_u / (1 + g_j), since each first passage is
// followed by g_j expected returns. One LU factorization of A therefore
// serves every target j, and score_i(j) = g_i / (1 + g_j) for all i at once.
// A is strictly diagonally dominant (row sums of (1-alpha) P are at most
// 1-alpha < 1), so the factorization cannot break down.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "coopnet/identity.hpp"
#include "coopnet/ledger.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

inline constexpr double kDefaultAlpha = 0.2;
inline constexpr std::uint64_t kDefaultWalkCount = 2000;
inline constexpr std::size_t kExactOracleNodeCap = 200;

struct RankingTable {
    PeerId seed;
    std::map<PeerId, double> scores;
    std::uint64_t walk_count = 0;
    double alpha = kDefaultAlpha;

    double score_of(const PeerId& id) const {
        auto it = scores.find(id);
        return it == scores.end() ? 0.0 : it->second;
    }
};

using WalkTrace = std::vector<PeerId>;

// Flat CSR form of a ContributionGraph; node indices are positions in the
// sorted id list, so compilation is deterministic.
struct CompiledGraph {
    std::vector<PeerId> ids;
    std::map<PeerId, std::uint32_t> index;
    std::vector<std::uint32_t> row_offset;  // size n+1
    std::vector<std::uint32_t> col;
    std::vector<double> cum;  // per-row cumulative edge weights
    std::vector<double> row_total;

    static CompiledGraph compile(const ContributionGraph& g) {
        CompiledGraph cg;
        cg.ids.assign(g.nodes.begin(), g.nodes.end());
        for (std::uint32_t i = 0; i < cg.ids.size(); ++i) cg.index.emplace(cg.ids[i], i);
        cg.row_offset.reserve(cg.ids.size() + 1);
        cg.row_offset.push_back(0);
        cg.row_total.resize(cg.ids.size(), 0.0);
        for (std::uint32_t u = 0; u < cg.ids.size(); ++u) {
            double running = 0.0;
            if (const auto* edges = g.edges_from(cg.ids[u])) {
                for (const auto& [to, w] : *edges) {
                    running += w.to_double();
                    cg.col.push_back(cg.index.at(to));
                    cg.cum.push_back(running);
                }
            }
            cg.row_total[u] = running;
            cg.row_offset.push_back(static_cast<std::uint32_t>(cg.col.size()));
        }
        return cg;
    }

    std::size_t size() const { return ids.size(); }

    std::uint32_t degree(std::uint32_t u) const { return row_offset[u + 1] - row_offset[u]; }

    bool dangling(std::uint32_t u) const { return degree(u) == 0; }

    // Weighted next-hop choice; unit is uniform in [0,1).
    std::uint32_t step(std::uint32_t u, double unit) const {
        const auto lo = cum.begin() + row_offset[u];
        const auto hi = cum.begin() + row_offset[u + 1];
        auto it = std::upper_bound(lo, hi, unit * row_total[u]);
        if (it == hi) --it;  // guard against unit*total == total after rounding
        return col[static_cast<std::size_t>(row_offset[u] + (it - lo))];
    }
};

namespace detail {

inline std::uint32_t require_node(const CompiledGraph& g, const PeerId& id,
                                  std::string_view who) {
    auto it = g.index.find(id);
    if (it == g.index.end())
        throw std::invalid_argument(std::string(who) + ": node not in graph");
    return it->second;
}

inline std::vector<std::uint32_t> walk_indices(const CompiledGraph& g, std::uint32_t start,
                                               double alpha, Rng& rng) {
    std::vector<std::uint32_t> trace{start};
    std::uint32_t u = start;
    while (true) {
        if (g.dangling(u)) break;
        if (rng.uniform01() < alpha) break;
        u = g.step(u, rng.uniform01());
        trace.push_back(u);
    }
    return trace;
}

}  // namespace detail

inline WalkTrace random_walk(const ContributionGraph& graph, const PeerId& start, double alpha,
                             Rng& rng) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("random_walk: alpha not in (0,1)");
    const auto cg = CompiledGraph::compile(graph);
    const auto s = detail::require_node(cg, start, "random_walk");
    WalkTrace out;
    for (auto idx : detail::walk_indices(cg, s, alpha, rng)) out.push_back(cg.ids[idx]);
    return out;
}

// Monte Carlo scores from R independent walks. Walk k draws from an rng
// stream derived from (base, k), where base is read once from `rng`; results
// are identical no matter how walks are scheduled.
inline RankingTable compute_scores(const ContributionGraph& graph, const PeerId& seed,
                                   double alpha, std::uint64_t walks, Rng& rng) {
    if (walks < 1) throw std::invalid_argument("compute_scores: need at least one walk");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("compute_scores: alpha not in (0,1)");
    const auto cg = CompiledGraph::compile(graph);
    const auto s = detail::require_node(cg, seed, "compute_scores");

    const std::uint64_t base = rng.next_u64();
    std::vector<std::uint64_t> hits(cg.size(), 0);
    std::vector<std::uint64_t> stamp(cg.size(), ~0ull);
    for (std::uint64_t k = 0; k < walks; ++k) {
        Rng wrng = Rng::stream(base, "meritrank.walk", k);
        std::uint32_t u = s;
        while (true) {
            if (cg.dangling(u)) break;
            if (wrng.uniform01() < alpha) break;
            u = cg.step(u, wrng.uniform01());
            if (stamp[u] != k) {  // binary counting: once per walk per node
                stamp[u] = k;
                if (u != s) ++hits[u];
            }
        }
    }

    RankingTable table;
    table.seed = seed;
    table.walk_count = walks;
    table.alpha = alpha;
    for (std::uint32_t i = 0; i < cg.size(); ++i)
        if (hits[i] > 0)
            table.scores.emplace(cg.ids[i], static_cast<double>(hits[i]) / static_cast<double>(walks));
    return table;
}

namespace detail {

// Dense LU with partial pivoting, row-major.
struct DenseLU {
    std::size_t n = 0;
    std::vector<double> a;       // packed L\U factors
    std::vector<std::size_t> p;  // row permutation

    static DenseLU factor(std::vector<double> m, std::size_t n) {
        DenseLU lu;
        lu.n = n;
        lu.a = std::move(m);
        lu.p.resize(n);
        for (std::size_t i = 0; i < n; ++i) lu.p[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            double best = std::abs(lu.a[lu.p[k] * n + k]);
            for (std::size_t r = k + 1; r < n; ++r) {
                const double v = std::abs(lu.a[lu.p[r] * n + k]);
                if (v > best) {
                    best = v;
                    piv = r;
                }
            }
            if (best == 0.0) throw std::runtime_error("DenseLU: singular matrix");
            std::swap(lu.p[k], lu.p[piv]);
            const double d = lu.a[lu.p[k] * n + k];
            for (std::size_t r = k + 1; r < n; ++r) {
                double& l = lu.a[lu.p[r] * n + k];
                l /= d;
                if (l != 0.0)
                    for (std::size_t cidx = k + 1; cidx < n; ++cidx)
                        lu.a[lu.p[r] * n + cidx] -= l * lu.a[lu.p[k] * n + cidx];
            }
        }
        return lu;
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[p[i]];
            for (std::size_t j = 0; j < i; ++j) s -= a[p[i] * n + j] * y[j];
            y[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = y[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= a[p[i] * n + j] * y[j];
            y[i] = s / a[p[i] * n + i];
        }
        return y;
    }
};

// Node indices reachable from start by directed edges, start included.
inline std::vector<std::uint32_t> reachable_closure(const CompiledGraph& g, std::uint32_t start) {
    std::vector<char> seen(g.size(), 0);
    std::vector<std::uint32_t> order{start};
    seen[start] = 1;
    for (std::size_t head = 0; head < order.size(); ++head) {
        const auto u = order[head];
        for (auto e = g.row_offset[u]; e < g.row_offset[u + 1]; ++e) {
            const auto v = g.col[e];
            if (!seen[v]) {
                seen[v] = 1;
                order.push_back(v);
            }
        }
    }
    std::sort(order.begin(), order.end());
    return order;
}

// Row-normalized (1-alpha) P restricted to `nodes` (positions in cg), as a
// dense row-major matrix in closure-local indices.
inline std::vector<double> damped_transition(const CompiledGraph& g,
                                             const std::vector<std::uint32_t>& nodes,
                                             double alpha) {
    const std::size_t n = nodes.size();
    std::vector<std::uint32_t> local(g.size(), UINT32_MAX);
    for (std::uint32_t i = 0; i < n; ++i) local[nodes[i]] = i;
    std::vector<double> m(n * n, 0.0);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto u = nodes[i];
        if (g.dangling(u)) continue;
        double prev = 0.0;
        for (auto e = g.row_offset[u]; e < g.row_offset[u + 1]; ++e) {
            const double w = g.cum[e] - prev;
            prev = g.cum[e];
            const auto v = local[g.col[e]];
            if (v != UINT32_MAX) m[i * n + v] += (1.0 - alpha) * w / g.row_total[u];
        }
    }
    return m;
}

}  // namespace detail

// Exact first-passage probabilities from one seed. Only nodes reachable from
// the seed enter the linear system; everything else scores exactly 0, which
// also makes "attaching an unreachable subgraph changes nothing" hold
// bit-for-bit.
inline RankingTable exact_scores(const ContributionGraph& graph, const PeerId& seed, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("exact_scores: alpha not in (0,1)");
    const auto cg = CompiledGraph::compile(graph);
    const auto s = detail::require_node(cg, seed, "exact_scores");
    const auto closure = detail::reachable_closure(cg, s);
    if (closure.size() > kExactOracleNodeCap)
        throw std::length_error("exact_scores: graph exceeds oracle node cap");

    const std::size_t n = closure.size();
    const auto q = detail::damped_transition(cg, closure, alpha);  // (1-alpha) P
    std::vector<double> a(q.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] = (i == j ? 1.0 : 0.0) - q[i * n + j];
    const auto lu = detail::DenseLU::factor(std::move(a), n);

    std::size_t seed_local = 0;
    while (closure[seed_local] != s) ++seed_local;

    RankingTable table;
    table.seed = seed;
    table.walk_count = 0;
    table.alpha = alpha;
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (closure[j] == s) continue;
        for (std::size_t i = 0; i < n; ++i) c[i] = q[i * n + j];
        const auto g = lu.solve(c);
        table.scores.emplace(cg.ids[closure[j]], g[seed_local] / (1.0 + g[j]));
    }
    for (std::uint32_t i = 0; i < cg.size(); ++i)
        if (cg.ids[i] != seed) table.scores.try_emplace(cg.ids[i], 0.0);
    return table;
}

// Exact scores of every target for every evaluator, sharing one factorization.
struct ScoreMatrix {
    std::vector<PeerId> ids;
    std::map<PeerId, std::uint32_t> index;
    std::vector<double> scores;  // row = evaluator, column = target; diagonal meaningless

    double at(std::uint32_t evaluator, std::uint32_t target) const {
        return scores[evaluator * ids.size() + target];
    }
    double at(const PeerId& evaluator, const PeerId& target) const {
        return at(index.at(evaluator), index.at(target));
    }
};

inline ScoreMatrix exact_score_matrix(const ContributionGraph& graph, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("exact_score_matrix: alpha not in (0,1)");
    const auto cg = CompiledGraph::compile(graph);
    const std::size_t n = cg.size();
    if (n > kExactOracleNodeCap)
        throw std::length_error("exact_score_matrix: graph exceeds oracle node cap");

    std::vector<std::uint32_t> all(n);
    for (std::uint32_t i = 0; i < n; ++i) all[i] = i;
    const auto q = detail::damped_transition(cg, all, alpha);
    std::vector<double> a(q.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] = (i == j ? 1.0 : 0.0) - q[i * n + j];
    const auto lu = detail::DenseLU::factor(std::move(a), n);

    ScoreMatrix m;
    m.ids = cg.ids;
    m.index = cg.index;
    m.scores.assign(n * n, 0.0);
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) c[i] = q[i * n + j];
        const auto g = lu.solve(c);
        const double denom = 1.0 + g[j];
        for (std::size_t i = 0; i < n; ++i) m.scores[i * n + j] = g[i] / denom;
    }
    return m;
}

// Exact probability that a walk from seed visits *any* node of `targets`.
// Needed to state the bottleneck property correctly: individual first-passage
// scores of Sybils may sum past score(attacker) because one walk can visit
// several Sybils, but the probability of touching the set at all cannot
// exceed the probability of touching its cut vertex.
inline double exact_set_score(const ContributionGraph& graph, const PeerId& seed, double alpha,
                              const std::set<PeerId>& targets) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("exact_set_score: alpha not in (0,1)");
    if (targets.count(seed)) throw std::invalid_argument("exact_set_score: seed is a target");
    const auto cg = CompiledGraph::compile(graph);
    const auto s = detail::require_node(cg, seed, "exact_set_score");
    const auto closure = detail::reachable_closure(cg, s);
    if (closure.size() > kExactOracleNodeCap)
        throw std::length_error("exact_set_score: graph exceeds oracle node cap");

    std::vector<char> is_target(cg.size(), 0);
    for (const auto& t : targets) {
        auto it = cg.index.find(t);
        if (it != cg.index.end()) is_target[it->second] = 1;
    }

    // Transient nodes: closure minus the target set.
    std::vector<std::uint32_t> transient;
    for (auto u : closure)
        if (!is_target[u]) transient.push_back(u);
    const std::size_t n = transient.size();
    std::vector<std::uint32_t> local(cg.size(), UINT32_MAX);
    for (std::uint32_t i = 0; i < n; ++i) local[transient[i]] = i;

    std::vector<double> a(n * n, 0.0);
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto u = transient[i];
        if (cg.dangling(u)) continue;
        double prev = 0.0;
        for (auto e = cg.row_offset[u]; e < cg.row_offset[u + 1]; ++e) {
            const double p = (1.0 - alpha) * (cg.cum[e] - prev) / cg.row_total[u];
            prev = cg.cum[e];
            const auto v = cg.col[e];
            if (is_target[v])
                c[i] += p;
            else if (local[v] != UINT32_MAX)
                a[i * n + local[v]] -= p;
        }
    }
    const auto h = detail::DenseLU::factor(std::move(a), n).solve(c);
    return h[local[s]];
}

// Mean score per target over a set of evaluator tables; an evaluator never
// contributes to its own entry.
inline std::map<PeerId, double> aggregate_scores(const std::vector<RankingTable>& tables,
                                                 const std::set<PeerId>& targets) {
    std::map<PeerId, double> out;
    for (const auto& target : targets) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& t : tables) {
            if (t.seed == target) continue;
            sum += t.score_of(target);
            ++count;
        }
        out[target] = count == 0 ? 0.0 : sum / static_cast<double>(count);
    }
    return out;
}

inline double ranking_loss(const std::map<PeerId, double>& aggregate,
                           const std::set<PeerId>& selfish, const std::set<PeerId>& honest) {
    if (honest.empty()) throw std::invalid_argument("ranking_loss: empty honest set");
    if (selfish.empty()) throw std::invalid_argument("ranking_loss: empty selfish set");
    auto mean_of = [&](const std::set<PeerId>& group) {
        double sum = 0.0;
        for (const auto& id : group) {
            auto it = aggregate.find(id);
            if (it != aggregate.end()) sum += it->second;
        }
        return sum / static_cast<double>(group.size());
    };
    const double honest_mean = mean_of(honest);
    if (honest_mean <= 0.0) throw std::domain_error("ranking_loss: honest mean score is zero");
    return mean_of(selfish) / honest_mean;
}

}  // namespace coopnet
