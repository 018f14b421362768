// Slot-based peer selection.
//
// Each peer owns n communication slots, split into gamma "reputable" slots
// (earned through ranking) and beta = n - gamma "stranger" slots (granted
// blindly so newcomers can bootstrap). Each class is further split into a
// pull half the peer fills proactively and a push half it grants to incoming
// requests. The index partition is reshuffled every round.
//
// During bootstrap (round < B) gamma is 0 and ranking input is ignored
// entirely; afterwards gamma ramps linearly to its configured value. beta
// never drops below 1, so a zero-score peer can always find a door.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "coopnet/identity.hpp"
#include "coopnet/meritrank.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

struct BootstrapSchedule {
    std::uint64_t bootstrap_rounds = 0;  // B
    std::uint32_t final_gamma = 0;
};

// 0 while round < B, then a linear ramp reaching final_gamma at round 2B,
// clamped there. The ramp starts strictly above zero at round B itself.
inline std::uint32_t effective_gamma(const BootstrapSchedule& s, std::uint64_t round) {
    if (round < s.bootstrap_rounds) return 0;
    const auto step = round - s.bootstrap_rounds + 1;
    const auto denom = s.bootstrap_rounds + 1;
    const auto ramped = static_cast<std::uint64_t>(s.final_gamma) * step / denom;
    return static_cast<std::uint32_t>(std::min<std::uint64_t>(ramped, s.final_gamma));
}

enum class SelectionMode { Proportional, TopK };

// How push requests are admitted: by slot class (score decides which class
// the requester may use) or by fullness alone.
enum class PushGate { SlotClass, FullnessOnly };

struct SelectionConfig {
    std::uint32_t slots = 8;  // n
    BootstrapSchedule bootstrap;
    SelectionMode mode = SelectionMode::Proportional;
    PushGate push_gate = PushGate::SlotClass;
};

enum class SlotClass : std::uint8_t { ReputablePull, ReputablePush, StrangerPull, StrangerPush };

inline bool is_pull(SlotClass c) {
    return c == SlotClass::ReputablePull || c == SlotClass::StrangerPull;
}
inline bool is_reputable(SlotClass c) {
    return c == SlotClass::ReputablePull || c == SlotClass::ReputablePush;
}

class SlotTable {
  public:
    SlotTable(PeerId self, SelectionConfig config, std::uint64_t start_round, Rng& rng)
        : self_(std::move(self)), config_(config), round_(start_round) {
        if (config_.slots == 0) throw std::invalid_argument("SlotTable: need at least one slot");
        partition(rng);
    }

    const PeerId& self() const { return self_; }
    std::uint64_t round() const { return round_; }
    std::uint32_t total_slots() const { return config_.slots; }

    // beta >= 1 whenever n >= 1: the stranger liveness floor.
    std::uint32_t gamma() const {
        return std::min(effective_gamma(config_.bootstrap, round_), config_.slots - 1);
    }
    std::uint32_t beta() const { return config_.slots - gamma(); }

    SlotClass slot_class(std::uint32_t slot) const { return classes_.at(slot); }

    const std::map<std::uint32_t, PeerId>& pull_assignments() const { return pull_; }
    const std::map<std::uint32_t, PeerId>& push_occupancy() const { return push_; }

    bool occupies(const PeerId& peer) const {
        auto held = [&](const auto& m) {
            for (const auto& [slot, id] : m)
                if (id == peer) return true;
            return false;
        };
        return held(pull_) || held(push_);
    }

    // Everyone currently wired to a slot, pull and push alike.
    std::vector<PeerId> connected_peers() const {
        std::set<PeerId> uniq;
        for (const auto& [slot, id] : pull_) uniq.insert(id);
        for (const auto& [slot, id] : push_) uniq.insert(id);
        return {uniq.begin(), uniq.end()};
    }

    // Proactively fill the pull halves. Reputable pull slots draw from
    // positively scored known peers (score-proportional or top-k); stranger
    // pull slots draw uniformly from the stranger pool. While gamma is 0 the
    // stranger pool is every known peer — ranking input must not matter.
    std::vector<std::pair<PeerId, std::uint32_t>> plan_pull_requests(
        const RankingTable& ranking, const std::set<PeerId>& known_peers, Rng& rng) {
        std::vector<std::uint32_t> rep_slots, str_slots;
        for (std::uint32_t i = 0; i < config_.slots; ++i) {
            if (pull_.count(i)) continue;
            if (classes_[i] == SlotClass::ReputablePull) rep_slots.push_back(i);
            if (classes_[i] == SlotClass::StrangerPull) str_slots.push_back(i);
        }

        std::vector<std::pair<PeerId, std::uint32_t>> planned;
        std::set<PeerId> taken;
        for (const auto& [slot, id] : pull_) taken.insert(id);
        for (const auto& [slot, id] : push_) taken.insert(id);
        for (const auto& id : declined_) taken.insert(id);

        // Reputable half.
        std::vector<std::pair<PeerId, double>> scored;
        if (gamma() > 0) {
            for (const auto& id : known_peers) {
                if (id == self_ || taken.count(id)) continue;
                const double s = ranking.score_of(id);
                if (s > 0.0) scored.emplace_back(id, s);
            }
        }
        if (config_.mode == SelectionMode::TopK) {
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            std::size_t next = 0;
            for (auto slot : rep_slots) {
                if (next >= scored.size()) break;
                planned.emplace_back(scored[next].first, slot);
                taken.insert(scored[next].first);
                ++next;
            }
        } else {
            for (auto slot : rep_slots) {
                if (scored.empty()) break;
                double total = 0.0;
                for (const auto& [id, s] : scored) total += s;
                double x = rng.uniform01() * total;
                std::size_t pick = 0;
                for (; pick + 1 < scored.size(); ++pick) {
                    x -= scored[pick].second;
                    if (x < 0.0) break;
                }
                planned.emplace_back(scored[pick].first, slot);
                taken.insert(scored[pick].first);
                scored.erase(scored.begin() + static_cast<std::ptrdiff_t>(pick));
            }
        }

        // Stranger half.
        std::vector<PeerId> pool;
        for (const auto& id : known_peers) {
            if (id == self_ || taken.count(id)) continue;
            if (gamma() == 0 || ranking.score_of(id) <= 0.0) pool.push_back(id);
        }
        const auto picks = rng.sample_indices(pool.size(), str_slots.size());
        for (std::size_t i = 0; i < picks.size(); ++i) {
            planned.emplace_back(pool[picks[i]], str_slots[i]);
            taken.insert(pool[picks[i]]);
        }

        for (const auto& [id, slot] : planned) pull_.emplace(slot, id);
        return planned;
    }

    // Grant a push slot, or refuse. nullopt = Rejected.
    std::optional<std::uint32_t> handle_push_request(const PeerId& requester,
                                                     double requester_score) {
        if (requester == self_ || occupies(requester)) return std::nullopt;

        auto first_free = [&](SlotClass wanted) -> std::optional<std::uint32_t> {
            for (std::uint32_t i = 0; i < config_.slots; ++i)
                if (classes_[i] == wanted && !push_.count(i)) return i;
            return std::nullopt;
        };
        auto count_of = [&](SlotClass wanted) {
            return std::count(classes_.begin(), classes_.end(), wanted);
        };

        std::optional<std::uint32_t> slot;
        if (config_.push_gate == PushGate::FullnessOnly) {
            slot = first_free(SlotClass::ReputablePush);
            if (!slot) slot = first_free(SlotClass::StrangerPush);
        } else if (requester_score > 0.0) {
            slot = first_free(SlotClass::ReputablePush);
            // A reputable requester falls back to stranger slots only when
            // the partition has no reputable push slots at all (bootstrap).
            if (!slot && count_of(SlotClass::ReputablePush) == 0)
                slot = first_free(SlotClass::StrangerPush);
        } else {
            slot = first_free(SlotClass::StrangerPush);
            if (!slot && count_of(SlotClass::StrangerPush) == 0)
                slot = first_free(SlotClass::ReputablePush);
        }
        if (slot) push_.emplace(*slot, requester);
        return slot;
    }

    // Drop a planned pull assignment after the target declined. The occupant
    // must still match; a stale reply from a previous round is ignored. The
    // decliner is remembered until the next round so a re-plan tries someone
    // else instead of hammering the same full table.
    void release_pull(std::uint32_t slot, const PeerId& expected) {
        auto it = pull_.find(slot);
        if (it != pull_.end() && it->second == expected) {
            pull_.erase(it);
            declined_.insert(expected);
        }
    }

    void advance_round(Rng& rng) {
        ++round_;
        pull_.clear();
        push_.clear();
        declined_.clear();
        partition(rng);
    }

  private:
    // Shuffle slot indices, deal the first gamma() to the reputable class,
    // then split each class pull-heavy (ceil goes to pull).
    void partition(Rng& rng) {
        const auto n = config_.slots;
        std::vector<std::uint32_t> order(n);
        for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);

        classes_.assign(n, SlotClass::StrangerPull);
        const std::uint32_t g = gamma();
        const std::uint32_t rep_pull = (g + 1) / 2;
        const std::uint32_t str_pull = (beta() + 1) / 2;
        for (std::uint32_t i = 0; i < n; ++i) {
            SlotClass c;
            if (i < g)
                c = i < rep_pull ? SlotClass::ReputablePull : SlotClass::ReputablePush;
            else
                c = (i - g) < str_pull ? SlotClass::StrangerPull : SlotClass::StrangerPush;
            classes_[order[i]] = c;
        }
    }

    PeerId self_;
    SelectionConfig config_;
    std::uint64_t round_;
    std::vector<SlotClass> classes_;
    std::map<std::uint32_t, PeerId> pull_;
    std::map<std::uint32_t, PeerId> push_;
    std::set<PeerId> declined_;
};

}  // namespace coopnet
