// Discrete-event block-tree simulator. Independent of the analytic
// chain: it shares only the parameter set and the attacker decision
// table, and reconstructs everything else (tree growth, honest-pool
// rules, consensus finality) from first principles so the two engines
// can cross-validate each other.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sml/model.hpp"

namespace sml {

struct NonTermination : ModelError {
    using ModelError::ModelError;
};
struct UnmappableTree : ModelError {
    using ModelError::ModelError;
};

enum class Owner : uint8_t { HP = 0, MP = 1 };

struct BlockNode {
    int32_t parent = -1;  // arena index, -1 for the live-region root
    int32_t height = 0;
    Owner owner = Owner::HP;
    bool published = true;
};

struct SimConfig {
    ModelParams params;
    StrategyFlags flags;
    bool honest_mp = false;  // baseline override: attacker publishes at once
    int64_t blocks_per_round = 1'000'000;
    int rounds = 30;
    uint64_t base_seed = 42;
    int64_t max_events_factor = 50;  // NonTermination guard
};

// (delta, N) visit counts, indexed by clamped delta rank. Small fixed
// table so round stats stay trivially copyable and mergeable.
struct StateFrequency {
    static constexpr int kMaxLead = 63;
    static constexpr int kRows = kMaxLead + 4;  // ranks -3..kMaxLead
    std::vector<int64_t> counts = std::vector<int64_t>(size_t(kRows) * 3, 0);

    void add(const MarkovState& s) {
        int rank = s.delta_rank();
        if (rank > kMaxLead) rank = kMaxLead;
        counts[size_t(rank + 3) * 3 + size_t(s.n_leaves - 1)] += 1;
    }
    int64_t at(const MarkovState& s) const {
        int rank = s.delta_rank();
        if (rank > kMaxLead) rank = kMaxLead;
        return counts[size_t(rank + 3) * 3 + size_t(s.n_leaves - 1)];
    }
    int64_t total() const;
};

struct RoundStats {
    int64_t consensus_total = 0;
    int64_t consensus_mp = 0;
    int64_t stale_total = 0;
    int64_t discarded_tip = 0;  // unresolved suffix at round end
    int64_t blocks_created = 0;
    int64_t events = 0;
    double sim_time = 0.0;
    double rr_m_hat = 0.0;
    double tps_hat = 0.0;
    StateFrequency freq;
};

// Called after every event with the states observed around it.
using EventObserver =
    std::function<void(int64_t event_index, EventKind, const MarkovState& before,
                       const MarkovState& after)>;

// One self-contained simulation; tests drive it directly, run_round
// wraps it. The tree keeps only the contested suffix in memory.
class BlockTreeSim {
   public:
    BlockTreeSim(const SimConfig& cfg, int round_index);

    void step();
    bool done() const { return consensus_total_ >= cfg_.blocks_per_round; }
    RoundStats finish();  // discards the unresolved suffix and closes stats

    MarkovState observe() const;
    int64_t consensus_total() const { return consensus_total_; }
    int64_t events() const { return events_; }
    void set_observer(const EventObserver* obs) { observer_ = obs; }

    // test hooks
    void check_tree() const;  // well-formedness assertions (throws UnmappableTree)
    int live_nodes() const;

   private:
    struct Rng {
        uint64_t s[4];
        explicit Rng(uint64_t seed);
        uint64_t next();
        double uniform();       // [0, 1)
        double exponential();   // rate 1
        int pick(int n);        // uniform in [0, n)
    };

    int32_t new_block(int32_t parent, Owner owner, bool published);
    void honest_step();
    void apply_mp_block(const MarkovState& before);
    void apply_hp_block(const MarkovState& before);
    void apply_hp_fork(const MarkovState& before);
    int32_t aligned_leaf() const;
    int32_t choose_hp_parent(int32_t aligned);
    void publish_one();
    void publish_all_and_adopt();
    void adopt(int32_t tip);
    void settle();
    void compact();
    bool mp_has_stake() const;

    SimConfig cfg_;
    Rng rng_;
    std::vector<BlockNode> nodes_;
    std::vector<int32_t> unpub_;  // unpublished attacker blocks, lowest first
    size_t unpub_head_ = 0;
    int32_t pub_leaves_[3] = {-1, -1, -1};
    int n_pub_ = 0;
    int32_t pub_height_ = 0;
    int32_t mp_tip_ = 0;
    int32_t anchor_ = 0;
    int64_t consensus_total_ = 0;
    int64_t consensus_mp_ = 0;
    int64_t stale_total_ = 0;
    int64_t created_ = 0;
    int64_t live_ = 0;
    int64_t events_ = 0;
    double sim_time_ = 0.0;
    StateFrequency freq_;
    const EventObserver* observer_ = nullptr;

    int unpub_count() const { return int(unpub_.size() - unpub_head_); }
};

RoundStats run_round(const SimConfig& cfg, int round_index,
                     const EventObserver* observer = nullptr);

// All rounds of a config; with parallel=true rounds are dispatched to an
// OpenMP worker pool (capped by SML_THREADS), results ordered by index
// either way. The serial path is the reference implementation.
std::vector<RoundStats> run_rounds(const SimConfig& cfg, bool parallel = true);

struct SimReport {
    int rounds = 0;
    int64_t blocks_per_round = 0;
    double rr_m_mean = 0.0, rr_m_stddev = 0.0, rr_m_ci95 = 0.0;
    double tps_mean = 0.0, tps_stddev = 0.0, tps_ci95 = 0.0;
    StateFrequency freq;  // pooled visit counts
    double freq_share(const MarkovState& s) const;
};

SimReport aggregate_rounds(const std::vector<RoundStats>& stats);

// Worker cap: min(hardware, SML_THREADS if set).
int thread_cap();

}  // namespace sml
