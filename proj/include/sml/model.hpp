// Shared domain types for the stubborn-mining toolkit: strategy flags,
// model parameters, the (delta, N) chain state, and the attacker decision
// table. Both the analytic engine and the block-tree simulator consume
// these, so strategy semantics cannot drift between the two.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sml {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AlphaOutOfRange : ModelError {
    using ModelError::ModelError;
};
struct ThetaOutOfRange : ModelError {
    using ModelError::ModelError;
};
struct InconsistentForkTable : ModelError {
    using ModelError::ModelError;
};
struct UnreachableState : ModelError {
    using ModelError::ModelError;
};

// Three independent booleans select one of 8 strategies; all false is
// plain selfish mining. Kept as booleans (not an enum) so indicator
// arithmetic in the metric formulas stays literal.
struct StrategyFlags {
    bool lead = false;   // publish one block instead of all when threatened at lead 2
    bool fork = false;   // withhold the tie-breaking block at an equal-length fork
    bool trail = false;  // keep mining when one block behind, race back via 0''

    constexpr bool operator==(const StrategyFlags&) const = default;

    std::string name() const;
    static StrategyFlags from_name(const std::string& name);
    static const std::array<StrategyFlags, 8>& all();
};

enum class EventKind : uint8_t {
    MpBlock,  // attacker finds a block (rate alpha)
    HpBlock,  // honest pools find a single block (rate p_beta1)
    HpFork,   // honest pools fork: two blocks at one height (rate beta2)
};

const char* event_name(EventKind e);

enum class MpAction : uint8_t {
    Hold,        // keep the new block private
    PublishOne,  // reveal the lowest unpublished private block
    PublishAll,  // reveal the whole private branch
    Publish,     // publish the block just found
    MineOnPrivate,     // keep mining the private tip (trailing)
    AdoptPublic,       // abandon the private branch, mine on a new public block
    MineOnNewPrivate,  // mine on a new block that extends the private branch if
                       // one exists; otherwise fall back to MineOnPrivate under
                       // trail-stubborn flags, else AdoptPublic
};

const char* action_name(MpAction a);

// Chain state (delta, N). delta is one of four kinds: trailing by one,
// the all-honest-on-public tie reached by a trail catch-up (0''), the
// published tie (0'), or a lead of k >= 0. N counts the top-height
// leaves honest pools mine on.
enum class DeltaKind : uint8_t { TrailMinusOne, TieAllHonest, TiePublished, Lead };

struct MarkovState {
    DeltaKind kind = DeltaKind::Lead;
    int lead = 0;      // meaningful only for kind == Lead
    int n_leaves = 1;  // in {1,2,3}

    static MarkovState trail_minus_one(int n) { return {DeltaKind::TrailMinusOne, 0, n}; }
    static MarkovState tie_all_honest(int n) { return {DeltaKind::TieAllHonest, 0, n}; }
    static MarkovState tie_published(int n) { return {DeltaKind::TiePublished, 0, n}; }
    static MarkovState lead_state(int k, int n) { return {DeltaKind::Lead, k, n}; }

    constexpr bool operator==(const MarkovState&) const = default;

    // Ordering rank for deterministic enumeration: -1, 0'', 0', 0, 1, 2, ...
    int delta_rank() const {
        switch (kind) {
            case DeltaKind::TrailMinusOne: return -3;
            case DeltaKind::TieAllHonest: return -2;
            case DeltaKind::TiePublished: return -1;
            case DeltaKind::Lead: return lead;
        }
        return 0;
    }

    bool operator<(const MarkovState& o) const {
        if (delta_rank() != o.delta_rank()) return delta_rank() < o.delta_rank();
        return n_leaves < o.n_leaves;
    }

    std::string to_string() const;  // "(2,3)", "(0',2)", "(0'',1)", "(-1,2)"
};

// Raw inputs before validation. gamma/g tables are indexed by N-1 and
// default to the uniform-placement settings gamma(N) = 1/N,
// gA = gamma^2, gAH = 2 gamma (1-gamma), gH = (1-gamma)^2.
struct RawParams {
    double alpha = 0.0;
    double theta = 0.0;
    std::optional<std::array<double, 3>> gamma;
    std::optional<std::array<double, 3>> g_a;
    std::optional<std::array<double, 3>> g_ah;
    std::optional<std::array<double, 3>> g_h;
    int delta_max = 30;
};

// Rates come from a block clock normalized to 1: the attacker generates
// at alpha, honest pools at beta. A fraction theta of honest generation
// intervals fork, and a fork interval consumes two block generations, so
// honest single-block events run at beta (1-theta) / (1+theta), fork
// events at beta theta / (1+theta), and honest chain height advances at
// beta / (1+theta) < beta. That slowdown is what makes receiving delay
// profitable for the attacker; with unscaled event rates forks would
// cost the attacker instead (more three-way ties, no wasted honest
// work), inverting the whole fork-severity picture.
struct ModelParams {
    double alpha = 0.0;    // attacker power / block rate
    double beta = 0.0;     // honest power, 1 - alpha
    double theta = 0.0;    // fork probability per honest generation interval
    double p_beta1 = 0.0;  // per-interval single-block weight, beta (1 - theta)
    double beta2 = 0.0;    // per-interval fork weight, beta theta
    std::array<double, 3> gamma{};  // P(honest block lands on the attacker-aligned leaf), by N
    std::array<double, 3> g_a{};    // fork placement classes, by N
    std::array<double, 3> g_ah{};
    std::array<double, 3> g_h{};
    int delta_max = 30;

    double gamma_n(int n) const { return gamma[size_t(n - 1)]; }
    double g_a_n(int n) const { return g_a[size_t(n - 1)]; }
    double g_ah_n(int n) const { return g_ah[size_t(n - 1)]; }
    double g_h_n(int n) const { return g_h[size_t(n - 1)]; }

    // true event rates on the block clock
    double hp_single_rate() const { return p_beta1 / (1.0 + theta); }
    double hp_fork_rate() const { return beta2 / (1.0 + theta); }
    double total_event_rate() const { return alpha + beta / (1.0 + theta); }
};

// Checks ranges, fills defaults, derives event rates. Throws
// AlphaOutOfRange, ThetaOutOfRange or InconsistentForkTable.
ModelParams validate_params(const RawParams& raw);

// The attacker decision table. Total over reachable (state, event) pairs;
// throws UnreachableState for pairs a strategy can never see (e.g. 0''
// without the trail flag).
MpAction decide_mp_action(StrategyFlags flags, const MarkovState& state, EventKind event);

}  // namespace sml
