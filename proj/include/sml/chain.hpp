// Analytic engine, part 1: reachable state space, infinitesimal
// generator, and stationary distribution of the (delta, N) chain.
#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "sml/model.hpp"

namespace sml {

struct InconsistentSpace : ModelError {
    using ModelError::ModelError;
};
struct SingularSystem : ModelError {
    using ModelError::ModelError;
};

// Which parameter multiplies an event rate on a transition edge.
enum class Split : uint8_t { Whole, GammaN, OneMinusGammaN, ForkA, ForkAH, ForkH };

struct StructuralEdge {
    MarkovState to;
    Split split = Split::Whole;
    const char* label = "";
};

// Structural successors of (state, event) under a strategy, before any
// rates are attached. Lead growth is capped at delta_max (self-loop at
// the boundary). Derived from the attacker decision table plus the
// honest-pool rules, so the generator and the simulator share one
// strategy encoding.
std::vector<StructuralEdge> transitions_for(StrategyFlags flags, const MarkovState& state,
                                            EventKind event, int delta_max);

struct StateSpace {
    StrategyFlags flags;
    int delta_max = 0;
    std::vector<MarkovState> states;  // sorted by (delta_rank, n_leaves)

    int index_of(const MarkovState& s) const;  // -1 when absent
    int size() const { return int(states.size()); }

   private:
    friend StateSpace enumerate_states(StrategyFlags, int);
    std::map<std::pair<int, int>, int> index_;
};

// Reachability closure from (Lead(0), 1). delta_max >= 3.
StateSpace enumerate_states(StrategyFlags flags, int delta_max);

struct GeneratorEdge {
    int from = 0;
    int to = 0;
    double rate = 0.0;
    EventKind event = EventKind::MpBlock;
    const char* label = "";
};

struct GeneratorMatrix {
    int n = 0;
    std::vector<double> q;  // row-major, rows sum to zero
    std::vector<GeneratorEdge> edges;

    double at(int r, int c) const { return q[size_t(r) * n + c]; }
    double max_row_sum_abs() const;
};

GeneratorMatrix build_generator(const ModelParams& params, StrategyFlags flags,
                                const StateSpace& space);

struct SteadyStateDistribution {
    std::vector<double> pi;
    double residual = 0.0;  // max-norm of pi * Q
};

// Global balance with one equation replaced by normalisation, dense LU.
SteadyStateDistribution solve_steady_state(const GeneratorMatrix& q);

// Probability mass sitting at the truncation boundary Lead(delta_max).
double truncation_tail_mass(const SteadyStateDistribution& dist, const StateSpace& space);

// Plain-text edge list: "from  to  rate  event_label", one per line.
void dump_generator(std::ostream& out, const StateSpace& space, const GeneratorMatrix& gen);

}  // namespace sml
