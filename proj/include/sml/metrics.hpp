// Analytic engine, part 2: branch-race win probabilities and the
// revenue / throughput metrics evaluated on the stationary distribution.
//
// Every consensus block is credited to its owner exactly once, at the
// event that creates it, with its exact probability of ending up on the
// main chain given the post-event situation. Summed against the
// stationary flow this yields the long-run revenue rates; the race
// probabilities themselves close as small linear systems. MODEL_NOTES.md
// documents the recursions and the accounting table.
#pragma once

#include <array>
#include <vector>

#include "sml/chain.hpp"
#include "sml/model.hpp"

namespace sml {

struct SingularTieSystem : ModelError {
    using ModelError::ModelError;
};

struct PhBoundary {
    double ph_minus1 = 0.0;        // public wins the trail race from delta = -1
    double ph_tie_allhonest = 0.0;  // public wins from 0''
};

// Closed forms beta/(1 - alpha beta) and beta^2/(1 - alpha beta).
PhBoundary compute_ph_boundary(const ModelParams& params);

struct BranchWinProbabilities {
    double ph_minus1 = 0.0;
    double ph_tie_allhonest = 0.0;
    std::array<double, 2> ph_tie{};  // P(public side wins | published tie), N = 2, 3

    // P(some public-side leaf wins the tie height | tie of N leaves with
    // `len` unpublished attacker blocks above it), len = 1.. .
    double ph_lead(int len, int n_leaves = 2) const;

    // internal table, index [len-1][N-2]
    std::vector<std::array<double, 2>> pubwin;
};

// Solves the coupled tie equations (published tie race for N = 2, 3
// together with the hidden-lead chain they reference) as one linear
// system. Throws SingularTieSystem when degenerate.
BranchWinProbabilities solve_ph_tie(const ModelParams& params, StrategyFlags flags);

struct ForkWinProbability {
    double pf = 0.0;  // P(attacker's fresh block found at a published tie ends up consensus)
};

ForkWinProbability compute_pf(const ModelParams& params, StrategyFlags flags,
                              const BranchWinProbabilities& ph);

struct RevenueReport {
    double e_m = 0.0;   // attacker consensus-block rate
    double e_h = 0.0;   // honest consensus-block rate
    double rr_m = 0.0;  // e_m / (e_m + e_h)
    double rr_h = 0.0;
    double tps = 0.0;  // e_m + e_h, one unit transaction per consensus block
};

RevenueReport compute_revenues(const SteadyStateDistribution& pi, const StateSpace& space,
                               const ModelParams& params, StrategyFlags flags,
                               const BranchWinProbabilities& ph, const ForkWinProbability& pf);

struct MetricsReport {
    RevenueReport revenue;
    double tail_mass = 0.0;  // stationary mass at the truncation boundary
    double residual = 0.0;   // steady-state solve residual
    int state_count = 0;
};

// Full pipeline: enumerate -> generator -> steady state -> races -> revenues.
MetricsReport report(const ModelParams& params, StrategyFlags flags);

// Baseline with the attacker mining honestly: every block is published at
// once, so rr_m = alpha and every event settles one height (tps = 1).
MetricsReport honest_report(const ModelParams& params);

}  // namespace sml
