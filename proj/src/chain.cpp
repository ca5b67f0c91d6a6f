#include "sml/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ostream>
#include <set>

#include "sml/linalg.hpp"

namespace sml {

std::vector<StructuralEdge> transitions_for(StrategyFlags flags, const MarkovState& state,
                                            EventKind event, int delta_max) {
    const MpAction action = decide_mp_action(flags, state, event);
    const int n = state.n_leaves;
    std::vector<StructuralEdge> out;

    if (event == EventKind::MpBlock) {
        switch (action) {
            case MpAction::Hold:
                if (state.kind == DeltaKind::TiePublished) {
                    out.push_back({MarkovState::lead_state(1, n), Split::Whole, "hold"});
                } else {
                    int next = std::min(state.lead + 1, delta_max);
                    out.push_back({MarkovState::lead_state(next, n), Split::Whole,
                                   state.lead == delta_max ? "hold_capped" : "hold"});
                }
                return out;
            case MpAction::Publish:
                if (state.kind == DeltaKind::TrailMinusOne) {
                    // catch-up tie: honest pools stay on the public branch
                    out.push_back({MarkovState::tie_all_honest(n), Split::Whole, "catch_up"});
                } else {
                    // 0' or 0'': the private branch becomes strictly longest
                    out.push_back({MarkovState::lead_state(0, 1), Split::Whole, "publish_win"});
                }
                return out;
            default:
                throw InconsistentSpace("unexpected attacker action on MpBlock");
        }
    }

    const bool fork_event = event == EventKind::HpFork;
    switch (state.kind) {
        case DeltaKind::Lead:
            if (state.lead == 0) {
                // adopt one of the new public blocks
                out.push_back({fork_event ? MarkovState::lead_state(0, 2)
                                          : MarkovState::lead_state(0, 1),
                               Split::Whole, "adopt"});
            } else if (action == MpAction::PublishAll) {
                out.push_back({MarkovState::lead_state(0, 1), Split::Whole, "publish_all_win"});
            } else {
                // publish one: the revealed block ties the new public top
                int next = state.lead - 1;
                if (next == 0) {
                    out.push_back({MarkovState::tie_published(fork_event ? 3 : 2), Split::Whole,
                                   "reveal_tie"});
                } else {
                    out.push_back({MarkovState::lead_state(next, fork_event ? 3 : 2), Split::Whole,
                                   "reveal_tie"});
                }
            }
            return out;
        case DeltaKind::TiePublished:
            if (!fork_event) {
                out.push_back({MarkovState::lead_state(0, 1), Split::GammaN, "on_private"});
                if (flags.trail) {
                    out.push_back({MarkovState::trail_minus_one(1), Split::OneMinusGammaN,
                                   "fall_behind"});
                } else {
                    out.push_back({MarkovState::lead_state(0, 1), Split::OneMinusGammaN,
                                   "public_wins"});
                }
            } else {
                out.push_back({MarkovState::lead_state(0, 2), Split::ForkA, "fork_on_private"});
                out.push_back({MarkovState::tie_published(2), Split::ForkAH, "fork_split"});
                if (flags.trail) {
                    out.push_back({MarkovState::trail_minus_one(2), Split::ForkH, "fall_behind"});
                } else {
                    out.push_back({MarkovState::lead_state(0, 2), Split::ForkH, "public_wins"});
                }
            }
            return out;
        case DeltaKind::TieAllHonest:
            out.push_back({MarkovState::trail_minus_one(fork_event ? 2 : 1), Split::Whole,
                           "public_advances"});
            return out;
        case DeltaKind::TrailMinusOne:
            // two behind: give up and adopt
            out.push_back({fork_event ? MarkovState::lead_state(0, 2)
                                      : MarkovState::lead_state(0, 1),
                           Split::Whole, "give_up"});
            return out;
    }
    throw InconsistentSpace("unhandled state kind");
}

int StateSpace::index_of(const MarkovState& s) const {
    auto it = index_.find({s.delta_rank(), s.n_leaves});
    return it == index_.end() ? -1 : it->second;
}

StateSpace enumerate_states(StrategyFlags flags, int delta_max) {
    if (delta_max < 3) throw ModelError("delta_max must be at least 3");
    std::set<MarkovState> seen;
    std::deque<MarkovState> frontier;
    const MarkovState start = MarkovState::lead_state(0, 1);
    seen.insert(start);
    frontier.push_back(start);
    while (!frontier.empty()) {
        MarkovState s = frontier.front();
        frontier.pop_front();
        for (EventKind e : {EventKind::MpBlock, EventKind::HpBlock, EventKind::HpFork}) {
            for (const auto& edge : transitions_for(flags, s, e, delta_max)) {
                if (seen.insert(edge.to).second) frontier.push_back(edge.to);
            }
        }
    }
    StateSpace space;
    space.flags = flags;
    space.delta_max = delta_max;
    space.states.assign(seen.begin(), seen.end());
    std::sort(space.states.begin(), space.states.end());
    for (int i = 0; i < int(space.states.size()); ++i)
        space.index_[{space.states[size_t(i)].delta_rank(), space.states[size_t(i)].n_leaves}] = i;
    return space;
}

namespace {

double split_value(const ModelParams& p, int n, Split s) {
    switch (s) {
        case Split::Whole: return 1.0;
        case Split::GammaN: return p.gamma_n(n);
        case Split::OneMinusGammaN: return 1.0 - p.gamma_n(n);
        case Split::ForkA: return p.g_a_n(n);
        case Split::ForkAH: return p.g_ah_n(n);
        case Split::ForkH: return p.g_h_n(n);
    }
    return 0.0;
}

double event_rate(const ModelParams& p, EventKind e) {
    switch (e) {
        case EventKind::MpBlock: return p.alpha;
        case EventKind::HpBlock: return p.hp_single_rate();
        case EventKind::HpFork: return p.hp_fork_rate();
    }
    return 0.0;
}

}  // namespace

GeneratorMatrix build_generator(const ModelParams& params, StrategyFlags flags,
                                const StateSpace& space) {
    if (!(space.flags == flags))
        throw InconsistentSpace("state space was enumerated for a different strategy");
    GeneratorMatrix gen;
    gen.n = space.size();
    gen.q.assign(size_t(gen.n) * gen.n, 0.0);
    for (int i = 0; i < gen.n; ++i) {
        const MarkovState& s = space.states[size_t(i)];
        for (EventKind e : {EventKind::MpBlock, EventKind::HpBlock, EventKind::HpFork}) {
            const double base = event_rate(params, e);
            for (const auto& edge : transitions_for(flags, s, e, space.delta_max)) {
                const double rate = base * split_value(params, s.n_leaves, edge.split);
                int j = space.index_of(edge.to);
                if (j < 0)
                    throw InconsistentSpace("transition target " + edge.to.to_string() +
                                            " missing from space");
                gen.edges.push_back({i, j, rate, e, edge.label});
                if (j != i) {
                    gen.q[size_t(i) * gen.n + j] += rate;
                    gen.q[size_t(i) * gen.n + i] -= rate;
                }
                // self-loops (including the folded boundary) cancel in Q
            }
        }
    }
    return gen;
}

double GeneratorMatrix::max_row_sum_abs() const {
    double worst = 0.0;
    for (int r = 0; r < n; ++r) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += q[size_t(r) * n + c];
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

SteadyStateDistribution solve_steady_state(const GeneratorMatrix& gen) {
    const int n = gen.n;
    // pi * Q = 0  ->  Q^T pi = 0; replace the last equation by sum(pi) = 1.
    std::vector<double> a(size_t(n) * n, 0.0);
    std::vector<double> b(size_t(n), 0.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a[size_t(r) * n + c] = gen.q[size_t(c) * n + r];
    for (int c = 0; c < n; ++c) a[size_t(n - 1) * n + c] = 1.0;
    b[size_t(n - 1)] = 1.0;
    if (!linalg::solve_inplace(a, b, n))
        throw SingularSystem("steady-state solve failed; generator disconnected or malformed");

    SteadyStateDistribution d;
    d.pi = std::move(b);
    for (double& v : d.pi) {
        if (v < 0.0 && v > -1e-12) v = 0.0;  // LU noise on transient states
    }
    double residual = 0.0;
    for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int r = 0; r < n; ++r) s += d.pi[size_t(r)] * gen.q[size_t(r) * n + c];
        residual = std::max(residual, std::abs(s));
    }
    d.residual = residual;
    return d;
}

double truncation_tail_mass(const SteadyStateDistribution& dist, const StateSpace& space) {
    double mass = 0.0;
    for (int i = 0; i < space.size(); ++i) {
        const MarkovState& s = space.states[size_t(i)];
        if (s.kind == DeltaKind::Lead && s.lead == space.delta_max) mass += dist.pi[size_t(i)];
    }
    return mass;
}

void dump_generator(std::ostream& out, const StateSpace& space, const GeneratorMatrix& gen) {
    for (const auto& e : gen.edges) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-8s %-8s %.17g %s/%s\n",
                      space.states[size_t(e.from)].to_string().c_str(),
                      space.states[size_t(e.to)].to_string().c_str(), e.rate,
                      event_name(e.event), e.label);
        out << buf;
    }
}

}  // namespace sml
