#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sml/chain.hpp"

using namespace sml;

namespace {

ModelParams params(double alpha, double theta, int delta_max = 30) {
    RawParams raw;
    raw.alpha = alpha;
    raw.theta = theta;
    raw.delta_max = delta_max;
    return validate_params(raw);
}

const double kAlphaGrid[] = {0.05, 0.15, 0.25, 0.35, 0.45};
const double kThetaGrid[] = {0.01, 0.1, 0.2};

}  // namespace

TEST_CASE("state space sizes at delta_max 30") {
    // trail states only with T; lead-over-3-leaf ties need F or L
    CHECK(enumerate_states(StrategyFlags::from_name("S"), 30).size() == 64);
    CHECK(enumerate_states(StrategyFlags::from_name("T1"), 30).size() == 68);
    CHECK(enumerate_states(StrategyFlags::from_name("L"), 30).size() == 94);
    CHECK(enumerate_states(StrategyFlags::from_name("F"), 30).size() == 94);
    CHECK(enumerate_states(StrategyFlags::from_name("LF"), 30).size() == 94);
    CHECK(enumerate_states(StrategyFlags::from_name("LT"), 30).size() == 98);
    CHECK(enumerate_states(StrategyFlags::from_name("FT"), 30).size() == 98);
    CHECK(enumerate_states(StrategyFlags::from_name("LFT"), 30).size() == 98);
}

TEST_CASE("trail states appear exactly with the trail flag") {
    for (const auto& f : StrategyFlags::all()) {
        const StateSpace space = enumerate_states(f, 10);
        bool has_trail = false;
        for (const auto& s : space.states)
            has_trail |= s.kind == DeltaKind::TrailMinusOne || s.kind == DeltaKind::TieAllHonest;
        CHECK(has_trail == f.trail);
        // published ties always carry 2 or 3 leaves
        for (const auto& s : space.states)
            if (s.kind == DeltaKind::TiePublished) CHECK((s.n_leaves == 2 || s.n_leaves == 3));
    }
}

TEST_CASE("enumeration is deterministic and indexed") {
    const StateSpace space = enumerate_states(StrategyFlags::from_name("LFT"), 12);
    for (int i = 0; i + 1 < space.size(); ++i)
        CHECK(space.states[size_t(i)] < space.states[size_t(i + 1)]);
    for (int i = 0; i < space.size(); ++i) CHECK(space.index_of(space.states[size_t(i)]) == i);
    CHECK(space.index_of(MarkovState::lead_state(13, 1)) == -1);
    CHECK(space.states[0] == MarkovState::trail_minus_one(1));
}

namespace {

double edge_rate(const GeneratorMatrix& gen, const StateSpace& space, const MarkovState& from,
                 const MarkovState& to, EventKind event) {
    const int i = space.index_of(from), j = space.index_of(to);
    REQUIRE(i >= 0);
    REQUIRE(j >= 0);
    double rate = 0.0;
    for (const auto& e : gen.edges)
        if (e.from == i && e.to == j && e.event == event) rate += e.rate;
    return rate;
}

}  // namespace

TEST_CASE("generator encodes the worked transitions") {
    const ModelParams p = params(0.3, 0.05);

    SUBCASE("selfish: an honest block at (2,3) resets the race") {
        const StateSpace space = enumerate_states(StrategyFlags::from_name("S"), 30);
        const GeneratorMatrix gen = build_generator(p, StrategyFlags::from_name("S"), space);
        CHECK(edge_rate(gen, space, MarkovState::lead_state(2, 3), MarkovState::lead_state(0, 1),
                        EventKind::HpBlock) == doctest::Approx(p.hp_single_rate()).epsilon(1e-14));
    }
    SUBCASE("lead-stubborn: one reveal, race continues one lower") {
        // the revealed block and the fresh honest block form the new 2-leaf top
        const StateSpace space = enumerate_states(StrategyFlags::from_name("L"), 30);
        const GeneratorMatrix gen = build_generator(p, StrategyFlags::from_name("L"), space);
        CHECK(edge_rate(gen, space, MarkovState::lead_state(2, 3), MarkovState::lead_state(1, 2),
                        EventKind::HpBlock) == doctest::Approx(p.hp_single_rate()).epsilon(1e-14));
        CHECK(edge_rate(gen, space, MarkovState::lead_state(2, 3), MarkovState::lead_state(1, 3),
                        EventKind::HpFork) == doctest::Approx(p.hp_fork_rate()).epsilon(1e-14));
    }
    SUBCASE("attacker finds extend the hidden branch") {
        for (const auto& f : StrategyFlags::all()) {
            const StateSpace space = enumerate_states(f, 30);
            const GeneratorMatrix gen = build_generator(p, f, space);
            for (int k : {1, 2, 5}) {
                CHECK(edge_rate(gen, space, MarkovState::lead_state(k, 1),
                                MarkovState::lead_state(k + 1, 1), EventKind::MpBlock) ==
                      doctest::Approx(p.alpha).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("row sums vanish and outflow is normalized") {
    for (const auto& f : StrategyFlags::all())
        for (double alpha : kAlphaGrid)
            for (double theta : kThetaGrid) {
                const ModelParams p = params(alpha, theta);
                const StateSpace space = enumerate_states(f, 30);
                const GeneratorMatrix gen = build_generator(p, f, space);
                CHECK(gen.max_row_sum_abs() <= 1e-12);
                for (int r = 0; r < gen.n; ++r) {
                    double off = 0.0;
                    for (int c = 0; c < gen.n; ++c)
                        if (c != r) off += gen.at(r, c);
                    const MarkovState& s = space.states[size_t(r)];
                    const bool boundary =
                        s.kind == DeltaKind::Lead && s.lead == space.delta_max;
                    const double total = p.total_event_rate();
                    const double want = boundary ? total - p.alpha : total;
                    CHECK(std::abs(off - want) <= 1e-12);
                }
            }
}

TEST_CASE("every state has flow in and out") {
    const ModelParams p = params(0.3, 0.1);
    for (const auto& f : StrategyFlags::all()) {
        const StateSpace space = enumerate_states(f, 30);
        const GeneratorMatrix gen = build_generator(p, f, space);
        std::vector<double> in(size_t(gen.n), 0.0), out(size_t(gen.n), 0.0);
        for (const auto& e : gen.edges) {
            if (e.from == e.to) continue;
            out[size_t(e.from)] += e.rate;
            in[size_t(e.to)] += e.rate;
        }
        for (int i = 0; i < gen.n; ++i) {
            CHECK(out[size_t(i)] > 0.0);
            CHECK(in[size_t(i)] > 0.0);
        }
    }
}

TEST_CASE("two-state toy chain solves to the uniform distribution") {
    GeneratorMatrix gen;
    gen.n = 2;
    gen.q = {-1.0, 1.0, 1.0, -1.0};
    const SteadyStateDistribution d = solve_steady_state(gen);
    CHECK(d.pi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.pi[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.residual <= 1e-12);
}

TEST_CASE("steady state is a probability vector with tiny residual") {
    for (const auto& f : StrategyFlags::all())
        for (double alpha : kAlphaGrid)
            for (double theta : kThetaGrid) {
                const ModelParams p = params(alpha, theta);
                const StateSpace space = enumerate_states(f, 30);
                const SteadyStateDistribution d =
                    solve_steady_state(build_generator(p, f, space));
                double sum = 0.0;
                for (double v : d.pi) {
                    CHECK(v >= 0.0);
                    sum += v;
                }
                CHECK(std::abs(sum - 1.0) <= 1e-10);
                CHECK(d.residual <= 1e-10);
            }
}

TEST_CASE("theta zero leaves fork-born states unvisited but solvable") {
    const ModelParams p = params(0.3, 0.0);
    const StrategyFlags f = StrategyFlags::from_name("S");
    const StateSpace space = enumerate_states(f, 30);
    const SteadyStateDistribution d = solve_steady_state(build_generator(p, f, space));
    const int idx = space.index_of(MarkovState::lead_state(0, 2));
    REQUIRE(idx >= 0);
    CHECK(d.pi[size_t(idx)] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.residual <= 1e-10);
}

TEST_CASE("truncation tail mass tracks the lead-walk decay ratio") {
    const StrategyFlags s = StrategyFlags::from_name("S");

    {  // small attacker: tail is immaterial even at depth 10
        const ModelParams p = params(0.05, 0.05, 10);
        const StateSpace space = enumerate_states(s, 10);
        const SteadyStateDistribution d = solve_steady_state(build_generator(p, s, space));
        CHECK(truncation_tail_mass(d, space) < 1e-10);
    }
    {  // shallow truncation at a large attacker is clearly visible
        const ModelParams p = params(0.45, 0.05, 3);
        const StateSpace space = enumerate_states(s, 3);
        const SteadyStateDistribution d = solve_steady_state(build_generator(p, s, space));
        CHECK(truncation_tail_mass(d, space) > 1e-6);
    }
    {  // depth 30 at alpha 0.45: the walk thins at alpha/beta per level, so
       // the boundary keeps a small but non-negligible share
        const ModelParams p = params(0.45, 0.05, 30);
        const StateSpace space = enumerate_states(s, 30);
        const SteadyStateDistribution d = solve_steady_state(build_generator(p, s, space));
        const double tail = truncation_tail_mass(d, space);
        CHECK(tail < 1e-3);
        CHECK(tail > 1e-6);
    }
    {  // a depth matched to the decay ratio pushes it below 1e-8
        const ModelParams p = params(0.45, 0.05, 160);
        const StateSpace space = enumerate_states(s, 160);
        const SteadyStateDistribution d = solve_steady_state(build_generator(p, s, space));
        CHECK(truncation_tail_mass(d, space) < 1e-8);
    }
}

TEST_CASE("doubling the truncation depth barely moves shared-state mass") {
    for (double alpha : {0.15, 0.3}) {
        const StrategyFlags f = StrategyFlags::from_name("LFT");
        const ModelParams p30 = params(alpha, 0.1, 30);
        const ModelParams p60 = params(alpha, 0.1, 60);
        const StateSpace s30 = enumerate_states(f, 30);
        const StateSpace s60 = enumerate_states(f, 60);
        const SteadyStateDistribution d30 = solve_steady_state(build_generator(p30, f, s30));
        const SteadyStateDistribution d60 = solve_steady_state(build_generator(p60, f, s60));
        double worst = 0.0;
        for (int i = 0; i < s30.size(); ++i) {
            const int j = s60.index_of(s30.states[size_t(i)]);
            REQUIRE(j >= 0);
            worst = std::max(worst, std::abs(d30.pi[size_t(i)] - d60.pi[size_t(j)]));
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("generator rejects a space built for another strategy") {
    const ModelParams p = params(0.3, 0.1);
    const StateSpace space = enumerate_states(StrategyFlags::from_name("S"), 30);
    CHECK_THROWS_AS(build_generator(p, StrategyFlags::from_name("LFT"), space),
                    InconsistentSpace);
}

TEST_CASE("edge-list dump is line oriented") {
    const ModelParams p = params(0.3, 0.1);
    const StrategyFlags f = StrategyFlags::from_name("T1");
    const StateSpace space = enumerate_states(f, 5);
    const GeneratorMatrix gen = build_generator(p, f, space);
    std::ostringstream out;
    dump_generator(out, space, gen);
    const std::string text = out.str();
    CHECK(text.find("(0'',1)") != std::string::npos);
    CHECK(text.find("mp_block") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == long(gen.edges.size()));
}
