#include <doctest.h>

#include <cmath>

#include "selfish_oracle.hpp"
#include "sml/metrics.hpp"

using namespace sml;

namespace {

ModelParams params(double alpha, double theta, int delta_max = 30) {
    RawParams raw;
    raw.alpha = alpha;
    raw.theta = theta;
    raw.delta_max = delta_max;
    return validate_params(raw);
}

const double kAlphaGrid[] = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
const double kThetaGrid[] = {0.01, 0.05, 0.10, 0.20};

}  // namespace

TEST_CASE("trail-race boundary probabilities") {
    {  // perfect network: beta / (1 - alpha beta) and its square flavour
        const PhBoundary b = compute_ph_boundary(params(0.3, 0.0));
        CHECK(b.ph_minus1 == doctest::Approx(0.7 / 0.79).epsilon(1e-12));
        CHECK(b.ph_tie_allhonest == doctest::Approx(0.49 / 0.79).epsilon(1e-12));
    }
    {
        const PhBoundary b = compute_ph_boundary(params(0.45, 0.0));
        CHECK(b.ph_minus1 == doctest::Approx(0.55 / 0.7525).epsilon(1e-12));
    }
    {  // forks slow the honest side, so trailing gets slightly safer
        const ModelParams p = params(0.3, 0.2);
        const double h = (p.hp_single_rate() + p.hp_fork_rate()) / p.total_event_rate();
        const double a = p.alpha / p.total_event_rate();
        const PhBoundary b = compute_ph_boundary(p);
        CHECK(b.ph_minus1 == doctest::Approx(h / (1.0 - a * h)).epsilon(1e-12));
        CHECK(b.ph_minus1 < 0.7 / 0.79);
    }
    {  // powerless attacker never wins a race
        const PhBoundary b = compute_ph_boundary(params(1e-9, 0.01));
        CHECK(b.ph_minus1 > 1.0 - 1e-8);
        CHECK(b.ph_tie_allhonest > 1.0 - 1e-8);
    }
}

TEST_CASE("tie probabilities stay in range across the grid") {
    for (const auto& f : StrategyFlags::all())
        for (double alpha : kAlphaGrid)
            for (double theta : kThetaGrid) {
                const BranchWinProbabilities ph = solve_ph_tie(params(alpha, theta), f);
                for (double v : {ph.ph_tie[0], ph.ph_tie[1], ph.ph_minus1, ph.ph_tie_allhonest}) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
                double prev2 = 1.0, prev3 = 1.0;
                for (int len = 1; len <= 20; ++len) {
                    const double v2 = ph.ph_lead(len, 2), v3 = ph.ph_lead(len, 3);
                    CHECK(v2 <= prev2 + 1e-12);
                    CHECK(v3 <= prev3 + 1e-12);
                    CHECK(v2 >= 0.0);
                    prev2 = v2;
                    prev3 = v3;
                }
                CHECK(ph.ph_lead(40, 2) < 1e-6);
            }
}

TEST_CASE("theta zero decouples the tie system from the fork tables") {
    RawParams raw;
    raw.alpha = 0.3;
    raw.theta = 0.0;
    const ModelParams base = validate_params(raw);
    raw.gamma = {{1.0, 0.5, 0.9}};  // only gamma(3) changed from the default
    const ModelParams tweaked = validate_params(raw);
    for (const auto& f : StrategyFlags::all()) {
        const BranchWinProbabilities a = solve_ph_tie(base, f);
        const BranchWinProbabilities b = solve_ph_tie(tweaked, f);
        CHECK(a.ph_tie[0] == doctest::Approx(b.ph_tie[0]).epsilon(1e-13));
    }
    // and the selfish tie is the bare race: pb1 (1 - gamma2)
    const BranchWinProbabilities s = solve_ph_tie(base, StrategyFlags{});
    CHECK(s.ph_tie[0] == doctest::Approx(base.p_beta1 * 0.5).epsilon(1e-13));
}

TEST_CASE("fork-win probability") {
    for (const auto& f : StrategyFlags::all())
        for (double alpha : kAlphaGrid)
            for (double theta : kThetaGrid) {
                const ModelParams p = params(alpha, theta);
                const BranchWinProbabilities ph = solve_ph_tie(p, f);
                const ForkWinProbability pf = compute_pf(p, f, ph);
                CHECK(pf.pf >= 0.0);
                CHECK(pf.pf <= 1.0);
                if (!f.lead) {
                    // without L the held block survives honest continuations per the
                    // tie races and any further find locks it in
                    const double want = (p.hp_single_rate() * (1.0 - ph.ph_tie[0]) +
                                         p.hp_fork_rate() * (1.0 - ph.ph_tie[1]) + p.alpha) /
                                        p.total_event_rate();
                    CHECK(pf.pf == doctest::Approx(want).epsilon(1e-12));
                }
            }
}

TEST_CASE("revenue identities hold exactly") {
    for (const auto& f : StrategyFlags::all())
        for (double alpha : {0.1, 0.3, 0.45})
            for (double theta : {0.01, 0.2}) {
                const MetricsReport rep = report(params(alpha, theta), f);
                CHECK(std::abs(rep.revenue.rr_m + rep.revenue.rr_h - 1.0) <= 1e-12);
                CHECK(std::abs(rep.revenue.e_m + rep.revenue.e_h - rep.revenue.tps) <= 1e-12);
                CHECK(rep.revenue.tps <= 1.0 + 1e-12);
                CHECK(rep.revenue.e_m >= 0.0);
                CHECK(rep.revenue.e_h >= 0.0);
            }
}

// The perfect-network selfish case pins the whole revenue accounting: the
// independent cycle oracle, its closed-form twin and the chain engine have
// to coincide. Values frozen from the oracle.
TEST_CASE("selfish revenue at theta 0 matches the cycle oracle") {
    struct Pin {
        double alpha;
        double rr;
    };
    // share of a gamma = 1/2 selfish miner in a perfect network
    const Pin pins[] = {
        {0.10, 0.072417707150964},
        {0.25, 0.250000000000000},
        {0.33, 0.378555919372307},
        {0.40, 0.525581395348837},
    };
    for (const auto& pin : pins) {
        const auto cycle = oracle::selfish_cycle(pin.alpha);
        const double closed = oracle::selfish_share_closed_form(pin.alpha);
        CHECK(cycle.rr_m == doctest::Approx(closed).epsilon(1e-10));
        CHECK(cycle.rr_m == doctest::Approx(pin.rr).epsilon(1e-9));
        const MetricsReport rep = report(params(pin.alpha, 0.0), StrategyFlags{});
        CHECK(std::abs(rep.revenue.rr_m - cycle.rr_m) <= 1e-6);
        CHECK(std::abs(rep.revenue.tps - cycle.tps) <= 1e-6);
    }
}

TEST_CASE("relative revenue grows with computing power") {
    for (const auto& f : StrategyFlags::all())
        for (double theta : kThetaGrid) {
            double prev = -1.0;
            for (double alpha : kAlphaGrid) {
                const double rr = report(params(alpha, theta), f).revenue.rr_m;
                CHECK(rr >= prev - 1e-9);
                prev = rr;
            }
        }
}

TEST_CASE("forks help a large stubborn attacker") {
    const StrategyFlags lft = StrategyFlags::from_name("LFT");
    for (double alpha : {0.30, 0.35, 0.40, 0.45}) {
        double prev = -1.0;
        for (double theta : kThetaGrid) {
            const double rr = report(params(alpha, theta), lft).revenue.rr_m;
            CHECK(rr >= prev - 1e-9);
            prev = rr;
        }
    }
}

TEST_CASE("profitability threshold drops as forks get likelier") {
    const StrategyFlags lft = StrategyFlags::from_name("LFT");
    double prev_threshold = 1.0;
    for (double theta : kThetaGrid) {
        double threshold = 1.0;
        for (double alpha : kAlphaGrid) {
            if (report(params(alpha, theta), lft).revenue.rr_m > alpha) {
                threshold = alpha;
                break;
            }
        }
        CHECK(threshold <= prev_threshold + 1e-12);
        prev_threshold = threshold;
    }
}

TEST_CASE("headline report properties") {
    const StrategyFlags lft = StrategyFlags::from_name("LFT");
    CHECK(report(params(0.4, 0.1), lft).revenue.rr_m > 0.4);
    CHECK(report(params(0.1, 0.01), lft).revenue.rr_m < 0.1);
    for (const auto& f : StrategyFlags::all())
        for (double alpha : {0.2, 0.3, 0.45})
            CHECK(report(params(alpha, 0.1), f).revenue.tps <
                  honest_report(params(alpha, 0.1)).revenue.tps);
    const MetricsReport honest = honest_report(params(0.3, 0.1));
    CHECK(honest.revenue.rr_m == doctest::Approx(0.3));
    CHECK(honest.revenue.tps == doctest::Approx(1.0 / 1.1));
}

TEST_CASE("metrics are well conditioned in alpha") {
    const StrategyFlags lft = StrategyFlags::from_name("LFT");
    const double base = report(params(0.3, 0.1), lft).revenue.rr_m;
    const double up = report(params(0.3 + 1e-9, 0.1), lft).revenue.rr_m;
    const double down = report(params(0.3 - 1e-9, 0.1), lft).revenue.rr_m;
    CHECK(std::abs(up - base) < 1e-6);
    CHECK(std::abs(down - base) < 1e-6);
}

TEST_CASE("doubling the truncation depth leaves revenue unchanged at moderate power") {
    for (const auto& f : StrategyFlags::all()) {
        const double rr30 = report(params(0.3, 0.1, 30), f).revenue.rr_m;
        const double rr60 = report(params(0.3, 0.1, 60), f).revenue.rr_m;
        CHECK(std::abs(rr30 - rr60) < 1e-8);
    }
}
