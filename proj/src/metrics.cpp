#include "sml/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sml/linalg.hpp"

namespace sml {

namespace {

// Depth of the auxiliary race recursions. Independent of the chain
// truncation; alpha^64 is far below double noise for alpha <= 0.45.
constexpr int kRaceDepth = 96;

}  // namespace

PhBoundary compute_ph_boundary(const ModelParams& p) {
    // first-step analysis of the trail race on the conditional event split:
    // an honest event (either kind) advances the public branch, an attacker
    // find either catches up (-1 -> 0'') or wins outright (0'' -> done)
    const double r = p.total_event_rate();
    const double h = (p.hp_single_rate() + p.hp_fork_rate()) / r;
    const double a = p.alpha / r;
    const double ph_minus1 = h / (1.0 - a * h);
    return {ph_minus1, h * ph_minus1};
}

double BranchWinProbabilities::ph_lead(int len, int n_leaves) const {
    if (len <= 0) return ph_tie[size_t(n_leaves - 2)];
    if (len > int(pubwin.size())) return 0.0;
    return pubwin[size_t(len - 1)][size_t(n_leaves - 2)];
}

// Tie-race system. Unknowns: P2, P3 (public side wins the published tie,
// N = 2, 3) and pubwin(k, N) for k = 1..K (public side of a tie with k
// unpublished attacker blocks above it wins). First-step equations:
//
//   P_N      = pb1 (1-g_N) tau + b2 [gAH_N P2 + gH_N tau] + a F pw(1,N)
//   pw(1,N)  = pb1 (1-g_N) P2 + b2 (gAH_N/2 + gH_N) P3 + a pw(2,N)
//   pw(2,N)  = L [pb1 (1-g_N) pw(1,2) + b2 (gAH_N/2 + gH_N) pw(1,3)] + a pw(3,N)
//   pw(k,N)  = pb1 (1-g_N) pw(k-1,2) + b2 (gAH_N/2 + gH_N) pw(k-1,3) + a pw(k+1,N)
//
// with tau = (1-T) + T ph(-1): an honest advance ends the race unless the
// attacker trails it. At exactly two unpublished blocks a non-L attacker
// answers the next honest block by publishing everything, which is why the
// k = 2 row carries the L gate while deeper rows do not (one block is
// revealed per honest block there for every strategy). pw(K+1, N) = 0.
BranchWinProbabilities solve_ph_tie(const ModelParams& p, StrategyFlags flags) {
    const PhBoundary boundary = compute_ph_boundary(p);
    const double tau = flags.trail ? boundary.ph_minus1 : 1.0;
    const double r = p.total_event_rate();
    const double a = p.alpha / r;
    const double pb1 = p.hp_single_rate() / r;
    const double b2 = p.hp_fork_rate() / r;
    const int K = kRaceDepth;
    const int n_unknowns = 2 + 2 * K;

    // unknown layout: [P2, P3, pw(1,2), pw(1,3), pw(2,2), pw(2,3), ...]
    auto pw_idx = [](int k, int n) { return 2 + 2 * (k - 1) + (n - 2); };

    std::vector<double> m(size_t(n_unknowns) * n_unknowns, 0.0);
    std::vector<double> rhs(size_t(n_unknowns), 0.0);
    auto at = [&](int r, int c) -> double& { return m[size_t(r) * n_unknowns + c]; };

    for (int n = 2; n <= 3; ++n) {
        const double one_minus_g = 1.0 - p.gamma_n(n);
        const double fork_h_side = 0.5 * p.g_ah_n(n) + p.g_h_n(n);
        {  // P_N row
            int r = n - 2;
            at(r, r) = 1.0;
            rhs[size_t(r)] = pb1 * one_minus_g * tau + b2 * p.g_h_n(n) * tau;
            at(r, 0) -= b2 * p.g_ah_n(n);
            if (flags.fork) at(r, pw_idx(1, n)) -= a;
        }
        {  // pw(1, N)
            int r = pw_idx(1, n);
            at(r, r) = 1.0;
            at(r, 0) -= pb1 * one_minus_g;
            at(r, 1) -= b2 * fork_h_side;
            at(r, pw_idx(2, n)) -= a;
        }
        {  // pw(2, N)
            int r = pw_idx(2, n);
            at(r, r) = 1.0;
            if (flags.lead) {
                at(r, pw_idx(1, 2)) -= pb1 * one_minus_g;
                at(r, pw_idx(1, 3)) -= b2 * fork_h_side;
            }
            at(r, pw_idx(3, n)) -= a;
        }
        for (int k = 3; k <= K; ++k) {
            int r = pw_idx(k, n);
            at(r, r) = 1.0;
            at(r, pw_idx(k - 1, 2)) -= pb1 * one_minus_g;
            at(r, pw_idx(k - 1, 3)) -= b2 * fork_h_side;
            if (k < K) at(r, pw_idx(k + 1, n)) -= a;
        }
    }

    if (!linalg::solve_inplace(m, rhs, n_unknowns))
        throw SingularTieSystem("tie race system is singular");

    BranchWinProbabilities ph;
    ph.ph_minus1 = boundary.ph_minus1;
    ph.ph_tie_allhonest = boundary.ph_tie_allhonest;
    ph.ph_tie = {rhs[0], rhs[1]};
    ph.pubwin.resize(size_t(K));
    for (int k = 1; k <= K; ++k)
        ph.pubwin[size_t(k - 1)] = {rhs[size_t(pw_idx(k, 2))], rhs[size_t(pw_idx(k, 3))]};
    return ph;
}

namespace {

// Fate of the attacker's unpublished blocks. f[i][d] is the probability
// that the block sitting i-th above the contested tie ends up on the main
// chain, given d unpublished blocks in total. Honest events shift blocks
// down one position (the lowest becomes the revealed tie leaf, fate
// 1 - pw); attacker events push the stack deeper. Solved layer by layer:
// within a layer the alpha-coupling is a first-order recurrence in d.
struct FateTables {
    double pf1 = 0.0;            // fate of a single fresh hidden block over a tie
    double pf_lead_chain = 0.0;  // continuation after a second find (L strategies)
    std::vector<double> ftop;    // ftop[d] = fate of the newest block at lead d, d = 1..
};

FateTables compute_fates(const ModelParams& p, StrategyFlags flags,
                         const BranchWinProbabilities& ph) {
    const double r = p.total_event_rate();
    const double a = p.alpha / r;
    const double pb1 = p.hp_single_rate() / r;
    const double b2 = p.hp_fork_rate() / r;
    const double b = pb1 + b2;
    const int top = p.delta_max + 1;
    const int KF = top + 64;

    auto survive = [&](int k, int n) {  // private tie leaf wins under k hidden
        if (k == 0) return 1.0 - ph.ph_tie[size_t(n - 2)];
        if (k > int(ph.pubwin.size())) return 1.0;
        return 1.0 - ph.pubwin[size_t(k - 1)][size_t(n - 2)];
    };

    std::vector<std::vector<double>> f(size_t(top) + 1);  // f[i][d], 1-based
    std::vector<double> c(size_t(KF) + 2, 0.0);
    for (int i = 1; i <= top; ++i) {
        const std::vector<double>* below = i >= 2 ? &f[size_t(i - 1)] : nullptr;
        for (int d = std::max(i, 1); d <= KF; ++d) {
            double v;
            if (i == 1 && d == 1) {
                v = pb1 * survive(0, 2) + b2 * survive(0, 3);
            } else if (d == 2 && i <= 2) {
                if (!flags.lead) {
                    v = b;  // the next honest block triggers publish-all, a sure win
                } else if (i == 1) {
                    v = pb1 * survive(1, 2) + b2 * survive(1, 3);
                } else {
                    v = b * (*below)[1];
                }
            } else if (i == 1) {
                v = pb1 * survive(d - 1, 2) + b2 * survive(d - 1, 3);
            } else {
                v = b * (*below)[size_t(d - 1)];
            }
            c[size_t(d)] = v;
        }
        auto& layer = f[size_t(i)];
        layer.assign(size_t(KF) + 1, 0.0);
        layer[size_t(KF)] = c[size_t(KF)] / (1.0 - a);  // reflect the far boundary
        for (int d = KF - 1; d >= std::max(i, 1); --d)
            layer[size_t(d)] = c[size_t(d)] + a * layer[size_t(d) + 1];
    }

    FateTables out;
    out.pf1 = f[1][1];
    out.pf_lead_chain = f[1][2];
    out.ftop.assign(size_t(top) + 1, 0.0);
    for (int d = 1; d <= top; ++d) out.ftop[size_t(d)] = f[size_t(d)][size_t(d)];
    return out;
}

}  // namespace

ForkWinProbability compute_pf(const ModelParams& p, StrategyFlags flags,
                              const BranchWinProbabilities& ph) {
    const FateTables fates = compute_fates(p, flags, ph);
    // pb1 (1 - P2) + b2 (1 - P3) + alpha [(1-L) + L * lead chain]: the held
    // block survives an honest advance iff the resulting published tie goes
    // its way; a second find makes the win certain unless L keeps bleeding
    // blocks into new ties.
    return {fates.pf1};
}

RevenueReport compute_revenues(const SteadyStateDistribution& pi, const StateSpace& space,
                               const ModelParams& params, StrategyFlags flags,
                               const BranchWinProbabilities& ph, const ForkWinProbability& pf) {
    const FateTables fates = compute_fates(params, flags, ph);
    const double a = params.alpha;
    const double pb1 = params.hp_single_rate(), b2 = params.hp_fork_rate();
    const double ph_m1 = ph.ph_minus1, ph_tie2 = ph.ph_tie[0], ph_tie3 = ph.ph_tie[1];
    const double trail_keep = flags.trail ? ph_m1 : 1.0;

    auto pubwin = [&](int k, int n) {
        if (k > int(ph.pubwin.size())) return 0.0;
        return ph.pubwin[size_t(k - 1)][size_t(n - 2)];
    };

    double e_m = 0.0, e_h = 0.0;
    for (int i = 0; i < space.size(); ++i) {
        const MarkovState& s = space.states[size_t(i)];
        const double w = pi.pi[size_t(i)];
        if (w == 0.0) continue;
        double mp_a = 0.0, hp_h1 = 0.0, hp_h2 = 0.0;
        switch (s.kind) {
            case DeltaKind::Lead:
                if (s.lead == 0) {
                    mp_a = pf.pf;  // fresh hidden block over a settled base or honest tie
                    hp_h1 = 1.0;
                    hp_h2 = 1.0;
                } else {
                    mp_a = fates.ftop[size_t(std::min(s.lead + 1, params.delta_max + 1))];
                    if (s.lead == 1) {
                        hp_h1 = ph_tie2;  // the new block joins the revealed tie
                        hp_h2 = ph_tie3;
                    } else if (s.lead == 2) {
                        hp_h1 = flags.lead ? pubwin(1, 2) : 0.0;  // publish-all orphans it
                        hp_h2 = flags.lead ? pubwin(1, 3) : 0.0;
                    } else {
                        hp_h1 = pubwin(s.lead - 1, 2);
                        hp_h2 = pubwin(s.lead - 1, 3);
                    }
                }
                break;
            case DeltaKind::TiePublished: {
                const int n = s.n_leaves;
                mp_a = flags.fork ? pf.pf : 1.0;
                hp_h1 = params.gamma_n(n) + (1.0 - params.gamma_n(n)) * trail_keep;
                hp_h2 = params.g_a_n(n) + params.g_ah_n(n) + params.g_h_n(n) * trail_keep;
                break;
            }
            case DeltaKind::TieAllHonest:
                mp_a = 1.0;  // publish makes the private branch strictly longest
                hp_h1 = ph_m1;
                hp_h2 = ph_m1;
                break;
            case DeltaKind::TrailMinusOne:
                mp_a = 1.0 - ph.ph_tie_allhonest;  // catch-up block wins iff the race does
                hp_h1 = 1.0;
                hp_h2 = 1.0;
                break;
        }
        e_m += w * a * mp_a;
        e_h += w * (pb1 * hp_h1 + b2 * hp_h2);
    }

    RevenueReport r;
    r.e_m = e_m;
    r.e_h = e_h;
    r.tps = e_m + e_h;
    r.rr_m = r.tps > 0.0 ? e_m / r.tps : 0.0;
    r.rr_h = 1.0 - r.rr_m;
    return r;
}

MetricsReport report(const ModelParams& params, StrategyFlags flags) {
    const StateSpace space = enumerate_states(flags, params.delta_max);
    const GeneratorMatrix gen = build_generator(params, flags, space);
    const SteadyStateDistribution pi = solve_steady_state(gen);
    const BranchWinProbabilities ph = solve_ph_tie(params, flags);
    const ForkWinProbability pf = compute_pf(params, flags, ph);
    MetricsReport rep;
    rep.revenue = compute_revenues(pi, space, params, flags, ph, pf);
    rep.tail_mass = truncation_tail_mass(pi, space);
    rep.residual = pi.residual;
    rep.state_count = space.size();
    return rep;
}

MetricsReport honest_report(const ModelParams& params) {
    // with everyone honest each pool owns its power share of consensus
    // blocks; fork intervals burn one generation, so the chain advances at
    // 1/(1+theta)
    MetricsReport rep;
    const double rate = 1.0 / (1.0 + params.theta);
    rep.revenue.e_m = params.alpha * rate;
    rep.revenue.e_h = params.beta * rate;
    rep.revenue.tps = rate;
    rep.revenue.rr_m = params.alpha;
    rep.revenue.rr_h = params.beta;
    rep.tail_mass = 0.0;
    rep.residual = 0.0;
    rep.state_count = 0;
    return rep;
}

}  // namespace sml
