#include "sml/model.hpp"

#include <cmath>
#include <cstdio>

namespace sml {

std::string StrategyFlags::name() const {
    if (!lead && !fork && !trail) return "S";
    std::string s;
    if (lead) s += 'L';
    if (fork) s += 'F';
    if (trail) s += 'T';
    if (s == "T") return "T1";
    return s;
}

StrategyFlags StrategyFlags::from_name(const std::string& name) {
    if (name == "S") return {};
    if (name == "T1" || name == "T") return {false, false, true};
    StrategyFlags f;
    for (char c : name) {
        switch (c) {
            case 'L': f.lead = true; break;
            case 'F': f.fork = true; break;
            case 'T': f.trail = true; break;
            default: throw ModelError("unknown strategy name: " + name);
        }
    }
    if (name.empty()) throw ModelError("empty strategy name");
    return f;
}

const std::array<StrategyFlags, 8>& StrategyFlags::all() {
    static const std::array<StrategyFlags, 8> k = {{
        {false, false, false},  // S
        {true, false, false},   // L
        {false, true, false},   // F
        {false, false, true},   // T1
        {true, true, false},    // LF
        {true, false, true},    // LT
        {false, true, true},    // FT
        {true, true, true},     // LFT
    }};
    return k;
}

const char* event_name(EventKind e) {
    switch (e) {
        case EventKind::MpBlock: return "mp_block";
        case EventKind::HpBlock: return "hp_block";
        case EventKind::HpFork: return "hp_fork";
    }
    return "?";
}

const char* action_name(MpAction a) {
    switch (a) {
        case MpAction::Hold: return "hold";
        case MpAction::PublishOne: return "publish_one";
        case MpAction::PublishAll: return "publish_all";
        case MpAction::Publish: return "publish";
        case MpAction::MineOnPrivate: return "mine_on_private";
        case MpAction::AdoptPublic: return "adopt_public";
        case MpAction::MineOnNewPrivate: return "mine_on_new_private";
    }
    return "?";
}

std::string MarkovState::to_string() const {
    char buf[32];
    switch (kind) {
        case DeltaKind::TrailMinusOne: std::snprintf(buf, sizeof buf, "(-1,%d)", n_leaves); break;
        case DeltaKind::TieAllHonest: std::snprintf(buf, sizeof buf, "(0'',%d)", n_leaves); break;
        case DeltaKind::TiePublished: std::snprintf(buf, sizeof buf, "(0',%d)", n_leaves); break;
        case DeltaKind::Lead: std::snprintf(buf, sizeof buf, "(%d,%d)", lead, n_leaves); break;
    }
    return buf;
}

ModelParams validate_params(const RawParams& raw) {
    if (!std::isfinite(raw.alpha) || raw.alpha <= 0.0 || raw.alpha >= 0.5)
        throw AlphaOutOfRange("alpha must lie in (0, 0.5), got " + std::to_string(raw.alpha));
    if (!std::isfinite(raw.theta) || raw.theta < 0.0 || raw.theta >= 1.0)
        throw ThetaOutOfRange("theta must lie in [0, 1), got " + std::to_string(raw.theta));
    if (raw.delta_max < 3)
        throw ModelError("delta_max must be at least 3, got " + std::to_string(raw.delta_max));

    ModelParams p;
    p.alpha = raw.alpha;
    p.beta = 1.0 - raw.alpha;
    p.theta = raw.theta;
    p.p_beta1 = p.beta * (1.0 - p.theta);
    p.beta2 = p.beta * p.theta;
    p.delta_max = raw.delta_max;

    for (int n = 1; n <= 3; ++n) {
        size_t i = size_t(n - 1);
        double g = raw.gamma ? (*raw.gamma)[i] : 1.0 / n;
        if (!std::isfinite(g) || g < 0.0 || g > 1.0)
            throw ModelError("gamma(" + std::to_string(n) + ") must lie in [0,1]");
        p.gamma[i] = g;
        p.g_a[i] = raw.g_a ? (*raw.g_a)[i] : g * g;
        p.g_ah[i] = raw.g_ah ? (*raw.g_ah)[i] : 2.0 * g * (1.0 - g);
        p.g_h[i] = raw.g_h ? (*raw.g_h)[i] : (1.0 - g) * (1.0 - g);
        double row = p.g_a[i] + p.g_ah[i] + p.g_h[i];
        if (std::abs(row - 1.0) > 1e-12)
            throw InconsistentForkTable("fork placement row for N=" + std::to_string(n) +
                                        " sums to " + std::to_string(row));
        if (p.g_a[i] < 0 || p.g_ah[i] < 0 || p.g_h[i] < 0)
            throw InconsistentForkTable("negative fork placement probability at N=" +
                                        std::to_string(n));
    }
    return p;
}

MpAction decide_mp_action(StrategyFlags flags, const MarkovState& state, EventKind event) {
    const bool reachable_trail = flags.trail;
    switch (event) {
        case EventKind::MpBlock:
            switch (state.kind) {
                case DeltaKind::TrailMinusOne:
                case DeltaKind::TieAllHonest:
                    if (!reachable_trail)
                        throw UnreachableState("state " + state.to_string() +
                                               " unreachable without trail flag");
                    return MpAction::Publish;
                case DeltaKind::TiePublished:
                    return flags.fork ? MpAction::Hold : MpAction::Publish;
                case DeltaKind::Lead:
                    return MpAction::Hold;
            }
            break;
        case EventKind::HpBlock:
        case EventKind::HpFork:
            switch (state.kind) {
                case DeltaKind::TrailMinusOne:
                    if (!reachable_trail)
                        throw UnreachableState("state " + state.to_string() +
                                               " unreachable without trail flag");
                    return MpAction::AdoptPublic;  // now two behind, give up
                case DeltaKind::TieAllHonest:
                    if (!reachable_trail)
                        throw UnreachableState("state " + state.to_string() +
                                               " unreachable without trail flag");
                    return MpAction::MineOnPrivate;
                case DeltaKind::TiePublished:
                    return MpAction::MineOnNewPrivate;
                case DeltaKind::Lead:
                    if (state.lead == 0) return MpAction::AdoptPublic;
                    if (state.lead == 2) return flags.lead ? MpAction::PublishOne : MpAction::PublishAll;
                    return MpAction::PublishOne;
            }
            break;
    }
    throw UnreachableState("unhandled (state,event) pair");
}

}  // namespace sml
