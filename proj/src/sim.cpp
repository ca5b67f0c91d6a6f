#include "sml/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sml {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

int64_t StateFrequency::total() const {
    return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

BlockTreeSim::Rng::Rng(uint64_t seed) {
    for (auto& v : s) v = splitmix64(seed);
}

uint64_t BlockTreeSim::Rng::next() {  // xoshiro256++
    const uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double BlockTreeSim::Rng::uniform() { return double(next() >> 11) * 0x1.0p-53; }

double BlockTreeSim::Rng::exponential() { return -std::log1p(-uniform()); }

int BlockTreeSim::Rng::pick(int n) { return int(next() % uint64_t(n)); }

BlockTreeSim::BlockTreeSim(const SimConfig& cfg, int round_index)
    : cfg_(cfg), rng_([&] {
          uint64_t x = cfg.base_seed;
          uint64_t a = splitmix64(x);
          x ^= uint64_t(round_index) * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL;
          return a ^ splitmix64(x);
      }()) {
    nodes_.reserve(1 << 12);
    nodes_.push_back({-1, 0, Owner::HP, true});  // genesis
    pub_leaves_[0] = 0;
    n_pub_ = 1;
}

int32_t BlockTreeSim::new_block(int32_t parent, Owner owner, bool published) {
    nodes_.push_back({parent, nodes_[size_t(parent)].height + 1, owner, published});
    ++created_;
    ++live_;
    return int32_t(nodes_.size() - 1);
}

bool BlockTreeSim::mp_has_stake() const {
    for (int32_t w = mp_tip_; w != anchor_ && w >= 0; w = nodes_[size_t(w)].parent)
        if (nodes_[size_t(w)].owner == Owner::MP) return true;
    return false;
}

MarkovState BlockTreeSim::observe() const {
    const int delta = nodes_[size_t(mp_tip_)].height - pub_height_;
    if (delta > 0) return MarkovState::lead_state(delta, n_pub_);
    if (delta < 0) {
        if (delta != -1) throw UnmappableTree("attacker more than one block behind");
        return MarkovState::trail_minus_one(n_pub_);
    }
    bool tip_is_leaf = false;
    for (int i = 0; i < n_pub_; ++i) tip_is_leaf |= pub_leaves_[i] == mp_tip_;
    if (!tip_is_leaf) return MarkovState::tie_all_honest(n_pub_);
    if (mp_has_stake()) return MarkovState::tie_published(n_pub_);
    return MarkovState::lead_state(0, n_pub_);
}

int32_t BlockTreeSim::aligned_leaf() const {
    int32_t w = mp_tip_;
    while (nodes_[size_t(w)].height > pub_height_) w = nodes_[size_t(w)].parent;
    if (nodes_[size_t(w)].height != pub_height_) return -1;
    for (int i = 0; i < n_pub_; ++i)
        if (pub_leaves_[i] == w) return w;
    return -1;
}

int32_t BlockTreeSim::choose_hp_parent(int32_t aligned) {
    if (aligned < 0 || n_pub_ == 1)
        return aligned >= 0 ? aligned : pub_leaves_[rng_.pick(n_pub_)];
    if (rng_.uniform() < cfg_.params.gamma_n(n_pub_)) return aligned;
    int others[2];
    int n = 0;
    for (int i = 0; i < n_pub_; ++i)
        if (pub_leaves_[i] != aligned) others[n++] = i;
    return pub_leaves_[others[rng_.pick(n)]];
}

void BlockTreeSim::publish_one() {
    const int32_t low = unpub_[unpub_head_++];
    nodes_[size_t(low)].published = true;
    if (nodes_[size_t(low)].height != pub_height_)
        throw UnmappableTree("revealed block does not match the public top");
    pub_leaves_[n_pub_++] = low;
}

void BlockTreeSim::publish_all_and_adopt() {
    while (unpub_head_ < unpub_.size()) nodes_[size_t(unpub_[unpub_head_++])].published = true;
    unpub_.clear();
    unpub_head_ = 0;
    adopt(mp_tip_);
}

void BlockTreeSim::adopt(int32_t tip) {
    mp_tip_ = tip;
    pub_leaves_[0] = tip;
    n_pub_ = 1;
    pub_height_ = nodes_[size_t(tip)].height;
}

void BlockTreeSim::settle() {
    // Active tips: the minable public leaves plus the attacker tip. Blocks
    // below their deepest common ancestor can never be contested again.
    int32_t tips[4];
    int n_tips = 0;
    for (int i = 0; i < n_pub_; ++i) tips[n_tips++] = pub_leaves_[i];
    bool have_mp = false;
    for (int i = 0; i < n_tips; ++i) have_mp |= tips[i] == mp_tip_;
    if (!have_mp) tips[n_tips++] = mp_tip_;

    int32_t walk[4];
    for (int i = 0; i < n_tips; ++i) walk[i] = tips[i];
    int32_t min_h = nodes_[size_t(walk[0])].height;
    for (int i = 1; i < n_tips; ++i) min_h = std::min(min_h, nodes_[size_t(walk[i])].height);
    for (int i = 0; i < n_tips; ++i)
        while (nodes_[size_t(walk[i])].height > min_h) walk[i] = nodes_[size_t(walk[i])].parent;
    auto all_equal = [&] {
        for (int i = 1; i < n_tips; ++i)
            if (walk[i] != walk[0]) return false;
        return true;
    };
    while (!all_equal())
        for (int i = 0; i < n_tips; ++i) walk[i] = nodes_[size_t(walk[i])].parent;
    const int32_t lca = walk[0];
    if (lca == anchor_) return;

    // finalize anchor -> lca
    int64_t settled = 0;
    for (int32_t w = lca; w != anchor_; w = nodes_[size_t(w)].parent) {
        ++consensus_total_;
        ++settled;
        if (nodes_[size_t(w)].owner == Owner::MP) ++consensus_mp_;
    }

    // remaining live region: the tip paths down to the new anchor
    int64_t new_live = 0;
    for (int i = 0; i < n_tips; ++i) {
        for (int32_t w = tips[i]; w != lca; w = nodes_[size_t(w)].parent) {
            bool seen = false;
            for (int j = 0; j < i && !seen; ++j)
                for (int32_t v = tips[j]; v != lca && !seen; v = nodes_[size_t(v)].parent)
                    seen = v == w;
            if (!seen) ++new_live;
        }
    }
    stale_total_ += live_ - settled - new_live;
    live_ = new_live;
    anchor_ = lca;

    if (nodes_.size() > (1u << 16)) compact();
}

void BlockTreeSim::compact() {
    // keep the anchor and every node on a tip path above it
    std::vector<int32_t> keep;
    keep.push_back(anchor_);
    auto push_path = [&](int32_t tip) {
        for (int32_t w = tip; w != anchor_; w = nodes_[size_t(w)].parent) keep.push_back(w);
    };
    for (int i = 0; i < n_pub_; ++i) push_path(pub_leaves_[i]);
    push_path(mp_tip_);
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

    std::vector<BlockNode> fresh;
    fresh.reserve(1 << 12);
    std::vector<std::pair<int32_t, int32_t>> remap;  // old -> new, sorted by old
    remap.reserve(keep.size());
    for (int32_t id : keep) {
        remap.push_back({id, int32_t(fresh.size())});
        fresh.push_back(nodes_[size_t(id)]);
    }
    auto to_new = [&](int32_t old) {
        auto it = std::lower_bound(remap.begin(), remap.end(), std::pair<int32_t, int32_t>{old, -1});
        return it != remap.end() && it->first == old ? it->second : int32_t(-1);
    };
    for (auto& n : fresh) n.parent = to_new(n.parent);
    for (int i = 0; i < n_pub_; ++i) pub_leaves_[i] = to_new(pub_leaves_[i]);
    mp_tip_ = to_new(mp_tip_);
    anchor_ = to_new(anchor_);
    for (size_t i = unpub_head_; i < unpub_.size(); ++i) unpub_[i] = to_new(unpub_[i]);
    if (unpub_head_ > 0) {
        unpub_.erase(unpub_.begin(), unpub_.begin() + ptrdiff_t(unpub_head_));
        unpub_head_ = 0;
    }
    nodes_ = std::move(fresh);
}

void BlockTreeSim::apply_mp_block(const MarkovState& before) {
    const int32_t blk = new_block(mp_tip_, Owner::MP, false);
    mp_tip_ = blk;
    unpub_.push_back(blk);
    switch (decide_mp_action(cfg_.flags, before, EventKind::MpBlock)) {
        case MpAction::Hold:
            break;
        case MpAction::Publish: {
            while (unpub_head_ < unpub_.size()) nodes_[size_t(unpub_[unpub_head_++])].published = true;
            unpub_.clear();
            unpub_head_ = 0;
            const int32_t tip_h = nodes_[size_t(mp_tip_)].height;
            if (tip_h > pub_height_) {
                adopt(mp_tip_);  // strictly longest, everyone switches
                settle();
            }
            // equal length: the trail catch-up tie; honest pools received the
            // public block first and stay on it, so the leaf set is unchanged
            break;
        }
        default:
            throw UnmappableTree("unexpected attacker action on MpBlock");
    }
}

void BlockTreeSim::apply_hp_block(const MarkovState& before) {
    const int32_t aligned = aligned_leaf();
    const MpAction action = decide_mp_action(cfg_.flags, before, EventKind::HpBlock);
    const int32_t parent = choose_hp_parent(aligned);
    const int32_t blk = new_block(parent, Owner::HP, true);
    pub_leaves_[0] = blk;
    n_pub_ = 1;
    ++pub_height_;
    switch (action) {
        case MpAction::PublishOne:
            publish_one();
            settle();
            break;
        case MpAction::PublishAll:
            publish_all_and_adopt();
            settle();
            break;
        case MpAction::AdoptPublic:
            adopt(blk);
            settle();
            break;
        case MpAction::MineOnNewPrivate:
            if (parent == aligned && aligned >= 0) {
                mp_tip_ = blk;  // the new block extends the private branch
                settle();
            } else if (cfg_.flags.trail) {
                settle();  // fall one behind, keep mining the private tip
            } else {
                adopt(blk);
                settle();
            }
            break;
        case MpAction::MineOnPrivate:
            settle();
            break;
        default:
            throw UnmappableTree("unexpected attacker action on HpBlock");
    }
}

void BlockTreeSim::apply_hp_fork(const MarkovState& before) {
    const int32_t aligned = aligned_leaf();
    const MpAction action = decide_mp_action(cfg_.flags, before, EventKind::HpFork);

    // place the two fork blocks by placement class
    int32_t p1, p2;
    if (aligned < 0 || n_pub_ == 1) {
        p1 = pub_leaves_[rng_.pick(n_pub_)];
        p2 = pub_leaves_[rng_.pick(n_pub_)];
        if (aligned >= 0 && n_pub_ == 1) p1 = p2 = aligned;
    } else {
        int others[2];
        int n = 0;
        for (int i = 0; i < n_pub_; ++i)
            if (pub_leaves_[i] != aligned) others[n++] = i;
        const double u = rng_.uniform();
        const int nn = n_pub_;
        if (u < cfg_.params.g_a_n(nn)) {
            p1 = p2 = aligned;
        } else if (u < cfg_.params.g_a_n(nn) + cfg_.params.g_ah_n(nn)) {
            p1 = aligned;
            p2 = pub_leaves_[others[rng_.pick(n)]];
        } else {
            p1 = pub_leaves_[others[rng_.pick(n)]];
            p2 = pub_leaves_[others[rng_.pick(n)]];
        }
    }
    const int32_t f1 = new_block(p1, Owner::HP, true);
    const int32_t f2 = new_block(p2, Owner::HP, true);
    pub_leaves_[0] = f1;
    pub_leaves_[1] = f2;
    n_pub_ = 2;
    ++pub_height_;

    switch (action) {
        case MpAction::PublishOne:
            publish_one();
            settle();
            break;
        case MpAction::PublishAll:
            publish_all_and_adopt();
            settle();
            break;
        case MpAction::AdoptPublic:
            // both fork leaves stay minable; the attacker picks one
            mp_tip_ = rng_.uniform() < 0.5 ? f1 : f2;
            settle();
            break;
        case MpAction::MineOnNewPrivate: {
            const bool on1 = p1 == aligned, on2 = p2 == aligned;
            if (on1 && on2)
                mp_tip_ = rng_.uniform() < 0.5 ? f1 : f2;
            else if (on1)
                mp_tip_ = f1;
            else if (on2)
                mp_tip_ = f2;
            else if (!cfg_.flags.trail)
                mp_tip_ = rng_.uniform() < 0.5 ? f1 : f2;
            settle();
            break;
        }
        case MpAction::MineOnPrivate:
            settle();
            break;
        default:
            throw UnmappableTree("unexpected attacker action on HpFork");
    }
}

void BlockTreeSim::step() {
    if (cfg_.honest_mp) {
        honest_step();
        return;
    }
    const MarkovState before = observe();
    freq_.add(before);
    const double r = cfg_.params.total_event_rate();
    sim_time_ += rng_.exponential() / r;
    const double u = rng_.uniform() * r;
    EventKind kind;
    if (u < cfg_.params.alpha)
        kind = EventKind::MpBlock;
    else if (u < cfg_.params.alpha + cfg_.params.hp_single_rate())
        kind = EventKind::HpBlock;
    else
        kind = EventKind::HpFork;
    switch (kind) {
        case EventKind::MpBlock: apply_mp_block(before); break;
        case EventKind::HpBlock: apply_hp_block(before); break;
        case EventKind::HpFork: apply_hp_fork(before); break;
    }
    ++events_;
    if (observer_ && *observer_) (*observer_)(events_ - 1, kind, before, observe());
    if (events_ > cfg_.max_events_factor * cfg_.blocks_per_round + 1000)
        throw NonTermination("event budget exceeded; simulator logic error");
}

// Baseline mode: the attacker behaves as one more honest pool, which also
// means its generation intervals fork like everyone else's. Every interval
// settles one height and ownership follows hash power, so the tree reduces
// to plain counting.
void BlockTreeSim::honest_step() {
    const double theta = cfg_.params.theta;
    const double rate = 1.0 / (1.0 + theta);
    sim_time_ += rng_.exponential() / rate;
    freq_.add(MarkovState::lead_state(0, 1));
    const bool fork = rng_.uniform() < theta;
    created_ += fork ? 2 : 1;
    ++consensus_total_;
    if (fork) ++stale_total_;
    if (rng_.uniform() < cfg_.params.alpha) ++consensus_mp_;
    ++events_;
}

void BlockTreeSim::check_tree() const {
    for (size_t i = 1; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.parent >= 0 && nodes_[size_t(n.parent)].height + 1 != n.height)
            throw UnmappableTree("height inconsistent with parent");
        if (n.owner == Owner::HP && !n.published)
            throw UnmappableTree("honest block not published at creation");
    }
    // private branch above the anchor is a path ending at mp_tip
    int32_t w = mp_tip_;
    int unpublished = 0;
    while (w != anchor_ && w >= 0) {
        if (!nodes_[size_t(w)].published) ++unpublished;
        w = nodes_[size_t(w)].parent;
    }
    if (unpublished != unpub_count())
        throw UnmappableTree("unpublished ledger out of sync with the tree");
    if (n_pub_ < 1 || n_pub_ > 3) throw UnmappableTree("leaf count out of range");
    for (int i = 0; i < n_pub_; ++i)
        if (nodes_[size_t(pub_leaves_[i])].height != pub_height_)
            throw UnmappableTree("public leaf not at the public top height");
}

int BlockTreeSim::live_nodes() const { return int(live_); }

RoundStats BlockTreeSim::finish() {
    RoundStats st;
    st.consensus_total = consensus_total_;
    st.consensus_mp = consensus_mp_;
    st.stale_total = stale_total_;
    st.discarded_tip = live_;
    st.blocks_created = created_;
    st.events = events_;
    st.sim_time = sim_time_;
    st.rr_m_hat = consensus_total_ > 0 ? double(consensus_mp_) / double(consensus_total_) : 0.0;
    st.tps_hat = sim_time_ > 0.0 ? double(consensus_total_) / sim_time_ : 0.0;
    st.freq = freq_;
    return st;
}

RoundStats run_round(const SimConfig& cfg, int round_index, const EventObserver* observer) {
    BlockTreeSim sim(cfg, round_index);
    sim.set_observer(observer);
    while (!sim.done()) sim.step();
    return sim.finish();
}

int thread_cap() {
    int cap = 1;
#ifdef _OPENMP
    cap = omp_get_max_threads();
#endif
    if (const char* env = std::getenv("SML_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) cap = std::min(cap, v);
    }
    return cap;
}

std::vector<RoundStats> run_rounds(const SimConfig& cfg, bool parallel) {
    std::vector<RoundStats> stats(size_t(cfg.rounds));
#ifdef _OPENMP
    if (parallel) {
        const int threads = thread_cap();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (int r = 0; r < cfg.rounds; ++r) stats[size_t(r)] = run_round(cfg, r);
        return stats;
    }
#else
    (void)parallel;
#endif
    for (int r = 0; r < cfg.rounds; ++r) stats[size_t(r)] = run_round(cfg, r);
    return stats;
}

double SimReport::freq_share(const MarkovState& s) const {
    const int64_t tot = freq.total();
    return tot > 0 ? double(freq.at(s)) / double(tot) : 0.0;
}

SimReport aggregate_rounds(const std::vector<RoundStats>& stats) {
    SimReport rep;
    rep.rounds = int(stats.size());
    if (stats.empty()) return rep;
    rep.blocks_per_round = stats.front().consensus_total;
    auto mean_std = [&](auto get, double& mean, double& stddev, double& ci) {
        double m = 0.0;
        for (const auto& s : stats) m += get(s);
        m /= double(stats.size());
        double v = 0.0;
        for (const auto& s : stats) {
            const double d = get(s) - m;
            v += d * d;
        }
        v = stats.size() > 1 ? v / double(stats.size() - 1) : 0.0;
        mean = m;
        stddev = std::sqrt(v);
        ci = 1.96 * stddev / std::sqrt(double(stats.size()));
    };
    mean_std([](const RoundStats& s) { return s.rr_m_hat; }, rep.rr_m_mean, rep.rr_m_stddev,
             rep.rr_m_ci95);
    mean_std([](const RoundStats& s) { return s.tps_hat; }, rep.tps_mean, rep.tps_stddev,
             rep.tps_ci95);
    for (const auto& s : stats)
        for (size_t i = 0; i < s.freq.counts.size(); ++i) rep.freq.counts[i] += s.freq.counts[i];
    return rep;
}

}  // namespace sml
