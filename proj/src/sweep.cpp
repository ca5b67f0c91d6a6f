#include "sml/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sml/metrics.hpp"
#include "sml/sim.hpp"

namespace sml {

namespace {

uint64_t mix_seed(uint64_t base, uint64_t salt) {
    uint64_t x = base ^ (salt * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr const char* kCsvHeader =
    "strategy,alpha,theta,rr_m_analytic,tps_analytic,tail_mass,rr_m_sim,rr_m_sim_ci95,"
    "tps_sim,rounds,blocks_per_round,seed,error";

}  // namespace

Engine engine_from_name(const std::string& name) {
    if (name == "analytic") return Engine::Analytic;
    if (name == "simulate") return Engine::Simulate;
    if (name == "both") return Engine::Both;
    throw ModelError("unknown engine: " + name);
}

const char* engine_name(Engine e) {
    switch (e) {
        case Engine::Analytic: return "analytic";
        case Engine::Simulate: return "simulate";
        case Engine::Both: return "both";
    }
    return "?";
}

namespace {

// Deep enough that the geometric lead tail alpha/(beta/(1+theta)) is
// resolved to ~1e-8; near the supercritical edge this grows well past the
// default depth.
int effective_delta_max(int base, double alpha, double theta) {
    const double ratio = alpha * (1.0 + theta) / (1.0 - alpha);
    if (ratio >= 1.0) return 1500;
    const int needed = int(std::ceil(std::log(1e-8) / std::log(ratio))) + 30;
    return std::min(1500, std::max(base, needed));
}

void run_point(const SweepSpec& spec, SweepRow& row, uint64_t point_seed) {
    const bool honest = row.strategy == "honest";
    const StrategyFlags flags = honest ? StrategyFlags{} : StrategyFlags::from_name(row.strategy);
    RawParams raw;
    raw.alpha = row.alpha;
    raw.theta = row.theta;
    raw.delta_max = spec.delta_max;
    const ModelParams params = validate_params(raw);

    if (spec.engine != Engine::Simulate) {
        RawParams deep = raw;
        deep.delta_max = effective_delta_max(spec.delta_max, row.alpha, row.theta);
        const MetricsReport rep =
            honest ? honest_report(params) : report(validate_params(deep), flags);
        row.rr_m_analytic = rep.revenue.rr_m;
        row.tps_analytic = rep.revenue.tps;
        row.tail_mass = rep.tail_mass;
    }
    if (spec.engine != Engine::Analytic) {
        SimConfig cfg;
        cfg.params = params;
        cfg.flags = flags;
        cfg.honest_mp = honest;
        cfg.blocks_per_round = spec.blocks;
        cfg.rounds = spec.rounds;
        cfg.base_seed = point_seed;
        const SimReport rep = aggregate_rounds(run_rounds(cfg, /*parallel=*/false));
        row.rr_m_sim = rep.rr_m_mean;
        row.rr_m_sim_ci95 = rep.rr_m_ci95;
        row.tps_sim = rep.tps_mean;
        row.rounds = spec.rounds;
        row.blocks_per_round = spec.blocks;
        row.seed = point_seed;
    }
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec& spec, bool parallel) {
    if (spec.strategies.empty() || spec.alphas.empty() || spec.thetas.empty())
        throw ModelError("sweep spec must list strategies, alphas and thetas");
    std::vector<SweepRow> rows;
    for (const auto& s : spec.strategies)
        for (double theta : spec.thetas)
            for (double alpha : spec.alphas) {
                SweepRow r;
                r.strategy = s;
                r.alpha = alpha;
                r.theta = theta;
                rows.push_back(std::move(r));
            }

    const int n = int(rows.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(thread_cap()) if (parallel)
#endif
    for (int i = 0; i < n; ++i) {
        try {
            run_point(spec, rows[size_t(i)], mix_seed(spec.seed, uint64_t(i)));
        } catch (const std::exception& e) {
            std::string msg = e.what();
            for (char& c : msg)
                if (c == ',' || c == '\n' || c == '\r') c = ';';
            rows[size_t(i)].error = msg;
        }
    }
    (void)parallel;
    return rows;
}

ValidationReport cross_validate(const std::vector<SweepRow>& rows, double tolerance) {
    ValidationReport rep;
    double rr_sum = 0.0, tps_sum = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const SweepRow& r = rows[i];
        if (!r.error.empty()) {
            rep.violations.push_back({i, r.strategy, r.alpha, r.theta, 0.0, 0.0});
            continue;
        }
        if (!r.rr_m_analytic || !r.rr_m_sim || !r.tps_analytic || !r.tps_sim)
            throw MissingEngineData("row " + std::to_string(i) + " lacks one engine's results");
        const double rr_gap = std::abs(*r.rr_m_analytic - *r.rr_m_sim);
        const double tps_gap = std::abs(*r.tps_analytic - *r.tps_sim);
        ++rep.compared;
        rr_sum += rr_gap;
        tps_sum += tps_gap;
        rep.max_rr_gap = std::max(rep.max_rr_gap, rr_gap);
        rep.max_tps_gap = std::max(rep.max_tps_gap, tps_gap);
        if (rr_gap > tolerance || tps_gap > tolerance)
            rep.violations.push_back({i, r.strategy, r.alpha, r.theta, rr_gap, tps_gap});
    }
    if (rep.compared > 0) {
        rep.mean_rr_gap = rr_sum / rep.compared;
        rep.mean_tps_gap = tps_sum / rep.compared;
    }
    return rep;
}

std::vector<ThresholdRow> find_threshold(const std::vector<SweepRow>& rows) {
    std::map<std::pair<std::string, double>, std::vector<const SweepRow*>> groups;
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        groups[{r.strategy, r.theta}].push_back(&r);
    }
    std::vector<ThresholdRow> out;
    for (auto& [key, group] : groups) {
        std::sort(group.begin(), group.end(),
                  [](const SweepRow* a, const SweepRow* b) { return a->alpha < b->alpha; });
        ThresholdRow t;
        t.strategy = key.first;
        t.theta = key.second;
        for (const SweepRow* r : group) {
            const std::optional<double>& rr = r->rr_m_analytic ? r->rr_m_analytic : r->rr_m_sim;
            if (rr && *rr > r->alpha) {
                t.alpha_star = r->alpha;
                break;
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

std::string opt_str(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

}  // namespace

void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
    if (!out) throw ModelError("cannot open " + path + " for writing");
    out << kCsvHeader << "\n";
    for (const auto& r : rows) {
        out << r.strategy << ',' << fmt_double(r.alpha) << ',' << fmt_double(r.theta) << ','
            << opt_str(r.rr_m_analytic) << ',' << opt_str(r.tps_analytic) << ','
            << opt_str(r.tail_mass) << ',' << opt_str(r.rr_m_sim) << ','
            << opt_str(r.rr_m_sim_ci95) << ',' << opt_str(r.tps_sim) << ','
            << (r.rounds ? std::to_string(*r.rounds) : "") << ','
            << (r.blocks_per_round ? std::to_string(*r.blocks_per_round) : "") << ','
            << (r.seed ? std::to_string(*r.seed) : "") << ',' << r.error << "\n";
    }
}

std::vector<SweepRow> parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ModelError("empty csv: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ModelError("unexpected csv header in " + path);
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        f.push_back(cur);
        if (f.size() != 13) throw ModelError("bad csv row: " + line);
        SweepRow r;
        r.strategy = f[0];
        r.alpha = std::stod(f[1]);
        r.theta = std::stod(f[2]);
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        r.rr_m_analytic = opt(f[3]);
        r.tps_analytic = opt(f[4]);
        r.tail_mass = opt(f[5]);
        r.rr_m_sim = opt(f[6]);
        r.rr_m_sim_ci95 = opt(f[7]);
        r.tps_sim = opt(f[8]);
        if (!f[9].empty()) r.rounds = std::stoi(f[9]);
        if (!f[10].empty()) r.blocks_per_round = std::stoll(f[10]);
        if (!f[11].empty()) r.seed = std::stoull(f[11]);
        r.error = f[12];
        rows.push_back(std::move(r));
    }
    return rows;
}

Figure figure_from_name(const std::string& name) {
    if (name == "fig3") return Figure::Fig3;
    if (name == "fig4") return Figure::Fig4;
    if (name == "fig5") return Figure::Fig5;
    if (name == "fig6") return Figure::Fig6;
    throw ModelError("unknown figure: " + name);
}

namespace {

// Index rows by (strategy, theta, alpha); a missing cell is a hole in the slice.
struct Slice {
    std::vector<double> alphas;
    std::vector<double> thetas;
    std::vector<std::string> strategies;
    std::map<std::tuple<std::string, double, double>, const SweepRow*> cells;

    const SweepRow& cell(const std::string& s, double theta, double alpha) const {
        auto it = cells.find({s, theta, alpha});
        if (it == cells.end())
            throw IncompleteSlice("missing grid point " + s + " theta=" + fmt_double(theta) +
                                  " alpha=" + fmt_double(alpha));
        return *it->second;
    }
};

Slice make_slice(const std::vector<SweepRow>& rows) {
    Slice sl;
    std::set<double> alphas, thetas;
    std::set<std::string> strategies;
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        alphas.insert(r.alpha);
        thetas.insert(r.theta);
        strategies.insert(r.strategy);
        sl.cells[{r.strategy, r.theta, r.alpha}] = &r;
    }
    if (sl.cells.empty()) throw IncompleteSlice("no usable rows");
    sl.alphas.assign(alphas.begin(), alphas.end());
    sl.thetas.assign(thetas.begin(), thetas.end());
    sl.strategies.assign(strategies.begin(), strategies.end());
    return sl;
}

double rr_of(const SweepRow& r) {
    if (r.rr_m_analytic) return *r.rr_m_analytic;
    if (r.rr_m_sim) return *r.rr_m_sim;
    throw IncompleteSlice("row has no relative-revenue value");
}

double tps_of(const SweepRow& r) {
    if (r.tps_analytic) return *r.tps_analytic;
    if (r.tps_sim) return *r.tps_sim;
    throw IncompleteSlice("row has no tps value");
}

double single_theta(const Slice& sl) {
    if (sl.thetas.size() == 1) return sl.thetas.front();
    for (double t : sl.thetas)
        if (std::abs(t - 0.01) < 1e-12) return t;
    throw IncompleteSlice("figure needs a single theta slice (or one at 0.01)");
}

}  // namespace

void emit_plot_data(const std::vector<SweepRow>& rows, Figure figure, const std::string& path) {
    const Slice sl = make_slice(rows);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError("cannot open " + path + " for writing");

    switch (figure) {
        case Figure::Fig3: {
            const double theta = single_theta(sl);
            out << "alpha";
            for (const auto& s : sl.strategies) out << ',' << s << "_rr_analytic," << s << "_rr_sim";
            out << "\n";
            for (double a : sl.alphas) {
                out << fmt_double(a);
                for (const auto& s : sl.strategies) {
                    const SweepRow& r = sl.cell(s, theta, a);
                    if (!r.rr_m_analytic || !r.rr_m_sim)
                        throw IncompleteSlice("fig3 needs both engines at every point");
                    out << ',' << fmt_double(*r.rr_m_analytic) << ',' << fmt_double(*r.rr_m_sim);
                }
                out << "\n";
            }
            break;
        }
        case Figure::Fig4: {
            const double theta = single_theta(sl);
            out << "alpha";
            for (const auto& s : sl.strategies) out << ',' << s;
            out << "\n";
            for (double a : sl.alphas) {
                out << fmt_double(a);
                for (const auto& s : sl.strategies) out << ',' << fmt_double(rr_of(sl.cell(s, theta, a)));
                out << "\n";
            }
            break;
        }
        case Figure::Fig5:
        case Figure::Fig6: {
            out << "alpha";
            for (double t : sl.thetas) out << ",theta_" << fmt_double(t);
            out << "\n";
            for (double a : sl.alphas) {
                out << fmt_double(a);
                for (double t : sl.thetas) {
                    const SweepRow& r = sl.cell("LFT", t, a);
                    out << ',' << fmt_double(figure == Figure::Fig5 ? rr_of(r) : tps_of(r));
                }
                out << "\n";
            }
            break;
        }
    }
}

}  // namespace sml
