// Command-line front end. Subcommands: analytic, simulate, sweep,
// validate, threshold. Exit status: 0 success, 1 usage error,
// 2 validation violation.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "sml/chain.hpp"
#include "sml/metrics.hpp"
#include "sml/sim.hpp"
#include "sml/sweep.hpp"

namespace {

using namespace sml;

std::map<std::string, std::string> read_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const char* ws = " \t";
            s.erase(0, s.find_first_not_of(ws));
            const size_t last = s.find_last_not_of(ws);
            s.erase(last == std::string::npos ? 0 : last + 1);
            return s;
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::string> parse_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

// Config-file values fill in any option the command line left untouched.
struct ConfigBacked {
    CLI::App* cmd;
    std::string config_path;

    void add(CLI::App* c) { cmd = c; }
    template <typename T>
    void backfill(CLI::Option* opt, const std::map<std::string, std::string>& kv,
                  const std::string& key, T& target) {
        auto it = kv.find(key);
        if (it == kv.end() || opt->count() > 0) return;
        std::stringstream ss(it->second);
        ss >> target;
    }
};

ModelParams params_for(double alpha, double theta, int delta_max) {
    RawParams raw;
    raw.alpha = alpha;
    raw.theta = theta;
    raw.delta_max = delta_max;
    return validate_params(raw);
}

int cmd_analytic(const std::string& strategy, double alpha, double theta, int delta_max,
                 const std::string& out_path, const std::string& dump_path) {
    const ModelParams params = params_for(alpha, theta, delta_max);
    MetricsReport rep;
    if (strategy == "honest") {
        rep = honest_report(params);
    } else {
        const StrategyFlags flags = StrategyFlags::from_name(strategy);
        rep = report(params, flags);
        if (!dump_path.empty()) {
            const StateSpace space = enumerate_states(flags, delta_max);
            const GeneratorMatrix gen = build_generator(params, flags, space);
            std::ofstream dump(dump_path, std::ios::binary);
            if (!dump) throw ModelError("cannot open " + dump_path);
            dump_generator(dump, space, gen);
        }
    }
    std::printf("strategy=%s alpha=%g theta=%g\n", strategy.c_str(), alpha, theta);
    std::printf("rr_m=%.12g\nrr_h=%.12g\ne_m=%.12g\ne_h=%.12g\ntps=%.12g\n", rep.revenue.rr_m,
                rep.revenue.rr_h, rep.revenue.e_m, rep.revenue.e_h, rep.revenue.tps);
    std::printf("tail_mass=%.3g residual=%.3g states=%d\n", rep.tail_mass, rep.residual,
                rep.state_count);
    if (!out_path.empty()) {
        SweepRow row;
        row.strategy = strategy;
        row.alpha = alpha;
        row.theta = theta;
        row.rr_m_analytic = rep.revenue.rr_m;
        row.tps_analytic = rep.revenue.tps;
        row.tail_mass = rep.tail_mass;
        emit_csv({row}, out_path);
    }
    return 0;
}

int cmd_simulate(const std::string& strategy, double alpha, double theta, int64_t blocks,
                 int rounds, uint64_t seed, const std::string& out_path,
                 const std::string& trace_path, bool serial) {
    SimConfig cfg;
    cfg.params = params_for(alpha, theta, 30);
    cfg.honest_mp = strategy == "honest";
    if (!cfg.honest_mp) cfg.flags = StrategyFlags::from_name(strategy);
    cfg.blocks_per_round = blocks;
    cfg.rounds = rounds;
    cfg.base_seed = seed;

    if (!trace_path.empty()) {
        std::ofstream trace(trace_path, std::ios::binary);
        if (!trace) throw ModelError("cannot open " + trace_path);
        EventObserver obs = [&](int64_t i, EventKind k, const MarkovState& b,
                                const MarkovState& a) {
            trace << i << "  " << event_name(k) << "  " << b.to_string() << "  " << a.to_string()
                  << "\n";
        };
        run_round(cfg, 0, &obs);  // trace covers round 0 only
    }

    const SimReport rep = aggregate_rounds(run_rounds(cfg, !serial));
    std::printf("strategy=%s alpha=%g theta=%g rounds=%d blocks=%lld seed=%llu\n",
                strategy.c_str(), alpha, theta, rounds, (long long)blocks,
                (unsigned long long)seed);
    std::printf("rr_m=%.9g +- %.3g (95%% CI)\ntps=%.9g +- %.3g (95%% CI)\n", rep.rr_m_mean,
                rep.rr_m_ci95, rep.tps_mean, rep.tps_ci95);
    if (!out_path.empty()) {
        SweepRow row;
        row.strategy = strategy;
        row.alpha = alpha;
        row.theta = theta;
        row.rr_m_sim = rep.rr_m_mean;
        row.rr_m_sim_ci95 = rep.rr_m_ci95;
        row.tps_sim = rep.tps_mean;
        row.rounds = rounds;
        row.blocks_per_round = blocks;
        row.seed = seed;
        emit_csv({row}, out_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sml: stubborn-mining severity analytics for fork-prone PoW chains"};
    app.require_subcommand(1);

    const std::vector<std::string> strategy_choices = {"S",  "L",  "F",  "T1",    "LF",
                                                       "LT", "FT", "LFT", "honest"};
    std::string config_path;

    // shared option state
    std::string strategy = "S";
    double alpha = 0.3, theta = 0.01, tolerance = 0.005;
    int delta_max = 30, rounds = 30;
    int64_t blocks = 1'000'000;
    uint64_t seed = 42;
    std::string out_path, dump_path, trace_path, in_path, figure_name, engine = "both";
    std::string strategies_csv, alphas_csv, thetas_csv;
    bool serial = false, check_monotone = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", config_path, "key=value config file (flags win)");
    };

    CLI::App* a = app.add_subcommand("analytic", "closed-chain metrics for one point");
    a->add_option("--strategy", strategy)->check(CLI::IsMember(strategy_choices));
    a->add_option("--alpha", alpha);
    a->add_option("--theta", theta);
    a->add_option("--delta-max", delta_max);
    a->add_option("--out", out_path);
    a->add_option("--dump-generator", dump_path, "write the generator edge list");
    add_common(a);

    CLI::App* s = app.add_subcommand("simulate", "block-tree Monte Carlo for one point");
    s->add_option("--strategy", strategy)->check(CLI::IsMember(strategy_choices));
    s->add_option("--alpha", alpha);
    s->add_option("--theta", theta);
    s->add_option("--blocks", blocks);
    s->add_option("--rounds", rounds);
    s->add_option("--seed", seed);
    s->add_option("--out", out_path);
    s->add_option("--trace", trace_path, "per-event trace of round 0");
    s->add_flag("--serial", serial, "run rounds on one thread");
    add_common(s);

    CLI::App* w = app.add_subcommand("sweep", "grid sweep; CSV or plot data");
    w->add_option("--strategies", strategies_csv, "comma list, default all 8");
    w->add_option("--alphas", alphas_csv, "comma list");
    w->add_option("--thetas", thetas_csv, "comma list");
    w->add_option("--engine", engine)->check(CLI::IsMember({"analytic", "simulate", "both"}));
    w->add_option("--blocks", blocks);
    w->add_option("--rounds", rounds);
    w->add_option("--seed", seed);
    w->add_option("--delta-max", delta_max);
    w->add_option("--out", out_path)->required();
    w->add_option("--figure", figure_name, "emit plot data for fig3|fig4|fig5|fig6 instead of rows")
        ->check(CLI::IsMember({"fig3", "fig4", "fig5", "fig6"}));
    w->add_flag("--serial", serial);
    add_common(w);

    CLI::App* v = app.add_subcommand("validate", "cross-validate the two engines");
    v->add_option("--in", in_path, "validate an existing rows CSV instead of sweeping");
    v->add_option("--strategies", strategies_csv);
    v->add_option("--alphas", alphas_csv);
    v->add_option("--thetas", thetas_csv);
    v->add_option("--blocks", blocks);
    v->add_option("--rounds", rounds);
    v->add_option("--seed", seed);
    v->add_option("--delta-max", delta_max);
    v->add_option("--tolerance", tolerance);
    v->add_option("--out", out_path, "also write the rows CSV");
    v->add_flag("--serial", serial);
    add_common(v);

    CLI::App* t = app.add_subcommand("threshold", "smallest alpha with rr_m > alpha");
    t->add_option("--in", in_path, "rows CSV; otherwise an analytic sweep is run");
    t->add_option("--strategies", strategies_csv);
    t->add_option("--alphas", alphas_csv);
    t->add_option("--thetas", thetas_csv);
    t->add_option("--delta-max", delta_max);
    t->add_option("--seed", seed);
    t->add_flag("--check-monotone", check_monotone,
                "exit 2 unless the LFT threshold is nonincreasing in theta");
    add_common(t);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!config_path.empty()) {
            const auto kv = read_config(config_path);
            auto fill_str = [&](CLI::App* c, const char* opt, const char* key, std::string& dst) {
                auto it = kv.find(key);
                if (it != kv.end() && c->count(opt) == 0) dst = it->second;
            };
            auto fill_num = [&](CLI::App* c, const char* opt, const char* key, auto& dst) {
                auto it = kv.find(key);
                if (it != kv.end() && c->count(opt) == 0) {
                    std::stringstream ss(it->second);
                    ss >> dst;
                }
            };
            for (CLI::App* c : {a, s, w, v, t}) {
                if (!c->parsed()) continue;
                if (c->get_option_no_throw("--strategy"))
                    fill_str(c, "--strategy", "strategy", strategy);
                if (c->get_option_no_throw("--strategies"))
                    fill_str(c, "--strategies", "strategies", strategies_csv);
                if (c->get_option_no_throw("--alpha")) fill_num(c, "--alpha", "alpha", alpha);
                if (c->get_option_no_throw("--theta")) fill_num(c, "--theta", "theta", theta);
                if (c->get_option_no_throw("--alphas")) fill_str(c, "--alphas", "alphas", alphas_csv);
                if (c->get_option_no_throw("--thetas")) fill_str(c, "--thetas", "thetas", thetas_csv);
                if (c->get_option_no_throw("--engine")) fill_str(c, "--engine", "engine", engine);
                if (c->get_option_no_throw("--blocks")) fill_num(c, "--blocks", "blocks", blocks);
                if (c->get_option_no_throw("--rounds")) fill_num(c, "--rounds", "rounds", rounds);
                if (c->get_option_no_throw("--seed")) fill_num(c, "--seed", "seed", seed);
                if (c->get_option_no_throw("--delta-max"))
                    fill_num(c, "--delta-max", "delta_max", delta_max);
                if (c->get_option_no_throw("--tolerance"))
                    fill_num(c, "--tolerance", "tolerance", tolerance);
                if (c->get_option_no_throw("--out") && out_path.empty())
                    fill_str(c, "--out", "out", out_path);
            }
        }

        SweepSpec spec;
        if (!strategies_csv.empty()) spec.strategies = parse_names(strategies_csv);
        if (!alphas_csv.empty()) spec.alphas = parse_list(alphas_csv);
        if (!thetas_csv.empty()) spec.thetas = parse_list(thetas_csv);
        spec.delta_max = delta_max;
        spec.rounds = rounds;
        spec.blocks = blocks;
        spec.seed = seed;

        if (a->parsed())
            return cmd_analytic(strategy, alpha, theta, delta_max, out_path, dump_path);
        if (s->parsed())
            return cmd_simulate(strategy, alpha, theta, blocks, rounds, seed, out_path, trace_path,
                                serial);
        if (w->parsed()) {
            spec.engine = engine_from_name(engine);
            const auto rows = run_sweep(spec, !serial);
            if (figure_name.empty()) {
                emit_csv(rows, out_path);
            } else {
                emit_plot_data(rows, figure_from_name(figure_name), out_path);
            }
            std::printf("wrote %zu %s to %s\n", rows.size(),
                        figure_name.empty() ? "rows" : "plot rows", out_path.c_str());
            return 0;
        }
        if (v->parsed()) {
            std::vector<SweepRow> rows;
            if (!in_path.empty()) {
                rows = parse_csv(in_path);
            } else {
                spec.engine = Engine::Both;
                rows = run_sweep(spec, !serial);
            }
            if (!out_path.empty()) emit_csv(rows, out_path);
            const ValidationReport rep = cross_validate(rows, tolerance);
            std::printf("compared=%d max_rr_gap=%.6g mean_rr_gap=%.6g max_tps_gap=%.6g "
                        "mean_tps_gap=%.6g\n",
                        rep.compared, rep.max_rr_gap, rep.mean_rr_gap, rep.max_tps_gap,
                        rep.mean_tps_gap);
            for (const auto& viol : rep.violations)
                std::printf("violation: row=%zu %s alpha=%g theta=%g rr_gap=%.6g tps_gap=%.6g\n",
                            viol.row_index, viol.strategy.c_str(), viol.alpha, viol.theta,
                            viol.rr_gap, viol.tps_gap);
            return rep.ok() ? 0 : 2;
        }
        if (t->parsed()) {
            std::vector<SweepRow> rows;
            if (!in_path.empty()) {
                rows = parse_csv(in_path);
            } else {
                spec.engine = Engine::Analytic;
                rows = run_sweep(spec, true);
            }
            const auto table = find_threshold(rows);
            for (const auto& row : table) {
                if (row.alpha_star)
                    std::printf("%-6s theta=%-6g threshold=%g\n", row.strategy.c_str(), row.theta,
                                *row.alpha_star);
                else
                    std::printf("%-6s theta=%-6g threshold=none\n", row.strategy.c_str(),
                                row.theta);
            }
            if (check_monotone) {
                double prev = 1.0;
                bool first = true;
                bool ok = true;
                for (const auto& row : table) {
                    if (row.strategy != "LFT") continue;
                    const double cur = row.alpha_star ? *row.alpha_star : 1.0;
                    if (!first && cur > prev + 1e-12) ok = false;
                    prev = cur;
                    first = false;
                }
                if (!ok) {
                    std::fprintf(stderr, "LFT threshold is not nonincreasing in theta\n");
                    return 2;
                }
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
