// Throughput benchmark: the OpenMP round pool against the serial
// reference path, plus the raw event rate of a single round.
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "sml/sim.hpp"

using namespace sml;
using clock_type = std::chrono::steady_clock;

static double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

int main(int argc, char** argv) {
    SimConfig cfg;
    RawParams raw;
    raw.alpha = 0.3;
    raw.theta = 0.1;
    cfg.params = validate_params(raw);
    cfg.flags = StrategyFlags::from_name("LFT");
    cfg.blocks_per_round = argc > 1 ? std::atoll(argv[1]) : 500'000;
    cfg.rounds = argc > 2 ? std::atoi(argv[2]) : 8;
    cfg.base_seed = 42;

    std::printf("config: LFT alpha=0.3 theta=0.1, %lld blocks x %d rounds, %d worker(s)\n",
                (long long)cfg.blocks_per_round, cfg.rounds, thread_cap());

    auto t0 = clock_type::now();
    auto serial = run_rounds(cfg, /*parallel=*/false);
    const double t_serial = seconds_since(t0);

    t0 = clock_type::now();
    auto parallel = run_rounds(cfg, /*parallel=*/true);
    const double t_parallel = seconds_since(t0);

    int64_t events = 0;
    for (const auto& r : serial) events += r.events;
    bool identical = serial.size() == parallel.size();
    for (size_t i = 0; identical && i < serial.size(); ++i)
        identical = serial[i].rr_m_hat == parallel[i].rr_m_hat &&
                    serial[i].consensus_total == parallel[i].consensus_total;

    std::printf("serial:   %.3fs  (%.1f M events/s)\n", t_serial, double(events) / t_serial / 1e6);
    std::printf("parallel: %.3fs  (%.1f M events/s, speedup %.2fx)\n", t_parallel,
                double(events) / t_parallel / 1e6, t_serial / t_parallel);
    std::printf("results identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
