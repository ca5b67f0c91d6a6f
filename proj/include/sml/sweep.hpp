// Experiment harness: (strategy x alpha x theta) sweeps over one or both
// engines, cross-validation, threshold scans, CSV and plot-data emission.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sml/model.hpp"

namespace sml {

struct MissingEngineData : ModelError {
    using ModelError::ModelError;
};
struct IncompleteSlice : ModelError {
    using ModelError::ModelError;
};

enum class Engine { Analytic, Simulate, Both };

Engine engine_from_name(const std::string& name);
const char* engine_name(Engine e);

struct SweepSpec {
    std::vector<std::string> strategies = {"S", "L", "F", "T1", "LF", "LT", "FT", "LFT"};
    std::vector<double> alphas = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
    std::vector<double> thetas = {0.01, 0.05, 0.10, 0.20};
    Engine engine = Engine::Both;
    int delta_max = 30;
    int rounds = 30;
    int64_t blocks = 1'000'000;
    uint64_t seed = 42;
};

struct SweepRow {
    std::string strategy;
    double alpha = 0.0;
    double theta = 0.0;
    std::optional<double> rr_m_analytic;
    std::optional<double> tps_analytic;
    std::optional<double> tail_mass;
    std::optional<double> rr_m_sim;
    std::optional<double> rr_m_sim_ci95;
    std::optional<double> tps_sim;
    std::optional<int> rounds;
    std::optional<int64_t> blocks_per_round;
    std::optional<uint64_t> seed;
    std::string error;  // row-level failure; other fields empty when set

    bool operator==(const SweepRow&) const = default;
};

// One row per grid point, ordered (strategy, theta, ascending alpha).
// Failures are recorded per row, never abort the sweep. Deterministic for
// a fixed spec; grid points run on an OpenMP pool when parallel.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, bool parallel = true);

struct ValidationReport {
    struct Violation {
        size_t row_index;
        std::string strategy;
        double alpha, theta;
        double rr_gap, tps_gap;
    };
    std::vector<Violation> violations;
    int compared = 0;
    double max_rr_gap = 0.0, mean_rr_gap = 0.0;
    double max_tps_gap = 0.0, mean_tps_gap = 0.0;
    bool ok() const { return violations.empty(); }
};

// Per-row |rr_m_analytic - rr_m_sim| and |tps_analytic - tps_sim| against
// the tolerance. Rows with a recorded error are counted as violations;
// rows lacking an engine side throw MissingEngineData.
ValidationReport cross_validate(const std::vector<SweepRow>& rows, double tolerance);

struct ThresholdRow {
    std::string strategy;
    double theta = 0.0;
    std::optional<double> alpha_star;  // smallest grid alpha with rr_m > alpha
};

std::vector<ThresholdRow> find_threshold(const std::vector<SweepRow>& rows);

void emit_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::vector<SweepRow> parse_csv(const std::string& path);

enum class Figure { Fig3, Fig4, Fig5, Fig6 };
Figure figure_from_name(const std::string& name);

// Plot-ready columnar data: first column alpha, one column per series.
//   fig3: analytic vs simulated rr_m per strategy (single theta)
//   fig4: rr_m of all 8 strategies (single theta)
//   fig5: rr_m of LFT, one series per theta
//   fig6: tps of LFT, one series per theta
void emit_plot_data(const std::vector<SweepRow>& rows, Figure figure, const std::string& path);

}  // namespace sml
