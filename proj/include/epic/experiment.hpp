#pragma once
// Seeded experiment runner: method x dataset grid, per-run metrics, and
// aggregate tables with canonical JSON/CSV emission.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epic/data.hpp"
#include "epic/metrics.hpp"
#include "epic/predictive.hpp"
#include "epic/scores.hpp"

namespace epic {

struct ExperimentConfig {
    // dataset
    std::string dataset = "bimodal";  // bimodal | blobs | csv
    std::size_t n = 2000;
    int k_classes = 3;
    double spread = 1.0;
    VarianceConvention convention = VarianceConvention::sd;
    std::string csv_path;
    std::string target_column = "y";
    bool label_mode = false;
    std::string predictions_csv;  // optional row-aligned external g/q_lo/q_hi

    std::vector<std::string> methods{"reg_split", "epic_knn"};
    double alpha = 0.1;
    int n_runs = 50;
    std::uint64_t seed = 1;
    std::array<double, 3> ratios{0.4, 0.4, 0.2};

    std::string base_predictor = "knn";    // knn | mlp | external
    std::string epic_base_score = "residual";  // residual | cqr
    int knn_k = 10;
    std::size_t mondrian_bins = 10;

    PredictiveConfig predictive;
    int threads = 0;  // 0: EPIC_THREADS env or hardware

    std::string out_path;
    std::string format = "json";  // json | csv
};

extern const std::vector<std::string> kKnownMethods;

struct MetricsReport {
    std::string method;
    std::string dataset;
    int run = 0;
    std::uint64_t seed = 0;
    double alpha = 0.1;
    std::size_t n_test = 0;
    std::size_t n_cal2 = 0;

    double amc = 0.0;
    std::optional<double> aisl;
    std::optional<double> mean_il;
    std::optional<double> pearson_rho;
    std::optional<double> ssc;
    std::size_t n_degenerate = 0;

    bool failed = false;
    std::string error;
    std::uint64_t config_hash = 0;
};

struct AggregateCell {
    double mean = 0.0;
    double two_sd = 0.0;
    bool bold = false;
    bool single_run = false;
};

struct AggregateReport {
    std::string dataset;
    double alpha = 0.1;
    int n_runs = 0;
    std::vector<std::string> methods;
    std::vector<std::string> metrics;
    // metric -> method -> cell
    std::map<std::string, std::map<std::string, AggregateCell>> cells;
    std::map<std::string, int> failed_runs;
    std::uint64_t config_hash = 0;
};

std::uint64_t config_hash(const ExperimentConfig& config);

ExperimentConfig config_from_json_file(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

std::vector<MetricsReport> run_experiment(const ExperimentConfig& config);

AggregateReport aggregate(std::span<const MetricsReport> reports);

std::string reports_to_json(std::span<const MetricsReport> reports);
std::vector<MetricsReport> reports_from_json_text(const std::string& text);
std::string aggregate_to_json(const AggregateReport& report);
std::string aggregate_to_csv(const AggregateReport& report);
std::string reports_to_csv(std::span<const MetricsReport> reports);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

struct BandDumpRow {
    std::vector<double> x;
    double lo = 0.0, hi = 0.0, y = 0.0;
    bool covered = false;
};

// per-point band dump of one method on one seeded run (plot-ready)
std::vector<BandDumpRow> dump_bands(const ExperimentConfig& config,
                                    const std::string& method, std::uint64_t seed);
std::string bands_to_csv(std::span<const BandDumpRow> rows, std::size_t p);

int resolve_thread_count(int requested, int n_runs);

} // namespace epic
