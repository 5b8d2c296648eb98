#pragma once
// Synthetic generators, CSV ingestion, and the calibration splitting rules.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epic/errors.hpp"

namespace epic {

struct Dataset {
    std::vector<double> features;  // row-major n x p
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> target;    // regression targets (empty in label mode)
    std::vector<int> labels;       // class labels 0..k-1 (empty in regression mode)
    int n_classes = 0;
    std::vector<std::string> columns;
    std::string provenance;

    bool classification() const { return !labels.empty(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features.data() + i * p, p);
    }
};

// Per-feature affine transform, fit on training rows only.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> scale;  // standard deviation, floored at 1e-12

    static FeatureScaler fit(const Dataset& ds, std::span<const std::size_t> rows);
    static FeatureScaler fit_raw(std::span<const double> x_rows, std::size_t n,
                                 std::size_t p);
    void apply(std::span<const double> x, std::span<double> out) const;
    std::vector<double> transform_rows(const Dataset& ds,
                                       std::span<const std::size_t> rows) const;
    std::vector<double> transform_raw(std::span<const double> x_rows, std::size_t n,
                                      std::size_t p) const;
};

// Affine score normalizer s -> (s - loc)/scale.
struct AffineNormalizer {
    double loc = 0.0;
    double scale = 1.0;

    double forward(double s) const { return (s - loc) / scale; }
    double inverse(double z) const { return loc + scale * z; }

    static AffineNormalizer standardize(std::span<const double> values);
    static AffineNormalizer min_max_center(std::span<const double> values);
};

struct DataSplit {
    std::vector<std::size_t> train, cal, test;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train, cal1, cal2, test;
    std::uint64_t seed = 0;
};

enum class VarianceConvention { sd, var };

// Two dense outer bands around a sparse noisy middle; 85% of rows land in
// the outer bands by construction.
Dataset generate_bimodal_dgp(std::size_t n, std::uint64_t seed,
                             VarianceConvention conv = VarianceConvention::sd);

// Conditional noise scale of the bimodal generator at feature value x.
double bimodal_noise_sd(double x, VarianceConvention conv = VarianceConvention::sd);

struct BlobsModel {
    std::vector<std::array<double, 2>> centers;
    double spread = 1.0;
    std::vector<double> priors;

    std::vector<double> posterior(std::span<const double> x) const;
};

std::pair<Dataset, BlobsModel> generate_blobs_classification(std::size_t n, int k_classes,
                                                             double spread,
                                                             std::uint64_t seed);

// Uniform random partition; train/cal get the floor of their share,
// test gets the remainder.
DataSplit split_dataset(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

// Default rule: cal2 = round(0.3 |cal|) when |cal| <= 3000, else capped at
// 1000 points.
struct CalSplitRule {
    double cal2_fraction = 0.3;
    std::size_t cal2_cap = 1000;
    std::size_t cap_threshold = 3000;  // the cap kicks in above this size
};

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_calibration(std::span<const std::size_t> cal_indices, std::uint64_t seed,
                  const CalSplitRule& rule = {});

SplitIndices make_split_indices(std::size_t n, std::array<double, 3> ratios,
                                std::uint64_t seed);

Dataset load_csv(const std::string& path, const std::string& target_column,
                 bool label_mode = false);

struct ExternalPredictions {
    std::optional<std::vector<double>> g, q_lo, q_hi;
    std::size_t rows = 0;
};

// Predictions CSV: header with any subset of {g, q_lo, q_hi}, row-aligned
// with the dataset it annotates.
ExternalPredictions load_predictions(const std::string& path, std::size_t expect_rows);

void write_csv(const Dataset& ds, const std::string& path);

} // namespace epic
