#pragma once
// End-to-end pipeline for the epistemic score transform: fit a predictive CDF
// on one calibration half, calibrate the transformed scores on the other, and
// build regions for regression, quantile regression, and classification.

#include <memory>
#include <span>
#include <vector>

#include "epic/core.hpp"
#include "epic/data.hpp"
#include "epic/predictive.hpp"
#include "epic/scores.hpp"

namespace epic {

struct PredictionBand {
    double lo = 0.0;
    double hi = 0.0;
    bool degenerate = false;  // threshold sentinel fired: band is the whole target range

    double width() const { return hi - lo; }
    bool empty() const { return !degenerate && lo > hi; }
    bool covers(double y) const { return degenerate || (y >= lo && y <= hi); }
};

struct PredictionSet {
    std::vector<int> labels;       // members, ascending
    std::vector<double> s_prime;   // transformed score per label, full alphabet

    bool contains(int y) const;
    std::size_t size() const { return labels.size(); }
};

struct EpicPipeline {
    ScoreFunction score;
    std::shared_ptr<const PredictiveModel> predictive;
    CalibrationResult calibration;
    std::size_t n_cal1 = 0;
    std::size_t n_cal2 = 0;
};

double epic_score(const EpicPipeline& pipeline, std::span<const double> x,
                  double base_score_value);
double epic_score(const EpicPipeline& pipeline, const Dataset& ds, std::size_t row);
// transform of the base score evaluated at a candidate label value
double epic_score_label(const EpicPipeline& pipeline, std::span<const double> x, double y);

EpicPipeline epic_calibrate(ScoreFunction score, PredictiveKind kind, const Dataset& ds,
                            std::span<const std::size_t> cal_indices, NominalLevel alpha,
                            const PredictiveConfig& config, std::uint64_t seed,
                            const CalSplitRule& split_rule = {});

// Same pipeline assembly with an externally fitted (or oracle) predictive and
// an explicit cal1/cal2 split.
EpicPipeline epic_calibrate_with_predictive(
    ScoreFunction score, std::shared_ptr<const PredictiveModel> predictive,
    const Dataset& ds, std::span<const std::size_t> cal2_indices, NominalLevel alpha,
    std::size_t n_cal1);

PredictionBand epic_interval_regression(const EpicPipeline& pipeline, const Dataset& ds,
                                        std::size_t row);
PredictionBand epic_interval_regression_at(const EpicPipeline& pipeline,
                                           std::span<const double> x);

// g +- (mu + sigma sqrt(2) erfinv(2t-1)), the Gaussian-predictive band in
// closed form; cross-checked against the bisection route in the tests.
PredictionBand epic_interval_normal_closed_form(double g_val, double mu, double sigma,
                                                double t);

PredictionBand epic_interval_cqr(const EpicPipeline& pipeline, const Dataset& ds,
                                 std::size_t row);
PredictionBand epic_interval_cqr_at(const EpicPipeline& pipeline,
                                    std::span<const double> x);

// Transformed score per label: cumulative predictive probability over labels
// ordered by base score, tie groups shared.
std::vector<double> epic_class_scores(std::span<const double> predictive_probs,
                                      std::span<const double> base_probs);

PredictionSet epic_set_classification(std::span<const double> predictive_probs,
                                      std::span<const double> base_probs, double t);

struct EpicClassPipeline {
    std::shared_ptr<const Classifier> base;
    std::shared_ptr<const PredictiveModel> label_predictive;
    CalibrationResult calibration;
    std::size_t n_cal1 = 0;
    std::size_t n_cal2 = 0;
};

EpicClassPipeline epic_class_calibrate(std::shared_ptr<const Classifier> base,
                                       LabelPredictiveKind kind, const Dataset& ds,
                                       std::span<const std::size_t> cal_indices,
                                       NominalLevel alpha, const MdnConfig& config,
                                       std::uint64_t seed);

PredictionSet epic_class_set(const EpicClassPipeline& pipeline, std::span<const double> x);

// Continuous-score mode for many-class problems: model the base score value
// itself with a continuous predictive instead of the label distribution.
struct EpicClassContinuousPipeline {
    std::shared_ptr<const Classifier> base;
    std::shared_ptr<const PredictiveModel> predictive;
    CalibrationResult calibration;
};

EpicClassContinuousPipeline epic_class_calibrate_continuous(
    std::shared_ptr<const Classifier> base, PredictiveKind kind, const Dataset& ds,
    std::span<const std::size_t> cal_indices, NominalLevel alpha,
    const PredictiveConfig& config, std::uint64_t seed);

PredictionSet epic_class_set_continuous(const EpicClassContinuousPipeline& pipeline,
                                        std::span<const double> x);

// threshold record + predictive model in one stream
void save_pipeline(const EpicPipeline& pipeline, const std::string& path);
struct LoadedPipeline {
    CalibrationResult calibration;
    std::shared_ptr<PredictiveModel> predictive;
    std::size_t n_cal1 = 0;
    std::size_t n_cal2 = 0;
};
LoadedPipeline load_pipeline(const std::string& path);

} // namespace epic
