#pragma once
// Base predictors (k-NN and small MLPs) and the nonconformity scores the
// conformal methods wrap.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "epic/data.hpp"
#include "epic/nn.hpp"

namespace epic {

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual double predict(std::span<const double> x) const = 0;
    virtual double predict_row(const Dataset& ds, std::size_t row) const {
        return predict(ds.row(row));
    }
    virtual std::string kind() const = 0;
};

struct PredictorConfig {
    enum class Kind { knn_mean, knn_quantile, mlp_mean, mlp_pinball };
    Kind kind = Kind::knn_mean;
    int k = 10;
    double tau = 0.5;  // quantile level for the quantile kinds
    MlpOptions mlp{.hidden = {32, 32}, .dropout = 0.0, .lr = 1e-3, .batch = 40,
                   .max_epochs = 200, .patience = 25, .val_fraction = 0.3};
};

std::unique_ptr<Predictor> fit_base_predictor(const PredictorConfig& config,
                                              const Dataset& ds,
                                              std::span<const std::size_t> train_rows,
                                              std::uint64_t seed);

// Row-aligned predictions ingested from an external model; only predict_row
// is meaningful.
class ExternalPredictor final : public Predictor {
public:
    explicit ExternalPredictor(std::vector<double> values) : values_(std::move(values)) {}
    double predict(std::span<const double>) const override;
    double predict_row(const Dataset&, std::size_t row) const override {
        return values_.at(row);
    }
    std::string kind() const override { return "external"; }

private:
    std::vector<double> values_;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual std::vector<double> probs(std::span<const double> x) const = 0;
};

class KnnClassifier final : public Classifier {
public:
    KnnClassifier(const Dataset& ds, std::span<const std::size_t> train_rows, int k,
                  bool dirichlet_smoothing = false);
    std::vector<double> probs(std::span<const double> x) const override;

private:
    FeatureScaler scaler_;
    std::vector<double> xs_;
    std::vector<int> labels_;
    std::size_t n_ = 0, p_ = 0;
    int k_ = 10;
    int n_classes_ = 0;
    bool smooth_ = false;
};

double residual_score(const Predictor& g, std::span<const double> x, double y);
double cqr_score(const Predictor& q_lo, const Predictor& q_hi, std::span<const double> x,
                 double y);
double weighted_residual_score(const Predictor& g, const Predictor& mad,
                               std::span<const double> x, double y);

inline constexpr double kMadFloor = 1e-6;

// Eq.-style APS: total probability of labels strictly more probable than y.
double aps_score(std::span<const double> probs, int y);
double neg_prob_score(std::span<const double> probs, int y);

// A score bound to its fitted predictors, evaluated per dataset row or at an
// arbitrary candidate label value.
struct ScoreFunction {
    enum class Kind { residual, weighted_residual, cqr };
    Kind kind = Kind::residual;
    std::shared_ptr<const Predictor> g, mad, q_lo, q_hi;

    double at(const Dataset& ds, std::size_t row, double y) const;
    double operator()(const Dataset& ds, std::size_t row) const;
    // score at a raw feature vector; needs model-backed predictors (external
    // row-aligned predictions cannot answer off-dataset queries)
    double value(std::span<const double> x, double y) const;
    std::string id() const;
};

ScoreFunction make_residual_score(std::shared_ptr<const Predictor> g);
ScoreFunction make_weighted_score(std::shared_ptr<const Predictor> g,
                                  std::shared_ptr<const Predictor> mad);
ScoreFunction make_cqr_score(std::shared_ptr<const Predictor> q_lo,
                             std::shared_ptr<const Predictor> q_hi);

// Sorted (lo, hi) pair after the post-hoc crossing fix.
std::pair<double, double> quantile_pair(const ScoreFunction& score, const Dataset& ds,
                                        std::size_t row);

} // namespace epic
