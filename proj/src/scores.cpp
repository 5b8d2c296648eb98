#include "epic/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "epic/kernels.hpp"
#include "neighbors.hpp"

namespace epic {

using detail::nearest_rows;

namespace {

class KnnPredictor final : public Predictor {
public:
    KnnPredictor(const Dataset& ds, std::span<const std::size_t> rows, int k, bool quantile,
                 double tau)
        : k_(k), quantile_(quantile), tau_(tau), p_(ds.p), n_(rows.size()) {
        scaler_ = FeatureScaler::fit(ds, rows);
        xs_ = scaler_.transform_rows(ds, rows);
        y_.reserve(rows.size());
        for (std::size_t i : rows) y_.push_back(ds.target[i]);
    }

    double predict(std::span<const double> x) const override {
        std::vector<double> q(p_);
        scaler_.apply(x, q);
        const auto idx = nearest_rows(xs_, n_, p_, q, static_cast<std::size_t>(k_));
        std::vector<double> vals(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = y_[idx[i]];
        if (!quantile_) {
            return kernels::sum(vals.data(), vals.size()) / static_cast<double>(vals.size());
        }
        std::sort(vals.begin(), vals.end());
        const auto j = static_cast<std::size_t>(std::clamp<double>(
            std::ceil(tau_ * static_cast<double>(vals.size())), 1.0,
            static_cast<double>(vals.size())));
        return vals[j - 1];
    }

    std::string kind() const override { return quantile_ ? "knn_quantile" : "knn_mean"; }

private:
    int k_;
    bool quantile_;
    double tau_;
    std::size_t p_, n_;
    FeatureScaler scaler_;
    std::vector<double> xs_;
    std::vector<double> y_;
};

class MlpPredictor final : public Predictor {
public:
    MlpPredictor(const Dataset& ds, std::span<const std::size_t> rows,
                 const PredictorConfig& cfg, std::uint64_t seed)
        : pinball_(cfg.kind == PredictorConfig::Kind::mlp_pinball) {
        scaler_ = FeatureScaler::fit(ds, rows);
        const std::vector<double> xs = scaler_.transform_rows(ds, rows);
        std::vector<double> y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) y[i] = ds.target[rows[i]];
        normalizer_ = AffineNormalizer::standardize(y);
        for (double& v : y) v = normalizer_.forward(v);

        Rng rng(derive_seed(seed, 0x3149));
        net_ = Mlp(static_cast<int>(ds.p), cfg.mlp.hidden, 1, rng);
        if (pinball_) {
            PinballLoss loss(cfg.tau);
            net_.train(xs, rows.size(), ds.p, y, cfg.mlp, loss, rng);
        } else {
            MseLoss loss;
            net_.train(xs, rows.size(), ds.p, y, cfg.mlp, loss, rng);
        }
    }

    double predict(std::span<const double> x) const override {
        std::vector<double> q(x.size());
        scaler_.apply(x, q);
        double out;
        net_.forward(q, net_.identity_mask(), std::span<double>(&out, 1));
        return normalizer_.inverse(out);
    }

    std::string kind() const override { return pinball_ ? "mlp_pinball" : "mlp_mean"; }

private:
    bool pinball_;
    FeatureScaler scaler_;
    AffineNormalizer normalizer_;
    Mlp net_;
};

} // namespace

std::unique_ptr<Predictor> fit_base_predictor(const PredictorConfig& config,
                                              const Dataset& ds,
                                              std::span<const std::size_t> train_rows,
                                              std::uint64_t seed) {
    if (train_rows.empty()) throw InsufficientData("fit_base_predictor: empty training split");
    switch (config.kind) {
        case PredictorConfig::Kind::knn_mean:
        case PredictorConfig::Kind::knn_quantile: {
            if (train_rows.size() < static_cast<std::size_t>(config.k))
                throw InsufficientData("knn predictor: n < k");
            return std::make_unique<KnnPredictor>(
                ds, train_rows, config.k,
                config.kind == PredictorConfig::Kind::knn_quantile, config.tau);
        }
        case PredictorConfig::Kind::mlp_mean:
        case PredictorConfig::Kind::mlp_pinball: {
            if (train_rows.size() < 10) throw InsufficientData("mlp predictor: n < 10");
            return std::make_unique<MlpPredictor>(ds, train_rows, config, seed);
        }
    }
    throw ConfigError("unknown predictor kind");
}

double ExternalPredictor::predict(std::span<const double>) const {
    throw std::logic_error("external predictions are row-aligned; use predict_row");
}

KnnClassifier::KnnClassifier(const Dataset& ds, std::span<const std::size_t> train_rows,
                             int k, bool dirichlet_smoothing)
    : n_(train_rows.size()), p_(ds.p), k_(k), n_classes_(ds.n_classes),
      smooth_(dirichlet_smoothing) {
    scaler_ = FeatureScaler::fit(ds, train_rows);
    xs_ = scaler_.transform_rows(ds, train_rows);
    labels_.reserve(train_rows.size());
    for (std::size_t i : train_rows) labels_.push_back(ds.labels[i]);
}

std::vector<double> KnnClassifier::probs(std::span<const double> x) const {
    std::vector<double> q(p_);
    scaler_.apply(x, q);
    const auto idx = nearest_rows(xs_, n_, p_, q, static_cast<std::size_t>(k_));
    std::vector<double> counts(n_classes_, smooth_ ? 1.0 : 0.0);
    for (std::size_t i : idx) counts[labels_[i]] += 1.0;
    const double total = static_cast<double>(idx.size()) + (smooth_ ? n_classes_ : 0.0);
    for (double& c : counts) c /= total;
    return counts;
}

double residual_score(const Predictor& g, std::span<const double> x, double y) {
    return std::fabs(y - g.predict(x));
}

double cqr_score(const Predictor& q_lo, const Predictor& q_hi, std::span<const double> x,
                 double y) {
    const auto [lo, hi] = std::minmax({q_lo.predict(x), q_hi.predict(x)});
    return std::max(lo - y, y - hi);
}

double weighted_residual_score(const Predictor& g, const Predictor& mad,
                               std::span<const double> x, double y) {
    return std::fabs(y - g.predict(x)) / std::max(mad.predict(x), kMadFloor);
}

double aps_score(std::span<const double> probs, int y) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.size())
        throw UnknownLabel("aps_score: label " + std::to_string(y) + " outside support");
    double total = 0.0;
    double check = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("aps_score: negative probability");
        check += p;
        if (p > probs[y]) total += p;
    }
    if (std::fabs(check - 1.0) > 1e-9)
        throw std::invalid_argument("aps_score: probabilities do not sum to 1");
    return total;
}

double neg_prob_score(std::span<const double> probs, int y) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.size())
        throw UnknownLabel("neg_prob_score: label outside support");
    return -probs[y];
}

double ScoreFunction::at(const Dataset& ds, std::size_t row, double y) const {
    const auto x = ds.row(row);
    switch (kind) {
        case Kind::residual:
            return std::fabs(y - g->predict_row(ds, row));
        case Kind::weighted_residual:
            return std::fabs(y - g->predict_row(ds, row)) /
                   std::max(mad->predict_row(ds, row), kMadFloor);
        case Kind::cqr: {
            const auto [lo, hi] =
                std::minmax({q_lo->predict_row(ds, row), q_hi->predict_row(ds, row)});
            return std::max(lo - y, y - hi);
        }
    }
    (void)x;
    throw ConfigError("unknown score kind");
}

double ScoreFunction::operator()(const Dataset& ds, std::size_t row) const {
    return at(ds, row, ds.target[row]);
}

double ScoreFunction::value(std::span<const double> x, double y) const {
    switch (kind) {
        case Kind::residual:
            return residual_score(*g, x, y);
        case Kind::weighted_residual:
            return weighted_residual_score(*g, *mad, x, y);
        case Kind::cqr:
            return cqr_score(*q_lo, *q_hi, x, y);
    }
    throw ConfigError("unknown score kind");
}

std::string ScoreFunction::id() const {
    switch (kind) {
        case Kind::residual: return "residual";
        case Kind::weighted_residual: return "weighted_residual";
        case Kind::cqr: return "cqr";
    }
    return "?";
}

ScoreFunction make_residual_score(std::shared_ptr<const Predictor> g) {
    ScoreFunction s;
    s.kind = ScoreFunction::Kind::residual;
    s.g = std::move(g);
    return s;
}

ScoreFunction make_weighted_score(std::shared_ptr<const Predictor> g,
                                  std::shared_ptr<const Predictor> mad) {
    ScoreFunction s;
    s.kind = ScoreFunction::Kind::weighted_residual;
    s.g = std::move(g);
    s.mad = std::move(mad);
    return s;
}

ScoreFunction make_cqr_score(std::shared_ptr<const Predictor> q_lo,
                             std::shared_ptr<const Predictor> q_hi) {
    ScoreFunction s;
    s.kind = ScoreFunction::Kind::cqr;
    s.q_lo = std::move(q_lo);
    s.q_hi = std::move(q_hi);
    return s;
}

std::pair<double, double> quantile_pair(const ScoreFunction& score, const Dataset& ds,
                                        std::size_t row) {
    return std::minmax({score.q_lo->predict_row(ds, row), score.q_hi->predict_row(ds, row)});
}

} // namespace epic
