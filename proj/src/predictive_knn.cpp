#include <algorithm>
#include <cmath>
#include <ostream>

#include "neighbors.hpp"
#include "predictive_impl.hpp"

namespace epic::detail {

namespace {

struct KnnSlice final : ConditionalCdf {
    std::vector<double> sorted;  // neighbor scores, ascending, raw units

    double cdf(double s) const override {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), s);
        return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    }
    // matching order statistic directly
    double invert(double t) const override {
        if (t <= 0.0) return sorted.front();
        const auto j = static_cast<std::size_t>(std::clamp<double>(
            std::ceil(t * static_cast<double>(sorted.size())), 1.0,
            static_cast<double>(sorted.size())));
        return sorted[j - 1];
    }
    std::pair<double, double> bracket() const override {
        return {sorted.front(), sorted.back()};
    }
};

} // namespace

KnnEmpiricalModel::KnnEmpiricalModel(std::span<const double> x_rows, std::size_t n,
                                     std::size_t p, std::span<const double> scores,
                                     const KnnPredictiveConfig& cfg, std::uint64_t seed)
    : n_(n), p_(p), seed_(seed) {
    scaler = FeatureScaler::fit_raw(x_rows, n, p);
    xs_ = scaler.transform_raw(x_rows, n, p);
    scores_.assign(scores.begin(), scores.end());
    k = cfg.k > 0 ? cfg.k : std::max<std::size_t>(50, n / 20);
    k = std::min(k, n);
}

std::unique_ptr<ConditionalCdf> KnnEmpiricalModel::condition(
    std::span<const double> x) const {
    std::vector<double> q(p_);
    scaler.apply(x, q);
    const auto idx = detail::nearest_rows(xs_, n_, p_, q, k);
    auto slice = std::make_unique<KnnSlice>();
    slice->sorted.reserve(idx.size());
    for (std::size_t i : idx) slice->sorted.push_back(scores_[i]);
    std::sort(slice->sorted.begin(), slice->sorted.end());
    return slice;
}

void KnnEmpiricalModel::save(std::ostream& out) const {
    ModelBlob blob;
    blob.kind = kind_name();
    blob.seed = seed_;
    blob.scalars = {{"n", static_cast<double>(n_)},
                    {"p", static_cast<double>(p_)},
                    {"k", static_cast<double>(k)}};
    blob.put("scaler", scaler_to_flat(scaler));
    blob.put("xs", xs_);
    blob.put("scores", scores_);
    blob.write(out);
}

KnnEmpiricalModel::KnnEmpiricalModel(const ModelBlob& blob) {
    seed_ = blob.seed;
    n_ = static_cast<std::size_t>(blob.scalar("n"));
    p_ = static_cast<std::size_t>(blob.scalar("p"));
    k = static_cast<std::size_t>(blob.scalar("k"));
    scaler = scaler_from_flat(blob.arr("scaler"));
    xs_ = blob.arr("xs");
    scores_ = blob.arr("scores");
}

KnnLabelModel::KnnLabelModel(const Dataset& ds, std::span<const std::size_t> rows,
                             std::size_t k_neighbors, std::uint64_t seed)
    : k(k_neighbors), n_(rows.size()), p_(ds.p), n_classes_(ds.n_classes), seed_(seed) {
    k = std::min(k, n_);
    scaler_ = FeatureScaler::fit(ds, rows);
    xs_ = scaler_.transform_rows(ds, rows);
    labels_.reserve(rows.size());
    for (std::size_t i : rows) labels_.push_back(ds.labels[i]);
}

// Dirichlet(1)-smoothed neighbor frequencies
std::vector<double> KnnLabelModel::label_dist(std::span<const double> x) const {
    std::vector<double> q(p_);
    scaler_.apply(x, q);
    const auto idx = detail::nearest_rows(xs_, n_, p_, q, k);
    std::vector<double> probs(n_classes_, 1.0);
    for (std::size_t i : idx) probs[labels_[i]] += 1.0;
    const double total = static_cast<double>(idx.size() + n_classes_);
    for (double& v : probs) v /= total;
    return probs;
}

void KnnLabelModel::save(std::ostream& out) const {
    ModelBlob blob;
    blob.kind = kind_name();
    blob.seed = seed_;
    blob.scalars = {{"n", static_cast<double>(n_)},
                    {"p", static_cast<double>(p_)},
                    {"k", static_cast<double>(k)},
                    {"n_classes", static_cast<double>(n_classes_)}};
    blob.put("scaler", scaler_to_flat(scaler_));
    blob.put("xs", xs_);
    std::vector<double> labs(labels_.begin(), labels_.end());
    blob.put("labels", labs);
    blob.write(out);
}

KnnLabelModel::KnnLabelModel(const ModelBlob& blob) {
    seed_ = blob.seed;
    n_ = static_cast<std::size_t>(blob.scalar("n"));
    p_ = static_cast<std::size_t>(blob.scalar("p"));
    k = static_cast<std::size_t>(blob.scalar("k"));
    n_classes_ = static_cast<int>(blob.scalar("n_classes"));
    scaler_ = scaler_from_flat(blob.arr("scaler"));
    xs_ = blob.arr("xs");
    for (double v : blob.arr("labels")) labels_.push_back(static_cast<int>(v));
}

} // namespace epic::detail
