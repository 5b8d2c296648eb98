#pragma once
// Concrete predictive models and the on-disk blob container. Internal header;
// tests may include it to construct models with pinned state.

#include <cmath>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "epic/data.hpp"
#include "epic/nn.hpp"
#include "epic/predictive.hpp"

namespace epic::detail {

// On-disk container: magic, JSON header, raw little-endian double payload.
struct ModelBlob {
    std::string kind;
    std::uint64_t seed = 0;
    std::map<std::string, double> scalars;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    void put(const std::string& name, std::vector<double> values) {
        arrays.emplace_back(name, std::move(values));
    }
    const std::vector<double>& arr(const std::string& name) const;
    double scalar(const std::string& name) const;

    void write(std::ostream& out) const;
    static ModelBlob read(std::istream& in);
};

std::vector<double> scaler_to_flat(const FeatureScaler& sc);
FeatureScaler scaler_from_flat(const std::vector<double>& flat);

// Optional log-scale response for non-negative scores, applied before the
// affine normalizer.
struct ScoreTransform {
    bool log_scale = false;
    double offset = 0.0;

    double forward(double s) const { return log_scale ? std::log(s + offset) : s; }
    double inverse(double u) const { return log_scale ? std::exp(u) - offset : u; }
    // values at or below -offset sit at cdf 0
    bool below_support(double s) const { return log_scale && !(s + offset > 0.0); }

    static ScoreTransform resolve(ScoreResponse response, std::span<const double> scores);
};

class GpModel final : public PredictiveModel {
public:
    GpModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
            std::span<const double> scores, const GpConfig& cfg, std::uint64_t seed);
    explicit GpModel(const ModelBlob& blob);

    std::string kind_name() const override { return "gp_exact"; }
    std::uint64_t seed() const override { return seed_; }
    std::unique_ptr<ConditionalCdf> condition(std::span<const double> x) const override;
    void save(std::ostream& out) const override;

    // posterior moments in normalized score units
    std::pair<double, double> posterior_moments(std::span<const double> x) const;

    double lengthscale = 1.0, signal = 1.0, noise = 0.1;
    FeatureScaler scaler;
    AffineNormalizer normalizer;
    ScoreTransform transform;

private:
    void factorize(std::span<const double> ys);

    std::size_t n_ = 0, p_ = 0;
    std::vector<double> xs_;     // standardized training rows
    std::vector<double> chol_;   // lower-triangular factor of K, row-major
    std::vector<double> alpha_;  // K^{-1} y
    std::uint64_t seed_ = 0;
};

class MdnModel final : public PredictiveModel {
public:
    MdnModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
             std::span<const double> scores, const MdnConfig& cfg, std::uint64_t seed);
    // pinned-state constructor for tests and deserialization
    MdnModel(Mlp net, std::vector<DropoutMask> masks, MdnConfig cfg, FeatureScaler scaler,
             AffineNormalizer normalizer, std::uint64_t seed);
    explicit MdnModel(const ModelBlob& blob);

    std::string kind_name() const override { return "mdn_dropout"; }
    std::uint64_t seed() const override { return seed_; }
    std::unique_ptr<ConditionalCdf> condition(std::span<const double> x) const override;
    void save(std::ostream& out) const override;

    // flattened mixture over the T frozen passes, normalized units
    MixtureParams mixture_at(std::span<const double> x) const;

    MdnConfig cfg;
    FeatureScaler scaler;
    AffineNormalizer normalizer;
    Mlp net;
    std::vector<DropoutMask> masks;
    std::vector<double> sample_u, sample_z;  // frozen draws for sample_mode

private:
    std::uint64_t seed_ = 0;
};

struct BartTreeNode {
    int var = -1;
    double split = 0.0;
    int left = -1, right = -1;
    double leaf = 0.0;
    bool is_leaf() const { return left < 0; }
};

struct BartTree {
    std::vector<BartTreeNode> nodes;
    double eval(std::span<const double> x) const {
        int cur = 0;
        while (!nodes[cur].is_leaf())
            cur = x[nodes[cur].var] <= nodes[cur].split ? nodes[cur].left : nodes[cur].right;
        return nodes[cur].leaf;
    }
};

struct BartDraw {
    std::vector<BartTree> trees;
    double sigma = 1.0;
};

class BartModel final : public PredictiveModel {
public:
    BartModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
              std::span<const double> scores, const BartConfig& cfg, std::uint64_t seed);
    explicit BartModel(const ModelBlob& blob);

    std::string kind_name() const override { return "bart_lite"; }
    std::uint64_t seed() const override { return seed_; }
    std::unique_ptr<ConditionalCdf> condition(std::span<const double> x) const override;
    void save(std::ostream& out) const override;

    BartConfig cfg;
    FeatureScaler scaler;
    AffineNormalizer normalizer;
    ScoreTransform transform;
    std::vector<BartDraw> draws;

private:
    std::uint64_t seed_ = 0;
};

class KnnEmpiricalModel final : public PredictiveModel {
public:
    KnnEmpiricalModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
                      std::span<const double> scores, const KnnPredictiveConfig& cfg,
                      std::uint64_t seed);
    explicit KnnEmpiricalModel(const ModelBlob& blob);

    std::string kind_name() const override { return "knn_empirical"; }
    std::uint64_t seed() const override { return seed_; }
    std::unique_ptr<ConditionalCdf> condition(std::span<const double> x) const override;
    void save(std::ostream& out) const override;

    std::size_t k = 0;
    FeatureScaler scaler;

private:
    std::size_t n_ = 0, p_ = 0;
    std::vector<double> xs_;
    std::vector<double> scores_;
    std::uint64_t seed_ = 0;
};

class KnnLabelModel final : public PredictiveModel {
public:
    KnnLabelModel(const Dataset& ds, std::span<const std::size_t> rows, std::size_t k,
                  std::uint64_t seed);
    explicit KnnLabelModel(const ModelBlob& blob);

    std::string kind_name() const override { return "knn_label"; }
    std::uint64_t seed() const override { return seed_; }
    std::vector<double> label_dist(std::span<const double> x) const override;
    void save(std::ostream& out) const override;

    std::size_t k = 10;

private:
    std::size_t n_ = 0, p_ = 0;
    int n_classes_ = 0;
    FeatureScaler scaler_;
    std::vector<double> xs_;
    std::vector<int> labels_;
    std::uint64_t seed_ = 0;
};

class DropoutSoftmaxModel final : public PredictiveModel {
public:
    DropoutSoftmaxModel(const Dataset& ds, std::span<const std::size_t> rows,
                        const MdnConfig& cfg, std::uint64_t seed);
    DropoutSoftmaxModel(Mlp net, std::vector<DropoutMask> masks, FeatureScaler scaler,
                        int n_classes, std::uint64_t seed);
    explicit DropoutSoftmaxModel(const ModelBlob& blob);

    std::string kind_name() const override { return "dropout_softmax"; }
    std::uint64_t seed() const override { return seed_; }
    std::vector<double> label_dist(std::span<const double> x) const override;
    void save(std::ostream& out) const override;

    Mlp net;
    std::vector<DropoutMask> masks;
    FeatureScaler scaler;

private:
    int n_classes_ = 0;
    std::uint64_t seed_ = 0;
};

std::vector<double> mlp_to_flat(const Mlp& net);
void mlp_layout(const Mlp& net, std::vector<double>& dims);
Mlp mlp_from_flat(const std::vector<double>& dims, const std::vector<double>& flat);

std::vector<double> masks_to_flat(const std::vector<DropoutMask>& masks);
std::vector<DropoutMask> masks_from_flat(const std::vector<double>& flat, std::size_t t,
                                         const Mlp& net);

} // namespace epic::detail
