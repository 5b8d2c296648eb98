#include <algorithm>
#include <cmath>
#include <ostream>

#include "epic/mathx.hpp"
#include "predictive_impl.hpp"

namespace epic::detail {

namespace {

struct MixtureSlice final : ConditionalCdf {
    MixtureParams mix;  // weights already averaged over passes, normalized units
    const AffineNormalizer* nz;

    double cdf(double s) const override {
        const double z = nz->forward(s);
        double acc = 0.0;
        for (std::size_t i = 0; i < mix.pi.size(); ++i)
            acc += mix.pi[i] * mathx::normal_cdf((z - mix.mu[i]) / mix.sigma[i]);
        return std::clamp(acc, 0.0, 1.0);
    }
    std::pair<double, double> bracket() const override {
        double lo = mix.mu[0], hi = mix.mu[0];
        for (std::size_t i = 0; i < mix.mu.size(); ++i) {
            lo = std::min(lo, mix.mu[i] - 16.0 * mix.sigma[i]);
            hi = std::max(hi, mix.mu[i] + 16.0 * mix.sigma[i]);
        }
        return {nz->inverse(lo), nz->inverse(hi)};
    }
    double unit_scale() const override { return nz->scale; }
};

struct EmpiricalSlice final : ConditionalCdf {
    std::vector<double> sorted;  // raw units

    double cdf(double s) const override {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), s);
        return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    }
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

MdnModel::MdnModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
                   std::span<const double> scores, const MdnConfig& config,
                   std::uint64_t seed)
    : cfg(config), seed_(seed) {
    Rng rng(derive_seed(seed, 0x3D17));

    scaler = FeatureScaler::fit_raw(x_rows, n, p);
    const std::vector<double> xs = scaler.transform_raw(x_rows, n, p);
    normalizer = AffineNormalizer::standardize(scores);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = normalizer.forward(scores[i]);

    net = Mlp(static_cast<int>(p), cfg.hidden, 3 * cfg.components, rng);
    MlpOptions opt;
    opt.hidden = cfg.hidden;
    opt.dropout = cfg.dropout;
    opt.lr = cfg.lr;
    opt.batch = cfg.batch;
    opt.max_epochs = cfg.max_epochs;
    opt.patience = cfg.patience;
    opt.val_fraction = 0.3;
    MdnNllLoss loss(cfg.components, cfg.sigma_floor);
    net.train(xs, n, p, ys, opt, loss, rng);

    // freeze the MC-dropout posterior draws
    masks.reserve(cfg.mc_passes);
    for (int t = 0; t < cfg.mc_passes; ++t) masks.push_back(net.sample_mask(cfg.dropout, rng));
    if (cfg.sample_mode) {
        sample_u.resize(cfg.sample_count);
        sample_z.resize(cfg.sample_count);
        for (int j = 0; j < cfg.sample_count; ++j) {
            sample_u[j] = rng.uniform();
            sample_z[j] = rng.normal();
        }
    }
}

MdnModel::MdnModel(Mlp network, std::vector<DropoutMask> frozen, MdnConfig config,
                   FeatureScaler sc, AffineNormalizer nz, std::uint64_t seed)
    : cfg(std::move(config)), scaler(std::move(sc)), normalizer(nz), net(std::move(network)),
      masks(std::move(frozen)), seed_(seed) {}

MixtureParams MdnModel::mixture_at(std::span<const double> x) const {
    std::vector<double> q(x.size());
    scaler.apply(x, q);
    const int k = cfg.components;
    const std::size_t t_passes = masks.size();
    MixtureParams out;
    out.pi.reserve(t_passes * k);
    out.mu.reserve(t_passes * k);
    out.sigma.reserve(t_passes * k);
    std::vector<double> head(3 * k);
    const double inv_t = 1.0 / static_cast<double>(t_passes);
    for (const auto& mask : masks) {
        net.forward(q, mask, head);
        const MixtureParams mp = unpack_mixture(head, k, cfg.sigma_floor);
        for (int i = 0; i < k; ++i) {
            out.pi.push_back(mp.pi[i] * inv_t);
            out.mu.push_back(mp.mu[i]);
            out.sigma.push_back(mp.sigma[i]);
        }
    }
    return out;
}

std::unique_ptr<ConditionalCdf> MdnModel::condition(std::span<const double> x) const {
    MixtureParams mix = mixture_at(x);
    if (cfg.sample_mode) {
        // frozen inverse-CDF component picks and normal increments
        const int k = cfg.components;
        auto slice = std::make_unique<EmpiricalSlice>();
        slice->sorted.resize(sample_u.size());
        const std::size_t t_passes = masks.size();
        for (std::size_t j = 0; j < sample_u.size(); ++j) {
            const std::size_t pass = j % t_passes;
            double u = sample_u[j];
            std::size_t pick = pass * k;
            for (int i = 0; i < k; ++i) {
                const double w = mix.pi[pass * k + i] * static_cast<double>(t_passes);
                if (u <= w || i == k - 1) {
                    pick = pass * k + i;
                    break;
                }
                u -= w;
            }
            slice->sorted[j] =
                normalizer.inverse(mix.mu[pick] + mix.sigma[pick] * sample_z[j]);
        }
        std::sort(slice->sorted.begin(), slice->sorted.end());
        return slice;
    }
    auto slice = std::make_unique<MixtureSlice>();
    slice->mix = std::move(mix);
    slice->nz = &normalizer;
    return slice;
}

void MdnModel::save(std::ostream& out) const {
    ModelBlob blob;
    blob.kind = kind_name();
    blob.seed = seed_;
    blob.scalars = {{"components", static_cast<double>(cfg.components)},
                    {"dropout", cfg.dropout},
                    {"mc_passes", static_cast<double>(masks.size())},
                    {"sigma_floor", cfg.sigma_floor},
                    {"sample_mode", cfg.sample_mode ? 1.0 : 0.0},
                    {"nz_loc", normalizer.loc},
                    {"nz_scale", normalizer.scale}};
    std::vector<double> dims;
    mlp_layout(net, dims);
    blob.put("dims", dims);
    blob.put("scaler", scaler_to_flat(scaler));
    blob.put("weights", mlp_to_flat(net));
    blob.put("masks", masks_to_flat(masks));
    blob.put("sample_u", sample_u);
    blob.put("sample_z", sample_z);
    blob.write(out);
}

MdnModel::MdnModel(const ModelBlob& blob)
    : net(mlp_from_flat(blob.arr("dims"), blob.arr("weights"))) {
    seed_ = blob.seed;
    cfg.components = static_cast<int>(blob.scalar("components"));
    cfg.dropout = blob.scalar("dropout");
    cfg.mc_passes = static_cast<int>(blob.scalar("mc_passes"));
    cfg.sigma_floor = blob.scalar("sigma_floor");
    cfg.sample_mode = blob.scalar("sample_mode") != 0.0;
    const auto& dims = blob.arr("dims");
    cfg.hidden.clear();
    for (std::size_t i = 1; i + 1 < dims.size(); ++i)
        cfg.hidden.push_back(static_cast<int>(dims[i]));
    normalizer.loc = blob.scalar("nz_loc");
    normalizer.scale = blob.scalar("nz_scale");
    scaler = scaler_from_flat(blob.arr("scaler"));
    masks = masks_from_flat(blob.arr("masks"), cfg.mc_passes, net);
    sample_u = blob.arr("sample_u");
    sample_z = blob.arr("sample_z");
}

DropoutSoftmaxModel::DropoutSoftmaxModel(const Dataset& ds,
                                         std::span<const std::size_t> rows,
                                         const MdnConfig& cfg, std::uint64_t seed)
    : n_classes_(ds.n_classes), seed_(seed) {
    Rng rng(derive_seed(seed, 0xD507));
    scaler = FeatureScaler::fit(ds, rows);
    const std::vector<double> xs = scaler.transform_rows(ds, rows);
    std::vector<double> targets(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        targets[i] = static_cast<double>(ds.labels[rows[i]]);

    net = Mlp(static_cast<int>(ds.p), cfg.hidden, n_classes_, rng);
    MlpOptions opt;
    opt.hidden = cfg.hidden;
    opt.dropout = cfg.dropout;
    opt.lr = cfg.lr;
    opt.batch = cfg.batch;
    opt.max_epochs = cfg.max_epochs;
    opt.patience = cfg.patience;
    SoftmaxCrossEntropyLoss loss;
    net.train(xs, rows.size(), ds.p, targets, opt, loss, rng);

    masks.reserve(cfg.mc_passes);
    for (int t = 0; t < cfg.mc_passes; ++t) masks.push_back(net.sample_mask(cfg.dropout, rng));
}

DropoutSoftmaxModel::DropoutSoftmaxModel(Mlp network, std::vector<DropoutMask> frozen,
                                         FeatureScaler sc, int n_classes, std::uint64_t seed)
    : net(std::move(network)), masks(std::move(frozen)), scaler(std::move(sc)),
      n_classes_(n_classes), seed_(seed) {}

std::vector<double> DropoutSoftmaxModel::label_dist(std::span<const double> x) const {
    std::vector<double> q(x.size());
    scaler.apply(x, q);
    std::vector<double> probs(n_classes_, 0.0);
    std::vector<double> head(n_classes_);
    const double inv_t = 1.0 / static_cast<double>(masks.size());
    for (const auto& mask : masks) {
        net.forward(q, mask, head);
        const std::vector<double> p = softmax(head);
        for (int c = 0; c < n_classes_; ++c) probs[c] += p[c] * inv_t;
    }
    return probs;
}

void DropoutSoftmaxModel::save(std::ostream& out) const {
    ModelBlob blob;
    blob.kind = kind_name();
    blob.seed = seed_;
    blob.scalars = {{"n_classes", static_cast<double>(n_classes_)},
                    {"mc_passes", static_cast<double>(masks.size())}};
    std::vector<double> dims;
    mlp_layout(net, dims);
    blob.put("dims", dims);
    blob.put("scaler", scaler_to_flat(scaler));
    blob.put("weights", mlp_to_flat(net));
    blob.put("masks", masks_to_flat(masks));
    blob.write(out);
}

DropoutSoftmaxModel::DropoutSoftmaxModel(const ModelBlob& blob)
    : net(mlp_from_flat(blob.arr("dims"), blob.arr("weights"))) {
    seed_ = blob.seed;
    n_classes_ = static_cast<int>(blob.scalar("n_classes"));
    scaler = scaler_from_flat(blob.arr("scaler"));
    masks = masks_from_flat(blob.arr("masks"),
                            static_cast<std::size_t>(blob.scalar("mc_passes")), net);
}

} // namespace epic::detail
