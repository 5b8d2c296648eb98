#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "epic/kernels.hpp"
#include "epic/mathx.hpp"
#include "epic/rng.hpp"
#include "predictive_impl.hpp"

namespace epic::detail {

namespace {

// In-place lower Cholesky of a row-major symmetric matrix. Returns false if a
// pivot collapses.
bool cholesky_in_place(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j] - kernels::dot(a.data() + j * n, a.data() + j * n, j);
        if (!(d > 1e-300)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i)
            a[i * n + j] =
                (a[i * n + j] - kernels::dot(a.data() + i * n, a.data() + j * n, j)) / ljj;
    }
    return true;
}

void forward_solve(const std::vector<double>& l, std::size_t n, const double* b, double* v) {
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (b[i] - kernels::dot(l.data() + i * n, v, i)) / l[i * n + i];
}

void backward_solve(const std::vector<double>& l, std::size_t n, const double* v, double* w) {
    for (std::size_t i = n; i-- > 0;) {
        double acc = v[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= l[k * n + i] * w[k];
        w[i] = acc / l[i * n + i];
    }
}

std::vector<double> rbf_gram(const std::vector<double>& xs, std::size_t n, std::size_t p,
                             double lengthscale, double signal, double noise) {
    std::vector<double> k(n * n);
    const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
    const double s2 = signal * signal;
    for (std::size_t i = 0; i < n; ++i) {
        k[i * n + i] = s2 + noise * noise;
        for (std::size_t j = 0; j < i; ++j) {
            const double d2 = kernels::sq_dist(xs.data() + i * p, xs.data() + j * p, p);
            const double v = s2 * std::exp(-d2 * inv);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    return k;
}

// -1/2 y'K^{-1}y - sum log L_ii - n/2 log 2pi, or -inf if the factorization fails
double log_marginal(const std::vector<double>& xs, std::size_t n, std::size_t p,
                    std::span<const double> y, double lengthscale, double signal,
                    double noise) {
    std::vector<double> k = rbf_gram(xs, n, p, lengthscale, signal, noise);
    if (!cholesky_in_place(k, n)) return -std::numeric_limits<double>::infinity();
    std::vector<double> v(n);
    forward_solve(k, n, y.data(), v.data());
    double quad = kernels::dot(v.data(), v.data(), n);
    double logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) logdet += std::log(k[i * n + i]);
    return -0.5 * quad - logdet - 0.5 * static_cast<double>(n) * 1.8378770664093454836;
}

struct GpSlice final : ConditionalCdf {
    double mu, sigma;
    const AffineNormalizer* nz;
    const ScoreTransform* tr;

    double cdf(double s) const override {
        if (tr->below_support(s)) return 0.0;
        return mathx::normal_cdf((nz->forward(tr->forward(s)) - mu) / sigma);
    }
    std::pair<double, double> bracket() const override {
        return {tr->inverse(nz->inverse(mu - 16.0 * sigma)),
                tr->inverse(nz->inverse(mu + 16.0 * sigma))};
    }
    double unit_scale() const override {
        if (!tr->log_scale) return nz->scale;
        return std::max(1e-12, std::exp(nz->inverse(mu)) * nz->scale);
    }
};

} // namespace

GpModel::GpModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
                 std::span<const double> scores, const GpConfig& cfg, std::uint64_t seed)
    : p_(p), seed_(seed) {
    Rng rng(derive_seed(seed, 0x6700));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    n_ = std::min(n, cfg.max_train_points);
    order.resize(n_);

    std::vector<double> raw(n_ * p);
    std::vector<double> s(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        std::copy_n(x_rows.data() + order[i] * p, p, raw.data() + i * p);
        s[i] = scores[order[i]];
    }
    scaler = FeatureScaler::fit_raw(raw, n_, p);
    xs_ = scaler.transform_raw(raw, n_, p);
    transform = ScoreTransform::resolve(cfg.response, s);
    std::vector<double> ys(n_);
    for (std::size_t i = 0; i < n_; ++i) ys[i] = transform.forward(s[i]);
    normalizer = AffineNormalizer::standardize(ys);
    for (double& v : ys) v = normalizer.forward(v);

    // hyperparameter grid on a subsample, scored by log marginal likelihood
    const std::size_t hs = std::min(n_, cfg.hyper_subsample);
    std::vector<double> hx(xs_.begin(), xs_.begin() + hs * p);
    std::span<const double> hy(ys.data(), hs);
    double best = -std::numeric_limits<double>::infinity();
    for (double l : cfg.lengthscale_grid)
        for (double sf : cfg.signal_grid)
            for (double sn : cfg.noise_grid) {
                const double lml = log_marginal(hx, hs, p, hy, l, sf, sn);
                if (lml > best) {
                    best = lml;
                    lengthscale = l;
                    signal = sf;
                    noise = sn;
                }
            }
    if (!std::isfinite(best)) throw SingularKernel("gp: no hyperparameter grid point is SPD");

    factorize(ys);
}

void GpModel::factorize(std::span<const double> ys) {
    const std::vector<double> base = rbf_gram(xs_, n_, p_, lengthscale, signal, noise);
    for (double jitter : {0.0, 1e-8, 1e-6, 1e-4}) {
        chol_ = base;
        for (std::size_t i = 0; i < n_; ++i) chol_[i * n_ + i] *= 1.0 + jitter;
        if (cholesky_in_place(chol_, n_)) {
            std::vector<double> v(n_);
            forward_solve(chol_, n_, ys.data(), v.data());
            alpha_.assign(n_, 0.0);
            backward_solve(chol_, n_, v.data(), alpha_.data());
            return;
        }
    }
    throw SingularKernel("gp: Cholesky failed after jitter escalation");
}

std::pair<double, double> GpModel::posterior_moments(std::span<const double> x) const {
    std::vector<double> q(p_);
    scaler.apply(x, q);
    std::vector<double> kstar(n_);
    const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
    const double s2 = signal * signal;
    for (std::size_t i = 0; i < n_; ++i)
        kstar[i] = s2 * std::exp(-kernels::sq_dist(xs_.data() + i * p_, q.data(), p_) * inv);
    const double mu = kernels::dot(kstar.data(), alpha_.data(), n_);
    std::vector<double> v(n_);
    forward_solve(chol_, n_, kstar.data(), v.data());
    const double var = s2 + noise * noise - kernels::dot(v.data(), v.data(), n_);
    return {mu, std::sqrt(std::max(var, 1e-12))};
}

std::unique_ptr<ConditionalCdf> GpModel::condition(std::span<const double> x) const {
    const auto [mu, sigma] = posterior_moments(x);
    auto slice = std::make_unique<GpSlice>();
    slice->mu = mu;
    slice->sigma = sigma;
    slice->nz = &normalizer;
    slice->tr = &transform;
    return slice;
}

void GpModel::save(std::ostream& out) const {
    ModelBlob blob;
    blob.kind = kind_name();
    blob.seed = seed_;
    blob.scalars = {{"n", static_cast<double>(n_)},
                    {"p", static_cast<double>(p_)},
                    {"lengthscale", lengthscale},
                    {"signal", signal},
                    {"noise", noise},
                    {"nz_loc", normalizer.loc},
                    {"nz_scale", normalizer.scale},
                    {"log_scale", transform.log_scale ? 1.0 : 0.0},
                    {"offset", transform.offset}};
    blob.put("scaler", scaler_to_flat(scaler));
    blob.put("xs", xs_);
    blob.put("chol", chol_);
    blob.put("alpha", alpha_);
    blob.write(out);
}

GpModel::GpModel(const ModelBlob& blob) {
    seed_ = blob.seed;
    n_ = static_cast<std::size_t>(blob.scalar("n"));
    p_ = static_cast<std::size_t>(blob.scalar("p"));
    lengthscale = blob.scalar("lengthscale");
    signal = blob.scalar("signal");
    noise = blob.scalar("noise");
    normalizer.loc = blob.scalar("nz_loc");
    normalizer.scale = blob.scalar("nz_scale");
    transform.log_scale = blob.scalar("log_scale") != 0.0;
    transform.offset = blob.scalar("offset");
    scaler = scaler_from_flat(blob.arr("scaler"));
    xs_ = blob.arr("xs");
    chol_ = blob.arr("chol");
    alpha_ = blob.arr("alpha");
}

} // namespace epic::detail
