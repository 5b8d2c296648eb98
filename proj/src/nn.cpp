#include "epic/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "epic/kernels.hpp"
#include "epic/mathx.hpp"

namespace epic {

namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Mlp::Mlp(int in_dim, std::vector<int> hidden, int out_dim, Rng& init_rng)
    : in_dim_(in_dim), out_dim_(out_dim), hidden_(std::move(hidden)) {
    int prev = in_dim_;
    for (std::size_t l = 0; l <= hidden_.size(); ++l) {
        const int width = l < hidden_.size() ? hidden_[l] : out_dim_;
        const double bound = std::sqrt(1.0 / static_cast<double>(prev));
        std::vector<double> w(static_cast<std::size_t>(width) * prev);
        for (double& v : w) v = init_rng.uniform(-bound, bound);
        weights.push_back(std::move(w));
        biases.emplace_back(width, 0.0);
        prev = width;
    }
}

DropoutMask Mlp::sample_mask(double rate, Rng& rng) const {
    DropoutMask mask;
    const double keep = 1.0 - rate;
    for (int width : hidden_) {
        std::vector<double> scale(width);
        for (double& v : scale) v = (rate > 0.0 && rng.uniform() < rate) ? 0.0 : 1.0 / keep;
        mask.layer_scale.push_back(std::move(scale));
    }
    return mask;
}

DropoutMask Mlp::identity_mask() const {
    DropoutMask mask;
    for (int width : hidden_) mask.layer_scale.emplace_back(width, 1.0);
    return mask;
}

void Mlp::forward(std::span<const double> x, const DropoutMask& mask,
                  std::span<double> out) const {
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const int width = hidden_[l];
        next.assign(width, 0.0);
        kernels::matvec(weights[l].data(), width, cur.size(), cur.data(), next.data());
        for (int i = 0; i < width; ++i) {
            double v = next[i] + biases[l][i];
            v = v > 0.0 ? v : 0.0;
            next[i] = v * mask.layer_scale[l][i];
        }
        cur.swap(next);
    }
    kernels::matvec(weights.back().data(), out_dim_, cur.size(), cur.data(), out.data());
    for (int i = 0; i < out_dim_; ++i) out[i] += biases.back()[i];
}

double Mlp::Loss::value(std::span<const double> out, double target) const {
    std::vector<double> scratch(out.size());
    return value_grad(out, target, scratch);
}

namespace {

struct Adam {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long step = 0;

    explicit Adam(const Mlp& net) {
        for (const auto& w : net.weights) {
            mw.emplace_back(w.size(), 0.0);
            vw.emplace_back(w.size(), 0.0);
        }
        for (const auto& b : net.biases) {
            mb.emplace_back(b.size(), 0.0);
            vb.emplace_back(b.size(), 0.0);
        }
    }

    void update(std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                const std::vector<double>& grad, double lr) {
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

} // namespace

double Mlp::train(std::span<const double> x_rows, std::size_t n, std::size_t p,
                  std::span<const double> targets, const MlpOptions& opt, const Loss& loss,
                  Rng& rng) {
    if (n < 2) throw std::invalid_argument("Mlp::train: need at least 2 samples");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(opt.val_fraction * static_cast<double>(n))));
    const std::size_t n_train = n - n_val;
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> val_idx(order.begin() + n_train, order.end());

    Adam adam(*this);
    const std::size_t n_layers = weights.size();
    std::vector<std::vector<double>> gw(n_layers), gb(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        gw[l].assign(weights[l].size(), 0.0);
        gb[l].assign(biases[l].size(), 0.0);
    }

    // per-sample activations for backprop
    std::vector<std::vector<double>> act(n_layers);      // post-relu, post-mask inputs of layer l+1
    std::vector<std::vector<double>> pre(n_layers - 1);  // pre-activation of hidden layers
    std::vector<double> out(out_dim_), dout(out_dim_);

    auto run_backprop = [&](std::span<const double> x, double target, const DropoutMask& mask) {
        // forward, keeping activations
        std::vector<double> cur(x.begin(), x.end());
        for (std::size_t l = 0; l + 1 < n_layers; ++l) {
            const auto width = biases[l].size();
            pre[l].assign(width, 0.0);
            kernels::matvec(weights[l].data(), width, cur.size(), cur.data(), pre[l].data());
            act[l].assign(width, 0.0);
            for (std::size_t i = 0; i < width; ++i) {
                const double z = pre[l][i] + biases[l][i];
                pre[l][i] = z;
                act[l][i] = (z > 0.0 ? z : 0.0) * mask.layer_scale[l][i];
            }
            cur = act[l];
        }
        kernels::matvec(weights.back().data(), out_dim_, cur.size(), cur.data(), out.data());
        for (int i = 0; i < out_dim_; ++i) out[i] += biases.back()[i];

        const double value = loss.value_grad(out, target, dout);

        // backward
        std::vector<double> delta = dout;
        for (std::size_t l = n_layers; l-- > 0;) {
            const std::span<const double> input =
                l == 0 ? x : std::span<const double>(act[l - 1]);
            kernels::ger(gw[l].data(), delta.size(), input.size(), 1.0, delta.data(),
                         input.data());
            for (std::size_t i = 0; i < delta.size(); ++i) gb[l][i] += delta[i];
            if (l == 0) break;
            std::vector<double> prev_delta(input.size(), 0.0);
            kernels::matvec_t(weights[l].data(), delta.size(), input.size(), delta.data(),
                              prev_delta.data());
            for (std::size_t i = 0; i < prev_delta.size(); ++i) {
                const double gate = pre[l - 1][i] > 0.0 ? mask.layer_scale[l - 1][i] : 0.0;
                prev_delta[i] *= gate;
            }
            delta.swap(prev_delta);
        }
        return value;
    };

    auto val_loss = [&]() {
        const DropoutMask id = identity_mask();
        double acc = 0.0;
        for (std::size_t i : val_idx) {
            forward(std::span<const double>(x_rows.data() + i * p, p), id, out);
            acc += loss.value(out, targets[i]);
        }
        return acc / static_cast<double>(val_idx.size());
    };

    auto best_w = weights;
    auto best_b = biases;
    double best_val = val_loss();
    int since_best = 0;

    std::vector<std::size_t> perm = train_idx;
    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        rng.shuffle(perm);
        for (std::size_t start = 0; start < perm.size();
             start += static_cast<std::size_t>(opt.batch)) {
            const std::size_t stop = std::min(perm.size(), start + opt.batch);
            for (std::size_t l = 0; l < n_layers; ++l) {
                std::fill(gw[l].begin(), gw[l].end(), 0.0);
                std::fill(gb[l].begin(), gb[l].end(), 0.0);
            }
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = perm[b];
                const DropoutMask mask = opt.dropout > 0.0 ? sample_mask(opt.dropout, rng)
                                                           : identity_mask();
                run_backprop(std::span<const double>(x_rows.data() + i * p, p), targets[i],
                             mask);
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            adam.step += 1;
            for (std::size_t l = 0; l < n_layers; ++l) {
                for (double& g : gw[l]) g *= inv;
                for (double& g : gb[l]) g *= inv;
                adam.update(weights[l], adam.mw[l], adam.vw[l], gw[l], opt.lr);
                adam.update(biases[l], adam.mb[l], adam.vb[l], gb[l], opt.lr);
            }
        }
        const double v = val_loss();
        if (v < best_val - 1e-12) {
            best_val = v;
            best_w = weights;
            best_b = biases;
            since_best = 0;
        } else if (++since_best >= opt.patience) {
            break;
        }
    }
    weights = best_w;
    biases = best_b;
    return best_val;
}

double MseLoss::value_grad(std::span<const double> out, double target,
                           std::span<double> grad) const {
    const double d = out[0] - target;
    grad[0] = d;
    return 0.5 * d * d;
}

double PinballLoss::value_grad(std::span<const double> out, double target,
                               std::span<double> grad) const {
    const double d = target - out[0];
    if (d > 0.0) {
        grad[0] = -tau;
        return tau * d;
    }
    grad[0] = 1.0 - tau;
    return (tau - 1.0) * d;
}

double SoftmaxCrossEntropyLoss::value_grad(std::span<const double> out, double target,
                                           std::span<double> grad) const {
    const auto y = static_cast<std::size_t>(target);
    const std::vector<double> probs = softmax(out);
    for (std::size_t i = 0; i < probs.size(); ++i) grad[i] = probs[i];
    grad[y] -= 1.0;
    return -std::log(std::max(probs[y], 1e-300));
}

MixtureParams unpack_mixture(std::span<const double> out, int k, double sigma_floor) {
    MixtureParams mp;
    mp.pi = softmax(out.subspan(0, k));
    mp.mu.assign(out.begin() + k, out.begin() + 2 * k);
    mp.sigma.resize(k);
    for (int i = 0; i < k; ++i) mp.sigma[i] = softplus(out[2 * k + i]) + sigma_floor;
    return mp;
}

double MdnNllLoss::value_grad(std::span<const double> out, double target,
                              std::span<double> grad) const {
    const MixtureParams mp = unpack_mixture(out, k, sigma_floor);
    std::vector<double> log_terms(k);
    std::vector<double> z(k);
    for (int i = 0; i < k; ++i) {
        z[i] = (target - mp.mu[i]) / mp.sigma[i];
        log_terms[i] = std::log(std::max(mp.pi[i], 1e-300)) - 0.5 * z[i] * z[i] -
                       std::log(mp.sigma[i]) - 0.9189385332046727418;
    }
    const double lse = mathx::log_sum_exp(log_terms);
    for (int i = 0; i < k; ++i) {
        const double gamma = std::exp(log_terms[i] - lse);
        grad[i] = mp.pi[i] - gamma;                                      // d/dlogit
        grad[k + i] = -gamma * z[i] / mp.sigma[i];                       // d/dmu
        const double dsigma = -gamma * (z[i] * z[i] - 1.0) / mp.sigma[i];
        grad[2 * k + i] = dsigma * sigmoid(out[2 * k + i]);              // d/drho
    }
    return -lse;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    const double mx = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double& v : p) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : p) v /= z;
    return p;
}

} // namespace epic
