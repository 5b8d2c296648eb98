#pragma once
// Minimal fully-connected network with ReLU hidden layers, inverted dropout,
// and Adam. Shared by the MLP base predictors, the mixture density network,
// and the MC-dropout classifier head.

#include <cstdint>
#include <span>
#include <vector>

#include "epic/rng.hpp"

namespace epic {

struct MlpOptions {
    std::vector<int> hidden{64, 64};
    double dropout = 0.0;       // rate; 0 disables
    double lr = 1e-3;
    int batch = 40;
    int max_epochs = 300;
    int patience = 30;
    double val_fraction = 0.3;  // held out for early stopping
};

// One dropout realization: a keep/scale factor per hidden unit.
struct DropoutMask {
    std::vector<std::vector<double>> layer_scale;
};

class Mlp {
public:
    Mlp() = default;
    Mlp(int in_dim, std::vector<int> hidden, int out_dim, Rng& init_rng);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    std::size_t n_hidden_layers() const { return hidden_.size(); }

    DropoutMask sample_mask(double rate, Rng& rng) const;
    DropoutMask identity_mask() const;

    void forward(std::span<const double> x, const DropoutMask& mask,
                 std::span<double> out) const;

    // Loss heads understood by train(); the network is a plain function
    // approximator, the head interprets out_dim outputs.
    struct Loss {
        virtual ~Loss() = default;
        // writes dL/dout into grad, returns loss value
        virtual double value_grad(std::span<const double> out, double target,
                                  std::span<double> grad) const = 0;
        virtual double value(std::span<const double> out, double target) const;
    };

    // Trains on (X, y) with a fresh dropout mask per sample per step, early
    // stopping on a validation slice, best weights restored. Returns the best
    // validation loss.
    double train(std::span<const double> x_rows, std::size_t n, std::size_t p,
                 std::span<const double> targets, const MlpOptions& opt,
                 const Loss& loss, Rng& rng);

    // layer l weight matrix, row-major (out x in), plus bias
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

private:
    int in_dim_ = 0;
    int out_dim_ = 0;
    std::vector<int> hidden_;

    friend struct MlpIo;
};

struct MseLoss : Mlp::Loss {
    double value_grad(std::span<const double> out, double target,
                      std::span<double> grad) const override;
};

struct PinballLoss : Mlp::Loss {
    explicit PinballLoss(double tau) : tau(tau) {}
    double tau;
    double value_grad(std::span<const double> out, double target,
                      std::span<double> grad) const override;
};

// target is the class index cast to double
struct SoftmaxCrossEntropyLoss : Mlp::Loss {
    double value_grad(std::span<const double> out, double target,
                      std::span<double> grad) const override;
};

struct MixtureParams {
    std::vector<double> pi, mu, sigma;
};

// Unpacks a 3K-output head: K logits, K means, K pre-softplus scales.
MixtureParams unpack_mixture(std::span<const double> out, int k, double sigma_floor);

struct MdnNllLoss : Mlp::Loss {
    MdnNllLoss(int k, double sigma_floor) : k(k), sigma_floor(sigma_floor) {}
    int k;
    double sigma_floor;
    double value_grad(std::span<const double> out, double target,
                      std::span<double> grad) const override;
};

std::vector<double> softmax(std::span<const double> logits);

} // namespace epic
