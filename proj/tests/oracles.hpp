#pragma once
// Test-side oracle predictives: closed-form conditional CDFs injected behind
// the production interface.

#include <functional>
#include <memory>
#include <stdexcept>

#include "epic/mathx.hpp"
#include "epic/predictive.hpp"

namespace epic::testing {

// Conditional CDF supplied as a callable; inversion runs through the same
// bracketed bisection as the fitted models.
class OraclePredictive final : public PredictiveModel {
public:
    using CdfFn = std::function<double(std::span<const double>, double)>;

    OraclePredictive(CdfFn cdf, double lo, double hi, double scale = 1.0)
        : cdf_(std::move(cdf)), lo_(lo), hi_(hi), scale_(scale) {}

    std::string kind_name() const override { return "oracle"; }
    std::uint64_t seed() const override { return 0; }
    void save(std::ostream&) const override {
        throw std::logic_error("oracle predictive is not serializable");
    }

    std::unique_ptr<ConditionalCdf> condition(std::span<const double> x) const override {
        struct Slice final : ConditionalCdf {
            const OraclePredictive* self;
            std::vector<double> x;
            double cdf(double s) const override { return self->cdf_(x, s); }
            std::pair<double, double> bracket() const override {
                return {self->lo_, self->hi_};
            }
            double unit_scale() const override { return self->scale_; }
        };
        auto slice = std::make_unique<Slice>();
        slice->self = this;
        slice->x.assign(x.begin(), x.end());
        return slice;
    }

private:
    CdfFn cdf_;
    double lo_, hi_, scale_;
};

inline std::shared_ptr<OraclePredictive> gaussian_oracle(
    std::function<double(std::span<const double>)> mu,
    std::function<double(std::span<const double>)> sigma, double lo, double hi) {
    auto cdf = [mu, sigma](std::span<const double> x, double s) {
        return mathx::normal_cdf((s - mu(x)) / sigma(x));
    };
    return std::make_shared<OraclePredictive>(cdf, lo, hi);
}

} // namespace epic::testing
