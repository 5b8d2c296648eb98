#pragma once
// Split-conformal engine: the inflated empirical quantile, score calibration,
// and the finite-sample coverage band implied by it.

#include <limits>
#include <span>
#include <string>

#include "epic/errors.hpp"

namespace epic {

// Miscoverage level, constrained to (0, 1).
class NominalLevel {
public:
    explicit NominalLevel(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw InvalidAlpha("alpha must lie in (0,1), got " + std::to_string(alpha));
    }
    double alpha() const { return alpha_; }
    double coverage() const { return 1.0 - alpha_; }

private:
    double alpha_;
};

struct CalibrationResult {
    double threshold;   // +inf sentinel when the order-statistic index exceeds n_cal
    std::size_t n_cal;
    std::string score_id;
    double alpha;

    bool degenerate() const { return !(threshold < std::numeric_limits<double>::infinity()); }
};

// Finite-sample coverage band: lower = 1-alpha, raw upper = 1-alpha + 1/(1+n2).
// The raw upper is stored even when it exceeds 1; clamped flags that case.
struct CoverageBounds {
    double lower;
    double upper_raw;
    std::size_t n2;
    bool clamped;

    double upper() const { return clamped ? 1.0 : upper_raw; }
};

// k-th smallest score with k = ceil((n+1)(1-alpha)); +inf sentinel when k > n.
double conformal_quantile(std::span<const double> scores, NominalLevel alpha);

CalibrationResult calibrate(std::span<const double> score_values, NominalLevel alpha,
                            std::string score_id);

CoverageBounds coverage_bounds(std::size_t n2, NominalLevel alpha);

} // namespace epic
