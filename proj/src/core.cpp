#include "epic/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace epic {

double conformal_quantile(std::span<const double> scores, NominalLevel alpha) {
    if (scores.empty()) throw EmptyCalibration{};
    for (double s : scores)
        if (!std::isfinite(s)) throw NonFiniteScore("calibration score is not finite");

    const std::size_t n = scores.size();
    const double raw_k = std::ceil((static_cast<double>(n) + 1.0) * alpha.coverage());
    const auto k = static_cast<std::size_t>(raw_k);
    if (k > n) return std::numeric_limits<double>::infinity();

    std::vector<double> sorted(scores.begin(), scores.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     sorted.end());
    return sorted[k - 1];
}

CalibrationResult calibrate(std::span<const double> score_values, NominalLevel alpha,
                            std::string score_id) {
    return CalibrationResult{conformal_quantile(score_values, alpha), score_values.size(),
                             std::move(score_id), alpha.alpha()};
}

CoverageBounds coverage_bounds(std::size_t n2, NominalLevel alpha) {
    if (n2 < 1) throw InvalidN("coverage_bounds: n2 must be >= 1");
    const double lower = alpha.coverage();
    const double upper_raw = lower + 1.0 / (1.0 + static_cast<double>(n2));
    return CoverageBounds{lower, upper_raw, n2, upper_raw > 1.0};
}

} // namespace epic
