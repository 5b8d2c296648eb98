#pragma once
// Comparison conformal methods: regression split, weighted split, Mondrian
// binning, CQR, and width-rescaled CQR.

#include <span>
#include <vector>

#include "epic/core.hpp"
#include "epic/epic.hpp"
#include "epic/scores.hpp"

namespace epic {

PredictionBand reg_split_interval(double g_val, double threshold);
PredictionBand reg_split_interval(const Predictor& g, double threshold,
                                  std::span<const double> x);

PredictionBand weighted_interval(double g_val, double mad_val, double threshold);
PredictionBand weighted_interval(const Predictor& g, const Predictor& mad, double threshold,
                                 std::span<const double> x);

struct MondrianBins {
    std::vector<double> edges;            // internal edges, ascending
    std::vector<double> thresholds;       // one per bin, edges.size()+1 bins
    std::vector<std::size_t> counts;      // calibration points per bin
    std::size_t min_count = 20;

    std::size_t bin_of(double difficulty) const;
};

// Equal-mass bins over the difficulty statistic with a per-bin conformal
// quantile; bins below min_count are merged into a neighbor.
MondrianBins mondrian_calibrate(std::span<const double> difficulty,
                                std::span<const double> scores, NominalLevel alpha,
                                std::size_t n_bins, std::size_t min_count = 20);

PredictionBand mondrian_interval(double g_val, const MondrianBins& bins,
                                 double difficulty_val);

PredictionBand cqr_interval(double q_lo_val, double q_hi_val, double threshold);

inline constexpr double kCqrWidthFloor = 1e-6;

// score for the rescaled variant: max(q_lo-y, y-q_hi) / max(width, floor)
double cqr_r_score(double q_lo_val, double q_hi_val, double y);
PredictionBand cqr_r_interval(double q_lo_val, double q_hi_val, double threshold_r);

} // namespace epic
