#include "epic/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace epic {

namespace {

PredictionBand band_or_degenerate(double lo, double hi, double threshold) {
    if (!(threshold < std::numeric_limits<double>::infinity()))
        return PredictionBand{-std::numeric_limits<double>::infinity(),
                              std::numeric_limits<double>::infinity(), true};
    return PredictionBand{lo, hi, false};
}

} // namespace

PredictionBand reg_split_interval(double g_val, double threshold) {
    return band_or_degenerate(g_val - threshold, g_val + threshold, threshold);
}

PredictionBand reg_split_interval(const Predictor& g, double threshold,
                                  std::span<const double> x) {
    return reg_split_interval(g.predict(x), threshold);
}

PredictionBand weighted_interval(double g_val, double mad_val, double threshold) {
    const double half = threshold * std::max(mad_val, kMadFloor);
    return band_or_degenerate(g_val - half, g_val + half, threshold);
}

PredictionBand weighted_interval(const Predictor& g, const Predictor& mad, double threshold,
                                 std::span<const double> x) {
    return weighted_interval(g.predict(x), mad.predict(x), threshold);
}

std::size_t MondrianBins::bin_of(double difficulty) const {
    return static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), difficulty) - edges.begin());
}

MondrianBins mondrian_calibrate(std::span<const double> difficulty,
                                std::span<const double> scores, NominalLevel alpha,
                                std::size_t n_bins, std::size_t min_count) {
    if (n_bins < 1) throw InvalidN("mondrian_calibrate: n_bins must be >= 1");
    if (difficulty.size() != scores.size())
        throw LengthMismatch("mondrian_calibrate: difficulty/scores length mismatch");
    if (difficulty.size() < n_bins * min_count && n_bins > 1)
        throw InsufficientData("mondrian_calibrate: calibration set smaller than bins");

    MondrianBins bins;
    bins.min_count = min_count;

    // equal-mass edges from difficulty quantiles
    std::vector<double> sorted(difficulty.begin(), difficulty.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t b = 1; b < n_bins; ++b) {
        const std::size_t pos = b * sorted.size() / n_bins;
        bins.edges.push_back(sorted[pos]);
    }
    bins.edges.erase(std::unique(bins.edges.begin(), bins.edges.end()), bins.edges.end());

    auto count_bins = [&]() {
        std::vector<std::size_t> counts(bins.edges.size() + 1, 0);
        for (double d : difficulty) counts[bins.bin_of(d)] += 1;
        return counts;
    };
    bins.counts = count_bins();

    // merge undersized bins into the smaller adjacent neighbor
    while (bins.edges.size() > 0) {
        std::size_t worst = 0;
        for (std::size_t b = 1; b < bins.counts.size(); ++b)
            if (bins.counts[b] < bins.counts[worst]) worst = b;
        if (bins.counts[worst] >= min_count) break;
        std::size_t edge_to_drop;
        if (worst == 0)
            edge_to_drop = 0;
        else if (worst == bins.counts.size() - 1)
            edge_to_drop = bins.edges.size() - 1;
        else
            edge_to_drop = bins.counts[worst - 1] <= bins.counts[worst + 1] ? worst - 1 : worst;
        bins.edges.erase(bins.edges.begin() + static_cast<std::ptrdiff_t>(edge_to_drop));
        bins.counts = count_bins();
    }

    const std::size_t final_bins = bins.edges.size() + 1;
    std::vector<std::vector<double>> grouped(final_bins);
    for (std::size_t i = 0; i < difficulty.size(); ++i)
        grouped[bins.bin_of(difficulty[i])].push_back(scores[i]);
    bins.thresholds.resize(final_bins);
    for (std::size_t b = 0; b < final_bins; ++b)
        bins.thresholds[b] = conformal_quantile(grouped[b], alpha);
    return bins;
}

PredictionBand mondrian_interval(double g_val, const MondrianBins& bins,
                                 double difficulty_val) {
    const double threshold = bins.thresholds[bins.bin_of(difficulty_val)];
    return band_or_degenerate(g_val - threshold, g_val + threshold, threshold);
}

PredictionBand cqr_interval(double q_lo_val, double q_hi_val, double threshold) {
    return band_or_degenerate(q_lo_val - threshold, q_hi_val + threshold, threshold);
}

double cqr_r_score(double q_lo_val, double q_hi_val, double y) {
    const double width = std::max(q_hi_val - q_lo_val, kCqrWidthFloor);
    return std::max(q_lo_val - y, y - q_hi_val) / width;
}

PredictionBand cqr_r_interval(double q_lo_val, double q_hi_val, double threshold_r) {
    const double width = std::max(q_hi_val - q_lo_val, kCqrWidthFloor);
    return band_or_degenerate(q_lo_val - threshold_r * width, q_hi_val + threshold_r * width,
                              threshold_r);
}

} // namespace epic
