#pragma once
// Evaluation metrics over prediction bands and sets.

#include <optional>
#include <span>
#include <vector>

#include "epic/core.hpp"
#include "epic/epic.hpp"

namespace epic {

// interval score: width plus 2/alpha-weighted miss penalties
double aisl(std::span<const PredictionBand> bands, std::span<const double> ys,
            NominalLevel alpha);

double marginal_coverage(std::span<const PredictionBand> bands, std::span<const double> ys);
double marginal_coverage(std::span<const PredictionSet> sets, std::span<const int> ys);

double mean_interval_length(std::span<const PredictionBand> bands);

// |Pearson corr| between the coverage indicator and the band width; nullopt
// when either is constant
std::optional<double> coverage_width_corr(std::span<const PredictionBand> bands,
                                          std::span<const double> ys);

// minimum within-bin coverage, bins stratified by set cardinality; bin g
// collects all sets of size >= g
std::optional<double> ssc(std::span<const PredictionSet> sets, std::span<const int> ys,
                          std::size_t g_bins = 15);

} // namespace epic
