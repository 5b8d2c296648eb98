#include "epic/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace epic {

double aisl(std::span<const PredictionBand> bands, std::span<const double> ys,
            NominalLevel alpha) {
    if (bands.size() != ys.size()) throw LengthMismatch("aisl: bands/ys length mismatch");
    if (bands.empty()) throw LengthMismatch("aisl: empty input");
    const double penalty = 2.0 / alpha.alpha();
    double acc = 0.0;
    for (std::size_t i = 0; i < bands.size(); ++i) {
        const PredictionBand& band = bands[i];
        if (band.degenerate) throw DegenerateBand("aisl: full-space band");
        double v = band.hi - band.lo;
        if (ys[i] < band.lo) v += penalty * (band.lo - ys[i]);
        if (ys[i] > band.hi) v += penalty * (ys[i] - band.hi);
        acc += v;
    }
    return acc / static_cast<double>(bands.size());
}

double marginal_coverage(std::span<const PredictionBand> bands, std::span<const double> ys) {
    if (bands.size() != ys.size())
        throw LengthMismatch("marginal_coverage: length mismatch");
    if (bands.empty()) throw LengthMismatch("marginal_coverage: empty input");
    std::size_t covered = 0;
    for (std::size_t i = 0; i < bands.size(); ++i)
        if (bands[i].covers(ys[i])) ++covered;
    return static_cast<double>(covered) / static_cast<double>(bands.size());
}

double marginal_coverage(std::span<const PredictionSet> sets, std::span<const int> ys) {
    if (sets.size() != ys.size()) throw LengthMismatch("marginal_coverage: length mismatch");
    if (sets.empty()) throw LengthMismatch("marginal_coverage: empty input");
    std::size_t covered = 0;
    for (std::size_t i = 0; i < sets.size(); ++i)
        if (sets[i].contains(ys[i])) ++covered;
    return static_cast<double>(covered) / static_cast<double>(sets.size());
}

double mean_interval_length(std::span<const PredictionBand> bands) {
    if (bands.empty()) throw LengthMismatch("mean_interval_length: empty input");
    double acc = 0.0;
    for (const PredictionBand& band : bands) {
        if (band.degenerate) throw DegenerateBand("mean_interval_length: full-space band");
        acc += band.hi - band.lo;
    }
    return acc / static_cast<double>(bands.size());
}

std::optional<double> coverage_width_corr(std::span<const PredictionBand> bands,
                                          std::span<const double> ys) {
    if (bands.size() != ys.size())
        throw LengthMismatch("coverage_width_corr: length mismatch");
    const std::size_t n = bands.size();
    if (n < 2) return std::nullopt;
    double mean_c = 0.0, mean_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_c += bands[i].covers(ys[i]) ? 1.0 : 0.0;
        mean_w += bands[i].width();
    }
    mean_c /= static_cast<double>(n);
    mean_w /= static_cast<double>(n);
    double scc = 0.0, sww = 0.0, scw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dc = (bands[i].covers(ys[i]) ? 1.0 : 0.0) - mean_c;
        const double dw = bands[i].width() - mean_w;
        scc += dc * dc;
        sww += dw * dw;
        scw += dc * dw;
    }
    if (scc <= 0.0 || sww <= 0.0) return std::nullopt;
    return std::fabs(scw / std::sqrt(scc * sww));
}

std::optional<double> ssc(std::span<const PredictionSet> sets, std::span<const int> ys,
                          std::size_t g_bins) {
    if (sets.size() != ys.size()) throw LengthMismatch("ssc: length mismatch");
    if (sets.empty()) return std::nullopt;
    std::vector<std::size_t> total(g_bins + 1, 0);
    std::vector<std::size_t> covered(g_bins + 1, 0);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const std::size_t bin = std::min(sets[i].size(), g_bins);
        total[bin] += 1;
        if (sets[i].contains(ys[i])) covered[bin] += 1;
    }
    std::optional<double> worst;
    for (std::size_t b = 0; b <= g_bins; ++b) {
        if (total[b] == 0) continue;
        const double cov = static_cast<double>(covered[b]) / static_cast<double>(total[b]);
        if (!worst || cov < *worst) worst = cov;
    }
    return worst;
}

} // namespace epic
