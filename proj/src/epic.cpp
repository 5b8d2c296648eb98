#include "epic/epic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "epic/mathx.hpp"

namespace epic {

bool PredictionSet::contains(int y) const {
    return std::binary_search(labels.begin(), labels.end(), y);
}

double epic_score(const EpicPipeline& pipeline, std::span<const double> x,
                  double base_score_value) {
    return pipeline.predictive->cdf(x, base_score_value);
}

double epic_score(const EpicPipeline& pipeline, const Dataset& ds, std::size_t row) {
    return pipeline.predictive->cdf(ds.row(row), pipeline.score(ds, row));
}

double epic_score_label(const EpicPipeline& pipeline, std::span<const double> x, double y) {
    return pipeline.predictive->cdf(x, pipeline.score.value(x, y));
}

namespace {

std::vector<double> gather_rows(const Dataset& ds, std::span<const std::size_t> rows) {
    std::vector<double> out(rows.size() * ds.p);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(ds.row(rows[i]).data(), ds.p, out.data() + i * ds.p);
    return out;
}

} // namespace

EpicPipeline epic_calibrate(ScoreFunction score, PredictiveKind kind, const Dataset& ds,
                            std::span<const std::size_t> cal_indices, NominalLevel alpha,
                            const PredictiveConfig& config, std::uint64_t seed,
                            const CalSplitRule& split_rule) {
    auto [cal1, cal2] = split_calibration(cal_indices, seed, split_rule);
    if (cal1.size() < 5 || cal2.size() < 5)
        throw SplitTooSmall("epic_calibrate: calibration halves need >= 5 points each");

    std::vector<double> s1(cal1.size());
    for (std::size_t i = 0; i < cal1.size(); ++i) s1[i] = score(ds, cal1[i]);
    const std::vector<double> x1 = gather_rows(ds, cal1);

    std::shared_ptr<const PredictiveModel> predictive =
        fit_predictive(kind, x1, cal1.size(), ds.p, s1, config, seed);

    EpicPipeline pipeline = epic_calibrate_with_predictive(
        std::move(score), std::move(predictive), ds, cal2, alpha, cal1.size());
    return pipeline;
}

EpicPipeline epic_calibrate_with_predictive(
    ScoreFunction score, std::shared_ptr<const PredictiveModel> predictive,
    const Dataset& ds, std::span<const std::size_t> cal2_indices, NominalLevel alpha,
    std::size_t n_cal1) {
    std::vector<double> s_prime(cal2_indices.size());
    for (std::size_t i = 0; i < cal2_indices.size(); ++i) {
        const std::size_t row = cal2_indices[i];
        s_prime[i] = predictive->cdf(ds.row(row), score(ds, row));
    }
    CalibrationResult cal = calibrate(s_prime, alpha, "epic:" + score.id());

    EpicPipeline pipeline;
    pipeline.score = std::move(score);
    pipeline.predictive = std::move(predictive);
    pipeline.calibration = std::move(cal);
    pipeline.n_cal1 = n_cal1;
    pipeline.n_cal2 = cal2_indices.size();
    return pipeline;
}

namespace {

PredictionBand regression_band(const EpicPipeline& pipeline, std::span<const double> x,
                               double g_val) {
    if (pipeline.calibration.degenerate())
        return PredictionBand{-std::numeric_limits<double>::infinity(),
                              std::numeric_limits<double>::infinity(), true};
    double r = pipeline.predictive->invert_cdf(x, pipeline.calibration.threshold);
    r = std::max(r, 0.0);  // residual scores are non-negative
    return PredictionBand{g_val - r, g_val + r, false};
}

PredictionBand cqr_band(const EpicPipeline& pipeline, std::span<const double> x,
                        double q_lo, double q_hi) {
    if (pipeline.calibration.degenerate())
        return PredictionBand{-std::numeric_limits<double>::infinity(),
                              std::numeric_limits<double>::infinity(), true};
    // may be negative: the band shrinks
    const double r = pipeline.predictive->invert_cdf(x, pipeline.calibration.threshold);
    return PredictionBand{q_lo - r, q_hi + r, false};
}

} // namespace

PredictionBand epic_interval_regression(const EpicPipeline& pipeline, const Dataset& ds,
                                        std::size_t row) {
    return regression_band(pipeline, ds.row(row), pipeline.score.g->predict_row(ds, row));
}

PredictionBand epic_interval_regression_at(const EpicPipeline& pipeline,
                                           std::span<const double> x) {
    return regression_band(pipeline, x, pipeline.score.g->predict(x));
}

PredictionBand epic_interval_normal_closed_form(double g_val, double mu, double sigma,
                                                double t) {
    if (!(t > 0.0 && t < 1.0))
        throw InvalidT("epic_interval_normal_closed_form: t must lie in (0,1)");
    if (!(sigma > 0.0))
        throw std::invalid_argument("epic_interval_normal_closed_form: sigma must be > 0");
    const double half =
        std::max(mu + sigma * 1.4142135623730950488 * mathx::erf_inv(2.0 * t - 1.0), 0.0);
    return PredictionBand{g_val - half, g_val + half, false};
}

PredictionBand epic_interval_cqr(const EpicPipeline& pipeline, const Dataset& ds,
                                 std::size_t row) {
    const auto [lo, hi] = quantile_pair(pipeline.score, ds, row);
    return cqr_band(pipeline, ds.row(row), lo, hi);
}

PredictionBand epic_interval_cqr_at(const EpicPipeline& pipeline,
                                    std::span<const double> x) {
    const auto [lo, hi] =
        std::minmax({pipeline.score.q_lo->predict(x), pipeline.score.q_hi->predict(x)});
    return cqr_band(pipeline, x, lo, hi);
}

std::vector<double> epic_class_scores(std::span<const double> predictive_probs,
                                      std::span<const double> base_probs) {
    if (predictive_probs.size() != base_probs.size())
        throw AlphabetMismatch("epic_class_scores: label alphabets differ");
    const std::size_t k = base_probs.size();

    // base score ascending == base probability descending (both score forms
    // induce this ordering)
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return base_probs[a] > base_probs[b];
    });

    std::vector<double> s_prime(k);
    double cumulative = 0.0;
    std::size_t i = 0;
    while (i < k) {
        std::size_t j = i;
        double group = 0.0;
        while (j < k && base_probs[order[j]] == base_probs[order[i]]) {
            group += predictive_probs[order[j]];
            ++j;
        }
        cumulative += group;  // ties share the whole group's cumulative value
        for (std::size_t g = i; g < j; ++g) s_prime[order[g]] = cumulative;
        i = j;
    }
    return s_prime;
}

PredictionSet epic_set_classification(std::span<const double> predictive_probs,
                                      std::span<const double> base_probs, double t) {
    PredictionSet set;
    set.s_prime = epic_class_scores(predictive_probs, base_probs);
    for (std::size_t y = 0; y < set.s_prime.size(); ++y)
        if (set.s_prime[y] <= t) set.labels.push_back(static_cast<int>(y));
    return set;
}

EpicClassPipeline epic_class_calibrate(std::shared_ptr<const Classifier> base,
                                       LabelPredictiveKind kind, const Dataset& ds,
                                       std::span<const std::size_t> cal_indices,
                                       NominalLevel alpha, const MdnConfig& config,
                                       std::uint64_t seed) {
    auto [cal1, cal2] = split_calibration(cal_indices, seed);
    if (cal1.size() < 5 || cal2.size() < 5)
        throw SplitTooSmall("epic_class_calibrate: calibration halves need >= 5 points");

    std::shared_ptr<const PredictiveModel> label_predictive =
        fit_label_predictive(kind, ds, cal1, config, seed);

    std::vector<double> s_prime(cal2.size());
    for (std::size_t i = 0; i < cal2.size(); ++i) {
        const auto x = ds.row(cal2[i]);
        const std::vector<double> base_probs = base->probs(x);
        const std::vector<double> pred_probs = label_predictive->label_dist(x);
        s_prime[i] = epic_class_scores(pred_probs, base_probs)[ds.labels[cal2[i]]];
    }

    EpicClassPipeline pipeline;
    pipeline.base = std::move(base);
    pipeline.label_predictive = std::move(label_predictive);
    pipeline.calibration = calibrate(s_prime, alpha, "epic:aps");
    pipeline.n_cal1 = cal1.size();
    pipeline.n_cal2 = cal2.size();
    return pipeline;
}

PredictionSet epic_class_set(const EpicClassPipeline& pipeline, std::span<const double> x) {
    const std::vector<double> base_probs = pipeline.base->probs(x);
    const std::vector<double> pred_probs = pipeline.label_predictive->label_dist(x);
    const double t = pipeline.calibration.degenerate() ? 1.0 : pipeline.calibration.threshold;
    return epic_set_classification(pred_probs, base_probs, t);
}

EpicClassContinuousPipeline epic_class_calibrate_continuous(
    std::shared_ptr<const Classifier> base, PredictiveKind kind, const Dataset& ds,
    std::span<const std::size_t> cal_indices, NominalLevel alpha,
    const PredictiveConfig& config, std::uint64_t seed) {
    auto [cal1, cal2] = split_calibration(cal_indices, seed);
    if (cal1.size() < 5 || cal2.size() < 5)
        throw SplitTooSmall("epic_class_calibrate_continuous: halves need >= 5 points");

    std::vector<double> s1(cal1.size());
    for (std::size_t i = 0; i < cal1.size(); ++i)
        s1[i] = aps_score(base->probs(ds.row(cal1[i])), ds.labels[cal1[i]]);
    const std::vector<double> x1 = gather_rows(ds, cal1);
    std::shared_ptr<const PredictiveModel> predictive =
        fit_predictive(kind, x1, cal1.size(), ds.p, s1, config, seed);

    std::vector<double> s_prime(cal2.size());
    for (std::size_t i = 0; i < cal2.size(); ++i) {
        const auto x = ds.row(cal2[i]);
        s_prime[i] = predictive->cdf(x, aps_score(base->probs(x), ds.labels[cal2[i]]));
    }

    EpicClassContinuousPipeline pipeline;
    pipeline.base = std::move(base);
    pipeline.predictive = std::move(predictive);
    pipeline.calibration = calibrate(s_prime, alpha, "epic:aps_continuous");
    return pipeline;
}

PredictionSet epic_class_set_continuous(const EpicClassContinuousPipeline& pipeline,
                                        std::span<const double> x) {
    const std::vector<double> base_probs = pipeline.base->probs(x);
    PredictionSet set;
    set.s_prime.resize(base_probs.size());
    const double t = pipeline.calibration.degenerate() ? 1.0 : pipeline.calibration.threshold;
    for (std::size_t y = 0; y < base_probs.size(); ++y) {
        set.s_prime[y] =
            pipeline.predictive->cdf(x, aps_score(base_probs, static_cast<int>(y)));
        if (set.s_prime[y] <= t) set.labels.push_back(static_cast<int>(y));
    }
    return set;
}

void save_pipeline(const EpicPipeline& pipeline, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    nlohmann::json header;
    // +inf sentinel is not representable in JSON; null stands in for it
    if (pipeline.calibration.degenerate())
        header["threshold"] = nullptr;
    else
        header["threshold"] = pipeline.calibration.threshold;
    header["n_cal"] = pipeline.calibration.n_cal;
    header["score_id"] = pipeline.calibration.score_id;
    header["alpha"] = pipeline.calibration.alpha;
    header["n_cal1"] = pipeline.n_cal1;
    header["n_cal2"] = pipeline.n_cal2;
    const std::string hs = header.dump();
    const auto len = static_cast<std::uint32_t>(hs.size());
    out.write("EPICPL1\n", 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    pipeline.predictive->save(out);
}

LoadedPipeline load_pipeline(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open pipeline file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "EPICPL1\n")
        throw ParseError("not a pipeline file: " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string hs(len, '\0');
    in.read(hs.data(), len);
    const nlohmann::json header = nlohmann::json::parse(hs);

    LoadedPipeline out;
    const double threshold = header.at("threshold").is_null()
                                 ? std::numeric_limits<double>::infinity()
                                 : header.at("threshold").get<double>();
    out.calibration = CalibrationResult{threshold, header.at("n_cal").get<std::size_t>(),
                                        header.at("score_id").get<std::string>(),
                                        header.at("alpha").get<double>()};
    out.n_cal1 = header.at("n_cal1").get<std::size_t>();
    out.n_cal2 = header.at("n_cal2").get<std::size_t>();
    out.predictive = load_predictive(in);
    return out;
}

} // namespace epic
