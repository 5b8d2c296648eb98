#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "epic/epic.hpp"
#include "epic/mathx.hpp"
#include "epic/metrics.hpp"
#include "epic/rng.hpp"
#include "oracles.hpp"

using namespace epic;

namespace {

struct ConstPredictor final : Predictor {
    double value;
    explicit ConstPredictor(double v) : value(v) {}
    double predict(std::span<const double>) const override { return value; }
    std::string kind() const override { return "const"; }
};

Dataset make_1d(std::vector<double> x, std::vector<double> y) {
    Dataset ds;
    ds.n = x.size();
    ds.p = 1;
    ds.features = std::move(x);
    ds.target = std::move(y);
    ds.columns = {"x"};
    return ds;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

// knn-empirical predictive over fixed neighbor scores 1..9 (all x identical
// so every query sees the same neighbor set)
std::shared_ptr<const PredictiveModel> nine_score_predictive() {
    std::vector<double> x(9, 0.0);
    std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9};
    PredictiveConfig cfg;
    cfg.knn.k = 9;
    return fit_predictive(PredictiveKind::knn_empirical, x, 9, 1, s, cfg, 1);
}

} // namespace

TEST_CASE("epic score is the predictive cdf at the base score") {
    const auto predictive = nine_score_predictive();
    EpicPipeline pipeline;
    pipeline.score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    pipeline.predictive = predictive;
    const double q = 0.0;
    const std::span<const double> xq(&q, 1);
    CHECK(epic_score(pipeline, xq, 5.0) == doctest::Approx(5.0 / 9.0));
    CHECK(epic_score(pipeline, xq, 0.5) == doctest::Approx(0.0));
    CHECK(epic_score(pipeline, xq, 9.5) == doctest::Approx(1.0));
    // label form: g = 0, so the base score of candidate y = -5 is 5
    CHECK(epic_score_label(pipeline, xq, -5.0) == doctest::Approx(5.0 / 9.0));
}

TEST_CASE("oracle predictive makes transformed calibration scores uniform") {
    // residual scores |y|, y ~ N(0, 1): true cdf of the score is erf-shaped
    Rng rng(3);
    const std::size_t n = 1000;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    auto oracle = std::make_shared<testing::OraclePredictive>(
        [](std::span<const double>, double s) {
            return s < 0.0 ? 0.0 : std::erf(s * 0.7071067811865475244);
        },
        0.0, 10.0);

    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    const auto rows = iota_rows(n);
    const EpicPipeline pipeline =
        epic_calibrate_with_predictive(score, oracle, ds, rows, NominalLevel(0.1), 0);

    std::vector<double> s_prime(n);
    for (std::size_t i = 0; i < n; ++i) s_prime[i] = epic_score(pipeline, ds, i);
    std::sort(s_prime.begin(), s_prime.end());
    CHECK(mathx::ks_statistic_uniform(s_prime) < 0.05);
}

TEST_CASE("epic_calibrate splits 10 points into 7 and 3") {
    Rng rng(5);
    std::vector<double> x(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    PredictiveConfig cfg;
    cfg.knn.k = 5;
    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    // 10-point calibration: rule gives cal2 = 3 < 5 -> SplitTooSmall
    CHECK_THROWS_AS(epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                   iota_rows(10), NominalLevel(0.1), cfg, 1),
                    SplitTooSmall);
}

TEST_CASE("a custom split rule can calibrate 10 points as 5/5") {
    Rng rng(15);
    std::vector<double> x(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    PredictiveConfig cfg;
    cfg.knn.k = 5;
    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    const CalSplitRule half{0.5, 1000, 3000};
    const EpicPipeline pipeline = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                                 iota_rows(10), NominalLevel(0.1), cfg, 1,
                                                 half);
    CHECK(pipeline.n_cal1 == 5);
    CHECK(pipeline.n_cal2 == 5);
    const CoverageBounds bounds = coverage_bounds(pipeline.n_cal2, NominalLevel(0.1));
    CHECK(bounds.upper_raw == doctest::Approx(0.9 + 1.0 / 6.0));
}

TEST_CASE("epic_calibrate is deterministic under a fixed seed") {
    Rng rng(6);
    const std::size_t n = 60;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    PredictiveConfig cfg;
    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    const EpicPipeline a = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                          iota_rows(n), NominalLevel(0.1), cfg, 42);
    const EpicPipeline b = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                          iota_rows(n), NominalLevel(0.1), cfg, 42);
    CHECK(a.calibration.threshold == b.calibration.threshold);
    CHECK(a.n_cal1 == 42);  // 60-point calibration: 30% -> 18 for cutoffs
    CHECK(a.n_cal2 == 18);
    const CoverageBounds bounds = coverage_bounds(a.n_cal2, NominalLevel(0.1));
    CHECK(bounds.upper_raw == doctest::Approx(0.9 + 1.0 / 19.0));
}

TEST_CASE("regression interval from counting predictive") {
    EpicPipeline pipeline;
    pipeline.score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    pipeline.predictive = nine_score_predictive();
    pipeline.calibration = CalibrationResult{5.0 / 9.0, 9, "residual", 0.1};

    const double q = 0.0;
    const PredictionBand band =
        epic_interval_regression_at(pipeline, std::span<const double>(&q, 1));
    CHECK(band.lo == doctest::Approx(-5.0));
    CHECK(band.hi == doctest::Approx(5.0));
    CHECK_FALSE(band.degenerate);

    // t below the smallest neighbor mass still returns the first order
    // statistic; the zero clamp needs a negative-capable predictive
    auto gauss = testing::gaussian_oracle([](auto) { return -3.0; }, [](auto) { return 0.5; },
                                          -10.0, 10.0);
    pipeline.predictive = gauss;
    pipeline.calibration.threshold = 0.5;
    const PredictionBand clamped =
        epic_interval_regression_at(pipeline, std::span<const double>(&q, 1));
    CHECK(clamped.lo == doctest::Approx(0.0));
    CHECK(clamped.hi == doctest::Approx(0.0));

    // midpoint is g(x) exactly
    pipeline.score = make_residual_score(std::make_shared<ConstPredictor>(7.25));
    pipeline.predictive = nine_score_predictive();
    pipeline.calibration.threshold = 0.4;
    const PredictionBand mid =
        epic_interval_regression_at(pipeline, std::span<const double>(&q, 1));
    CHECK(0.5 * (mid.lo + mid.hi) == doctest::Approx(7.25));
}

TEST_CASE("degenerate threshold produces the full-space band") {
    EpicPipeline pipeline;
    pipeline.score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    pipeline.predictive = nine_score_predictive();
    pipeline.calibration =
        CalibrationResult{std::numeric_limits<double>::infinity(), 3, "residual", 0.01};
    const double q = 0.0;
    const PredictionBand band =
        epic_interval_regression_at(pipeline, std::span<const double>(&q, 1));
    CHECK(band.degenerate);
    CHECK(band.covers(1e12));
}

TEST_CASE("closed form normal band: hand values and scaling") {
    // mu = 0: center g, zero half-width at t = 0.5
    const PredictionBand b1 = epic_interval_normal_closed_form(2.0, 0.0, 1.0, 0.5);
    CHECK(b1.lo == doctest::Approx(2.0));
    CHECK(b1.hi == doctest::Approx(2.0));

    const PredictionBand b2 = epic_interval_normal_closed_form(0.0, 0.0, 1.0, 0.975);
    CHECK(b2.hi == doctest::Approx(1.95996).epsilon(1e-5));

    const PredictionBand s1 = epic_interval_normal_closed_form(0.0, 0.0, 1.0, 0.8);
    const PredictionBand s2 = epic_interval_normal_closed_form(0.0, 0.0, 2.0, 0.8);
    CHECK(s2.hi == doctest::Approx(2.0 * s1.hi).epsilon(1e-12));

    CHECK_THROWS_AS(epic_interval_normal_closed_form(0, 0, 1, 0.0), InvalidT);
    CHECK_THROWS_AS(epic_interval_normal_closed_form(0, 0, 1, 1.0), InvalidT);
}

TEST_CASE("closed form equals the bisection route through a gaussian predictive") {
    Rng rng(9);
    for (int rep = 0; rep < 200; ++rep) {
        const double mu = rng.uniform(-1.0, 3.0);
        const double sigma = rng.uniform(0.05, 2.0);
        const double t = rng.uniform(0.02, 0.98);
        const double g = rng.uniform(-5.0, 5.0);

        EpicPipeline pipeline;
        pipeline.score = make_residual_score(std::make_shared<ConstPredictor>(g));
        pipeline.predictive = testing::gaussian_oracle(
            [mu](auto) { return mu; }, [sigma](auto) { return sigma; }, mu - 20 * sigma,
            mu + 20 * sigma);
        pipeline.calibration = CalibrationResult{t, 100, "residual", 0.1};

        const double q = 0.0;
        const PredictionBand numeric =
            epic_interval_regression_at(pipeline, std::span<const double>(&q, 1));
        const PredictionBand closed = epic_interval_normal_closed_form(g, mu, sigma, t);
        CHECK(numeric.lo == doctest::Approx(closed.lo).epsilon(1e-6));
        CHECK(numeric.hi == doctest::Approx(closed.hi).epsilon(1e-6));
        CHECK(std::fabs((numeric.hi - numeric.lo) - (closed.hi - closed.lo)) < 2e-6);
    }
}

TEST_CASE("cqr interval expands both ends by the inverted threshold") {
    auto qlo = std::make_shared<ConstPredictor>(0.0);
    auto qhi = std::make_shared<ConstPredictor>(1.0);
    EpicPipeline pipeline;
    pipeline.score = make_cqr_score(qlo, qhi);
    const double q = 0.0;
    const std::span<const double> xq(&q, 1);

    // F^{-1} pinned near a constant via a needle-thin gaussian
    for (double target : {0.0, 0.25, -0.2}) {
        pipeline.predictive = testing::gaussian_oracle(
            [target](auto) { return target; }, [](auto) { return 1e-9; }, -5.0, 5.0);
        pipeline.calibration = CalibrationResult{0.5, 50, "cqr", 0.1};
        const PredictionBand band = epic_interval_cqr_at(pipeline, xq);
        CHECK(band.lo == doctest::Approx(0.0 - target).epsilon(1e-6));
        CHECK(band.hi == doctest::Approx(1.0 + target).epsilon(1e-6));
    }
}

TEST_CASE("classification sets: hand case, ties, and edge thresholds") {
    const std::vector<double> base{0.5, 0.3, 0.2};
    const std::vector<double> pred = base;
    const PredictionSet set = epic_set_classification(pred, base, 0.85);
    CHECK(set.s_prime[0] == doctest::Approx(0.5));
    CHECK(set.s_prime[1] == doctest::Approx(0.8));
    CHECK(set.s_prime[2] == doctest::Approx(1.0));
    CHECK(set.labels == std::vector<int>{0, 1});

    // t = 1 keeps everything
    CHECK(epic_set_classification(pred, base, 1.0).labels == std::vector<int>{0, 1, 2});

    // uniform predictive over 4 labels, strictly ordered base, t = 0.5
    const std::vector<double> base4{0.4, 0.3, 0.2, 0.1};
    const std::vector<double> uniform4(4, 0.25);
    const PredictionSet top2 = epic_set_classification(uniform4, base4, 0.5);
    CHECK(top2.labels == std::vector<int>{0, 1});

    // tie group shares the cumulative value of the whole group
    const std::vector<double> tied_base{0.4, 0.25, 0.25, 0.1};
    const std::vector<double> pred2{0.1, 0.2, 0.3, 0.4};
    const PredictionSet tied = epic_set_classification(pred2, tied_base, 2.0);
    CHECK(tied.s_prime[1] == doctest::Approx(tied.s_prime[2]));
    CHECK(tied.s_prime[1] == doctest::Approx(0.1 + 0.2 + 0.3));

    const std::vector<double> mismatched{0.5, 0.5};
    CHECK_THROWS_AS(epic_set_classification(mismatched, base, 0.5), AlphabetMismatch);
}

TEST_CASE("aps-base and neg-prob-base orderings give identical sets") {
    Rng rng(11);
    for (int rep = 0; rep < 500; ++rep) {
        const int k = 2 + static_cast<int>(rng.below(12));
        std::vector<double> base(k), pred(k);
        double zb = 0.0, zp = 0.0;
        for (int c = 0; c < k; ++c) {
            base[c] = rng.uniform() + 1e-6;
            pred[c] = rng.uniform() + 1e-6;
            zb += base[c];
            zp += pred[c];
        }
        for (int c = 0; c < k; ++c) {
            base[c] /= zb;
            pred[c] /= zp;
        }
        const double t = rng.uniform();

        // ordering by aps scores ascending equals base probs descending;
        // brute-force both score forms
        std::vector<double> s_aps(k), s_neg(k);
        for (int c = 0; c < k; ++c) {
            s_aps[c] = aps_score(base, c);
            s_neg[c] = neg_prob_score(base, c);
        }
        auto brute_scores = [&](const std::vector<double>& s_base) {
            std::vector<double> sp(k, 0.0);
            for (int c = 0; c < k; ++c)
                for (int j = 0; j < k; ++j)
                    if (s_base[j] <= s_base[c]) sp[c] += pred[j];
            return sp;
        };
        auto members_of = [&](const std::vector<double>& sp) {
            std::vector<int> members;
            for (int c = 0; c < k; ++c)
                if (sp[c] <= t) members.push_back(c);
            return members;
        };
        const PredictionSet set = epic_set_classification(pred, base, t);
        const std::vector<double> sp_aps = brute_scores(s_aps);
        const std::vector<double> sp_neg = brute_scores(s_neg);
        for (int c = 0; c < k; ++c) {
            CHECK(set.s_prime[c] == doctest::Approx(sp_aps[c]).epsilon(1e-12));
            CHECK(sp_aps[c] == doctest::Approx(sp_neg[c]).epsilon(1e-12));
        }
        CHECK(set.labels == members_of(sp_aps));
        CHECK(set.labels == members_of(sp_neg));
    }
}

TEST_CASE("monotone nesting in alpha for intervals and sets") {
    Rng rng(13);
    const std::size_t n = 400;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = rng.normal(0.0, 1.0 + x[i]);
    }
    const Dataset ds = make_1d(x, y);
    PredictiveConfig cfg;
    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));

    const EpicPipeline tight = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                              iota_rows(n), NominalLevel(0.05), cfg, 7);
    const EpicPipeline loose = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                              iota_rows(n), NominalLevel(0.3), cfg, 7);
    for (double q = 0.05; q < 1.0; q += 0.1) {
        const std::span<const double> xq(&q, 1);
        const PredictionBand wide = epic_interval_regression_at(tight, xq);
        const PredictionBand narrow = epic_interval_regression_at(loose, xq);
        CHECK(wide.lo <= narrow.lo + 1e-12);
        CHECK(wide.hi >= narrow.hi - 1e-12);
    }

    // sets: lower alpha -> higher threshold -> superset
    const std::vector<double> base{0.4, 0.3, 0.2, 0.1};
    const std::vector<double> pred{0.25, 0.25, 0.25, 0.25};
    const PredictionSet big = epic_set_classification(pred, base, 0.8);
    const PredictionSet small = epic_set_classification(pred, base, 0.4);
    for (int label : small.labels) CHECK(big.contains(label));
}

TEST_CASE("the two region formulations agree on a dense candidate grid") {
    Rng rng(17);
    const std::size_t n = 500;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = std::sin(3.0 * x[i]) + 0.4 * rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    PredictorConfig gc;
    gc.kind = PredictorConfig::Kind::knn_mean;
    gc.k = 10;
    std::shared_ptr<const Predictor> g =
        fit_base_predictor(gc, ds, iota_rows(n), 3);
    const ScoreFunction score = make_residual_score(g);
    PredictiveConfig cfg;
    const EpicPipeline pipeline = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                                 iota_rows(n), NominalLevel(0.1), cfg, 5);
    const double t = pipeline.calibration.threshold;

    Dataset probe = make_1d({0.3}, {0.0});
    const double gx = g->predict(probe.row(0));
    const double radius = pipeline.predictive->invert_cdf(probe.row(0), t);

    for (double cand = gx - 3.0; cand <= gx + 3.0; cand += 0.05) {
        const double s = std::fabs(cand - gx);
        const double sp = pipeline.predictive->cdf(probe.row(0), s);
        const bool via_sprime = sp <= t;
        const bool via_inversion = s <= radius + 1e-9;
        CHECK(via_sprime == via_inversion);
    }
}

TEST_CASE("marginal coverage sits in the finite-sample band for every predictive kind") {
    const NominalLevel alpha(0.1);
    Rng data_rng(23);
    auto sample = [&](std::size_t n, std::vector<double>& x, std::vector<double>& y) {
        x.resize(n);
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = data_rng.uniform(0.0, 1.0);
            y[i] = std::sin(3.0 * x[i]) + (0.2 + 0.5 * x[i]) * data_rng.normal();
        }
    };
    std::vector<double> xc, yc, xt, yt;
    sample(1200, xc, yc);
    sample(800, xt, yt);
    Dataset cal_ds = make_1d(xc, yc);
    Dataset test_ds = make_1d(xt, yt);

    PredictorConfig gc;
    gc.kind = PredictorConfig::Kind::knn_mean;
    gc.k = 10;
    std::shared_ptr<const Predictor> g = fit_base_predictor(gc, cal_ds, iota_rows(1200), 3);
    const ScoreFunction score = make_residual_score(g);

    PredictiveConfig cfg;
    cfg.mdn.mc_passes = 25;
    cfg.mdn.max_epochs = 80;
    cfg.bart.burn_in = 80;
    cfg.bart.draws = 80;

    for (PredictiveKind kind : {PredictiveKind::gp_exact, PredictiveKind::mdn_dropout,
                                PredictiveKind::bart_lite, PredictiveKind::knn_empirical}) {
        CAPTURE(to_string(kind));
        const EpicPipeline pipeline =
            epic_calibrate(score, kind, cal_ds, iota_rows(1200), alpha, cfg, 29);
        std::vector<PredictionBand> bands(test_ds.n);
        std::vector<double> ys(test_ds.n);
        for (std::size_t i = 0; i < test_ds.n; ++i) {
            bands[i] = epic_interval_regression(pipeline, test_ds, i);
            ys[i] = test_ds.target[i];
        }
        const double rate = marginal_coverage(bands, ys);
        const CoverageBounds bounds = coverage_bounds(pipeline.n_cal2, alpha);
        const double eps =
            2.576 * std::sqrt(0.09 / test_ds.n) + 0.9 / std::sqrt(pipeline.n_cal2);
        CHECK(rate >= bounds.lower - eps);
        CHECK(rate <= bounds.upper() + eps);
    }
}

TEST_CASE("oracle predictive yields conditional coverage at fixed slices") {
    // with the true conditional cdf injected, coverage holds at each x
    Rng rng(31);
    const std::size_t n = 3000;
    std::vector<double> x(n), y(n);
    auto noise_sd = [](double xv) { return 0.2 + 1.3 * xv; };
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = noise_sd(x[i]) * rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    auto oracle = std::make_shared<testing::OraclePredictive>(
        [noise_sd](std::span<const double> xv, double s) {
            return s < 0.0 ? 0.0 : std::erf(s / (noise_sd(xv[0]) * 1.4142135623730951));
        },
        0.0, 50.0);
    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    const EpicPipeline pipeline = epic_calibrate_with_predictive(
        score, oracle, ds, iota_rows(n), NominalLevel(0.1), 0);

    for (double slice : {0.1, 0.5, 0.9}) {
        std::size_t covered = 0;
        const std::size_t reps = 4000;
        const std::span<const double> xq(&slice, 1);
        const PredictionBand band = epic_interval_regression_at(
            {make_residual_score(std::make_shared<ConstPredictor>(0.0)), oracle,
             pipeline.calibration, pipeline.n_cal1, pipeline.n_cal2},
            xq);
        for (std::size_t i = 0; i < reps; ++i)
            covered += band.covers(noise_sd(slice) * rng.normal()) ? 1 : 0;
        const double rate = static_cast<double>(covered) / reps;
        CHECK(rate == doctest::Approx(0.9).epsilon(0.035));
    }
}

TEST_CASE("classification pipeline covers on separable blobs") {
    const auto [ds, model] = generate_blobs_classification(2500, 3, 1.3, 7);
    const DataSplit split = split_dataset(ds.n, {0.4, 0.4, 0.2}, 3);
    auto base = std::make_shared<KnnClassifier>(ds, split.train, 10);
    MdnConfig mdn_cfg;
    const EpicClassPipeline pipeline = epic_class_calibrate(
        base, LabelPredictiveKind::knn_label, ds, split.cal, NominalLevel(0.1), mdn_cfg, 5);

    std::vector<PredictionSet> sets;
    std::vector<int> ys;
    for (std::size_t row : split.test) {
        sets.push_back(epic_class_set(pipeline, ds.row(row)));
        ys.push_back(ds.labels[row]);
    }
    const double rate = marginal_coverage(sets, ys);
    CHECK(rate >= 0.9 - 2.576 * std::sqrt(0.09 / sets.size()) - 0.9 / std::sqrt(pipeline.n_cal2));

    // continuous-score mode also covers
    PredictiveConfig cfg;
    const EpicClassContinuousPipeline cont = epic_class_calibrate_continuous(
        base, PredictiveKind::knn_empirical, ds, split.cal, NominalLevel(0.1), cfg, 5);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < split.test.size(); ++i)
        covered += epic_class_set_continuous(cont, ds.row(split.test[i])).contains(ys[i]);
    const double rate2 = static_cast<double>(covered) / split.test.size();
    CHECK(rate2 >= 0.9 - 2.576 * std::sqrt(0.09 / split.test.size()) -
                       0.9 / std::sqrt(cont.calibration.n_cal));
}

TEST_CASE("pipeline save/load preserves threshold record and predictive") {
    Rng rng(37);
    const std::size_t n = 200;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = rng.normal();
    }
    const Dataset ds = make_1d(x, y);
    PredictiveConfig cfg;
    const ScoreFunction score = make_residual_score(std::make_shared<ConstPredictor>(0.0));
    const EpicPipeline pipeline = epic_calibrate(score, PredictiveKind::knn_empirical, ds,
                                                 iota_rows(n), NominalLevel(0.1), cfg, 11);
    const char* path = "test_pipeline_tmp.bin";
    save_pipeline(pipeline, path);
    const LoadedPipeline back = load_pipeline(path);
    CHECK(back.calibration.threshold == pipeline.calibration.threshold);
    CHECK(back.calibration.score_id == pipeline.calibration.score_id);
    CHECK(back.n_cal1 == pipeline.n_cal1);
    CHECK(back.n_cal2 == pipeline.n_cal2);
    const double q = 0.4;
    const std::span<const double> xq(&q, 1);
    CHECK(back.predictive->cdf(xq, 0.7) == pipeline.predictive->cdf(xq, 0.7));
    std::remove(path);
}
