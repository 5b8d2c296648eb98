#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "epic/baselines.hpp"
#include "epic/rng.hpp"

using namespace epic;

TEST_CASE("reg split band is g plus minus t") {
    const PredictionBand band = reg_split_interval(1.0, 2.0);
    CHECK(band.lo == doctest::Approx(-1.0));
    CHECK(band.hi == doctest::Approx(3.0));
    CHECK(reg_split_interval(5.0, 2.0).width() == doctest::Approx(band.width()));

    // residuals 1..9 at alpha 0.1: k = ceil(10*0.9) = 9 -> t = 9
    std::vector<double> scores(9);
    std::iota(scores.begin(), scores.end(), 1.0);
    const double t = conformal_quantile(scores, NominalLevel(0.1));
    CHECK(t == doctest::Approx(9.0));
    CHECK(reg_split_interval(0.0, t).hi == doctest::Approx(9.0));
}

TEST_CASE("weighted band scales by the local spread with a floor") {
    CHECK(weighted_interval(0.0, 2.0, 1.5).hi == doctest::Approx(3.0));
    CHECK(weighted_interval(0.0, 2.0, 1.5).width() == doctest::Approx(6.0));
    // constant mad c reduces to reg split with threshold t*c
    const PredictionBand w = weighted_interval(1.0, 3.0, 0.5);
    const PredictionBand r = reg_split_interval(1.0, 1.5);
    CHECK(w.lo == doctest::Approx(r.lo));
    CHECK(w.hi == doctest::Approx(r.hi));
    CHECK(weighted_interval(0.0, 0.0, 2.0).hi == doctest::Approx(2.0 * 1e-6));
}

TEST_CASE("mondrian with one bin reduces to reg split") {
    Rng rng(3);
    std::vector<double> difficulty(200), scores(200);
    for (std::size_t i = 0; i < 200; ++i) {
        difficulty[i] = rng.uniform();
        scores[i] = rng.uniform();
    }
    const MondrianBins bins =
        mondrian_calibrate(difficulty, scores, NominalLevel(0.1), 1);
    const double t = conformal_quantile(scores, NominalLevel(0.1));
    CHECK(bins.thresholds.size() == 1);
    CHECK(bins.thresholds[0] == doctest::Approx(t));
    CHECK(mondrian_interval(2.0, bins, 0.3).hi == doctest::Approx(2.0 + t));
}

TEST_CASE("mondrian per-bin order statistics") {
    // two clearly separated difficulty groups with known residual scales
    std::vector<double> difficulty, scores;
    for (int i = 1; i <= 9; ++i) {
        difficulty.push_back(0.0);
        scores.push_back(i);  // 1..9
    }
    for (int i = 1; i <= 9; ++i) {
        difficulty.push_back(10.0);
        scores.push_back(10.0 * i);  // 10..90
    }
    const MondrianBins bins =
        mondrian_calibrate(difficulty, scores, NominalLevel(0.1), 2, 5);
    REQUIRE(bins.thresholds.size() == 2);
    CHECK(bins.thresholds[0] == doctest::Approx(9.0));
    CHECK(bins.thresholds[1] == doctest::Approx(90.0));
    CHECK(mondrian_interval(0.0, bins, -1.0).hi == doctest::Approx(9.0));
    CHECK(mondrian_interval(0.0, bins, 11.0).hi == doctest::Approx(90.0));
}

TEST_CASE("mondrian merges undersized bins created by ties") {
    // half the difficulty mass is a single tied value: quantile edges
    // collapse and the surviving small bins must merge up to min_count
    Rng rng(5);
    std::vector<double> difficulty(200), scores(200);
    for (std::size_t i = 0; i < 200; ++i) {
        difficulty[i] = i < 100 ? 0.0 : rng.uniform(1.0, 2.0);
        scores[i] = rng.normal();
    }
    const MondrianBins bins =
        mondrian_calibrate(difficulty, scores, NominalLevel(0.2), 10, 20);
    for (std::size_t c : bins.counts) CHECK(c >= 20);
    const std::size_t total = std::accumulate(bins.counts.begin(), bins.counts.end(),
                                              std::size_t{0});
    CHECK(total == 200);
    CHECK_THROWS_AS(mondrian_calibrate(std::vector<double>(60, 0.0),
                                       std::vector<double>(60, 0.0), NominalLevel(0.2), 10,
                                       20),
                    InsufficientData);
}

TEST_CASE("mondrian width tracks the noise level on synthetic data") {
    // difficulty equals the true noise scale; wider bins must get larger cutoffs
    Rng rng(11);
    std::vector<double> difficulty, scores;
    for (int i = 0; i < 1500; ++i) {
        const double noise = 0.5 + static_cast<double>(i % 3);  // 0.5, 1.5, 2.5
        difficulty.push_back(noise);
        scores.push_back(std::fabs(noise * rng.normal()));
    }
    const MondrianBins bins =
        mondrian_calibrate(difficulty, scores, NominalLevel(0.1), 3, 50);
    REQUIRE(bins.thresholds.size() == 3);
    CHECK(bins.thresholds[0] < bins.thresholds[1]);
    CHECK(bins.thresholds[1] < bins.thresholds[2]);
}

TEST_CASE("cqr band arithmetic") {
    CHECK(cqr_interval(0.0, 1.0, 0.0).lo == doctest::Approx(0.0));
    CHECK(cqr_interval(0.0, 1.0, 0.0).hi == doctest::Approx(1.0));
    const PredictionBand band = cqr_interval(0.0, 1.0, 0.5);
    CHECK(band.lo == doctest::Approx(-0.5));
    CHECK(band.hi == doctest::Approx(1.5));
    const PredictionBand shrunk = cqr_interval(0.0, 1.0, -0.2);
    CHECK(shrunk.lo == doctest::Approx(0.2));
    CHECK(shrunk.hi == doctest::Approx(0.8));
}

TEST_CASE("cqr-r scales by the width with a floor") {
    // unit width reduces to cqr
    const PredictionBand r = cqr_r_interval(0.0, 1.0, 0.25);
    const PredictionBand c = cqr_interval(0.0, 1.0, 0.25);
    CHECK(r.lo == doctest::Approx(c.lo));
    CHECK(r.hi == doctest::Approx(c.hi));

    const PredictionBand wide = cqr_r_interval(0.0, 2.0, 0.25);
    CHECK(wide.lo == doctest::Approx(-0.5));
    CHECK(wide.hi == doctest::Approx(2.5));

    const PredictionBand degenerate = cqr_r_interval(1.0, 1.0, 0.25);
    CHECK(std::isfinite(degenerate.lo));
    CHECK(std::isfinite(degenerate.hi));
    CHECK(degenerate.width() == doctest::Approx(0.25 * 2e-6).epsilon(1e-9));

    CHECK(cqr_r_score(0.0, 2.0, 3.0) == doctest::Approx(0.5));
    CHECK(cqr_r_score(0.0, 2.0, 1.0) == doctest::Approx(-0.5));
}

TEST_CASE("all baselines reach nominal coverage on iid synthetic data") {
    Rng rng(41);
    const NominalLevel alpha(0.1);
    const std::size_t n_cal = 900, n_test = 4000;

    // heteroscedastic 1-d model with known g and mad
    auto draw = [&](double& x, double& y) {
        x = rng.uniform(0.0, 1.0);
        y = 2.0 * x + (0.5 + x) * rng.normal();
    };
    auto g_of = [](double x) { return 2.0 * x; };
    auto mad_of = [](double x) { return 0.5 + x; };
    auto qlo_of = [&](double x) { return 2.0 * x + (0.5 + x) * (-1.2816); };
    auto qhi_of = [&](double x) { return 2.0 * x + (0.5 + x) * (1.2816); };

    std::vector<double> res_scores, wt_scores, cqr_scores, cqr_r_scores, difficulty;
    for (std::size_t i = 0; i < n_cal; ++i) {
        double x, y;
        draw(x, y);
        res_scores.push_back(std::fabs(y - g_of(x)));
        wt_scores.push_back(std::fabs(y - g_of(x)) / mad_of(x));
        cqr_scores.push_back(std::max(qlo_of(x) - y, y - qhi_of(x)));
        cqr_r_scores.push_back(cqr_r_score(qlo_of(x), qhi_of(x), y));
        difficulty.push_back(mad_of(x));
    }
    const double t_res = conformal_quantile(res_scores, alpha);
    const double t_wt = conformal_quantile(wt_scores, alpha);
    const double t_cqr = conformal_quantile(cqr_scores, alpha);
    const double t_cqr_r = conformal_quantile(cqr_r_scores, alpha);
    const MondrianBins bins = mondrian_calibrate(difficulty, res_scores, alpha, 5, 30);

    double cov_res = 0, cov_wt = 0, cov_m = 0, cov_cqr = 0, cov_cqr_r = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
        double x, y;
        draw(x, y);
        cov_res += reg_split_interval(g_of(x), t_res).covers(y);
        cov_wt += weighted_interval(g_of(x), mad_of(x), t_wt).covers(y);
        cov_m += mondrian_interval(g_of(x), bins, mad_of(x)).covers(y);
        cov_cqr += cqr_interval(qlo_of(x), qhi_of(x), t_cqr).covers(y);
        cov_cqr_r += cqr_r_interval(qlo_of(x), qhi_of(x), t_cqr_r).covers(y);
    }
    // finite-sample coverage band (mondrian bins are smaller: allow a wider margin)
    const double lo = 0.9 - 2.576 * std::sqrt(0.09 / n_test) - 0.9 / std::sqrt(n_cal);
    const double hi = 0.9 + 1.0 / (1.0 + n_cal / 5.0) + 2.576 * std::sqrt(0.09 / n_test) +
                      0.9 / std::sqrt(n_cal / 5.0);
    for (double cov : {cov_res, cov_wt, cov_m, cov_cqr, cov_cqr_r}) {
        const double rate = cov / n_test;
        CHECK(rate >= lo);
        CHECK(rate <= hi);
    }

    // reg-split width has zero variance across test points
    const double w0 = reg_split_interval(g_of(0.1), t_res).width();
    const double w1 = reg_split_interval(g_of(0.9), t_res).width();
    CHECK(w0 == doctest::Approx(w1));
}
