#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "epic/core.hpp"
#include "epic/mathx.hpp"
#include "epic/rng.hpp"

using namespace epic;

namespace {

// independent order-statistic oracle: sort and index
double sort_and_index_quantile(std::vector<double> scores, double alpha) {
    const double k = std::ceil((scores.size() + 1.0) * (1.0 - alpha));
    if (k > static_cast<double>(scores.size()))
        return std::numeric_limits<double>::infinity();
    std::sort(scores.begin(), scores.end());
    return scores[static_cast<std::size_t>(k) - 1];
}

} // namespace

TEST_CASE("conformal quantile on 1..99 at alpha 0.1 is the 90th order statistic") {
    std::vector<double> scores(99);
    std::iota(scores.begin(), scores.end(), 1.0);
    CHECK(conformal_quantile(scores, NominalLevel(0.1)) == doctest::Approx(90.0));
    CHECK(sort_and_index_quantile(scores, 0.1) == doctest::Approx(90.0));
}

TEST_CASE("all-equal scores return that value") {
    const std::vector<double> scores{3.5, 3.5, 3.5};
    CHECK(conformal_quantile(scores, NominalLevel(0.25)) == doctest::Approx(3.5));
}

TEST_CASE("index beyond n returns the +inf sentinel") {
    const std::vector<double> scores{1.0, 2.0, 3.0};
    CHECK(std::isinf(conformal_quantile(scores, NominalLevel(0.1))));
    CHECK(std::isinf(sort_and_index_quantile(scores, 0.1)));
}

TEST_CASE("single score at alpha 0.5 returns it") {
    const std::vector<double> scores{5.0};
    CHECK(conformal_quantile(scores, NominalLevel(0.5)) == doctest::Approx(5.0));
}

TEST_CASE("error paths") {
    CHECK_THROWS_AS(conformal_quantile(std::vector<double>{}, NominalLevel(0.1)),
                    EmptyCalibration);
    const std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(conformal_quantile(bad, NominalLevel(0.1)), NonFiniteScore);
    const std::vector<double> inf{1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(conformal_quantile(inf, NominalLevel(0.1)), NonFiniteScore);
    CHECK_THROWS_AS(NominalLevel(0.0), InvalidAlpha);
    CHECK_THROWS_AS(NominalLevel(1.0), InvalidAlpha);
    CHECK_THROWS_AS(coverage_bounds(0, NominalLevel(0.1)), InvalidN);
}

TEST_CASE("calibrate wraps the quantile and keeps metadata") {
    Rng rng(123);
    std::vector<double> scores(1000);
    for (double& s : scores) s = rng.uniform();
    const CalibrationResult cal = calibrate(scores, NominalLevel(0.1), "residual");
    CHECK(cal.n_cal == 1000);
    CHECK(cal.score_id == "residual");
    CHECK(cal.threshold == doctest::Approx(0.9).epsilon(0.034));
    CHECK_FALSE(cal.degenerate());

    const std::vector<double> zeros{0.0, 0.0, 0.0, 0.0};
    CHECK(calibrate(zeros, NominalLevel(0.2), "z").threshold == doctest::Approx(0.0));
}

TEST_CASE("coverage bounds direct substitutions") {
    const CoverageBounds b1 = coverage_bounds(999, NominalLevel(0.1));
    CHECK(b1.lower == doctest::Approx(0.9));
    CHECK(b1.upper() == doctest::Approx(0.901));
    CHECK_FALSE(b1.clamped);

    const CoverageBounds b2 = coverage_bounds(1, NominalLevel(0.5));
    CHECK(b2.lower == doctest::Approx(0.5));
    CHECK(b2.upper() == doctest::Approx(1.0));

    const CoverageBounds b3 = coverage_bounds(9, NominalLevel(0.05));
    CHECK(b3.lower == doctest::Approx(0.95));
    CHECK(b3.clamped);
    CHECK(b3.upper_raw == doctest::Approx(1.05));
    CHECK(b3.upper() == doctest::Approx(1.0));
}

TEST_CASE("quantile is monotone in alpha and permutation invariant") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 5 + rng.below(60);
        std::vector<double> scores(n);
        for (double& s : scores) s = rng.normal();

        double prev = std::numeric_limits<double>::infinity();
        for (double alpha : {0.05, 0.1, 0.2, 0.4, 0.8}) {
            const double q = conformal_quantile(scores, NominalLevel(alpha));
            CHECK(q <= prev);
            prev = q;
        }

        std::vector<double> shuffled = scores;
        rng.shuffle(shuffled);
        CHECK(conformal_quantile(shuffled, NominalLevel(0.17)) ==
              conformal_quantile(scores, NominalLevel(0.17)));
    }
}

TEST_CASE("conformal quantile dominates the standard empirical quantile") {
    // holds for alpha <= 1/2: ceil((n+1)(1-a)) >= (n-1)(1-a)+1 iff 2(1-a) >= 1
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 5 + rng.below(200);
        std::vector<double> scores(n);
        for (double& s : scores) s = rng.normal();
        const double alpha = 0.02 + 0.48 * rng.uniform();

        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        // linear-interpolation convention
        const double h = (static_cast<double>(n) - 1.0) * (1.0 - alpha);
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const double interp =
            sorted[lo] + (h - std::floor(h)) * (sorted[std::min(lo + 1, n - 1)] - sorted[lo]);

        CHECK(conformal_quantile(scores, NominalLevel(alpha)) >= interp - 1e-12);
    }
}

TEST_CASE("empirical coverage sits inside the finite-sample band") {
    Rng rng(31);
    const NominalLevel alpha(0.1);
    const std::size_t n_cal = 600;
    const std::size_t n_test = 40000;
    double covered = 0.0;
    std::vector<double> cal(n_cal);
    for (double& s : cal) s = rng.normal();
    const double threshold = conformal_quantile(cal, alpha);
    for (std::size_t i = 0; i < n_test; ++i) covered += rng.normal() <= threshold ? 1.0 : 0.0;
    const double rate = covered / static_cast<double>(n_test);

    const CoverageBounds bounds = coverage_bounds(n_cal, alpha);
    // 99% binomial CI half-width at the nominal level plus threshold noise
    const double eps = 2.576 * std::sqrt(0.9 * 0.1 / n_test) + 0.9 / std::sqrt(n_cal);
    CHECK(rate >= bounds.lower - eps);
    CHECK(rate <= bounds.upper() + eps);
}
