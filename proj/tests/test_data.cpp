#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "epic/data.hpp"
#include "epic/mathx.hpp"
#include "epic/rng.hpp"

using namespace epic;

TEST_CASE("bimodal dgp construction fractions and support") {
    const Dataset ds = generate_bimodal_dgp(1000, 5);
    REQUIRE(ds.n == 1000);
    std::size_t outer = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const double x = ds.features[i];
        CHECK(x >= 0.0);
        CHECK(x <= 10.0);
        if (x <= 1.5 || x >= 8.0) ++outer;
    }
    // 2*floor(0.425*1000) = 850 outer rows by construction
    CHECK(outer >= 850);  // middle Beta draws can graze the boundary values
    CHECK(ds.provenance == "bimodal_dgp");
}

TEST_CASE("bimodal noise scales differ sharply between regions") {
    const Dataset ds = generate_bimodal_dgp(100000, 17);
    std::vector<double> outer_resid, mid_resid;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const double x = ds.features[i];
        const double r = ds.target[i] - 2.0 * std::sin(x);
        if (x < 1.5 || x > 8.0)
            outer_resid.push_back(r);
        else
            mid_resid.push_back(r);
    }
    const double vo = mathx::variance(outer_resid);
    const double vm = mathx::variance(mid_resid);
    CHECK(vo / vm < 0.05);
    CHECK(std::sqrt(vo) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(std::sqrt(vm) == doctest::Approx(2.1).epsilon(0.05));
}

TEST_CASE("variance convention flag flips the scale interpretation") {
    const Dataset ds = generate_bimodal_dgp(100000, 17, VarianceConvention::var);
    std::vector<double> outer_resid;
    for (std::size_t i = 0; i < ds.n; ++i)
        if (ds.features[i] < 1.5 || ds.features[i] > 8.0)
            outer_resid.push_back(ds.target[i] - 2.0 * std::sin(ds.features[i]));
    CHECK(mathx::variance(outer_resid) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(bimodal_noise_sd(0.7) == doctest::Approx(0.1));
    CHECK(bimodal_noise_sd(5.0) == doctest::Approx(2.1));
    CHECK(bimodal_noise_sd(9.0, VarianceConvention::var) == doctest::Approx(std::sqrt(0.1)));
}

TEST_CASE("dgp determinism and seed sensitivity") {
    const Dataset a = generate_bimodal_dgp(500, 7);
    const Dataset b = generate_bimodal_dgp(500, 7);
    const Dataset c = generate_bimodal_dgp(500, 8);
    CHECK(a.features == b.features);
    CHECK(a.target == b.target);
    CHECK(a.features != c.features);
    CHECK_THROWS_AS(generate_bimodal_dgp(7, 1), InvalidN);
}

TEST_CASE("blobs classification with tight spread is separable") {
    const auto [ds, model] = generate_blobs_classification(300, 3, 0.05, 3);
    REQUIRE(ds.n == 300);
    REQUIRE(ds.n_classes == 3);
    // nearest-center decision equals the label when spread is tiny
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto post = model.posterior(ds.row(i));
        const auto best = std::max_element(post.begin(), post.end()) - post.begin();
        CHECK(static_cast<int>(best) == ds.labels[i]);
    }
}

TEST_CASE("two identical clusters have posterior one half") {
    BlobsModel model;
    model.centers = {{0.0, 0.0}, {0.0, 0.0}};
    model.spread = 1.0;
    model.priors = {0.5, 0.5};
    const std::vector<double> x{0.3, -0.7};
    const auto post = model.posterior(x);
    CHECK(post[0] == doctest::Approx(0.5));
    CHECK(post[1] == doctest::Approx(0.5));
}

TEST_CASE("blob bayes error matches a grid-integration oracle") {
    const double spread = 1.2;
    const auto [ds, model] = generate_blobs_classification(3000, 3, spread, 11);

    // empirical bayes error: classify by posterior argmax, count mistakes
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto post = model.posterior(ds.row(i));
        const auto best = std::max_element(post.begin(), post.end()) - post.begin();
        if (static_cast<int>(best) != ds.labels[i]) ++wrong;
    }
    const double empirical = static_cast<double>(wrong) / static_cast<double>(ds.n);

    // oracle: integrate (1 - max posterior) * density over a grid
    double err = 0.0, mass = 0.0;
    const double lo = -8.0, hi = 8.0;
    const int steps = 220;
    const double h = (hi - lo) / steps;
    for (int ix = 0; ix <= steps; ++ix)
        for (int iy = 0; iy <= steps; ++iy) {
            const std::vector<double> x{lo + ix * h, lo + iy * h};
            double density = 0.0;
            for (std::size_t c = 0; c < model.centers.size(); ++c) {
                const double dx = x[0] - model.centers[c][0];
                const double dy = x[1] - model.centers[c][1];
                density += model.priors[c] *
                           std::exp(-(dx * dx + dy * dy) / (2.0 * spread * spread));
            }
            const auto post = model.posterior(x);
            const double pmax = *std::max_element(post.begin(), post.end());
            err += (1.0 - pmax) * density;
            mass += density;
        }
    const double oracle = err / mass;
    CHECK(empirical == doctest::Approx(oracle).epsilon(0.9));
    CHECK(std::fabs(empirical - oracle) < 0.02);
}

TEST_CASE("split sizes follow the floor/remainder rule") {
    const DataSplit s = split_dataset(10, {0.4, 0.4, 0.2}, 1);
    CHECK(s.train.size() == 4);
    CHECK(s.cal.size() == 4);
    CHECK(s.test.size() == 2);

    const DataSplit all_train = split_dataset(10, {1.0, 0.0, 0.0}, 1);
    CHECK(all_train.train.size() == 10);
    CHECK(all_train.test.empty());

    const DataSplit a = split_dataset(100, {0.4, 0.4, 0.2}, 9);
    const DataSplit b = split_dataset(100, {0.4, 0.4, 0.2}, 9);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
}

TEST_CASE("split rejects malformed ratios") {
    CHECK_THROWS_AS(split_dataset(10, {0.6, 0.6, -0.2}, 1), InvalidN);
    CHECK_THROWS_AS(split_dataset(10, {-0.1, 0.5, 0.6}, 1), InvalidN);
    CHECK_THROWS_AS(generate_blobs_classification(100, 3, 0.0, 1), InvalidN);
}

TEST_CASE("split partition property over random shapes") {
    Rng rng(21);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 1 + rng.below(500);
        double r1 = rng.uniform(), r2 = rng.uniform() * (1.0 - r1);
        const DataSplit s = split_dataset(n, {r1, r2, 1.0 - r1 - r2}, rng.next_u64());
        std::set<std::size_t> seen;
        for (const auto* part : {&s.train, &s.cal, &s.test})
            for (std::size_t idx : *part) {
                CHECK(idx < n);
                CHECK(seen.insert(idx).second);  // disjoint
            }
        CHECK(seen.size() == s.train.size() + s.cal.size() + s.test.size());
        CHECK(s.train.size() == static_cast<std::size_t>(std::floor(r1 * n)));
        CHECK(s.cal.size() == static_cast<std::size_t>(std::floor(r2 * n)));
        CHECK(s.train.size() + s.cal.size() + s.test.size() == n);
    }
}

TEST_CASE("calibration split rule: 30% below the cap, 1000 above") {
    std::vector<std::size_t> cal(1000);
    std::iota(cal.begin(), cal.end(), std::size_t{0});
    auto [c1, c2] = split_calibration(cal, 3);
    CHECK(c1.size() == 700);
    CHECK(c2.size() == 300);

    std::vector<std::size_t> big(10000);
    std::iota(big.begin(), big.end(), std::size_t{0});
    auto [b1, b2] = split_calibration(big, 3);
    CHECK(b1.size() == 9000);
    CHECK(b2.size() == 1000);

    std::vector<std::size_t> ten(10);
    std::iota(ten.begin(), ten.end(), std::size_t{0});
    auto [t1, t2] = split_calibration(ten, 3);
    CHECK(t1.size() == 7);
    CHECK(t2.size() == 3);
}

TEST_CASE("csv round trip and error paths") {
    const char* path = "test_data_tmp.csv";
    {
        std::ofstream out(path);
        out << "a,b,y\n1.5,2.5,10\n-0.5,0,20\n3,4,30\n";
    }
    const Dataset ds = load_csv(path, "y");
    CHECK(ds.n == 3);
    CHECK(ds.p == 2);
    CHECK(ds.columns == std::vector<std::string>{"a", "b"});
    CHECK(ds.target[1] == doctest::Approx(20.0));
    CHECK(ds.row(2)[1] == doctest::Approx(4.0));

    CHECK_THROWS_AS(load_csv(path, "missing"), MissingColumn);

    {
        std::ofstream out(path);
        out << "a,y\n1,2\nNA,3\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, "y"), doctest::Contains("row 3"), ParseError);

    // write then re-read
    Dataset ds2 = generate_bimodal_dgp(50, 4);
    write_csv(ds2, path);
    const Dataset back = load_csv(path, "y");
    REQUIRE(back.n == ds2.n);
    for (std::size_t i = 0; i < back.n; ++i) {
        CHECK(back.features[i] == doctest::Approx(ds2.features[i]).epsilon(1e-15));
        CHECK(back.target[i] == doctest::Approx(ds2.target[i]).epsilon(1e-15));
    }
    std::remove(path);
}

TEST_CASE("classification csv round trip keeps labels") {
    const char* path = "test_blobs_tmp.csv";
    const auto [ds, model] = generate_blobs_classification(120, 3, 0.8, 2);
    write_csv(ds, path);
    const Dataset back = load_csv(path, "label", true);
    REQUIRE(back.n == ds.n);
    CHECK(back.n_classes == 3);
    CHECK(back.labels == ds.labels);
    std::remove(path);
}

TEST_CASE("predictions csv alignment") {
    const char* path = "test_preds_tmp.csv";
    {
        std::ofstream out(path);
        out << "g,q_lo,q_hi\n1,0,2\n2,1,3\n";
    }
    const ExternalPredictions preds = load_predictions(path, 2);
    REQUIRE(preds.g.has_value());
    CHECK((*preds.g)[1] == doctest::Approx(2.0));
    CHECK((*preds.q_hi)[0] == doctest::Approx(2.0));
    CHECK_THROWS_AS(load_predictions(path, 3), RowCountMismatch);
    {
        std::ofstream out(path);
        out << "g,bogus\n1,2\n";
    }
    CHECK_THROWS_AS(load_predictions(path, 1), ParseError);
    std::remove(path);
}

TEST_CASE("scalers are affine and invertible") {
    Rng rng(2);
    std::vector<double> values(200);
    for (double& v : values) v = rng.normal(3.0, 2.5);
    const AffineNormalizer nz = AffineNormalizer::standardize(values);
    for (double v : {-10.0, 0.0, 1.0, 25.0})
        CHECK(nz.inverse(nz.forward(v)) == doctest::Approx(v).epsilon(1e-12));

    const AffineNormalizer mm = AffineNormalizer::min_max_center(values);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    CHECK(mm.forward(*lo) == doctest::Approx(-0.5));
    CHECK(mm.forward(*hi) == doctest::Approx(0.5));
}
