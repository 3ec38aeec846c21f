#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "selreg/dataset.hpp"

using namespace selreg;

namespace {

std::string write_temp(const std::string& content) {
    static int counter = 0;
    std::string path = "test_dataset_tmp_" + std::to_string(counter++) + ".csv";
    std::ofstream f(path);
    f << content;
    return path;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

}  // namespace

TEST_CASE("load_csv: numeric parse") {
    auto path = write_temp("x,y\n1,2\n3,4\n5,6\n");
    auto data = load_csv(path, "y");
    CHECK(data.n() == 3);
    CHECK(data.d() == 1);
    CHECK(data.columns[0].kind == ColumnKind::numeric);
    CHECK(data.features(1, 0) == 3.0);
    CHECK(data.target[2] == 6.0);
    std::remove(path.c_str());
}

TEST_CASE("load_csv: categorical in first-appearance order") {
    auto path = write_temp("c,y\na,1\nb,2\na,3\n");
    auto data = load_csv(path, "y");
    REQUIRE(data.columns[0].kind == ColumnKind::categorical);
    CHECK(data.columns[0].categories == std::vector<std::string>{"a", "b"});
    CHECK(data.features(0, 0) == 0.0);
    CHECK(data.features(1, 0) == 1.0);
    CHECK(data.features(2, 0) == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("load_csv: errors") {
    CHECK_THROWS(load_csv("no_such_file.csv", "y"));
    auto empty = write_temp("x,y\n");
    CHECK_THROWS_WITH_AS(load_csv(empty, "y"), doctest::Contains("empty dataset"),
                         std::runtime_error);
    auto ragged = write_temp("x,y\n1,2\n3\n");
    CHECK_THROWS(load_csv(ragged, "y"));
    auto missing = write_temp("x,y\n1,2\n");
    CHECK_THROWS(load_csv(missing, "z"));
    std::remove(empty.c_str());
    std::remove(ragged.c_str());
    std::remove(missing.c_str());
}

TEST_CASE("preprocess: min-max scaling on fit rows") {
    Dataset raw;
    raw.features = Matrix(3, 1);
    raw.features(0, 0) = 0;
    raw.features(1, 0) = 5;
    raw.features(2, 0) = 10;
    raw.target = {1, 2, 3};
    raw.columns = {{"x", ColumnKind::numeric, {}}};
    auto [scaled, rec] = preprocess(raw, all_rows(3));
    CHECK(scaled.features(0, 0) == 0.0);
    CHECK(scaled.features(1, 0) == 0.5);
    CHECK(scaled.features(2, 0) == 1.0);
    CHECK(scaled.target[0] == 0.0);
    CHECK(scaled.target[2] == 1.0);
    // round trip of the target scaling
    for (double y : raw.target)
        CHECK(rec.unscale_target(rec.scale_target(y)) == doctest::Approx(y).epsilon(1e-12));
}

TEST_CASE("preprocess: one-hot encoding") {
    Dataset raw;
    raw.features = Matrix(3, 1);
    raw.features(0, 0) = 0;  // a
    raw.features(1, 0) = 1;  // b
    raw.features(2, 0) = 0;  // a
    raw.target = {1, 2, 3};
    raw.columns = {{"c", ColumnKind::categorical, {"a", "b"}}};
    auto [scaled, rec] = preprocess(raw, all_rows(3));
    REQUIRE(scaled.d() == 2);
    CHECK(scaled.features(0, 0) == 1.0);
    CHECK(scaled.features(0, 1) == 0.0);
    CHECK(scaled.features(1, 0) == 0.0);
    CHECK(scaled.features(1, 1) == 1.0);
    CHECK(scaled.features(2, 0) == 1.0);
    CHECK(rec.expansion.at("c") == std::vector<std::string>{"c=a", "c=b"});
}

TEST_CASE("preprocess: unseen category maps to all zeros") {
    Dataset raw;
    raw.features = Matrix(3, 1);
    raw.features(0, 0) = 0;
    raw.features(1, 0) = 0;
    raw.features(2, 0) = 1;  // category only outside fit rows
    raw.target = {1, 2, 3};
    raw.columns = {{"c", ColumnKind::categorical, {"a", "b"}}};
    std::vector<std::size_t> fit = {0, 1};
    auto [scaled, rec] = preprocess(raw, fit);
    REQUIRE(scaled.d() == 1);  // only "a" seen on fit rows
    CHECK(scaled.features(2, 0) == 0.0);
}

TEST_CASE("preprocess: constant column scales to 0") {
    Dataset raw;
    raw.features = Matrix(2, 1, 7.0);
    raw.target = {1, 2};
    raw.columns = {{"x", ColumnKind::numeric, {}}};
    auto [scaled, rec] = preprocess(raw, all_rows(2));
    CHECK(scaled.features(0, 0) == 0.0);
    CHECK(scaled.features(1, 0) == 0.0);
}

TEST_CASE("preprocess idempotence on fit rows") {
    auto synth = synth_heteroscedastic(50, 3, "increasing", 11);
    auto rows = all_rows(50);
    auto [once, rec1] = preprocess(synth.data, rows);
    auto [twice, rec2] = preprocess(once, rows);
    for (std::size_t i = 0; i < once.n(); ++i) {
        for (std::size_t j = 0; j < once.d(); ++j)
            CHECK(twice.features(i, j) == doctest::Approx(once.features(i, j)).epsilon(1e-12));
        CHECK(twice.target[i] == doctest::Approx(once.target[i]).epsilon(1e-12));
    }
}

TEST_CASE("split: sizes, determinism, partition") {
    auto synth = synth_heteroscedastic(10, 2, "increasing", 3);
    auto plan = split(synth.data, {{"train", 0.6}, {"cal", 0.2}, {"test", 0.2}}, 7);
    CHECK(plan.rows_of("train").size() == 6);
    CHECK(plan.rows_of("cal").size() == 2);
    CHECK(plan.rows_of("test").size() == 2);

    auto plan2 = split(synth.data, {{"train", 0.6}, {"cal", 0.2}, {"test", 0.2}}, 7);
    CHECK(plan.assignment == plan2.assignment);

    std::set<std::size_t> seen;
    for (const auto& name : {"train", "cal", "test"})
        for (auto i : plan.rows_of(name)) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 10);
}

TEST_CASE("split: empty split error and fraction validation") {
    auto synth = synth_heteroscedastic(10, 1, "increasing", 3);
    Dataset three = synth.data.take_rows(std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_WITH_AS(
        split(three, {{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}}, 1),
        doctest::Contains("empty split"), std::runtime_error);
    CHECK_THROWS(split(synth.data, {{"a", 0.5}, {"b", 0.6}}, 1));
    CHECK_THROWS(split(synth.data, {{"a", -0.5}, {"b", 1.5}}, 1));
}

TEST_CASE("add_random_feature: named, bounded, deterministic, uncorrelated") {
    auto synth = synth_heteroscedastic(10000, 7, "increasing", 5);
    auto with = add_random_feature(synth.data, 21);
    CHECK(with.d() == 8);
    CHECK(with.columns.back().name == "X_Random");
    std::vector<double> col(with.n());
    for (std::size_t i = 0; i < with.n(); ++i) {
        col[i] = with.features(i, 7);
        CHECK(col[i] >= 0.0);
        CHECK(col[i] < 1.0);
    }
    CHECK(std::abs(pearson(col, with.target)) < 0.05);

    auto again = add_random_feature(synth.data, 21);
    for (std::size_t i = 0; i < with.n(); ++i) CHECK(again.features(i, 7) == col[i]);

    auto twice = add_random_feature(with, 3);
    CHECK(twice.columns.back().name == "X_Random1");
}

TEST_CASE("perturb: noise moments and isolation") {
    auto synth = synth_heteroscedastic(10000, 3, "increasing", 2);
    SUBCASE("empty list is identity") {
        auto same = perturb(synth.data, {}, 5, 1, 9);
        CHECK(same.features.data() == synth.data.features.data());
    }
    SUBCASE("unknown feature") {
        CHECK_THROWS(perturb(synth.data, {"nope"}, 5, 1, 9));
    }
    SUBCASE("moments and untouched columns") {
        auto shifted = perturb(synth.data, {"x2"}, 5, 1, 9);
        std::vector<double> delta(synth.data.n());
        for (std::size_t i = 0; i < synth.data.n(); ++i)
            delta[i] = shifted.features(i, 1) - synth.data.features(i, 1);
        CHECK(mean(delta) == doctest::Approx(5.0).epsilon(0.01));
        CHECK(std::sqrt(variance_pop(delta)) == doctest::Approx(1.0).epsilon(0.05));
        for (std::size_t i = 0; i < synth.data.n(); ++i) {
            CHECK(shifted.features(i, 0) == synth.data.features(i, 0));
            CHECK(shifted.features(i, 2) == synth.data.features(i, 2));
            CHECK(shifted.target[i] == synth.data.target[i]);
        }
    }
}

TEST_CASE("synth_heteroscedastic: zero noise, heteroscedasticity, determinism") {
    auto quiet = synth_heteroscedastic(100, 3, "constant:0", 4);
    for (double s : quiet.true_sigma) CHECK(s == 0.0);

    auto noisy = synth_heteroscedastic(5000, 3, "increasing", 4);
    // A zero-noise run with the same seed shares the feature draws, so the
    // difference of targets is exactly the realized noise.
    auto noiseless = synth_heteroscedastic(5000, 3, "constant:0", 4);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(noisy.data.features(i, 0) == noiseless.data.features(i, 0));
    std::vector<std::size_t> order(noisy.data.n());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return noisy.data.features(a, 0) < noisy.data.features(b, 0);
    });
    auto residual_var = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> res;
        for (std::size_t k = lo; k < hi; ++k)
            res.push_back(noisy.data.target[order[k]] - noiseless.data.target[order[k]]);
        return variance_pop(res);
    };
    // Empirical residual variance: top x1 decile vs bottom decile.
    CHECK(residual_var(4500, 5000) > residual_var(0, 500));

    auto rerun = synth_heteroscedastic(5000, 3, "increasing", 4);
    CHECK(rerun.data.features.data() == noisy.data.features.data());
    CHECK(rerun.data.target == noisy.data.target);
}

TEST_CASE("split plan JSON export") {
    auto synth = synth_heteroscedastic(10, 1, "increasing", 3);
    auto plan = split(synth.data, {{"train", 0.5}, {"test", 0.5}}, 1);
    auto text = split_plan_to_json(plan);
    CHECK(text.find("\"seed\": 1") != std::string::npos);
    CHECK(text.find("train") != std::string::npos);
}
