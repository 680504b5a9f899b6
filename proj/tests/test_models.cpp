#include <doctest.h>

#include <cmath>

#include "cart_oracle.hpp"
#include "neckcheck/error.hpp"
#include "neckcheck/models.hpp"
#include "neckcheck/rng.hpp"
#include "support.hpp"

using namespace neckcheck;
using namespace neckcheck::models;

namespace {

Dataset make(std::size_t n, std::uint64_t seed, double (*target)(const Features&, Xoshiro256&)) {
    Xoshiro256 rng(seed);
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        Features f{20.0 * rng.uniform() - 10.0, 60.0 * rng.uniform() - 10.0, 40.0 * rng.uniform() - 20.0};
        ds.rows.push_back({f, target(f, rng), 20.0 * static_cast<double>(i)});
    }
    return ds;
}

double linear_target(const Features& f, Xoshiro256&) { return 2.0 * f[1] + 1.0; }
double pitch_squared(const Features& f, Xoshiro256& rng) { return f[1] * f[1] + 5.0 * rng.normal(); }
double saturating(const Features& f, Xoshiro256& rng) {
    return 1.0 / (1.0 + std::exp(-(f[1] + 0.25 * std::abs(f[0]) - 20.0) / 5.0)) + 0.02 * rng.normal();
}

}  // namespace

TEST_CASE("family names") {
    for (auto f : kAllFamilies) CHECK(family_from_string(to_string(f)) == f);
    CHECK(to_string(Family::svr_linear) == "svr_linear");
    CHECK_FALSE(family_from_string("svm").has_value());
}

TEST_CASE("dataset mapping") {
    const auto ds = build_dataset({{0, 1, 2, 3, 0.5}, {20, 4, 5, 6, 0.6}, {40, 7, 8, 9, 0.7}});
    REQUIRE(ds.size() == 3);
    CHECK(ds.rows[1].features == Features{4, 5, 6});
    CHECK(ds.rows[2].target == 0.7);
    CHECK(ds.rows[0].t_ms == 0.0);
    CHECK(build_dataset({}).empty());
}

TEST_CASE("block split") {
    const auto ds = make(100, 1, linear_target);
    const auto [train, test] = split_dataset(ds, {SplitStrategy::block, 0.2, 7});
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    CHECK(train.rows.back().t_ms == ds.rows[79].t_ms);
    CHECK(test.rows.front().t_ms == ds.rows[80].t_ms);
    const auto [a, b] = split_dataset(make(10, 1, linear_target), {SplitStrategy::block, 0.5, 7});
    CHECK(a.size() == 5);
    CHECK(b.rows.front().t_ms == 100.0);
    CHECK_THROWS_AS(split_dataset(ds, {SplitStrategy::block, 0.0, 7}), ValidationError);
    CHECK_THROWS_AS(split_dataset(ds, {SplitStrategy::block, 1.0, 7}), ValidationError);
    CHECK_THROWS_AS(split_dataset(Dataset{}, {SplitStrategy::block, 0.2, 7}), ValidationError);
}

TEST_CASE("random split is a seeded partition") {
    const auto ds = make(97, 1, linear_target);
    const auto [a1, b1] = split_dataset(ds, {SplitStrategy::random, 0.3, 5});
    const auto [a2, b2] = split_dataset(ds, {SplitStrategy::random, 0.3, 5});
    const auto [a3, b3] = split_dataset(ds, {SplitStrategy::random, 0.3, 6});
    std::vector<double> t1, t2, t3, all;
    for (const auto& r : b1.rows) t1.push_back(r.t_ms);
    for (const auto& r : b2.rows) t2.push_back(r.t_ms);
    for (const auto& r : b3.rows) t3.push_back(r.t_ms);
    CHECK(t1 == t2);
    CHECK(t1 != t3);
    for (const auto& r : a1.rows) all.push_back(r.t_ms);
    all.insert(all.end(), t1.begin(), t1.end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == ds.rows[i].t_ms);
}

TEST_CASE("linear fit recovers an exact line") {
    const auto ds = make(200, 2, linear_target);
    const auto m = fit(default_spec(Family::linear), ds);
    const auto& p = std::get<LinearModel>(m.params());
    CHECK(std::abs(p.coef[0]) < 1e-6);
    CHECK(std::abs(p.coef[1] - 2.0) < 1e-6);
    CHECK(std::abs(p.coef[2]) < 1e-6);
    CHECK(std::abs(p.intercept - 1.0) < 1e-6);
    CHECK(std::abs(m.predict({0, 3, 0}) - 7.0) < 1e-6);
    CHECK(*evaluate(m, ds).r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear residuals are orthogonal to the design") {
    const auto ds = make(300, 3, saturating);
    const auto m = fit(default_spec(Family::linear), ds);
    std::array<double, 4> dot{};
    double scale = 0.0;
    for (const auto& r : ds.rows) {
        const double e = r.target - m.predict(r.features);
        for (std::size_t f = 0; f < 3; ++f) {
            dot[f] += e * r.features[f];
            scale = std::max(scale, std::abs(r.features[f]));
        }
        dot[3] += e;
    }
    for (double d : dot) CHECK(std::abs(d) <= 1e-6 * 300.0 * scale);
}

TEST_CASE("degenerate features fall back to the intercept") {
    Dataset ds;
    for (int i = 0; i < 10; ++i) ds.rows.push_back({{1, 2, 3}, static_cast<double>(i), 20.0 * i});
    const auto m = fit(default_spec(Family::linear), ds);
    CHECK(m.warnings().size() == 1);
    CHECK(m.predict({1, 2, 3}) == doctest::Approx(4.5));
}

TEST_CASE("constant targets give constant predictions in every family") {
    Dataset ds = make(120, 4, linear_target);
    for (auto& r : ds.rows) r.target = 0.375;
    for (auto f : kAllFamilies) {
        auto spec = default_spec(f);
        spec.forest_trees = 10;
        spec.boosting_rounds = 10;
        const auto m = fit(spec, ds);
        for (const auto& r : make(20, 5, linear_target).rows) CHECK(std::abs(m.predict(r.features) - 0.375) < 1e-9);
    }
}

TEST_CASE("fit errors") {
    CHECK_THROWS_AS(fit(default_spec(Family::random_forest), Dataset{}), ValidationError);
    Dataset bad = make(5, 1, linear_target);
    bad.rows[2].target = std::nan("");
    CHECK_THROWS_AS(fit(default_spec(Family::linear), bad), ValidationError);
    auto spec = default_spec(Family::gradient_boosting);
    spec.boosting_learning_rate = 0.0;
    CHECK_THROWS_AS(fit(spec, make(5, 1, linear_target)), ValidationError);
}

TEST_CASE("cart matches the exhaustive oracle") {
    Xoshiro256 rng(2024);
    for (int trial = 0; trial < 3000; ++trial) {
        auto c = testing::random_cart_case(rng);
        if (trial % 3 == 0) c.max_depth = 3;
        CHECK(testing::cart_matches(c));
    }
}

TEST_CASE("cart on eight rows, depth two") {
    testing::CartCase c;
    c.x = {{0, 1, 5}, {1, 1, 5}, {2, 0, 5}, {3, 0, 5}, {4, 2, 6}, {5, 2, 6}, {6, 3, 6}, {7, 3, 6}};
    c.y = {1, 1, 2, 2, 7, 8, 9, 9};
    c.max_depth = 2;
    CHECK(testing::cart_matches(c));
    const auto tree = fit_tree(c.x, std::vector<double>(c.y.begin(), c.y.end()), {2, 1});
    // Root ties roll <= 3.5 with pitch <= 1.5 and yaw <= 5.5; roll wins.
    CHECK(tree.nodes()[0].feature == 0);
    CHECK(tree.nodes()[0].threshold == 3.5);
    CHECK(tree.depth() == 2);
}

TEST_CASE("leaf values are returned unclamped") {
    Dataset ds;
    for (int i = 0; i < 10; ++i) ds.rows.push_back({{0, static_cast<double>(i), 0}, i < 5 ? -0.01 : 0.5, 20.0 * i});
    auto spec = default_spec(Family::decision_tree);
    spec.tree = {2, 1};
    const auto m = fit(spec, ds);
    CHECK(m.predict({0, 1, 0}) == -0.01);
}

TEST_CASE("forest prediction is the mean of its trees") {
    const auto ds = make(300, 6, saturating);
    auto spec = default_spec(Family::random_forest);
    spec.forest_trees = 15;
    const auto m = fit(spec, ds);
    const auto& forest = std::get<ForestModel>(m.params());
    REQUIRE(forest.trees.size() == 15);
    for (const auto& r : make(50, 7, saturating).rows) {
        double sum = 0.0;
        for (const auto& t : forest.trees) sum += t.predict(r.features);
        CHECK(m.predict(r.features) == sum / 15.0);
    }
    // Different seeds draw different bootstraps.
    spec.seed = 8;
    CHECK(serialize(fit(spec, ds)) != serialize(m));
}

TEST_CASE("nonlinear families beat the line on a saturating link") {
    const auto ds = make(2000, 9, saturating);
    const auto [train, test] = split_dataset(ds, {});
    const double lin = *evaluate(fit(default_spec(Family::linear), train), test).r2;
    auto rf = default_spec(Family::random_forest);
    rf.forest_trees = 30;
    CHECK(*evaluate(fit(rf, train), test).r2 > lin + 0.05);
    CHECK(*evaluate(fit(default_spec(Family::gradient_boosting), train), test).r2 > lin + 0.05);
    CHECK(*evaluate(fit(default_spec(Family::svr_linear), train), test).r2 > 0.5);
}

TEST_CASE("metrics") {
    const std::vector<double> y{1, 2, 3}, yhat{1, 2, 4};
    const auto m = score(y, yhat);
    CHECK(m.mse == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(*m.r2 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.n == 3);
    CHECK(*score(y, y).r2 == 1.0);
    CHECK(score(y, y).mse == 0.0);

    Xoshiro256 rng(1);
    std::vector<double> t(57);
    for (auto& v : t) v = rng.normal();
    double mean = 0.0;
    for (double v : t) mean += v;
    mean /= 57.0;
    CHECK(*score(t, std::vector<double>(57, mean)).r2 == 0.0);

    std::vector<double> p(57), ts(57), ps(57);
    for (std::size_t i = 0; i < 57; ++i) {
        p[i] = t[i] + 0.3 * rng.normal();
        ts[i] = t[i] + 4.0;
        ps[i] = p[i] + 4.0;
    }
    CHECK(score(ts, ps).mse == doctest::Approx(score(t, p).mse).epsilon(1e-12));

    const auto flat = score(std::vector<double>{2, 2, 2}, std::vector<double>{2, 2, 3});
    CHECK_FALSE(flat.r2.has_value());
    CHECK(flat.mse == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(score(std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST_CASE("importance finds the informative feature") {
    const auto ds = make(1500, 10, pitch_squared);
    auto spec = default_spec(Family::random_forest);
    spec.forest_trees = 30;
    const auto imp = feature_importance(fit(spec, ds));
    CHECK(imp[1] >= 0.9);
    CHECK(imp[0] + imp[1] + imp[2] == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : imp) CHECK(v >= 0.0);
    CHECK_THROWS_AS(feature_importance(fit(default_spec(Family::linear), ds)), ValidationError);
}

TEST_CASE("importance of a forest without splits is uniform") {
    Dataset ds = make(50, 1, linear_target);
    for (auto& r : ds.rows) r.target = 1.0;
    auto spec = default_spec(Family::random_forest);
    spec.forest_trees = 3;
    const auto imp = feature_importance(fit(spec, ds));
    CHECK(imp[0] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("model comparison") {
    const auto ds = make(800, 11, saturating);
    std::vector<ModelSpec> specs;
    for (auto f : kAllFamilies) {
        auto s = default_spec(f);
        s.forest_trees = 20;
        specs.push_back(s);
    }
    const auto rows = compare_models(ds, specs, {});
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(*rows[i - 1].metrics.r2 >= *rows[i].metrics.r2);
    const auto again = compare_models(ds, specs, {});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].family == again[i].family);
        CHECK(rows[i].metrics.mse == again[i].metrics.mse);
    }
    CHECK(compare_models(ds, {specs[0]}, {}).size() == 1);
    CHECK_THROWS_AS(compare_models(ds, {}, {}), ValidationError);
}

TEST_CASE("serialization reproduces predictions bit for bit") {
    const auto ds = make(400, 12, saturating);
    const auto probes = make(100, 13, saturating);
    const auto dir = testing::scratch("models_io");
    for (auto f : kAllFamilies) {
        auto spec = default_spec(f);
        spec.forest_trees = 10;
        spec.boosting_rounds = 20;
        const auto m = fit(spec, ds);
        const auto text = serialize(m);
        const auto back = deserialize(text);
        CHECK(back.family() == f);
        CHECK(back.train_rows() == 400);
        CHECK(serialize(back) == text);
        for (const auto& r : probes.rows) CHECK(back.predict(r.features) == m.predict(r.features));
        save_model(m, dir / "m.json");
        CHECK(serialize(load_model(dir / "m.json")) == text);
    }
    CHECK_THROWS_AS(deserialize("{}"), ValidationError);
    CHECK_THROWS_AS(deserialize("not json"), ValidationError);
    CHECK_THROWS_AS(deserialize(R"({"format":"neckcheck-model","version":99})"), ValidationError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), IoError);
}
