#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neckcheck/error.hpp"
#include "neckcheck/models.hpp"
#include "neckcheck/rng.hpp"

namespace neckcheck::models {

namespace {

constexpr std::array<std::string_view, 5> kFamilyNames = {"linear", "svr_linear", "decision_tree", "random_forest",
                                                           "gradient_boosting"};

constexpr std::uint64_t kShuffleStream = 11;

void check_tree(const TreeParams& t, std::string_view what) {
    if (t.max_depth < 0 || t.max_depth > 64) {
        throw ValidationError(fmt::format("{} max_depth must be in 0..64", what));
    }
    if (t.min_samples_leaf < 1) throw ValidationError(fmt::format("{} min_samples_leaf must be >= 1", what));
}

}  // namespace

std::string_view to_string(Family family) { return kFamilyNames[static_cast<std::size_t>(family)]; }

std::optional<Family> family_from_string(std::string_view text) {
    for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
        if (kFamilyNames[i] == text) return static_cast<Family>(i);
    }
    return std::nullopt;
}

void validate(const ModelSpec& s) {
    if (!(s.ridge >= 0.0) || !std::isfinite(s.ridge)) throw ValidationError("ridge must be >= 0");
    if (!(s.svr_epsilon >= 0.0)) throw ValidationError("svr epsilon must be >= 0");
    if (s.svr_epochs < 1) throw ValidationError("svr epochs must be >= 1");
    if (!(s.svr_learning_rate > 0.0)) throw ValidationError("svr learning rate must be > 0");
    if (!(s.svr_l2 >= 0.0)) throw ValidationError("svr l2 must be >= 0");
    check_tree(s.tree, "decision_tree");
    check_tree(s.forest_tree, "random_forest");
    check_tree(s.boosting_tree, "gradient_boosting");
    if (s.forest_trees < 1) throw ValidationError("random_forest needs at least one tree");
    if (s.boosting_rounds < 0) throw ValidationError("gradient_boosting rounds must be >= 0");
    if (!(s.boosting_learning_rate > 0.0 && s.boosting_learning_rate <= 1.0)) {
        throw ValidationError("gradient_boosting learning rate must lie in (0, 1]");
    }
}

ModelSpec default_spec(Family family) {
    ModelSpec spec;
    spec.family = family;
    return spec;
}

Dataset build_dataset(const std::vector<ingest::AlignedRecord>& records) {
    Dataset ds;
    ds.rows.reserve(records.size());
    for (const auto& r : records) ds.rows.push_back({{r.roll_deg, r.pitch_deg, r.yaw_deg}, r.envelope, r.t_ms});
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitConfig& config) {
    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
        throw ValidationError(fmt::format("test_fraction {} outside (0, 1)", config.test_fraction));
    }
    const std::size_t n = ds.size();
    if (n < 2) throw ValidationError(fmt::format("cannot split a dataset of {} rows", n));
    const auto wanted = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.test_fraction));
    const std::size_t n_test = std::clamp<std::size_t>(wanted, 1, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (config.strategy == SplitStrategy::random) {
        Xoshiro256 rng(derive_seed(config.seed, kShuffleStream));
        for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    }
    Dataset train, test;
    train.rows.reserve(n - n_test);
    test.rows.reserve(n_test);
    for (std::size_t i = 0; i < n; ++i) (i < n - n_test ? train : test).rows.push_back(ds.rows[order[i]]);
    return {std::move(train), std::move(test)};
}

Metrics score(std::span<const double> targets, std::span<const double> predictions) {
    if (targets.size() != predictions.size()) throw ValidationError("targets and predictions differ in length");
    if (targets.empty()) throw ValidationError("cannot score an empty set");
    const auto n = static_cast<double>(targets.size());
    double mean = 0.0;
    for (double y : targets) mean += y;
    mean /= n;
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double r = targets[i] - predictions[i];
        const double d = targets[i] - mean;
        ss_res += r * r;
        ss_tot += d * d;
    }
    Metrics m;
    m.n = targets.size();
    m.mse = ss_res / n;
    if (ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;
    return m;
}

Metrics evaluate(const RegressionModel& model, const Dataset& test) {
    std::vector<double> y, yhat;
    y.reserve(test.size());
    yhat.reserve(test.size());
    for (const auto& row : test.rows) {
        y.push_back(row.target);
        yhat.push_back(model.predict(row.features));
    }
    return score(y, yhat);
}

std::vector<ReportRow> compare_models(const Dataset& ds, const std::vector<ModelSpec>& specs,
                                      const SplitConfig& split) {
    if (specs.empty()) throw ValidationError("compare_models needs at least one model spec");
    const auto [train, test] = split_dataset(ds, split);
    std::vector<ReportRow> rows;
    rows.reserve(specs.size());
    for (const auto& spec : specs) {
        RegressionModel model = fit(spec, train);
        const Metrics m = evaluate(model, test);
        rows.push_back({spec.family, m, std::move(model)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (!a.metrics.r2) return false;
        if (!b.metrics.r2) return true;
        return *a.metrics.r2 > *b.metrics.r2;
    });
    return rows;
}

}  // namespace neckcheck::models
