#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "neckcheck/ingest.hpp"

namespace neckcheck::models {

/// Feature order is fixed: roll, pitch, yaw.
inline constexpr std::size_t kFeatureCount = 3;
using Features = std::array<double, kFeatureCount>;

struct Row {
    Features features{};
    double target = 0.0;
    double t_ms = 0.0;
};

struct Dataset {
    std::vector<Row> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

Dataset build_dataset(const std::vector<ingest::AlignedRecord>& records);

enum class SplitStrategy { block, random };

struct SplitConfig {
    SplitStrategy strategy = SplitStrategy::block;
    double test_fraction = 0.2;
    std::uint64_t seed = 7;
};

/// Block keeps the last round(n * test_fraction) rows as the test set;
/// random shuffles with the seed first. Both keep at least one row per side.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitConfig& config);

enum class Family { linear, svr_linear, decision_tree, random_forest, gradient_boosting };

inline constexpr std::array<Family, 5> kAllFamilies = {Family::linear, Family::svr_linear, Family::decision_tree,
                                                       Family::random_forest, Family::gradient_boosting};

std::string_view to_string(Family family);
std::optional<Family> family_from_string(std::string_view text);

struct TreeParams {
    int max_depth = 12;
    std::size_t min_samples_leaf = 5;
};

struct ModelSpec {
    Family family = Family::random_forest;
    std::uint64_t seed = 7;

    double ridge = 1e-8;  // linear

    double svr_epsilon = 0.01;
    int svr_epochs = 200;
    double svr_learning_rate = 0.01;  // step at epoch e is rate / sqrt(1 + e)
    double svr_l2 = 1e-4;

    TreeParams tree{12, 5};  // decision_tree

    int forest_trees = 100;
    TreeParams forest_tree{12, 5};

    int boosting_rounds = 100;
    double boosting_learning_rate = 0.1;
    TreeParams boosting_tree{3, 1};
};

void validate(const ModelSpec& spec);
ModelSpec default_spec(Family family);

/// Flat CART tree; node 0 is the root. Split nodes send x[feature] <= threshold left.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;         // leaf mean
    double sse_decrease = 0.0;  // split nodes: parent SSE minus children SSE
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(const Features& x) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    int depth() const;

private:
    std::vector<TreeNode> nodes_;
};

/// Greedy CART on squared error. Splits are evaluated at midpoints between
/// consecutive distinct feature values; the largest SSE decrease wins with
/// ties going to the lower feature index, then the lower threshold. A node is
/// split only when the decrease is positive and both children keep
/// min_samples_leaf rows.
RegressionTree fit_tree(std::span<const Features> x, std::span<const double> y, const TreeParams& params);

struct LinearModel {
    Features coef{};
    double intercept = 0.0;
};

struct ForestModel {
    std::vector<RegressionTree> trees;
};

struct BoostedModel {
    double init = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
};

class RegressionModel {
public:
    using Params = std::variant<LinearModel, RegressionTree, ForestModel, BoostedModel>;

    RegressionModel(ModelSpec spec, std::size_t train_rows, Params params, std::vector<std::string> warnings = {});

    Family family() const { return spec_.family; }
    const ModelSpec& spec() const { return spec_; }
    std::size_t train_rows() const { return train_rows_; }
    const Params& params() const { return params_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    double predict(const Features& x) const;

private:
    ModelSpec spec_;
    std::size_t train_rows_ = 0;
    Params params_;
    std::vector<std::string> warnings_;
};

RegressionModel fit(const ModelSpec& spec, const Dataset& train);

inline double predict(const RegressionModel& model, const Features& x) { return model.predict(x); }

struct Metrics {
    std::optional<double> r2;  // empty when the test targets are constant
    double mse = 0.0;
    std::size_t n = 0;
};

Metrics evaluate(const RegressionModel& model, const Dataset& test);
/// Metrics of arbitrary predictions against targets.
Metrics score(std::span<const double> targets, std::span<const double> predictions);

/// Mean impurity (SSE) decrease per feature: normalized within each tree,
/// averaged over trees, renormalized to sum to 1. A forest without a single
/// split reports equal shares.
Features feature_importance(const RegressionModel& model);

struct ReportRow {
    Family family;
    Metrics metrics;
    RegressionModel model;
};

/// Fits every spec on the same train split and scores it on the same test
/// split. Rows are ordered by test R^2, highest first; undefined R^2 sorts last.
std::vector<ReportRow> compare_models(const Dataset& ds, const std::vector<ModelSpec>& specs,
                                      const SplitConfig& split);

/// Versioned JSON document; loading reproduces predictions bit for bit.
std::string serialize(const RegressionModel& model);
RegressionModel deserialize(std::string_view text);
void save_model(const RegressionModel& model, const std::filesystem::path& path);
RegressionModel load_model(const std::filesystem::path& path);

}  // namespace neckcheck::models
