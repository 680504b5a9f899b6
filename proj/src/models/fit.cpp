#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <tuple>

#include "neckcheck/error.hpp"
#include "neckcheck/models.hpp"
#include "neckcheck/rng.hpp"

namespace neckcheck::models {

namespace {

constexpr std::uint64_t kSvrOrderStream = 21;
constexpr std::uint64_t kForestStreamBase = 1000;

// Relative slack under which two SSE decreases count as equal.
constexpr double kTieTolerance = 1e-12;

class TreeBuilder {
public:
    TreeBuilder(std::span<const Features> x, std::span<const double> y, const TreeParams& params)
        : x_(x), y_(y), params_(params) {}

    RegressionTree build(std::vector<std::size_t> index) {
        nodes_.clear();
        if (!index.empty()) grow(index, 0, index.size(), 0);
        return RegressionTree(std::move(nodes_));
    }

private:
    struct Item {
        double value;
        double centered;
        std::size_t row;
    };

    int grow(std::vector<std::size_t>& index, std::size_t begin, std::size_t end, int depth) {
        const std::size_t n = end - begin;
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) sum += y_[index[i]];
        const double mean = sum / static_cast<double>(n);

        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{-1, 0.0, -1, -1, mean, 0.0});
        if (depth >= params_.max_depth || n < 2 * params_.min_samples_leaf) return id;

        double sse = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const double d = y_[index[i]] - mean;
            sse += d * d;
        }
        if (!(sse > 0.0)) return id;

        const double slack = kTieTolerance * sse;
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_decrease = 0.0;
        items_.resize(n);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t row = index[begin + i];
                items_[i] = {x_[row][f], y_[row] - mean, row};
                total += items_[i].centered;
            }
            std::sort(items_.begin(), items_.end(), [](const Item& a, const Item& b) {
                return std::tie(a.value, a.row) < std::tie(b.value, b.row);
            });
            double left_sum = 0.0;
            double left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += items_[i].centered;
                left_sq += items_[i].centered * items_[i].centered;
                if (!(items_[i].value < items_[i + 1].value)) continue;
                const std::size_t n_left = i + 1;
                const std::size_t n_right = n - n_left;
                if (n_left < params_.min_samples_leaf || n_right < params_.min_samples_leaf) continue;
                const double right_sum = total - left_sum;
                const double sse_left = left_sq - left_sum * left_sum / static_cast<double>(n_left);
                const double sse_right = (sse - left_sq) - right_sum * right_sum / static_cast<double>(n_right);
                const double decrease = sse - sse_left - sse_right;
                const bool better = best_feature < 0 ? decrease > slack : decrease > best_decrease + slack;
                if (better) {
                    best_feature = static_cast<int>(f);
                    best_threshold = midpoint(items_[i].value, items_[i + 1].value);
                    best_decrease = decrease;
                }
            }
        }
        if (best_feature < 0) return id;

        const auto f = static_cast<std::size_t>(best_feature);
        const auto split = std::stable_partition(index.begin() + static_cast<std::ptrdiff_t>(begin),
                                                 index.begin() + static_cast<std::ptrdiff_t>(end),
                                                 [&](std::size_t row) { return x_[row][f] <= best_threshold; });
        const auto mid = static_cast<std::size_t>(split - index.begin());
        const int left = grow(index, begin, mid, depth + 1);
        const int right = grow(index, mid, end, depth + 1);
        TreeNode& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left;
        node.right = right;
        node.sse_decrease = best_decrease;
        return id;
    }

    static double midpoint(double a, double b) {
        const double m = a + (b - a) / 2.0;
        return m < b ? m : a;
    }

    std::span<const Features> x_;
    std::span<const double> y_;
    TreeParams params_;
    std::vector<TreeNode> nodes_;
    std::vector<Item> items_;
};

struct Columns {
    std::vector<Features> x;
    std::vector<double> y;
};

Columns columns(const Dataset& ds) {
    Columns c;
    c.x.reserve(ds.size());
    c.y.reserve(ds.size());
    for (const auto& r : ds.rows) {
        c.x.push_back(r.features);
        c.y.push_back(r.target);
    }
    return c;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Solves the symmetric positive definite 3x3 system a * x = b by Cholesky.
std::optional<Features> solve_spd(std::array<Features, 3> a, Features b) {
    std::array<Features, 3> l{};
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (i == j) {
                if (!(s > 0.0)) return std::nullopt;
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Features z{};
    for (std::size_t i = 0; i < 3; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i][k] * z[k];
        z[i] = s / l[i][i];
    }
    Features x{};
    for (std::size_t i = 3; i-- > 0;) {
        double s = z[i];
        for (std::size_t k = i + 1; k < 3; ++k) s -= l[k][i] * x[k];
        x[i] = s / l[i][i];
    }
    return x;
}

struct FeatureMoments {
    Features mean{};
    Features sd{};
    double target_mean = 0.0;
};

FeatureMoments moments(const Columns& c) {
    FeatureMoments m;
    const auto n = static_cast<double>(c.y.size());
    for (std::size_t i = 0; i < c.y.size(); ++i) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) m.mean[f] += c.x[i][f];
        m.target_mean += c.y[i];
    }
    for (auto& v : m.mean) v /= n;
    m.target_mean /= n;
    for (std::size_t i = 0; i < c.y.size(); ++i) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const double d = c.x[i][f] - m.mean[f];
            m.sd[f] += d * d;
        }
    }
    for (auto& v : m.sd) v = std::sqrt(v / n);
    return m;
}

RegressionModel fit_linear(const ModelSpec& spec, const Columns& c) {
    const FeatureMoments m = moments(c);
    std::vector<std::string> warnings;
    LinearModel model;
    model.intercept = m.target_mean;
    if (std::all_of(m.sd.begin(), m.sd.end(), [](double s) { return s == 0.0; })) {
        warnings.push_back("linear: all features constant, falling back to an intercept-only model");
        return RegressionModel(spec, c.y.size(), model, std::move(warnings));
    }
    std::array<Features, 3> gram{};
    Features rhs{};
    for (std::size_t i = 0; i < c.y.size(); ++i) {
        Features d{};
        for (std::size_t f = 0; f < kFeatureCount; ++f) d[f] = c.x[i][f] - m.mean[f];
        const double dy = c.y[i] - m.target_mean;
        for (std::size_t a = 0; a < kFeatureCount; ++a) {
            rhs[a] += d[a] * dy;
            for (std::size_t b = 0; b < kFeatureCount; ++b) gram[a][b] += d[a] * d[b];
        }
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) gram[f][f] += spec.ridge;
    const auto coef = solve_spd(gram, rhs);
    if (!coef) {
        warnings.push_back("linear: normal equations are singular, falling back to an intercept-only model");
        return RegressionModel(spec, c.y.size(), model, std::move(warnings));
    }
    model.coef = *coef;
    for (std::size_t f = 0; f < kFeatureCount; ++f) model.intercept -= model.coef[f] * m.mean[f];
    return RegressionModel(spec, c.y.size(), model, std::move(warnings));
}

// Epsilon-insensitive linear regression by per-sample subgradient steps on
// standardized features, visiting rows in a seeded order each epoch.
RegressionModel fit_svr(const ModelSpec& spec, const Columns& c) {
    const FeatureMoments m = moments(c);
    Features scale{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) scale[f] = m.sd[f] > 0.0 ? m.sd[f] : 1.0;

    const std::size_t n = c.y.size();
    std::vector<Features> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) z[i][f] = (c.x[i][f] - m.mean[f]) / scale[f];
    }

    Features w{};
    double b = m.target_mean;
    Xoshiro256 rng(derive_seed(spec.seed, kSvrOrderStream));
    std::vector<std::size_t> order = all_rows(n);
    for (int epoch = 0; epoch < spec.svr_epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        const double step = spec.svr_learning_rate / std::sqrt(1.0 + epoch);
        const double shrink = 1.0 - step * spec.svr_l2;
        for (std::size_t i : order) {
            double fitted = b;
            for (std::size_t f = 0; f < kFeatureCount; ++f) fitted += w[f] * z[i][f];
            const double residual = c.y[i] - fitted;
            double direction = 0.0;
            if (residual > spec.svr_epsilon) direction = 1.0;
            if (residual < -spec.svr_epsilon) direction = -1.0;
            for (std::size_t f = 0; f < kFeatureCount; ++f) w[f] = shrink * w[f] + step * direction * z[i][f];
            b += step * direction;
        }
    }

    LinearModel model;
    model.intercept = b;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        model.coef[f] = w[f] / scale[f];
        model.intercept -= model.coef[f] * m.mean[f];
    }
    return RegressionModel(spec, n, model);
}

RegressionModel fit_forest(const ModelSpec& spec, const Columns& c) {
    const std::size_t n = c.y.size();
    ForestModel forest;
    forest.trees.reserve(static_cast<std::size_t>(spec.forest_trees));
    TreeBuilder builder(c.x, c.y, spec.forest_tree);
    for (int t = 0; t < spec.forest_trees; ++t) {
        // Per-tree streams keep the forest identical under any training order.
        Xoshiro256 rng(derive_seed(spec.seed, kForestStreamBase + static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> sample(n);
        for (auto& row : sample) row = rng.below(n);
        forest.trees.push_back(builder.build(std::move(sample)));
    }
    return RegressionModel(spec, n, std::move(forest));
}

RegressionModel fit_boosting(const ModelSpec& spec, const Columns& c) {
    const std::size_t n = c.y.size();
    BoostedModel boosted;
    boosted.learning_rate = spec.boosting_learning_rate;
    boosted.init = std::accumulate(c.y.begin(), c.y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> current(n, boosted.init);
    std::vector<double> residual(n);
    for (int round = 0; round < spec.boosting_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = c.y[i] - current[i];
        TreeBuilder builder(c.x, residual, spec.boosting_tree);
        RegressionTree tree = builder.build(all_rows(n));
        for (std::size_t i = 0; i < n; ++i) current[i] += boosted.learning_rate * tree.predict(c.x[i]);
        boosted.trees.push_back(std::move(tree));
    }
    return RegressionModel(spec, n, std::move(boosted));
}

}  // namespace

RegressionTree fit_tree(std::span<const Features> x, std::span<const double> y, const TreeParams& params) {
    if (x.size() != y.size()) throw ValidationError("feature and target counts differ");
    if (x.empty()) throw ValidationError("cannot fit a tree on an empty training set");
    return TreeBuilder(x, y, params).build(all_rows(x.size()));
}

double RegressionTree::predict(const Features& x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const TreeNode& node = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                 : node.right);
    }
    return nodes_[i].value;
}

int RegressionTree::depth() const {
    std::function<int(std::size_t)> walk = [&](std::size_t i) -> int {
        const TreeNode& node = nodes_[i];
        if (node.feature < 0) return 0;
        return 1 + std::max(walk(static_cast<std::size_t>(node.left)), walk(static_cast<std::size_t>(node.right)));
    };
    return nodes_.empty() ? 0 : walk(0);
}

RegressionModel::RegressionModel(ModelSpec spec, std::size_t train_rows, Params params,
                                 std::vector<std::string> warnings)
    : spec_(spec), train_rows_(train_rows), params_(std::move(params)), warnings_(std::move(warnings)) {}

double RegressionModel::predict(const Features& x) const {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                double y = p.intercept;
                for (std::size_t f = 0; f < kFeatureCount; ++f) y += p.coef[f] * x[f];
                return y;
            } else if constexpr (std::is_same_v<T, RegressionTree>) {
                return p.predict(x);
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                double sum = 0.0;
                for (const auto& tree : p.trees) sum += tree.predict(x);
                return sum / static_cast<double>(p.trees.size());
            } else {
                double y = p.init;
                for (const auto& tree : p.trees) y += p.learning_rate * tree.predict(x);
                return y;
            }
        },
        params_);
}

RegressionModel fit(const ModelSpec& spec, const Dataset& train) {
    validate(spec);
    if (train.empty()) throw ValidationError("cannot fit a model on an empty training set");
    for (const auto& row : train.rows) {
        if (!std::isfinite(row.target) ||
            !std::all_of(row.features.begin(), row.features.end(), [](double v) { return std::isfinite(v); })) {
            throw ValidationError(fmt::format("non-finite training row at t={} ms", row.t_ms));
        }
    }
    const Columns c = columns(train);
    switch (spec.family) {
        case Family::linear: return fit_linear(spec, c);
        case Family::svr_linear: return fit_svr(spec, c);
        case Family::decision_tree:
            return RegressionModel(spec, c.y.size(), TreeBuilder(c.x, c.y, spec.tree).build(all_rows(c.y.size())));
        case Family::random_forest: return fit_forest(spec, c);
        case Family::gradient_boosting: return fit_boosting(spec, c);
    }
    throw ValidationError("unknown model family");
}

Features feature_importance(const RegressionModel& model) {
    const auto* forest = std::get_if<ForestModel>(&model.params());
    if (!forest) {
        throw ValidationError(fmt::format("feature importance needs a random_forest model, got {}",
                                          to_string(model.family())));
    }
    Features total{};
    std::size_t contributing = 0;
    for (const auto& tree : forest->trees) {
        Features per_tree{};
        double tree_sum = 0.0;
        for (const auto& node : tree.nodes()) {
            if (node.feature < 0) continue;
            per_tree[static_cast<std::size_t>(node.feature)] += node.sse_decrease;
            tree_sum += node.sse_decrease;
        }
        if (!(tree_sum > 0.0)) continue;
        for (std::size_t f = 0; f < kFeatureCount; ++f) total[f] += per_tree[f] / tree_sum;
        ++contributing;
    }
    if (contributing == 0) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const double sum = total[0] + total[1] + total[2];
    for (auto& v : total) v /= sum;
    return total;
}

}  // namespace neckcheck::models
