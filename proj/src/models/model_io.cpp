#include <fstream>
#include <json.hpp>
#include <sstream>

#include "neckcheck/error.hpp"
#include "neckcheck/models.hpp"

namespace neckcheck::models {

namespace {

using json = nlohmann::json;

constexpr std::string_view kFormat = "neckcheck-model";
constexpr int kVersion = 1;

// Leaves are bare numbers; splits are [feature, threshold, sse_decrease, left, right].
json encode_node(const std::vector<TreeNode>& nodes, std::size_t i) {
    const TreeNode& n = nodes[i];
    if (n.feature < 0) return n.value;
    return json::array({n.feature, n.threshold, n.sse_decrease, encode_node(nodes, static_cast<std::size_t>(n.left)),
                        encode_node(nodes, static_cast<std::size_t>(n.right))});
}

int decode_node(const json& j, std::vector<TreeNode>& nodes, int depth) {
    if (depth > 256) throw ValidationError("model file: tree nesting too deep");
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (j.is_number()) {
        nodes.back().value = j.get<double>();
        return id;
    }
    if (!j.is_array() || j.size() != 5) throw ValidationError("model file: malformed tree node");
    const int feature = j[0].get<int>();
    if (feature < 0 || feature >= static_cast<int>(kFeatureCount)) {
        throw ValidationError("model file: feature index out of range");
    }
    const double threshold = j[1].get<double>();
    const double decrease = j[2].get<double>();
    const int left = decode_node(j[3], nodes, depth + 1);
    const int right = decode_node(j[4], nodes, depth + 1);
    TreeNode& n = nodes[static_cast<std::size_t>(id)];
    n.feature = feature;
    n.threshold = threshold;
    n.sse_decrease = decrease;
    n.left = left;
    n.right = right;
    return id;
}

json encode_tree(const RegressionTree& tree) { return encode_node(tree.nodes(), 0); }

RegressionTree decode_tree(const json& j) {
    std::vector<TreeNode> nodes;
    decode_node(j, nodes, 0);
    return RegressionTree(std::move(nodes));
}

json encode_tree_params(const TreeParams& t) { return {{"max_depth", t.max_depth}, {"min_samples_leaf", t.min_samples_leaf}}; }

TreeParams decode_tree_params(const json& j) {
    return {j.at("max_depth").get<int>(), j.at("min_samples_leaf").get<std::size_t>()};
}

json encode_spec(const ModelSpec& s) {
    return {
        {"family", std::string(to_string(s.family))},
        {"seed", s.seed},
        {"ridge", s.ridge},
        {"svr_epsilon", s.svr_epsilon},
        {"svr_epochs", s.svr_epochs},
        {"svr_learning_rate", s.svr_learning_rate},
        {"svr_l2", s.svr_l2},
        {"tree", encode_tree_params(s.tree)},
        {"forest_trees", s.forest_trees},
        {"forest_tree", encode_tree_params(s.forest_tree)},
        {"boosting_rounds", s.boosting_rounds},
        {"boosting_learning_rate", s.boosting_learning_rate},
        {"boosting_tree", encode_tree_params(s.boosting_tree)},
    };
}

ModelSpec decode_spec(const json& j) {
    ModelSpec s;
    const auto family = family_from_string(j.at("family").get<std::string>());
    if (!family) throw ValidationError("model file: unknown family");
    s.family = *family;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.ridge = j.at("ridge").get<double>();
    s.svr_epsilon = j.at("svr_epsilon").get<double>();
    s.svr_epochs = j.at("svr_epochs").get<int>();
    s.svr_learning_rate = j.at("svr_learning_rate").get<double>();
    s.svr_l2 = j.at("svr_l2").get<double>();
    s.tree = decode_tree_params(j.at("tree"));
    s.forest_trees = j.at("forest_trees").get<int>();
    s.forest_tree = decode_tree_params(j.at("forest_tree"));
    s.boosting_rounds = j.at("boosting_rounds").get<int>();
    s.boosting_learning_rate = j.at("boosting_learning_rate").get<double>();
    s.boosting_tree = decode_tree_params(j.at("boosting_tree"));
    validate(s);
    return s;
}

}  // namespace

std::string serialize(const RegressionModel& model) {
    json params = std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return {{"coef", p.coef}, {"intercept", p.intercept}};
            } else if constexpr (std::is_same_v<T, RegressionTree>) {
                return {{"root", encode_tree(p)}};
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                json trees = json::array();
                for (const auto& t : p.trees) trees.push_back(encode_tree(t));
                return {{"trees", std::move(trees)}};
            } else {
                json trees = json::array();
                for (const auto& t : p.trees) trees.push_back(encode_tree(t));
                return {{"init", p.init}, {"learning_rate", p.learning_rate}, {"trees", std::move(trees)}};
            }
        },
        model.params());
    json doc = {
        {"format", kFormat},
        {"version", kVersion},
        {"features", {"roll_deg", "pitch_deg", "yaw_deg"}},
        {"spec", encode_spec(model.spec())},
        {"training", {{"rows", model.train_rows()}, {"warnings", model.warnings()}}},
        {"params", std::move(params)},
    };
    return doc.dump() + "\n";
}

RegressionModel deserialize(std::string_view text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != kFormat) throw ValidationError("not a neckcheck model file");
        const int version = doc.at("version").get<int>();
        if (version != kVersion) {
            throw ValidationError("unsupported model format version " + std::to_string(version));
        }
        const ModelSpec spec = decode_spec(doc.at("spec"));
        const auto rows = doc.at("training").at("rows").get<std::size_t>();
        auto warnings = doc.at("training").at("warnings").get<std::vector<std::string>>();
        const json& p = doc.at("params");
        auto trees = [&] {
            std::vector<RegressionTree> out;
            for (const auto& t : p.at("trees")) out.push_back(decode_tree(t));
            return out;
        };
        switch (spec.family) {
            case Family::linear:
            case Family::svr_linear: {
                LinearModel m;
                m.coef = p.at("coef").get<Features>();
                m.intercept = p.at("intercept").get<double>();
                return RegressionModel(spec, rows, m, std::move(warnings));
            }
            case Family::decision_tree: return RegressionModel(spec, rows, decode_tree(p.at("root")), std::move(warnings));
            case Family::random_forest: {
                ForestModel forest{trees()};
                if (forest.trees.empty()) throw ValidationError("model file: forest without trees");
                return RegressionModel(spec, rows, std::move(forest), std::move(warnings));
            }
            case Family::gradient_boosting: {
                BoostedModel b;
                b.init = p.at("init").get<double>();
                b.learning_rate = p.at("learning_rate").get<double>();
                b.trees = trees();
                return RegressionModel(spec, rows, std::move(b), std::move(warnings));
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model file: ") + e.what());
    }
    throw ValidationError("model file: unknown family");
}

void save_model(const RegressionModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << serialize(model);
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

RegressionModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return deserialize(buffer.str());
}

}  // namespace neckcheck::models
