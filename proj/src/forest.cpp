#include "fairot/forest.hpp"
#include "fairot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairot {

namespace {

struct ForestTreeBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<double>& y;
    int min_leaf;
    int mtry;
    Rng& rng;
    std::vector<ForestNode> nodes;
    std::vector<int> feature_pool;

    ForestTreeBuilder(const std::vector<std::vector<double>>& x_, const std::vector<double>& y_,
                      int min_leaf_, int mtry_, Rng& rng_)
        : x(x_), y(y_), min_leaf(min_leaf_), mtry(mtry_), rng(rng_),
          feature_pool(x_.empty() ? 0 : x_[0].size()) {
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
    }

    int grow(std::vector<std::size_t> rows) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();

        double sum = 0.0;
        for (std::size_t i : rows) sum += y[i];
        const double mean = sum / rows.size();

        if (rows.size() < 2 * static_cast<std::size_t>(min_leaf)) {
            nodes[id].value = mean;
            return id;
        }

        // sample mtry candidate features without replacement
        for (int k = 0; k < mtry && k + 1 < static_cast<int>(feature_pool.size()); ++k) {
            const std::size_t pick = k + rng.uniform_index(feature_pool.size() - k);
            std::swap(feature_pool[k], feature_pool[pick]);
        }

        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::pair<double, std::size_t>> order(rows.size());
        const double parent_score = sum * sum / rows.size();
        for (int k = 0; k < std::min<int>(mtry, feature_pool.size()); ++k) {
            const int f = feature_pool[k];
            for (std::size_t j = 0; j < rows.size(); ++j) order[j] = {x[rows[j]][f], rows[j]};
            std::sort(order.begin(), order.end());

            double suml = 0.0;
            for (std::size_t j = 0; j + 1 < order.size(); ++j) {
                suml += y[order[j].second];
                if (order[j].first == order[j + 1].first) continue;
                const std::size_t nl = j + 1, nr = order.size() - nl;
                if (nl < static_cast<std::size_t>(min_leaf) ||
                    nr < static_cast<std::size_t>(min_leaf)) {
                    continue;
                }
                const double sumr = sum - suml;
                const double gain = suml * suml / nl + sumr * sumr / nr - parent_score;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (order[j].first + order[j + 1].first);
                }
            }
        }

        if (best_feature < 0) {
            nodes[id].value = mean;
            return id;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t i : rows) {
            (x[i][best_feature] <= best_threshold ? left_rows : right_rows).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();

        nodes[id].feature = best_feature;
        nodes[id].threshold = best_threshold;
        nodes[id].left = grow(std::move(left_rows));
        nodes[id].right = grow(std::move(right_rows));
        return id;
    }
};

double tree_predict(const std::vector<ForestNode>& nodes, const std::vector<double>& x) {
    int id = 0;
    while (nodes[id].feature >= 0) {
        id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
    }
    return nodes[id].value;
}

} // namespace

RegressionForest RegressionForest::fit(const std::vector<std::vector<double>>& x,
                                       const std::vector<double>& y, const ForestConfig& config) {
    if (x.empty() || x.size() != y.size()) {
        throw std::invalid_argument("forest fit requires matching nonempty x and y");
    }
    if (config.n_trees <= 0 || config.min_leaf <= 0) {
        throw std::invalid_argument("forest config must have positive n_trees and min_leaf");
    }
    const std::size_t d = x[0].size();
    const int mtry = config.mtry > 0 ? config.mtry : static_cast<int>((d + 2) / 3);

    RegressionForest forest;
    forest.trees_.reserve(config.n_trees);
    Rng rng(config.seed);
    const std::size_t n = x.size();
    for (int t = 0; t < config.n_trees; ++t) {
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = rng.uniform_index(n);
        ForestTreeBuilder builder(x, y, config.min_leaf, mtry, rng);
        builder.grow(std::move(rows));
        forest.trees_.push_back(std::move(builder.nodes));
    }
    return forest;
}

double RegressionForest::predict(const std::vector<double>& x) const {
    if (trees_.empty()) throw std::runtime_error("forest is empty");
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree_predict(tree, x);
    return sum / trees_.size();
}

nlohmann::json RegressionForest::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json t;
        auto& feature = t["feature"] = nlohmann::json::array();
        auto& threshold = t["threshold"] = nlohmann::json::array();
        auto& left = t["left"] = nlohmann::json::array();
        auto& right = t["right"] = nlohmann::json::array();
        auto& value = t["value"] = nlohmann::json::array();
        for (const auto& node : tree) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            value.push_back(node.value);
        }
        trees.push_back(std::move(t));
    }
    return nlohmann::json{{"trees", std::move(trees)}};
}

RegressionForest RegressionForest::from_json(const nlohmann::json& j) {
    RegressionForest forest;
    for (const auto& t : j.at("trees")) {
        std::vector<ForestNode> tree(t.at("feature").size());
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& value = t.at("value");
        for (std::size_t i = 0; i < tree.size(); ++i) {
            tree[i].feature = feature[i].get<int>();
            tree[i].threshold = threshold[i].get<double>();
            tree[i].left = left[i].get<int>();
            tree[i].right = right[i].get<int>();
            tree[i].value = value[i].get<double>();
        }
        forest.trees_.push_back(std::move(tree));
    }
    return forest;
}

} // namespace fairot
