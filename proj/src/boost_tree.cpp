#include "fairot/boost_tree.hpp"
#include "fairot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fairot {

namespace {

double sigmoid(double f) { return 1.0 / (1.0 + std::exp(-f)); }

double clamp_prob(double p) {
    const double eps = 1e-15;
    return std::min(1.0 - eps, std::max(eps, p));
}

// Weighted least-squares tree fit to gradient residuals with one Newton step
// per terminal node.
class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<double>& grad,
                const std::vector<double>& hess, const std::vector<double>& weight,
                int max_depth, double min_leaf_weight)
        : x_(x), grad_(grad), hess_(hess), weight_(weight), max_depth_(max_depth),
          min_leaf_weight_(min_leaf_weight), n_features_(x.empty() ? 0 : x[0].size()) {}

    RegressionTree build(std::vector<std::size_t> rows) {
        tree_.nodes.clear();
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    struct Best {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };

    int grow(std::vector<std::size_t> rows, int depth) {
        double sum_w = 0.0, sum_wg = 0.0, sum_wh = 0.0;
        for (std::size_t i : rows) {
            sum_w += weight_[i];
            sum_wg += weight_[i] * grad_[i];
            sum_wh += weight_[i] * hess_[i];
        }

        const int node_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        Best best;
        if (depth < max_depth_ && sum_w >= 2.0 * min_leaf_weight_) {
            best = find_split(rows, sum_w, sum_wg);
        }

        if (best.feature < 0) {
            tree_.nodes[node_id].value = newton_value(sum_wg, sum_wh);
            return node_id;
        }

        std::vector<std::size_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (std::size_t i : rows) {
            (x_[i][best.feature] <= best.threshold ? left_rows : right_rows).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree_.nodes[node_id].feature = best.feature;
        tree_.nodes[node_id].threshold = best.threshold;
        const int left_id = grow(std::move(left_rows), depth + 1);
        tree_.nodes[node_id].left = left_id;
        const int right_id = grow(std::move(right_rows), depth + 1);
        tree_.nodes[node_id].right = right_id;
        return node_id;
    }

    Best find_split(const std::vector<std::size_t>& rows, double sum_w, double sum_wg) {
        Best best;
        const double parent_score = sum_wg * sum_wg / sum_w;

        std::vector<std::pair<double, std::size_t>> order(rows.size());
        for (int f = 0; f < static_cast<int>(n_features_); ++f) {
            for (std::size_t k = 0; k < rows.size(); ++k) {
                order[k] = {x_[rows[k]][f], rows[k]};
            }
            std::sort(order.begin(), order.end());

            double wl = 0.0, gl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const std::size_t i = order[k].second;
                wl += weight_[i];
                gl += weight_[i] * grad_[i];
                if (order[k].first == order[k + 1].first) continue;
                const double wr = sum_w - wl;
                if (wl < min_leaf_weight_ || wr < min_leaf_weight_) continue;
                const double gr = sum_wg - gl;
                const double gain = gl * gl / wl + gr * gr / wr - parent_score;
                if (gain > best.gain + 1e-12) {
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = 0.5 * (order[k].first + order[k + 1].first);
                }
            }
        }
        return best;
    }

    static double newton_value(double sum_wg, double sum_wh) {
        const double v = sum_wg / std::max(sum_wh, 1e-16);
        return std::min(15.0, std::max(-15.0, v));
    }

    const std::vector<std::vector<double>>& x_;
    const std::vector<double>& grad_;
    const std::vector<double>& hess_;
    const std::vector<double>& weight_;
    const int max_depth_;
    const double min_leaf_weight_;
    const std::size_t n_features_;
    RegressionTree tree_;
};

} // namespace

void BoostConfig::validate() const {
    if (n_trees <= 0) throw std::invalid_argument("n_trees must be positive");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw std::invalid_argument("learning_rate must be in (0,1]");
    }
    if (max_depth <= 0) throw std::invalid_argument("max_depth must be positive");
    if (!(subsample > 0.0 && subsample <= 1.0)) {
        throw std::invalid_argument("subsample must be in (0,1]");
    }
    if (!(cost_ratio > 0.0)) throw std::invalid_argument("cost_ratio must be positive");
    if (!(min_leaf_weight > 0.0)) throw std::invalid_argument("min_leaf_weight must be positive");
}

double RegressionTree::predict(const std::vector<double>& x) const {
    int id = 0;
    while (nodes[id].feature >= 0) {
        id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
    }
    return nodes[id].value;
}

std::vector<double> derive_case_weights(const Dataset& dataset, double cost_ratio) {
    if (!(cost_ratio > 0.0)) throw std::invalid_argument("cost_ratio must be positive");
    std::vector<double> w;
    w.reserve(dataset.size());
    for (const auto& r : dataset.records) {
        if (!r.outcome) throw std::invalid_argument("cannot weight an unlabeled record");
        w.push_back(*r.outcome == 1 ? cost_ratio : 1.0);
    }
    return w;
}

ProbModel train(const Dataset& dataset, const BoostConfig& config) {
    config.validate();
    if (dataset.n_features() == 0) throw std::invalid_argument("dataset has no covariates");
    const std::size_t n = dataset.size();
    if (n == 0) throw std::invalid_argument("cannot train on an empty dataset");

    const auto y = dataset.outcomes();
    const bool has0 = std::find(y.begin(), y.end(), 0) != y.end();
    const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
    if (!has0 || !has1) {
        throw std::invalid_argument("training data must contain both outcome classes");
    }

    const auto x = dataset.points();
    const auto w = derive_case_weights(dataset, config.cost_ratio);

    double sum_w = 0.0, sum_wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_w += w[i];
        sum_wy += w[i] * y[i];
    }
    const double base_rate = sum_wy / sum_w;
    const double base_score = std::log(base_rate / (1.0 - base_rate));

    std::vector<double> score(n, base_score);
    std::vector<double> grad(n, 0.0), hess(n, 0.0);

    Rng rng(config.seed);
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    const std::size_t sample_size =
        config.subsample >= 1.0
            ? n
            : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.subsample * n)));

    std::vector<RegressionTree> trees;
    trees.reserve(config.n_trees);
    for (int t = 0; t < config.n_trees; ++t) {
        std::vector<std::size_t> rows;
        if (sample_size == n) {
            rows = all_rows;
        } else {
            rng.shuffle(all_rows);
            rows.assign(all_rows.begin(), all_rows.begin() + sample_size);
        }

        for (std::size_t i : rows) {
            const double p = sigmoid(score[i]);
            grad[i] = y[i] - p;
            hess[i] = std::max(p * (1.0 - p), 1e-16);
        }

        TreeBuilder builder(x, grad, hess, w, config.max_depth, config.min_leaf_weight);
        RegressionTree tree = builder.build(std::move(rows));
        for (std::size_t i = 0; i < n; ++i) {
            score[i] += config.learning_rate * tree.predict(x[i]);
        }
        trees.push_back(std::move(tree));
    }

    return ProbModel(std::move(trees), base_score, config, dataset.n_features());
}

void ProbModel::check_dim(const std::vector<double>& x) const {
    if (x.size() != n_features_) {
        throw std::invalid_argument("covariate vector has length " + std::to_string(x.size()) +
                                    ", model expects " + std::to_string(n_features_));
    }
}

double ProbModel::decision_function(const std::vector<double>& x, std::size_t n_iterations) const {
    check_dim(x);
    double f = base_score_;
    const std::size_t limit = std::min(n_iterations, trees_.size());
    for (std::size_t t = 0; t < limit; ++t) {
        f += config_.learning_rate * trees_[t].predict(x);
    }
    return f;
}

std::pair<double, double> ProbModel::predict_proba(const std::vector<double>& x) const {
    const double p1 = sigmoid(decision_function(x));
    return {1.0 - p1, p1};
}

int ProbModel::predict_label(const std::vector<double>& x) const {
    const auto [p0, p1] = predict_proba(x);
    return p1 > p0 ? 1 : 0;
}

double holdout_deviance(const ProbModel& model, const Dataset& holdout, std::size_t n_iterations) {
    const auto y = holdout.outcomes();
    const auto w = derive_case_weights(holdout, model.config().cost_ratio);
    double dev = 0.0, sum_w = 0.0;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
        const double p = clamp_prob(sigmoid(model.decision_function(holdout.records[i].covariates,
                                                                    n_iterations)));
        dev += -2.0 * w[i] * (y[i] * std::log(p) + (1 - y[i]) * std::log(1.0 - p));
        sum_w += w[i];
    }
    return dev / sum_w;
}

int select_iterations(const ProbModel& model, const Dataset& holdout) {
    constexpr double tolerance = 1e-4;
    constexpr int patience = 25;
    const int total = static_cast<int>(model.n_trees());
    if (holdout.size() == 0) return total;

    // incremental staged deviance: advance all holdout scores tree by tree
    const auto y = holdout.outcomes();
    const auto w = derive_case_weights(holdout, model.config().cost_ratio);
    const std::size_t n = holdout.size();
    std::vector<double> score(n, model.base_score());
    double sum_w = std::accumulate(w.begin(), w.end(), 0.0);

    std::vector<double> deviance(total + 1, 0.0);
    auto eval = [&]() {
        double dev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = clamp_prob(sigmoid(score[i]));
            dev += -2.0 * w[i] * (y[i] * std::log(p) + (1 - y[i]) * std::log(1.0 - p));
        }
        return dev / sum_w;
    };
    deviance[0] = eval();
    for (int t = 1; t <= total; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            score[i] += model.config().learning_rate *
                        model.trees()[t - 1].predict(holdout.records[i].covariates);
        }
        deviance[t] = eval();
    }

    for (int t = 1; t <= total; ++t) {
        double window_min = deviance[t];
        for (int s = t + 1; s <= std::min(total, t + patience); ++s) {
            window_min = std::min(window_min, deviance[s]);
        }
        if (deviance[t] - window_min < tolerance) return t;
    }
    return total;
}

nlohmann::json ProbModel::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "boosted_classifier";
    j["base_score"] = base_score_;
    j["n_features"] = n_features_;
    j["config"] = {{"n_trees", config_.n_trees},
                   {"learning_rate", config_.learning_rate},
                   {"max_depth", config_.max_depth},
                   {"subsample", config_.subsample},
                   {"cost_ratio", config_.cost_ratio},
                   {"min_leaf_weight", config_.min_leaf_weight},
                   {"seed", config_.seed}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json t;
        auto& feature = t["feature"] = nlohmann::json::array();
        auto& threshold = t["threshold"] = nlohmann::json::array();
        auto& left = t["left"] = nlohmann::json::array();
        auto& right = t["right"] = nlohmann::json::array();
        auto& value = t["value"] = nlohmann::json::array();
        for (const auto& node : tree.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            value.push_back(node.value);
        }
        trees.push_back(std::move(t));
    }
    j["trees"] = std::move(trees);
    return j;
}

ProbModel ProbModel::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1 || j.at("kind") != "boosted_classifier") {
        throw std::runtime_error("unsupported model format");
    }
    BoostConfig cfg;
    const auto& jc = j.at("config");
    cfg.n_trees = jc.at("n_trees").get<int>();
    cfg.learning_rate = jc.at("learning_rate").get<double>();
    cfg.max_depth = jc.at("max_depth").get<int>();
    cfg.subsample = jc.at("subsample").get<double>();
    cfg.cost_ratio = jc.at("cost_ratio").get<double>();
    cfg.min_leaf_weight = jc.at("min_leaf_weight").get<double>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();

    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) {
        RegressionTree tree;
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& value = t.at("value");
        tree.nodes.resize(feature.size());
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            tree.nodes[i].feature = feature[i].get<int>();
            tree.nodes[i].threshold = threshold[i].get<double>();
            tree.nodes[i].left = left[i].get<int>();
            tree.nodes[i].right = right[i].get<int>();
            tree.nodes[i].value = value[i].get<double>();
        }
        trees.push_back(std::move(tree));
    }
    return ProbModel(std::move(trees), j.at("base_score").get<double>(), cfg,
                     j.at("n_features").get<std::size_t>());
}

} // namespace fairot
