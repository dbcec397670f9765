#ifndef FAIROT_BOOST_TREE_HPP
#define FAIROT_BOOST_TREE_HPP

#include "fairot/tabular.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fairot {

struct BoostConfig {
    int n_trees = 500;
    double learning_rate = 0.1;
    int max_depth = 5;          // interaction depth of each regression tree
    double subsample = 0.5;     // per-iteration row subsampling rate
    double cost_ratio = 1.0;    // relative cost of false negatives to false positives
    double min_leaf_weight = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    double predict(const std::vector<double>& x) const;
};

// Gradient boosted probability model over a binary outcome; the positive
// class is label 1.
class ProbModel {
public:
    ProbModel() = default;
    ProbModel(std::vector<RegressionTree> trees, double base_score, BoostConfig config,
              std::size_t n_features)
        : trees_(std::move(trees)), base_score_(base_score), config_(std::move(config)),
          n_features_(n_features) {}

    // (p(0|x), p(1|x)); both in [0,1], summing to 1 within fp rounding
    std::pair<double, double> predict_proba(const std::vector<double>& x) const;

    // argmax label; exact probability ties resolve to 0
    int predict_label(const std::vector<double>& x) const;

    // additive score (log-odds) truncated to the first n_iterations trees
    double decision_function(const std::vector<double>& x, std::size_t n_iterations) const;
    double decision_function(const std::vector<double>& x) const {
        return decision_function(x, trees_.size());
    }

    std::size_t n_trees() const { return trees_.size(); }
    std::size_t n_features() const { return n_features_; }
    double base_score() const { return base_score_; }
    const BoostConfig& config() const { return config_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }

    nlohmann::json to_json() const;
    static ProbModel from_json(const nlohmann::json& j);

private:
    void check_dim(const std::vector<double>& x) const;

    std::vector<RegressionTree> trees_;
    double base_score_ = 0.0;
    BoostConfig config_;
    std::size_t n_features_ = 0;
};

// weight = cost_ratio for outcome 1, weight = 1 for outcome 0
std::vector<double> derive_case_weights(const Dataset& dataset, double cost_ratio);

ProbModel train(const Dataset& dataset, const BoostConfig& config);

// Smallest iteration count after which weighted binomial deviance on the
// holdout stops improving by at least 1e-4 within a 25-iteration window.
int select_iterations(const ProbModel& model, const Dataset& holdout);

// Mean per-unit-weight binomial deviance of the model truncated to
// n_iterations trees.
double holdout_deviance(const ProbModel& model, const Dataset& holdout, std::size_t n_iterations);

} // namespace fairot

#endif
