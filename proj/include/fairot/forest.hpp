#ifndef FAIROT_FOREST_HPP
#define FAIROT_FOREST_HPP

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace fairot {

struct ForestConfig {
    int n_trees = 200;
    int min_leaf = 5;
    int mtry = 0;  // 0 = ceil(d/3)
    std::uint64_t seed = 0;
};

struct ForestNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

// Bootstrap-aggregated CART regression trees. Predictions outside the
// training range fall into boundary leaves, so outputs stay within the
// observed response range.
class RegressionForest {
public:
    RegressionForest() = default;

    static RegressionForest fit(const std::vector<std::vector<double>>& x,
                                const std::vector<double>& y, const ForestConfig& config);

    double predict(const std::vector<double>& x) const;

    std::size_t n_trees() const { return trees_.size(); }

    nlohmann::json to_json() const;
    static RegressionForest from_json(const nlohmann::json& j);

private:
    std::vector<std::vector<ForestNode>> trees_;
};

} // namespace fairot

#endif
