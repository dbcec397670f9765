#ifndef FAIROT_CONFORMAL_HPP
#define FAIROT_CONFORMAL_HPP

#include "fairot/boost_tree.hpp"
#include "fairot/tabular.hpp"

#include <json.hpp>

#include <vector>

namespace fairot {

// s(x, y) = 1 - p(y|x), equivalently |y - p(1|x)| for binary labels.
double conformal_score(const ProbModel& model, const std::vector<double>& x, int y);

struct ConformalCalibration {
    std::vector<double> scores;  // sorted ascending
    double alpha = 0.05;
    double gamma_hat = 1.0;  // ceil((n+1)(1-alpha))-th smallest score, clamped to max

    nlohmann::json to_json() const;
    static ConformalCalibration from_json(const nlohmann::json& j);
};

// the ceil((n+1)(1-alpha))-th smallest score, clamped to the maximum
double conformal_threshold(std::vector<double> scores, double alpha);

ConformalCalibration calibrate(const ProbModel& model, const Dataset& calibration, double alpha);

struct PredictionSet {
    bool contains0 = false;
    bool contains1 = false;
    double threshold_used = 0.0;

    bool empty() const { return !contains0 && !contains1; }
    bool both() const { return contains0 && contains1; }
    std::string members() const;  // "{}", "{0}", "{1}", "{0,1}"
};

PredictionSet predict_set(const ConformalCalibration& calibration, const ProbModel& model,
                          const std::vector<double>& x);

// proportions over the four possible sets, in the order {}, {0}, {1}, {0,1}
struct SetProportions {
    double empty = 0.0;
    double only0 = 0.0;
    double only1 = 0.0;
    double both = 0.0;

    std::vector<double> as_vector() const { return {empty, only0, only1, both}; }
    std::string to_csv() const;
};

SetProportions set_proportions(const ConformalCalibration& calibration, const ProbModel& model,
                               const std::vector<std::vector<double>>& points);

} // namespace fairot

#endif
