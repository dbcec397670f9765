#include "fairot/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fairot {

double conformal_score(const ProbModel& model, const std::vector<double>& x, int y) {
    if (y != 0 && y != 1) throw std::invalid_argument("conformal score label must be 0 or 1");
    const auto [p0, p1] = model.predict_proba(x);
    return 1.0 - (y == 1 ? p1 : p0);
}

double conformal_threshold(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw std::invalid_argument("no calibration scores");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    std::sort(scores.begin(), scores.end());

    // (1 + 1/n)(1 - alpha) quantile = ceil((n+1)(1-alpha))-th order statistic;
    // the small backoff keeps exact-integer targets from rounding up
    const std::size_t n = scores.size();
    const long double target =
        static_cast<long double>(n + 1) * (1.0L - static_cast<long double>(alpha));
    std::size_t k = static_cast<std::size_t>(std::ceil(static_cast<double>(target - 1e-9L)));
    if (k < 1) k = 1;
    if (k > n) k = n;  // clamp to the maximum score
    return scores[k - 1];
}

ConformalCalibration calibrate(const ProbModel& model, const Dataset& calibration, double alpha) {
    if (calibration.size() == 0) {
        throw std::invalid_argument("conformal calibration requires a nonempty dataset");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");

    ConformalCalibration cal;
    cal.alpha = alpha;
    cal.scores.reserve(calibration.size());
    for (const auto& r : calibration.records) {
        if (!r.outcome) throw std::invalid_argument("calibration data must be fully labeled");
        cal.scores.push_back(conformal_score(model, r.covariates, *r.outcome));
    }
    std::sort(cal.scores.begin(), cal.scores.end());
    cal.gamma_hat = conformal_threshold(cal.scores, alpha);
    return cal;
}

PredictionSet predict_set(const ConformalCalibration& calibration, const ProbModel& model,
                          const std::vector<double>& x) {
    PredictionSet set;
    set.threshold_used = calibration.gamma_hat;
    set.contains0 = conformal_score(model, x, 0) <= calibration.gamma_hat;
    set.contains1 = conformal_score(model, x, 1) <= calibration.gamma_hat;
    return set;
}

std::string PredictionSet::members() const {
    if (contains0 && contains1) return "{0,1}";
    if (contains0) return "{0}";
    if (contains1) return "{1}";
    return "{}";
}

SetProportions set_proportions(const ConformalCalibration& calibration, const ProbModel& model,
                               const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw std::invalid_argument("set_proportions requires a nonempty dataset");
    SetProportions props;
    const double inc = 1.0 / points.size();
    for (const auto& x : points) {
        const auto set = predict_set(calibration, model, x);
        if (set.empty()) {
            props.empty += inc;
        } else if (set.both()) {
            props.both += inc;
        } else if (set.contains0) {
            props.only0 += inc;
        } else {
            props.only1 += inc;
        }
    }
    return props;
}

std::string SetProportions::to_csv() const {
    std::ostringstream out;
    out << "set,proportion\n";
    out << "{},"   << format_double(empty) << '\n';
    out << "{0},"  << format_double(only0) << '\n';
    out << "{1},"  << format_double(only1) << '\n';
    out << "\"{0,1}\"," << format_double(both) << '\n';
    return out.str();
}

nlohmann::json ConformalCalibration::to_json() const {
    return nlohmann::json{{"format_version", 1},
                          {"kind", "conformal_calibration"},
                          {"alpha", alpha},
                          {"gamma_hat", gamma_hat},
                          {"scores", scores}};
}

ConformalCalibration ConformalCalibration::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1 || j.at("kind") != "conformal_calibration") {
        throw std::runtime_error("unsupported calibration format");
    }
    ConformalCalibration cal;
    cal.alpha = j.at("alpha").get<double>();
    cal.gamma_hat = j.at("gamma_hat").get<double>();
    cal.scores = j.at("scores").get<std::vector<double>>();
    return cal;
}

} // namespace fairot
