#ifndef FAIROT_FAIRNESS_HPP
#define FAIROT_FAIRNESS_HPP

#include "fairot/boost_tree.hpp"
#include "fairot/conformal.hpp"
#include "fairot/tabular.hpp"
#include "fairot/transport.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairot {

// 2x2 confusion counts indexed (actual, predicted) over labels {0,1}.
// Label 1 is the adverse outcome, so a false positive is (actual 0,
// predicted 1) and a false negative is (actual 1, predicted 0).
struct ConfusionTable {
    long long counts[2][2] = {{0, 0}, {0, 0}};

    static ConfusionTable from_labels(const std::vector<int>& actuals,
                                      const std::vector<int>& predictions);
    static ConfusionTable from_counts(long long a0p0, long long a0p1, long long a1p0,
                                      long long a1p1);

    long long row_total(int actual) const { return counts[actual][0] + counts[actual][1]; }
    long long col_total(int predicted) const { return counts[0][predicted] + counts[1][predicted]; }
    long long total() const { return row_total(0) + row_total(1); }

    // misclassified-in-row / row total: estimates P(pred != actual | actual)
    double classification_error(int for_class) const;
    // misforecast-in-column / column total: estimates P(pred != actual | pred)
    double forecasting_error(int for_prediction) const;
    double cost_ratio() const;  // false positives / false negatives
    double base_rate() const;   // fraction with actual = 1
    double predicted_positive_rate() const;

    std::string to_text(const std::string& title) const;
    std::string to_csv() const;
};

// total-variation distance between two set-proportion vectors
double prediction_parity_gap(const std::vector<double>& props_a,
                             const std::vector<double>& props_b);

// Counterfactual analogue of classification error, evaluated against the
// oracle labels Y*. Only computable when counterfactual outcomes exist
// (synthetic data); real data has no observable Y*.
double counterfactual_classification_error(const std::vector<int>& predictions,
                                           const std::vector<std::optional<int>>& counterfactuals,
                                           int for_class);

struct JointTransportSettings {
    int n_batches = 8;
    std::size_t batch_size = 500;
    std::uint64_t seed = 0;
    TransportOptions transport;
};

struct JointTransportResult {
    ConfusionTable baseline_table;
    ConfusionTable comparison_table;  // transported labels vs model on transported covariates
    double baseline_base_rate = 0.0;
    double transported_base_rate = 0.0;
};

// Transport the comparison group's joint (covariates, outcome) distribution
// onto the baseline group's, with the outcome as an extra coordinate rounded
// back to {0,1} at 0.5, then score both groups through the baseline-trained
// model.
JointTransportResult joint_transport_confusion(const Dataset& baseline_test,
                                               const Dataset& comparison_test,
                                               const ProbModel& model,
                                               const JointTransportSettings& settings);

struct GroupEvaluation {
    std::optional<ConfusionTable> confusion;  // absent for unlabeled data
    SetProportions set_proportions;
    std::optional<double> counterfactual_error_class0;
    std::optional<double> counterfactual_error_class1;
    std::size_t n = 0;
};

struct ParityReport {
    GroupEvaluation baseline;
    GroupEvaluation comparison;
    double tv_gap = 0.0;
    std::optional<double> classification_error_gap[2];
    std::optional<double> forecasting_error_gap[2];
    std::optional<double> cost_ratio_gap;
    std::optional<double> counterfactual_error_gap[2];

    std::string to_text() const;
    std::string to_csv() const;
};

// Assemble the report from per-group predictions/sets; gap families with an
// empty confusion row or column are reported as absent rather than zero.
ParityReport build_parity_report(const GroupEvaluation& baseline,
                                 const GroupEvaluation& comparison);

} // namespace fairot

#endif
