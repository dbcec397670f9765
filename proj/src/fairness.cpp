#include "fairot/fairness.hpp"
#include "fairot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fairot {

ConfusionTable ConfusionTable::from_labels(const std::vector<int>& actuals,
                                           const std::vector<int>& predictions) {
    if (actuals.size() != predictions.size()) {
        throw std::invalid_argument("actuals and predictions differ in length");
    }
    if (actuals.empty()) throw std::invalid_argument("confusion table requires at least one pair");
    ConfusionTable ct;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        const int a = actuals[i], p = predictions[i];
        if ((a != 0 && a != 1) || (p != 0 && p != 1)) {
            throw std::invalid_argument("labels must be 0 or 1");
        }
        ct.counts[a][p] += 1;
    }
    return ct;
}

ConfusionTable ConfusionTable::from_counts(long long a0p0, long long a0p1, long long a1p0,
                                           long long a1p1) {
    if (a0p0 < 0 || a0p1 < 0 || a1p0 < 0 || a1p1 < 0) {
        throw std::invalid_argument("confusion counts must be nonnegative");
    }
    ConfusionTable ct;
    ct.counts[0][0] = a0p0;
    ct.counts[0][1] = a0p1;
    ct.counts[1][0] = a1p0;
    ct.counts[1][1] = a1p1;
    return ct;
}

double ConfusionTable::classification_error(int for_class) const {
    if (for_class != 0 && for_class != 1) throw std::invalid_argument("class must be 0 or 1");
    const long long total = row_total(for_class);
    if (total == 0) {
        throw std::domain_error("classification error undefined: no cases with actual class " +
                                std::to_string(for_class));
    }
    return static_cast<double>(counts[for_class][1 - for_class]) / static_cast<double>(total);
}

double ConfusionTable::forecasting_error(int for_prediction) const {
    if (for_prediction != 0 && for_prediction != 1) {
        throw std::invalid_argument("prediction must be 0 or 1");
    }
    const long long total = col_total(for_prediction);
    if (total == 0) {
        throw std::domain_error("forecasting error undefined: no cases predicted as " +
                                std::to_string(for_prediction));
    }
    return static_cast<double>(counts[1 - for_prediction][for_prediction]) /
           static_cast<double>(total);
}

double ConfusionTable::cost_ratio() const {
    if (counts[1][0] == 0) {
        throw std::domain_error("cost ratio undefined: no false negatives");
    }
    return static_cast<double>(counts[0][1]) / static_cast<double>(counts[1][0]);
}

double ConfusionTable::base_rate() const {
    return static_cast<double>(row_total(1)) / static_cast<double>(total());
}

double ConfusionTable::predicted_positive_rate() const {
    return static_cast<double>(col_total(1)) / static_cast<double>(total());
}

namespace {

std::string fmt3(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << v;
    return out.str();
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt3(*v) : std::string("n/a");
}

std::optional<double> safe_classification_error(const ConfusionTable& ct, int cls) {
    if (ct.row_total(cls) == 0) return std::nullopt;
    return ct.classification_error(cls);
}

std::optional<double> safe_forecasting_error(const ConfusionTable& ct, int pred) {
    if (ct.col_total(pred) == 0) return std::nullopt;
    return ct.forecasting_error(pred);
}

std::optional<double> safe_cost_ratio(const ConfusionTable& ct) {
    if (ct.counts[1][0] == 0) return std::nullopt;
    return ct.cost_ratio();
}

std::optional<double> gap_of(const std::optional<double>& a, const std::optional<double>& b) {
    if (!a || !b) return std::nullopt;
    return std::fabs(*a - *b);
}

} // namespace

std::string ConfusionTable::to_text(const std::string& title) const {
    std::ostringstream out;
    out << title << '\n';
    out << "  Actual      Predicted 0   Predicted 1   Classification Error\n";
    for (int a = 0; a < 2; ++a) {
        out << "  " << a << "           " << std::setw(11) << counts[a][0] << "   " << std::setw(11)
            << counts[a][1] << "   " << fmt_opt(safe_classification_error(*this, a)) << '\n';
    }
    out << "  Forecasting " << std::setw(11) << fmt_opt(safe_forecasting_error(*this, 0)) << "   "
        << std::setw(11) << fmt_opt(safe_forecasting_error(*this, 1)) << '\n';
    out << "  base rate " << fmt3(base_rate()) << ", predicted-positive rate "
        << fmt3(predicted_positive_rate()) << ", cost ratio " << fmt_opt(safe_cost_ratio(*this))
        << '\n';
    return out.str();
}

std::string ConfusionTable::to_csv() const {
    std::ostringstream out;
    out << "actual,predicted_0,predicted_1\n";
    out << "0," << counts[0][0] << ',' << counts[0][1] << '\n';
    out << "1," << counts[1][0] << ',' << counts[1][1] << '\n';
    return out.str();
}

double prediction_parity_gap(const std::vector<double>& props_a,
                             const std::vector<double>& props_b) {
    if (props_a.size() != props_b.size() || props_a.empty()) {
        throw std::invalid_argument("proportion vectors must have equal nonzero length");
    }
    double sum_a = 0.0, sum_b = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < props_a.size(); ++i) {
        if (props_a[i] < -1e-12 || props_b[i] < -1e-12) {
            throw std::invalid_argument("proportions must be nonnegative");
        }
        sum_a += props_a[i];
        sum_b += props_b[i];
        tv += std::fabs(props_a[i] - props_b[i]);
    }
    if (std::fabs(sum_a - 1.0) > 1e-9 || std::fabs(sum_b - 1.0) > 1e-9) {
        throw std::invalid_argument("proportion vectors must sum to 1");
    }
    return 0.5 * tv;
}

double counterfactual_classification_error(const std::vector<int>& predictions,
                                           const std::vector<std::optional<int>>& counterfactuals,
                                           int for_class) {
    if (for_class != 0 && for_class != 1) throw std::invalid_argument("class must be 0 or 1");
    if (predictions.size() != counterfactuals.size() || predictions.empty()) {
        throw std::invalid_argument("predictions and counterfactuals differ in length");
    }
    long long total = 0, wrong = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!counterfactuals[i]) {
            throw std::invalid_argument(
                "counterfactual outcomes are absent: Y* is unobservable outside simulation, so "
                "counterfactual classification error cannot be computed on real data");
        }
        if (*counterfactuals[i] != for_class) continue;
        ++total;
        if (predictions[i] != for_class) ++wrong;
    }
    if (total == 0) {
        throw std::domain_error("counterfactual error undefined: no cases with Y* = " +
                                std::to_string(for_class));
    }
    return static_cast<double>(wrong) / static_cast<double>(total);
}

JointTransportResult joint_transport_confusion(const Dataset& baseline_test,
                                               const Dataset& comparison_test,
                                               const ProbModel& model,
                                               const JointTransportSettings& settings) {
    if (!baseline_test.fully_labeled() || !comparison_test.fully_labeled()) {
        throw std::invalid_argument("joint transport requires labeled test data on both sides");
    }

    // joint points: covariates with the outcome appended as coordinate d
    auto joint_points = [](const Dataset& d) {
        PointSet pts;
        pts.reserve(d.size());
        for (const auto& r : d.records) {
            auto p = r.covariates;
            p.push_back(static_cast<double>(*r.outcome));
            pts.push_back(std::move(p));
        }
        return pts;
    };
    const PointSet source = joint_points(comparison_test);
    const PointSet dest = joint_points(baseline_test);

    // batch, couple, and project; no smoothing is involved because the
    // transported test rows themselves are what gets tabulated
    const std::size_t usable = std::min(source.size(), dest.size());
    int n_batches = settings.n_batches;
    std::size_t batch_size = settings.batch_size;
    if (static_cast<std::size_t>(n_batches) * batch_size > usable) {
        n_batches = std::max<int>(1, static_cast<int>(usable / batch_size));
        if (static_cast<std::size_t>(n_batches) * batch_size > usable) batch_size = usable / n_batches;
    }

    Rng rng(settings.seed);
    std::vector<std::size_t> src_order(source.size()), dst_order(dest.size());
    std::iota(src_order.begin(), src_order.end(), 0);
    std::iota(dst_order.begin(), dst_order.end(), 0);
    rng.shuffle(src_order);
    rng.shuffle(dst_order);

    std::vector<std::vector<double>> transported;
    transported.reserve(static_cast<std::size_t>(n_batches) * batch_size);
    for (int b = 0; b < n_batches; ++b) {
        PointSet src_batch, dst_batch;
        for (std::size_t k = 0; k < batch_size; ++k) {
            src_batch.push_back(source[src_order[b * batch_size + k]]);
            dst_batch.push_back(dest[dst_order[b * batch_size + k]]);
        }
        const auto coupling = solve_coupling(src_batch, dst_batch, settings.transport);
        for (auto& [src, dst] : barycentric_project(coupling)) transported.push_back(dst);
    }

    // baseline table: model on raw covariates vs observed labels
    std::vector<int> base_actual, base_pred;
    for (const auto& r : baseline_test.records) {
        base_actual.push_back(*r.outcome);
        base_pred.push_back(model.predict_label(r.covariates));
    }

    // comparison table: transported outcome coordinate rounded at 0.5 vs
    // model on the transported covariates
    std::vector<int> comp_actual, comp_pred;
    const std::size_t d = comparison_test.n_features();
    for (const auto& point : transported) {
        std::vector<double> x(point.begin(), point.begin() + d);
        comp_actual.push_back(point[d] >= 0.5 ? 1 : 0);
        comp_pred.push_back(model.predict_label(x));
    }

    JointTransportResult result;
    result.baseline_table = ConfusionTable::from_labels(base_actual, base_pred);
    result.comparison_table = ConfusionTable::from_labels(comp_actual, comp_pred);
    result.baseline_base_rate = result.baseline_table.base_rate();
    result.transported_base_rate = result.comparison_table.base_rate();
    return result;
}

ParityReport build_parity_report(const GroupEvaluation& baseline,
                                 const GroupEvaluation& comparison) {
    ParityReport report;
    report.baseline = baseline;
    report.comparison = comparison;
    report.tv_gap = prediction_parity_gap(baseline.set_proportions.as_vector(),
                                          comparison.set_proportions.as_vector());
    if (baseline.confusion && comparison.confusion) {
        for (int c = 0; c < 2; ++c) {
            report.classification_error_gap[c] =
                gap_of(safe_classification_error(*baseline.confusion, c),
                       safe_classification_error(*comparison.confusion, c));
            report.forecasting_error_gap[c] =
                gap_of(safe_forecasting_error(*baseline.confusion, c),
                       safe_forecasting_error(*comparison.confusion, c));
        }
        report.cost_ratio_gap =
            gap_of(safe_cost_ratio(*baseline.confusion), safe_cost_ratio(*comparison.confusion));
    }
    for (int c = 0; c < 2; ++c) {
        const auto& a = c == 0 ? baseline.counterfactual_error_class0
                               : baseline.counterfactual_error_class1;
        const auto& b = c == 0 ? comparison.counterfactual_error_class0
                               : comparison.counterfactual_error_class1;
        report.counterfactual_error_gap[c] = gap_of(a, b);
    }
    return report;
}

namespace {

void group_text(std::ostringstream& out, const char* name, const GroupEvaluation& g) {
    out << name << " group (n = " << g.n << ")\n";
    if (g.confusion) {
        out << g.confusion->to_text("  confusion table (observed labels)");
    } else {
        out << "  no labeled outcomes; confusion table omitted\n";
    }
    out << "  prediction-set proportions: {} " << fmt3(g.set_proportions.empty) << ", {0} "
        << fmt3(g.set_proportions.only0) << ", {1} " << fmt3(g.set_proportions.only1)
        << ", {0,1} " << fmt3(g.set_proportions.both) << '\n';
    if (g.counterfactual_error_class0 || g.counterfactual_error_class1) {
        out << "  counterfactual classification error (oracle Y*): class 0 "
            << fmt_opt(g.counterfactual_error_class0) << ", class 1 "
            << fmt_opt(g.counterfactual_error_class1) << '\n';
    }
}

} // namespace

std::string ParityReport::to_text() const {
    std::ostringstream out;
    out << "Parity report\n";
    out << "=============\n";
    out << "All label-conditioned measures below are internal-fairness estimates computed from\n";
    out << "observed test labels. External fairness, defined against counterfactual outcomes,\n";
    out << "cannot be evaluated from test data; counterfactual blocks appear only when oracle\n";
    out << "Y* labels are present (synthetic data).\n\n";
    group_text(out, "baseline", baseline);
    out << '\n';
    group_text(out, "comparison", comparison);
    out << '\n';
    out << "gaps (absolute differences, baseline vs comparison)\n";
    out << "  prediction parity (TV on set proportions): " << fmt3(tv_gap) << '\n';
    out << "  classification error: class 0 " << fmt_opt(classification_error_gap[0])
        << ", class 1 " << fmt_opt(classification_error_gap[1]) << '\n';
    out << "  forecasting error: prediction 0 " << fmt_opt(forecasting_error_gap[0])
        << ", prediction 1 " << fmt_opt(forecasting_error_gap[1]) << '\n';
    out << "  cost ratio: " << fmt_opt(cost_ratio_gap) << '\n';
    if (counterfactual_error_gap[0] || counterfactual_error_gap[1]) {
        out << "  counterfactual classification error: class 0 "
            << fmt_opt(counterfactual_error_gap[0]) << ", class 1 "
            << fmt_opt(counterfactual_error_gap[1]) << '\n';
    } else {
        out << "  counterfactual classification error: not computable without oracle Y* labels\n";
    }
    return out.str();
}

namespace {

void csv_group(std::ostringstream& out, const char* name, const GroupEvaluation& g) {
    if (g.confusion) {
        out << "table," << name << "_confusion\n";
        out << g.confusion->to_csv();
    }
    out << "table," << name << "_set_proportions\n";
    out << g.set_proportions.to_csv();
    if (g.counterfactual_error_class0 || g.counterfactual_error_class1) {
        out << "table," << name << "_counterfactual_error\n";
        out << "class,error\n";
        if (g.counterfactual_error_class0) {
            out << "0," << format_double(*g.counterfactual_error_class0) << '\n';
        }
        if (g.counterfactual_error_class1) {
            out << "1," << format_double(*g.counterfactual_error_class1) << '\n';
        }
    }
}

void csv_gap(std::ostringstream& out, const char* name, const std::optional<double>& v) {
    out << name << ',' << (v ? format_double(*v) : std::string("")) << '\n';
}

} // namespace

std::string ParityReport::to_csv() const {
    std::ostringstream out;
    csv_group(out, "baseline", baseline);
    csv_group(out, "comparison", comparison);
    out << "table,gaps\n";
    out << "gap,value\n";
    out << "prediction_parity_tv," << format_double(tv_gap) << '\n';
    csv_gap(out, "classification_error_class0", classification_error_gap[0]);
    csv_gap(out, "classification_error_class1", classification_error_gap[1]);
    csv_gap(out, "forecasting_error_pred0", forecasting_error_gap[0]);
    csv_gap(out, "forecasting_error_pred1", forecasting_error_gap[1]);
    csv_gap(out, "cost_ratio", cost_ratio_gap);
    csv_gap(out, "counterfactual_error_class0", counterfactual_error_gap[0]);
    csv_gap(out, "counterfactual_error_class1", counterfactual_error_gap[1]);
    return out.str();
}

} // namespace fairot
