// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion.

#include "fairot/boost_tree.hpp"
#include "fairot/conformal.hpp"
#include "fairot/fairness.hpp"
#include "fairot/pipeline.hpp"
#include "fairot/rng.hpp"
#include "fairot/synth.hpp"
#include "fairot/tabular.hpp"
#include "fairot/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace fairot;
namespace fs = std::filesystem;

namespace {

int failures = 0;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

PointSet random_points(Rng& rng, std::size_t n, std::size_t d, double span) {
    PointSet pts;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p(d);
        for (auto& v : p) v = span * rng.uniform();
        pts.push_back(std::move(p));
    }
    return pts;
}

double permutation_optimum(const PointSet& source, const PointSet& dest) {
    const std::size_t n = source.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < source[i].size(); ++k) {
                const double diff = source[i][k] - dest[perm[i]][k];
                total += diff * diff;
            }
        }
        best = std::min(best, total / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double worst_marginal_violation(const DiscreteCoupling& c) {
    double worst = 0.0;
    for (std::size_t i = 0; i < c.m; ++i) {
        worst = std::max(worst, std::fabs(c.row_sum(i) - 1.0 / c.m));
    }
    for (std::size_t j = 0; j < c.n; ++j) {
        worst = std::max(worst, std::fabs(c.col_sum(j) - 1.0 / c.n));
    }
    return worst;
}

// ---------------------------------------------------------------- criterion 1
void criterion_1_toy_example() {
    Stopwatch timer;
    const PointSet source = {{6}, {10}, {15}, {20}, {25}};
    const PointSet dest = {{10}, {12}, {15}, {20}, {30}};
    const auto coupling = solve_coupling(source, dest);

    bool monotone = true;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            const double expect = i == j ? 0.2 : 0.0;
            if (std::fabs(coupling.at(i, j) - expect) > 1e-12) monotone = false;
        }
    }
    const double elapsed = timer.seconds();
    const bool ok = coupling.objective == 9.0 && monotone && elapsed < 1.0;
    report(1, "five-point toy example, exact objective 9.0, monotone matching", ok,
           "objective=" + fmt(coupling.objective) + ", monotone=" + (monotone ? "yes" : "no") +
               ", " + fmt(elapsed) + "s < 1s");
}

// ------------------------------------------------------------- criteria 2 & 3
void criteria_2_3_lp_oracle_and_feasibility() {
    Stopwatch timer;
    Rng rng(2024);
    double worst_gap = 0.0;
    double worst_marginal = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.uniform_index(4);
        const std::size_t d = 1 + rng.uniform_index(3);
        const PointSet source = random_points(rng, n, d, 10.0);
        const PointSet dest = random_points(rng, n, d, 10.0);
        const auto coupling = solve_coupling(source, dest);
        worst_gap = std::max(worst_gap,
                             std::fabs(coupling.objective - permutation_optimum(source, dest)));
        worst_marginal = std::max(worst_marginal, worst_marginal_violation(coupling));
    }
    const double elapsed = timer.seconds();
    report(2, "solver objective equals brute-force permutation optimum on 50 instances",
           worst_gap <= 1e-9 && elapsed < 10.0,
           "max |gap|=" + fmt(worst_gap) + " <= 1e-9, " + fmt(elapsed) + "s < 10s");

    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 2 + rng.uniform_index(15);
        std::size_t n = 2 + rng.uniform_index(15);
        if (m == n) ++n;
        const std::size_t d = 1 + rng.uniform_index(3);
        const auto coupling =
            solve_coupling(random_points(rng, m, d, 8.0), random_points(rng, n, d, 8.0));
        worst_marginal = std::max(worst_marginal, worst_marginal_violation(coupling));
    }
    report(3, "coupling marginals feasible on all square and rectangular instances",
           worst_marginal <= 1e-9, "max marginal violation=" + fmt(worst_marginal) + " <= 1e-9");
}

// ---------------------------------------------------------------- criterion 4
void criterion_4_conformal_coverage() {
    Stopwatch timer;
    const int replications = 200;
    const std::size_t n_train = 600, n_cal = 1000, n_test = 1000;
    double coverage_sum = 0.0;
    bool monotone = true;

    for (int rep = 0; rep < replications; ++rep) {
        SynthConfig scfg = SynthConfig::defaults();
        scfg.n_per_group = n_train + n_cal + n_test;
        scfg.observation_bias = 0.0;
        scfg.seed = 10000 + rep;
        const Dataset pool = filter_group(generate(scfg), Group::baseline);

        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        const Dataset train_part = take(pool, {idx.begin(), idx.begin() + n_train});
        const Dataset cal_part = take(pool, {idx.begin() + n_train, idx.begin() + n_train + n_cal});
        const Dataset test_part = take(pool, {idx.begin() + n_train + n_cal, idx.end()});

        BoostConfig bcfg;
        bcfg.n_trees = 60;
        bcfg.max_depth = 3;
        bcfg.subsample = 1.0;
        bcfg.learning_rate = 0.1;
        bcfg.seed = rep;
        const ProbModel model = train(train_part, bcfg);
        const auto cal05 = calibrate(model, cal_part, 0.05);
        const auto cal10 = calibrate(model, cal_part, 0.10);

        std::size_t covered = 0;
        for (const auto& r : test_part.records) {
            const auto set05 = predict_set(cal05, model, r.covariates);
            const auto set10 = predict_set(cal10, model, r.covariates);
            if ((*r.outcome == 0 && set05.contains0) || (*r.outcome == 1 && set05.contains1)) {
                ++covered;
            }
            if ((set10.contains0 && !set05.contains0) || (set10.contains1 && !set05.contains1)) {
                monotone = false;
            }
        }
        coverage_sum += static_cast<double>(covered) / n_test;
    }
    const double mean_coverage = coverage_sum / replications;
    const double elapsed = timer.seconds();
    report(4, "split conformal coverage over 200 replications at alpha=0.05",
           mean_coverage >= 0.94 && monotone && elapsed < 300.0,
           "mean coverage=" + fmt(mean_coverage) + " >= 0.94, nested sets=" +
               (monotone ? "yes" : "no") + ", " + fmt(elapsed) + "s < 300s");
}

// ---------------------------------------------------------------- criterion 5
void criterion_5_error_formulas() {
    const ConfusionTable t = ConfusionTable::from_counts(31630, 11246, 1527, 1975);
    auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };

    const bool fe = round3(t.forecasting_error(0)) == 0.046 &&
                    round3(t.forecasting_error(1)) == 0.851;
    const bool ce0 = round3(t.classification_error(0)) == 0.262;
    // the printed table reads .47 for the second row; the printed counts
    // give 1527/3502 = 0.436 and the counts govern
    const bool ce1 = round3(t.classification_error(1)) == 0.436;
    const bool ratio = std::fabs(t.cost_ratio() - 11246.0 / 1527.0) < 1e-12 &&
                       std::floor(t.cost_ratio() * 100.0) / 100.0 == 7.36;
    report(5, "published confusion-table counts reproduce the error formulas",
           fe && ce0 && ce1 && ratio,
           "fe=(" + fmt(t.forecasting_error(0)) + "," + fmt(t.forecasting_error(1)) + ") ce=(" +
               fmt(t.classification_error(0)) + "," + fmt(t.classification_error(1)) +
               ") cost ratio=" + fmt(t.cost_ratio()));
}

// -------------------------------------------------- criteria 6, 7, 8 pipeline
struct ForecastCounts {
    double props[4] = {0, 0, 0, 0};  // {}, {0}, {1}, {0,1}
    std::vector<std::string> baseline_lines;
    std::size_t n = 0;
};

ForecastCounts tally_forecast(const std::string& path, const std::string& group) {
    std::ifstream in(path);
    ForecastCounts fc;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.find("," + group + ",") == std::string::npos) continue;
        if (group == "baseline") fc.baseline_lines.push_back(line.substr(line.find(',')));
        ++fc.n;
        if (line.find("\"{}\"") != std::string::npos) fc.props[0] += 1;
        else if (line.find("\"{0}\"") != std::string::npos) fc.props[1] += 1;
        else if (line.find("\"{1}\"") != std::string::npos) fc.props[2] += 1;
        else if (line.find("\"{0,1}\"") != std::string::npos) fc.props[3] += 1;
    }
    for (double& p : fc.props) p /= static_cast<double>(fc.n);
    return fc;
}

void criteria_6_7_8_end_to_end() {
    Stopwatch timer;
    const fs::path work = fs::temp_directory_path() / "fairot_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    PipelineConfig cfg;
    cfg.input = (work / "train.csv").string();
    cfg.outdir = (work / "out").string();
    cfg.features = {"x0", "x1", "x2", "x3"};
    cfg.ystar_col = "y_star";
    cfg.seed = 11;
    cfg.alpha = 0.05;
    cfg.boost.n_trees = 400;
    cfg.boost.max_depth = 3;
    cfg.boost.subsample = 0.5;
    cfg.boost.cost_ratio = 8.0;
    cfg.boost.seed = 0;
    cfg.iteration_holdout = 0.2;
    cfg.batch_size = 500;
    cfg.transport_seed = 7;
    cfg.synth.n_per_group = 4000;
    cfg.synth.seed = 1;

    cmd_synth(cfg, cfg.input);
    cmd_fit(cfg);
    cmd_transport(cfg);
    cmd_calibrate(cfg);

    // fresh unlabeled test batch, 4000 per group
    PipelineConfig test_gen = cfg;
    test_gen.synth.seed = 2;
    const std::string test_labeled = (work / "test_labeled.csv").string();
    cmd_synth(test_gen, test_labeled);
    const Dataset test_data = load_csv(test_labeled, cfg.schema());
    CsvSchema unlabeled = cfg.schema(false);
    unlabeled.counterfactual_column.clear();
    const std::string test_unlabeled = (work / "test_unlabeled.csv").string();
    save_csv(test_data, test_unlabeled, unlabeled);

    const std::string fc_transport = (work / "forecast_transport.csv").string();
    cmd_forecast(cfg, test_unlabeled, fc_transport);
    PipelineConfig no_transport = cfg;
    no_transport.no_transport = true;
    const std::string fc_plain = (work / "forecast_plain.csv").string();
    cmd_forecast(no_transport, test_unlabeled, fc_plain);

    // criterion 6: parity gaps and baseline invariance
    {
        const auto base_t = tally_forecast(fc_transport, "baseline");
        const auto comp_t = tally_forecast(fc_transport, "comparison");
        const auto base_p = tally_forecast(fc_plain, "baseline");
        const auto comp_p = tally_forecast(fc_plain, "comparison");

        const double gap_transport = prediction_parity_gap(
            {base_t.props[0], base_t.props[1], base_t.props[2], base_t.props[3]},
            {comp_t.props[0], comp_t.props[1], comp_t.props[2], comp_t.props[3]});
        const double gap_plain = prediction_parity_gap(
            {base_p.props[0], base_p.props[1], base_p.props[2], base_p.props[3]},
            {comp_p.props[0], comp_p.props[1], comp_p.props[2], comp_p.props[3]});
        const bool baseline_identical = base_t.baseline_lines == base_p.baseline_lines;
        const double elapsed = timer.seconds();
        report(6, "end-to-end prediction parity with and without transport",
               gap_transport <= 0.05 && gap_plain >= 0.15 && baseline_identical &&
                   elapsed < 600.0,
               "gap(no transport)=" + fmt(gap_plain) + " >= 0.15, gap(transport)=" +
                   fmt(gap_transport) + " <= 0.05, baseline rows identical=" +
                   (baseline_identical ? "yes" : "no") + ", " + fmt(elapsed) + "s < 600s");
    }

    // criterion 7: marginal closure and smoothing degradation
    {
        double min_post = 1.0;
        for (const auto& feature : cfg.features) {
            std::ifstream in(cfg.path_in_outdir("marginals_post_" + feature + ".csv"));
            std::string line, footer;
            while (std::getline(in, line)) {
                if (!line.empty()) footer = line;
            }
            min_post = std::min(min_post, std::stod(footer.substr(footer.rfind(',') + 1)));
        }

        // raw transport of the test comparison rows onto the test baseline
        // rows, exactly as the smoothed map's own training pass does it
        const Dataset base_test = filter_group(test_data, Group::baseline);
        const Dataset comp_test = filter_group(test_data, Group::comparison);
        const ProbModel model = ProbModel::from_json(nlohmann::json::parse(
            std::ifstream(cfg.path_in_outdir("model.json")), nullptr, true, true));
        const TransportMap map = TransportMap::from_json(nlohmann::json::parse(
            std::ifstream(cfg.path_in_outdir("map.json")), nullptr, true, true));

        Rng shuffler(99);
        auto src = comp_test.points();
        auto dst = base_test.points();
        std::vector<std::size_t> so(src.size()), dso(dst.size());
        std::iota(so.begin(), so.end(), 0);
        std::iota(dso.begin(), dso.end(), 0);
        shuffler.shuffle(so);
        shuffler.shuffle(dso);
        const int n_batches = static_cast<int>(std::min(src.size(), dst.size()) / 500);
        PointSet raw;
        for (int b = 0; b < n_batches; ++b) {
            PointSet sb, db;
            for (std::size_t k = 0; k < 500; ++k) {
                sb.push_back(src[so[b * 500 + k]]);
                db.push_back(dst[dso[b * 500 + k]]);
            }
            for (auto& [s, d] : barycentric_project(solve_coupling(sb, db))) {
                raw.push_back(std::move(d));
            }
        }

        double worst_diff = 0.0;
        for (int label = 0; label < 2; ++label) {
            std::vector<double> s_base, s_raw, s_smooth;
            for (const auto& p : dst) s_base.push_back(conformal_score(model, p, label));
            for (const auto& p : raw) s_raw.push_back(conformal_score(model, p, label));
            for (const auto& p : src) {
                s_smooth.push_back(conformal_score(model, map.apply(p), label));
            }
            const double o_raw = overlap_coefficient(s_base, s_raw, 30);
            const double o_smooth = overlap_coefficient(s_base, s_smooth, 30);
            worst_diff = std::max(worst_diff, std::fabs(o_raw - o_smooth));
        }
        report(7, "post-transport marginal overlap and bounded smoothing degradation",
               min_post >= 0.95 && worst_diff <= 0.10,
               "min per-feature overlap=" + fmt(min_post) + " >= 0.95, score-overlap diff=" +
                   fmt(worst_diff) + " <= 0.10");

        // criterion 8: joint (X, Y) transport base-rate and error agreement
        JointTransportSettings settings;
        settings.n_batches = n_batches;
        settings.batch_size = 500;
        settings.seed = 17;
        const auto joint = joint_transport_confusion(base_test, comp_test, model, settings);
        const double rate_diff =
            std::fabs(joint.baseline_base_rate - joint.transported_base_rate);
        double err_diff = 0.0;
        for (int c = 0; c < 2; ++c) {
            err_diff = std::max(err_diff, std::fabs(joint.baseline_table.classification_error(c) -
                                                    joint.comparison_table.classification_error(c)));
            err_diff = std::max(err_diff, std::fabs(joint.baseline_table.forecasting_error(c) -
                                                    joint.comparison_table.forecasting_error(c)));
        }
        report(8, "joint transport matches base rates and confusion errors",
               rate_diff <= 0.01 && err_diff <= 0.03,
               "base-rate diff=" + fmt(rate_diff) + " <= 0.01, max error diff=" + fmt(err_diff) +
                   " <= 0.03");
    }
    fs::remove_all(work);
}

// ---------------------------------------------------------------- criterion 9
void criterion_9_cost_ratio() {
    SynthConfig scfg = SynthConfig::defaults();
    scfg.n_per_group = 20000;
    scfg.seed = 1;
    const Dataset base_train = filter_group(generate(scfg), Group::baseline);
    SynthConfig tcfg = scfg;
    tcfg.n_per_group = 4000;
    tcfg.seed = 1001;
    const Dataset base_test = filter_group(generate(tcfg), Group::baseline);

    BoostConfig bcfg;
    bcfg.n_trees = 400;
    bcfg.max_depth = 3;
    bcfg.subsample = 0.5;
    bcfg.learning_rate = 0.1;
    bcfg.cost_ratio = 8.0;
    bcfg.seed = 0;

    // iteration count picked on an internal holdout, then refit in full
    Dataset pool = base_train;
    pool.seed = 991;
    SplitSpec es;
    es.fractions = {{"fit", 0.8}, {"holdout", 0.2}};
    const auto parts = split(pool, es);
    const ProbModel probe = train(parts[0].second, bcfg);
    BoostConfig final_cfg = bcfg;
    final_cfg.n_trees = select_iterations(probe, parts[1].second);
    const ProbModel model = train(base_train, final_cfg);

    std::vector<int> actual, predicted;
    for (const auto& r : base_test.records) {
        actual.push_back(*r.outcome);
        predicted.push_back(model.predict_label(r.covariates));
    }
    const ConfusionTable ct = ConfusionTable::from_labels(actual, predicted);
    const double ratio = ct.cost_ratio();
    report(9, "empirical cost ratio lands near the 8-to-1 target",
           ratio >= 6.0 && ratio <= 10.0,
           "fp/fn=" + fmt(ratio) + " in [6,10], " + std::to_string(final_cfg.n_trees) + " trees");
}

// --------------------------------------------------------------- criterion 10
void criterion_10_weight_replication() {
    Dataset ds;
    ds.feature_names = {"x0", "x1", "x2"};
    Rng rng(23);
    for (int i = 0; i < 200; ++i) {
        Record r;
        r.covariates = {4 * rng.uniform(), 4 * rng.uniform(), 4 * rng.uniform()};
        const double eta = -0.5 + 0.6 * r.covariates[0] - 0.4 * r.covariates[1];
        r.outcome = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
        ds.records.push_back(std::move(r));
    }

    BoostConfig weighted_cfg;
    weighted_cfg.n_trees = 60;
    weighted_cfg.max_depth = 3;
    weighted_cfg.subsample = 1.0;
    weighted_cfg.learning_rate = 0.1;
    weighted_cfg.cost_ratio = 8.0;
    weighted_cfg.seed = 5;
    const ProbModel weighted = train(ds, weighted_cfg);

    Dataset replicated;
    replicated.feature_names = ds.feature_names;
    for (const auto& r : ds.records) {
        const int copies = *r.outcome == 1 ? 8 : 1;
        for (int c = 0; c < copies; ++c) replicated.records.push_back(r);
    }
    BoostConfig plain_cfg = weighted_cfg;
    plain_cfg.cost_ratio = 1.0;
    const ProbModel duplicated = train(replicated, plain_cfg);

    double max_diff = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> x = {4 * rng.uniform(), 4 * rng.uniform(), 4 * rng.uniform()};
        max_diff = std::max(max_diff, std::fabs(weighted.predict_proba(x).second -
                                                duplicated.predict_proba(x).second));
    }
    report(10, "case weights equal eightfold row replication", max_diff <= 1e-9,
           "max |p diff|=" + fmt(max_diff) + " <= 1e-9");
}

} // namespace

int main() {
    Stopwatch total;
    criterion_1_toy_example();
    criteria_2_3_lp_oracle_and_feasibility();
    criterion_4_conformal_coverage();
    criterion_5_error_formulas();
    criteria_6_7_8_end_to_end();
    criterion_9_cost_ratio();
    criterion_10_weight_replication();
    std::printf("%d of 10 criteria passed in %.1fs\n", 10 - failures, total.seconds());
    return failures == 0 ? 0 : 1;
}
