#include "fairot/conformal.hpp"
#include "fairot/rng.hpp"
#include "fairot/synth.hpp"
#include "fairot/tabular.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace fairot;

namespace {

// trivial model with a fixed positive-class probability
ProbModel fixed_probability_model(double p1) {
    BoostConfig cfg;
    return ProbModel({}, std::log(p1 / (1.0 - p1)), cfg, 1);
}

Dataset baseline_only(const Dataset& d) { return filter_group(d, Group::baseline); }

SynthConfig coverage_config(std::uint64_t seed, std::size_t n) {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_per_group = n;
    cfg.seed = seed;
    cfg.observation_bias = 0.0;
    return cfg;
}

BoostConfig quick_boost() {
    BoostConfig cfg;
    cfg.n_trees = 60;
    cfg.max_depth = 3;
    cfg.subsample = 1.0;
    cfg.learning_rate = 0.1;
    cfg.seed = 9;
    return cfg;
}

} // namespace

TEST_CASE("conformal scores") {
    const ProbModel model = fixed_probability_model(0.9);
    CHECK(conformal_score(model, {0.0}, 1) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(conformal_score(model, {0.0}, 0) == doctest::Approx(0.9).epsilon(1e-9));

    const ProbModel even = fixed_probability_model(0.5);
    CHECK(conformal_score(even, {0.0}, 0) == doctest::Approx(0.5));
    CHECK(conformal_score(even, {0.0}, 1) == doctest::Approx(0.5));

    CHECK_THROWS_AS(conformal_score(model, {0.0}, 2), std::invalid_argument);
}

TEST_CASE("threshold follows the finite-sample quantile rule") {
    CHECK(conformal_threshold({0.1, 0.2, 0.3, 0.4, 0.5}, 0.2) == 0.5);   // ceil(6*0.8) = 5
    CHECK(conformal_threshold({0.1, 0.2, 0.3, 0.4}, 0.5) == 0.3);        // ceil(5*0.5) = 3
    CHECK(conformal_threshold({0.3, 0.1, 0.2}, 0.5) == 0.2);             // order-free
    CHECK(conformal_threshold({0.1, 0.2, 0.3, 0.4, 0.5}, 1e-9) == 0.5);  // alpha -> 0: max score
    CHECK_THROWS_AS(conformal_threshold({}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(conformal_threshold({0.1}, 0.0), std::invalid_argument);
}

TEST_CASE("calibrate") {
    const SynthConfig scfg = coverage_config(3, 400);
    const Dataset data = baseline_only(generate(scfg));
    const ProbModel model = train(data, quick_boost());

    SUBCASE("empty calibration set is rejected") {
        Dataset empty;
        empty.feature_names = data.feature_names;
        CHECK_THROWS_AS(calibrate(model, empty, 0.05), std::invalid_argument);
    }

    SUBCASE("unlabeled calibration rows are rejected") {
        Dataset unlabeled = data;
        unlabeled.records[0].outcome.reset();
        CHECK_THROWS_AS(calibrate(model, unlabeled, 0.05), std::invalid_argument);
    }

    SUBCASE("gamma_hat is a calibration score and shrinks as alpha grows") {
        const auto strict = calibrate(model, data, 0.05);
        const auto loose = calibrate(model, data, 0.5);
        CHECK(strict.gamma_hat >= loose.gamma_hat);
        CHECK(strict.gamma_hat >= 0.0);
        CHECK(strict.gamma_hat <= 1.0);
        CHECK(std::is_sorted(strict.scores.begin(), strict.scores.end()));
    }
}

TEST_CASE("predict_set") {
    ConformalCalibration cal;
    cal.alpha = 0.05;

    SUBCASE("a confident score inside the threshold keeps only its label") {
        cal.gamma_hat = 0.5;
        const ProbModel model = fixed_probability_model(0.02);
        const auto set = predict_set(cal, model, {0.0});
        CHECK(set.contains0);
        CHECK(!set.contains1);
        CHECK(set.members() == "{0}");
    }

    SUBCASE("ties at the threshold are inclusive") {
        cal.gamma_hat = 0.5;
        const ProbModel model = fixed_probability_model(0.5);
        const auto set = predict_set(cal, model, {0.0});
        CHECK(set.both());
        CHECK(set.members() == "{0,1}");
    }

    SUBCASE("a low threshold can empty the set") {
        cal.gamma_hat = 0.3;
        const ProbModel model = fixed_probability_model(0.5);
        const auto set = predict_set(cal, model, {0.0});
        CHECK(set.empty());
        CHECK(set.members() == "{}");
    }
}

TEST_CASE("set_proportions") {
    ConformalCalibration cal;
    cal.alpha = 0.05;

    SUBCASE("proportions sum to one; csv keeps the table row order") {
        cal.gamma_hat = 0.6;
        const ProbModel model = fixed_probability_model(0.25);
        const SetProportions props = set_proportions(cal, model, {{0.0}, {1.0}, {2.0}});
        const auto v = props.as_vector();
        CHECK(std::fabs(v[0] + v[1] + v[2] + v[3] - 1.0) <= 1e-12);
        const std::string csv = props.to_csv();
        const auto p_empty = csv.find("{},");
        const auto p0 = csv.find("{0},");
        const auto p1 = csv.find("{1},");
        const auto p01 = csv.find("{0,1}");
        CHECK(p_empty < p0);
        CHECK(p0 < p1);
        CHECK(p1 < p01);
    }

    SUBCASE("a perfectly confident model splits between the singletons") {
        cal.gamma_hat = 0.4;
        const ProbModel sure1 = fixed_probability_model(1.0 - 1e-12);
        const SetProportions props = set_proportions(cal, sure1, {{0.0}, {1.0}});
        CHECK(props.only1 == doctest::Approx(1.0));
        CHECK(props.empty == 0.0);
        CHECK(props.both == 0.0);
    }

    SUBCASE("a maximal threshold returns both labels everywhere") {
        cal.gamma_hat = 1.0;
        const ProbModel model = fixed_probability_model(0.7);
        const SetProportions props = set_proportions(cal, model, {{0.0}, {1.0}, {2.0}});
        CHECK(props.both == doctest::Approx(1.0));
    }

    SUBCASE("empty input is rejected") {
        cal.gamma_hat = 0.5;
        const ProbModel model = fixed_probability_model(0.5);
        CHECK_THROWS_AS(set_proportions(cal, model, {}), std::invalid_argument);
    }
}

TEST_CASE("prediction sets shrink as alpha grows") {
    const Dataset all = generate(coverage_config(11, 900));
    Dataset pool = baseline_only(all);
    pool.seed = 4;
    SplitSpec spec;
    spec.fractions = {{"train", 0.4}, {"cal", 0.3}, {"test", 0.3}};
    const auto parts = split(pool, spec);
    const ProbModel model = train(parts[0].second, quick_boost());
    const auto cal_strict = calibrate(model, parts[1].second, 0.05);
    const auto cal_loose = calibrate(model, parts[1].second, 0.10);

    CHECK(cal_loose.gamma_hat <= cal_strict.gamma_hat);
    for (const auto& r : parts[2].second.records) {
        const auto strict = predict_set(cal_strict, model, r.covariates);
        const auto loose = predict_set(cal_loose, model, r.covariates);
        // loose set is contained in the strict one
        CHECK((!loose.contains0 || strict.contains0));
        CHECK((!loose.contains1 || strict.contains1));
    }
}

TEST_CASE("single-replication coverage sanity") {
    const Dataset all = generate(coverage_config(21, 1500));
    Dataset pool = baseline_only(all);
    pool.seed = 8;
    SplitSpec spec;
    spec.fractions = {{"train", 0.334}, {"cal", 0.333}, {"test", 0.333}};
    const auto parts = split(pool, spec);
    const ProbModel model = train(parts[0].second, quick_boost());
    const auto cal = calibrate(model, parts[1].second, 0.05);

    std::size_t covered = 0;
    for (const auto& r : parts[2].second.records) {
        const auto set = predict_set(cal, model, r.covariates);
        if ((*r.outcome == 0 && set.contains0) || (*r.outcome == 1 && set.contains1)) ++covered;
    }
    const double coverage = static_cast<double>(covered) / parts[2].second.size();
    CHECK(coverage >= 0.90);  // loose one-replication bound; the acceptance suite averages 200

    // a well-specified model produces essentially no empty sets
    const auto props = set_proportions(cal, model, parts[2].second.points());
    CHECK(props.empty <= 0.01);
}

TEST_CASE("calibration serialization round-trips") {
    ConformalCalibration cal;
    cal.alpha = 0.07;
    cal.gamma_hat = 0.625;
    cal.scores = {0.1, 0.25, 0.625, 0.9};
    const auto reloaded = ConformalCalibration::from_json(cal.to_json());
    CHECK(reloaded.alpha == cal.alpha);
    CHECK(reloaded.gamma_hat == cal.gamma_hat);
    CHECK(reloaded.scores == cal.scores);
}
