#include "fairot/boost_tree.hpp"
#include "fairot/rng.hpp"
#include "fairot/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace fairot;

namespace {

Dataset labeled_dataset(std::size_t n, std::size_t d, std::uint64_t seed, double signal = 1.0) {
    Dataset ds;
    ds.seed = seed;
    for (std::size_t k = 0; k < d; ++k) ds.feature_names.push_back("x" + std::to_string(k));
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Record r;
        r.covariates.resize(d);
        double eta = -0.5;
        for (std::size_t k = 0; k < d; ++k) {
            r.covariates[k] = 4.0 * rng.uniform();
            eta += signal * (k % 2 == 0 ? 0.6 : -0.4) * r.covariates[k];
        }
        r.outcome = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

BoostConfig small_config() {
    BoostConfig cfg;
    cfg.n_trees = 60;
    cfg.learning_rate = 0.1;
    cfg.max_depth = 3;
    cfg.subsample = 1.0;
    cfg.cost_ratio = 1.0;
    cfg.seed = 5;
    return cfg;
}

// stump-free model built by hand: every tree returns a constant
ProbModel constant_tree_model(const std::vector<double>& values, double base_score,
                              double learning_rate) {
    std::vector<RegressionTree> trees;
    for (double v : values) {
        RegressionTree t;
        TreeNode leaf;
        leaf.value = v;
        t.nodes.push_back(leaf);
        trees.push_back(std::move(t));
    }
    BoostConfig cfg;
    cfg.n_trees = static_cast<int>(values.size());
    cfg.learning_rate = learning_rate;
    return ProbModel(std::move(trees), base_score, cfg, 1);
}

Dataset one_feature_holdout(std::size_t n1, std::size_t n0) {
    Dataset ds;
    ds.feature_names = {"x"};
    for (std::size_t i = 0; i < n1 + n0; ++i) {
        Record r;
        r.covariates = {static_cast<double>(i)};
        r.outcome = i < n1 ? 1 : 0;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

} // namespace

TEST_CASE("derive_case_weights") {
    Dataset ds;
    ds.feature_names = {"x"};
    for (int y : {1, 0, 0}) {
        Record r;
        r.covariates = {0.0};
        r.outcome = y;
        ds.records.push_back(r);
    }

    CHECK(derive_case_weights(ds, 8.0) == std::vector<double>{8.0, 1.0, 1.0});
    CHECK(derive_case_weights(ds, 1.0) == std::vector<double>{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(derive_case_weights(ds, 0.0), std::invalid_argument);

    ds.records[1].outcome.reset();
    CHECK_THROWS_AS(derive_case_weights(ds, 2.0), std::invalid_argument);
}

TEST_CASE("training rejects degenerate inputs") {
    Dataset single = labeled_dataset(30, 2, 1);
    for (auto& r : single.records) r.outcome = 1;
    CHECK_THROWS_AS(train(single, small_config()), std::invalid_argument);

    Dataset no_features = labeled_dataset(30, 2, 1);
    no_features.feature_names.clear();
    for (auto& r : no_features.records) r.covariates.clear();
    CHECK_THROWS_AS(train(no_features, small_config()), std::invalid_argument);

    BoostConfig bad = small_config();
    bad.cost_ratio = -1.0;
    CHECK_THROWS_AS(train(labeled_dataset(30, 2, 1), bad), std::invalid_argument);
}

TEST_CASE("near-separable data is fit to high training accuracy") {
    SynthConfig scfg;
    scfg.n_per_group = 100;  // two groups -> 200 rows
    scfg.d = 2;
    scfg.shift = {0.0, 0.0};
    scfg.outcome_coefficients = {4.0, 4.0};
    scfg.intercept = -24.0;
    scfg.observation_bias = 0.0;
    scfg.own_shapes = {2.0, 2.0};
    scfg.seed = 17;
    const Dataset ds = generate(scfg);
    REQUIRE(ds.size() == 200);

    BoostConfig cfg = small_config();
    cfg.n_trees = 120;
    const ProbModel model = train(ds, cfg);
    std::size_t correct = 0;
    for (const auto& r : ds.records) {
        if (model.predict_label(r.covariates) == *r.outcome) ++correct;
    }
    CHECK(static_cast<double>(correct) / ds.size() >= 0.95);
}

TEST_CASE("constant covariates give an intercept-only fit") {
    Dataset ds;
    ds.feature_names = {"x"};
    Rng rng(3);
    std::size_t positives = 0;
    for (int i = 0; i < 50; ++i) {
        Record r;
        r.covariates = {7.0};
        r.outcome = rng.bernoulli(0.3) ? 1 : 0;
        positives += *r.outcome;
        ds.records.push_back(r);
    }
    const ProbModel model = train(ds, small_config());
    const double base_rate = static_cast<double>(positives) / ds.size();
    for (double x : {7.0, 0.0, 100.0}) {
        CHECK(std::fabs(model.predict_proba({x}).second - base_rate) <= 1e-6);
    }
}

TEST_CASE("training is deterministic") {
    const Dataset ds = labeled_dataset(150, 3, 11);
    BoostConfig cfg = small_config();
    cfg.subsample = 0.5;
    const ProbModel a = train(ds, cfg);
    const ProbModel b = train(ds, cfg);
    Rng rng(77);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x = {4 * rng.uniform(), 4 * rng.uniform(), 4 * rng.uniform()};
        CHECK(a.predict_proba(x).second == b.predict_proba(x).second);
    }
}

TEST_CASE("predict_proba") {
    const Dataset ds = labeled_dataset(200, 3, 13);
    const ProbModel model = train(ds, small_config());

    SUBCASE("probabilities live on the simplex") {
        Rng rng(19);
        for (int i = 0; i < 10000; ++i) {
            const std::vector<double> x = {8 * rng.uniform() - 2, 8 * rng.uniform() - 2,
                                           8 * rng.uniform() - 2};
            const auto [p0, p1] = model.predict_proba(x);
            CHECK(p0 >= 0.0);
            CHECK(p1 >= 0.0);
            CHECK(std::fabs(p0 + p1 - 1.0) <= 1e-12);
        }
    }

    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(model.predict_proba({1.0}), std::invalid_argument);
    }

    SUBCASE("a monotone univariate toy stays monotone in the fitted values") {
        Dataset toy;
        toy.feature_names = {"x"};
        for (int i = 0; i < 10; ++i) {
            Record r;
            r.covariates = {static_cast<double>(i)};
            r.outcome = i >= 5 ? 1 : 0;
            toy.records.push_back(r);
        }
        BoostConfig cfg;
        cfg.n_trees = 50;
        cfg.learning_rate = 0.3;
        cfg.max_depth = 1;
        cfg.subsample = 1.0;
        cfg.min_leaf_weight = 1.0;
        cfg.seed = 2;
        const ProbModel m = train(toy, cfg);
        double prev = -1.0;
        for (const auto& r : toy.records) {
            const double p1 = m.predict_proba(r.covariates).second;
            CHECK(p1 >= prev);
            prev = p1;
        }
        // the fit actually separates the two halves
        CHECK(m.predict_proba({0.0}).second < 0.5);
        CHECK(m.predict_proba({9.0}).second > 0.5);
    }
}

TEST_CASE("argmax ties resolve to label 0") {
    const ProbModel even = constant_tree_model({}, 0.0, 0.1);
    CHECK(even.predict_proba({0.0}).second == 0.5);
    CHECK(even.predict_label({0.0}) == 0);
}

TEST_CASE("case weights are equivalent to row replication") {
    Dataset ds = labeled_dataset(200, 3, 23);
    BoostConfig weighted_cfg = small_config();
    weighted_cfg.cost_ratio = 8.0;
    weighted_cfg.subsample = 1.0;
    const ProbModel weighted = train(ds, weighted_cfg);

    Dataset replicated;
    replicated.feature_names = ds.feature_names;
    replicated.seed = ds.seed;
    for (const auto& r : ds.records) {
        const int copies = *r.outcome == 1 ? 8 : 1;
        for (int c = 0; c < copies; ++c) replicated.records.push_back(r);
    }
    BoostConfig plain_cfg = weighted_cfg;
    plain_cfg.cost_ratio = 1.0;
    const ProbModel duplicated = train(replicated, plain_cfg);

    Rng rng(29);
    double max_diff = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> x = {4 * rng.uniform(), 4 * rng.uniform(), 4 * rng.uniform()};
        max_diff = std::max(max_diff, std::fabs(weighted.predict_proba(x).second -
                                                duplicated.predict_proba(x).second));
    }
    CHECK(max_diff <= 1e-9);
}

TEST_CASE("select_iterations") {
    SUBCASE("keeps every tree while the deviance is still falling") {
        const ProbModel model = constant_tree_model(std::vector<double>(60, 0.1), 0.0, 0.1);
        const Dataset holdout = one_feature_holdout(100, 50);
        CHECK(select_iterations(model, holdout) == 60);
    }

    SUBCASE("stops shortly after the deviance goes flat") {
        std::vector<double> values(60, 0.0);
        for (int t = 0; t < 40; ++t) values[t] = 0.1;  // flat from iteration 40
        const ProbModel model = constant_tree_model(values, 0.0, 0.1);
        const Dataset holdout = one_feature_holdout(100, 50);
        const int chosen = select_iterations(model, holdout);
        CHECK(chosen <= 65);
        CHECK(chosen >= 40);
    }

    SUBCASE("a single tree returns one") {
        const ProbModel model = constant_tree_model({0.1}, 0.0, 0.1);
        const Dataset holdout = one_feature_holdout(10, 5);
        CHECK(select_iterations(model, holdout) == 1);
    }
}

TEST_CASE("serialization round-trips probabilities bit-exactly") {
    const Dataset ds = labeled_dataset(150, 3, 31);
    BoostConfig cfg = small_config();
    cfg.subsample = 0.5;
    cfg.cost_ratio = 4.0;
    const ProbModel model = train(ds, cfg);

    const std::string dumped = model.to_json().dump();
    const ProbModel reloaded = ProbModel::from_json(nlohmann::json::parse(dumped));

    CHECK(reloaded.config().cost_ratio == 4.0);
    CHECK(reloaded.n_trees() == model.n_trees());
    Rng rng(37);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x = {4 * rng.uniform(), 4 * rng.uniform(), 4 * rng.uniform()};
        CHECK(model.predict_proba(x).second == reloaded.predict_proba(x).second);
        CHECK(model.decision_function(x, 10) == reloaded.decision_function(x, 10));
    }
}
