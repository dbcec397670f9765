#include "fairot/synth.hpp"
#include "fairot/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairot {

namespace {

double sigmoid(double f) { return 1.0 / (1.0 + std::exp(-f)); }

} // namespace

void SynthConfig::validate() const {
    if (n_per_group < 1) throw std::invalid_argument("n_per_group must be >= 1");
    if (d < 1) throw std::invalid_argument("d must be >= 1");
    if (shift.size() != d) throw std::invalid_argument("shift must have length d");
    if (outcome_coefficients.size() != d) {
        throw std::invalid_argument("outcome_coefficients must have length d");
    }
    if (own_shapes.size() != d) throw std::invalid_argument("own_shapes must have length d");
    if (observation_bias < 0.0) throw std::invalid_argument("observation_bias must be >= 0");
    if (shared_shape <= 0.0 || scale <= 0.0) {
        throw std::invalid_argument("shape and scale parameters must be positive");
    }
    for (double s : own_shapes) {
        if (s <= 0.0) throw std::invalid_argument("own_shapes entries must be positive");
    }
}

SynthConfig SynthConfig::defaults() {
    SynthConfig cfg;
    cfg.n_per_group = 4000;
    cfg.d = 4;
    cfg.shift = {1.2, 1.0, 0.9, 1.1};
    cfg.outcome_coefficients = {0.50, 0.45, -0.35, 0.40};
    cfg.intercept = -4.9;
    cfg.observation_bias = 0.4;
    cfg.seed = 1;
    cfg.shared_shape = 1.0;
    cfg.own_shapes = {2.0, 1.5, 2.5, 1.8};
    cfg.scale = 1.0;
    return cfg;
}

Dataset generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);

    Dataset ds;
    ds.seed = config.seed;
    ds.feature_names.reserve(config.d);
    for (std::size_t k = 0; k < config.d; ++k) ds.feature_names.push_back("x" + std::to_string(k));
    ds.records.reserve(2 * config.n_per_group);

    for (int grp = 0; grp < 2; ++grp) {
        const Group group = grp == 0 ? Group::baseline : Group::comparison;
        for (std::size_t i = 0; i < config.n_per_group; ++i) {
            Record rec;
            rec.group = group;
            rec.covariates.resize(config.d);
            const double shared = rng.gamma(config.shared_shape, config.scale);
            double eta = config.intercept;
            for (std::size_t k = 0; k < config.d; ++k) {
                double x = shared + rng.gamma(config.own_shapes[k], config.scale);
                if (group == Group::comparison) x += config.shift[k];
                rec.covariates[k] = x;
                eta += config.outcome_coefficients[k] * x;
            }
            // one uniform drives both draws, so Y == Y* exactly when the
            // observation bias is zero
            const double u = rng.uniform();
            const int y_star = u < sigmoid(eta) ? 1 : 0;
            rec.counterfactual_outcome = y_star;
            if (group == Group::baseline) {
                rec.outcome = y_star;
            } else {
                rec.outcome = u < sigmoid(eta + config.observation_bias) ? 1 : 0;
            }
            ds.records.push_back(std::move(rec));
        }
    }
    return ds;
}

double expected_rate(const SynthConfig& config, const Dataset& data, Group group,
                     bool with_observation_bias) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : data.records) {
        if (r.group != group) continue;
        double eta = config.intercept;
        for (std::size_t k = 0; k < config.d; ++k) {
            eta += config.outcome_coefficients[k] * r.covariates[k];
        }
        if (with_observation_bias && group == Group::comparison) eta += config.observation_bias;
        sum += sigmoid(eta);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("no records in the requested group");
    return sum / n;
}

} // namespace fairot
