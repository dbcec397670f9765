#ifndef FAIROT_SYNTH_HPP
#define FAIROT_SYNTH_HPP

#include "fairot/tabular.hpp"

#include <cstdint>
#include <vector>

namespace fairot {

// Two-group synthetic population with controllable covariate shift, a
// group-blind structural outcome model, optional group-dependent observation
// bias on the recorded outcome, and oracle counterfactual labels on every
// record.
struct SynthConfig {
    std::size_t n_per_group = 4000;
    std::size_t d = 4;
    std::vector<double> shift;                 // location shift of the comparison group
    std::vector<double> outcome_coefficients;  // log-odds slopes, group-blind
    double intercept = 0.0;
    double observation_bias = 0.0;  // added to the comparison group's observed log-odds
    std::uint64_t seed = 1;

    // right-skewed marginals: x_k = shared gamma + own gamma
    double shared_shape = 1.0;
    std::vector<double> own_shapes;
    double scale = 1.0;

    void validate() const;
    static SynthConfig defaults();
};

Dataset generate(const SynthConfig& config);

// expected outcome rate under the generator's own logistic formula,
// averaged over the generated covariates of one group
double expected_rate(const SynthConfig& config, const Dataset& data, Group group,
                     bool with_observation_bias);

} // namespace fairot

#endif
