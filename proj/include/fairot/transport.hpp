#ifndef FAIROT_TRANSPORT_HPP
#define FAIROT_TRANSPORT_HPP

#include "fairot/forest.hpp"
#include "fairot/tabular.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace fairot {

using PointSet = std::vector<std::vector<double>>;

struct TransportOptions {
    // entry budget for the m x n cost matrix / coupling
    std::size_t memory_budget = 25'000'000;
    // standardize coordinates (pooled mean/sd) before computing distances;
    // projected outputs stay in raw destination units
    bool standardize = false;
};

// Kantorovich coupling between two empirical measures with uniform weights:
// row i sums to 1/m, column j sums to 1/n.
struct DiscreteCoupling {
    std::size_t m = 0;
    std::size_t n = 0;
    std::vector<double> gamma;  // row-major m x n
    PointSet source_points;
    PointSet dest_points;
    double objective = 0.0;  // sum_ij ||X_i - Y_j||^2 gamma_ij

    double at(std::size_t i, std::size_t j) const { return gamma[i * n + j]; }
    double row_sum(std::size_t i) const;
    double col_sum(std::size_t j) const;
};

// Exact LP optimum of sum ||X_i - Y_j||^2 gamma_ij under the uniform marginal
// constraints, solved by network simplex on the transportation polytope.
DiscreteCoupling solve_coupling(const PointSet& source, const PointSet& dest,
                                const TransportOptions& options = {});

// (X_i, Yhat_i) with Yhat_i = m * sum_j gamma_ij Y_j.
std::vector<std::pair<std::vector<double>, std::vector<double>>> barycentric_project(
    const DiscreteCoupling& coupling);

struct SmootherConfig {
    int n_trees = 200;
    int min_leaf = 5;
    int mtry = 0;  // 0 = ceil(d/3)
};

// Smoothed estimate of the transport map: one regression forest per output
// coordinate, optionally averaged over several batch fits.
class TransportMap {
public:
    struct Component {
        std::vector<RegressionForest> coordinate_forests;  // one per output coordinate
    };

    TransportMap() = default;

    std::vector<double> apply(const std::vector<double>& x) const;

    std::size_t dimension() const;
    std::size_t n_components() const { return components_.size(); }

    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& training_pairs() const {
        return training_pairs_;
    }

    nlohmann::json to_json() const;
    static TransportMap from_json(const nlohmann::json& j);

    friend TransportMap fit_smoothed_map(
        const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
        std::uint64_t seed, const SmootherConfig& smoother);
    friend TransportMap batched_fit_map(const PointSet& source, const PointSet& dest,
                                        int n_batches, std::size_t batch_size, std::uint64_t seed,
                                        const TransportOptions& options,
                                        const SmootherConfig& smoother, bool pool_pairs);

private:
    std::vector<Component> components_;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> training_pairs_;
};

// Fit per-coordinate forests to the projected pairs. Requires >= 20 pairs.
TransportMap fit_smoothed_map(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
    std::uint64_t seed, const SmootherConfig& smoother = {});

// Split both sides into random disjoint batches, solve each batch coupling,
// and combine. Default combines by averaging the per-batch smoothed map
// outputs; pool_pairs = true instead fits a single map on the pooled
// projected pairs.
TransportMap batched_fit_map(const PointSet& source, const PointSet& dest, int n_batches,
                             std::size_t batch_size, std::uint64_t seed,
                             const TransportOptions& options = {},
                             const SmootherConfig& smoother = {}, bool pool_pairs = false);

struct MarginalDiagnostic {
    std::string feature;
    std::vector<double> bin_edges;  // n_bins + 1
    std::vector<std::size_t> counts_a;
    std::vector<std::size_t> counts_b;
    double overlap = 0.0;  // sum of min bin proportions, in [0,1]

    std::string to_csv() const;
};

MarginalDiagnostic diagnose_marginals(const Dataset& a, const Dataset& b,
                                      const std::string& feature, int n_bins);

// Overlap coefficient of two samples on shared equal-width bins.
double overlap_coefficient(const std::vector<double>& a, const std::vector<double>& b, int n_bins);

} // namespace fairot

#endif
