#include "fairot/transport.hpp"
#include "fairot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fairot {

namespace {

void check_points(const PointSet& source, const PointSet& dest) {
    if (source.empty() || dest.empty()) {
        throw std::invalid_argument("transport requires nonempty source and dest point sets");
    }
    const std::size_t d = source[0].size();
    if (d == 0) throw std::invalid_argument("transport points must have dimension >= 1");
    for (const auto& p : source) {
        if (p.size() != d) throw std::invalid_argument("source points have inconsistent dimension");
    }
    for (const auto& p : dest) {
        if (p.size() != d) {
            throw std::invalid_argument("source and dest point dimensions differ: " +
                                        std::to_string(d) + " vs " + std::to_string(p.size()));
        }
    }
}

// Exact solver for the uniform-marginal transportation polytope in integer
// flow units: row i ships n units, column j receives m units, and
// gamma_ij = f_ij / (m*n). Supplies carry a one-unit perturbation (balanced
// on the last column) so every basic solution is nondegenerate; each pivot
// then strictly decreases cost and the simplex terminates without
// anti-cycling machinery. The optimal basis is re-evaluated afterwards with
// the unperturbed supplies, keeping all marginals exact integers.
class TransportSimplex {
public:
    TransportSimplex(std::size_t m, std::size_t n, const std::vector<double>& cost)
        : m_(m), n_(n), cost_(cost), adjacency_(m + n), basic_(m * n, 0) {}

    // row-major integer flows f (gamma = f / (m*n))
    std::vector<std::int64_t> solve() {
        build_initial_basis();
        const double max_cost = *std::max_element(cost_.begin(), cost_.end());
        double tolerance =
            std::max(static_cast<double>(m_ + n_) * 1e-15, 1e-13) * (1.0 + max_cost);

        const std::size_t n_arcs = m_ * n_;
        const std::size_t block =
            std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(double(n_arcs))));
        std::size_t cursor = 0;
        std::size_t pivots = 0;
        const std::size_t pivot_alarm = 1000 + 60 * (m_ + n_);
        for (;;) {
            compute_duals();

            double best_rc = -tolerance;
            std::size_t best_arc = n_arcs;
            std::size_t scanned = 0;
            while (scanned < n_arcs) {
                const std::size_t stop = std::min(n_arcs, scanned + block);
                for (; scanned < stop; ++scanned) {
                    const std::size_t a = cursor;
                    cursor = cursor + 1 == n_arcs ? 0 : cursor + 1;
                    if (basic_[a]) continue;
                    const double rc = cost_[a] - u_[a / n_] - v_[a % n_];
                    if (rc < best_rc) {
                        best_rc = rc;
                        best_arc = a;
                    }
                }
                if (best_arc != n_arcs) break;
            }
            if (best_arc == n_arcs) break;  // no arc prices out: optimal
            pivot(best_arc / n_, best_arc % n_);
            if (++pivots > pivot_alarm) {  // numerical stall safety valve
                tolerance *= 10.0;
                pivots = 0;
            }
        }
        return unperturbed_flows();
    }

private:
    struct BasicArc {
        std::size_t row;
        std::size_t col;
        std::int64_t flow;  // perturbed units
    };

    std::size_t node_of_col(std::size_t j) const { return m_ + j; }

    std::int64_t perturbed_supply() const {
        return static_cast<std::int64_t>(n_) * static_cast<std::int64_t>(m_ + 1) + 1;
    }
    std::int64_t perturbed_demand(std::size_t j) const {
        std::int64_t d = static_cast<std::int64_t>(m_) * static_cast<std::int64_t>(m_ + 1);
        if (j + 1 == n_) d += static_cast<std::int64_t>(m_);
        return d;
    }

    // Row-minimum greedy fill. With perturbed totals no allocation closes a
    // row and a column at once except the final one, so exactly m+n-1 arcs
    // come out and they span the bipartite node set.
    void build_initial_basis() {
        std::vector<std::int64_t> supply(m_), demand(n_);
        for (std::size_t i = 0; i < m_; ++i) supply[i] = perturbed_supply();
        for (std::size_t j = 0; j < n_; ++j) demand[j] = perturbed_demand(j);

        arcs_.clear();
        arcs_.reserve(m_ + n_ - 1);
        for (std::size_t i = 0; i < m_; ++i) {
            while (supply[i] > 0) {
                std::size_t best_j = n_;
                double best_c = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n_; ++j) {
                    if (demand[j] > 0 && cost_[i * n_ + j] < best_c) {
                        best_c = cost_[i * n_ + j];
                        best_j = j;
                    }
                }
                const std::int64_t f = std::min(supply[i], demand[best_j]);
                supply[i] -= f;
                demand[best_j] -= f;
                add_arc(i, best_j, f);
            }
        }
    }

    void add_arc(std::size_t i, std::size_t j, std::int64_t flow) {
        const std::size_t id = arcs_.size();
        arcs_.push_back({i, j, flow});
        adjacency_[i].push_back(id);
        adjacency_[node_of_col(j)].push_back(id);
        basic_[i * n_ + j] = 1;
    }

    void detach_arc(std::size_t id) {
        auto detach = [&](std::size_t node) {
            auto& adj = adjacency_[node];
            adj.erase(std::find(adj.begin(), adj.end(), id));
        };
        detach(arcs_[id].row);
        detach(node_of_col(arcs_[id].col));
        basic_[arcs_[id].row * n_ + arcs_[id].col] = 0;
    }

    // duals from scratch over the basis tree: u_i + v_j = c_ij on basic arcs
    void compute_duals() {
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        parent_.assign(m_ + n_, SIZE_MAX);
        parent_arc_.assign(m_ + n_, SIZE_MAX);
        stack_.clear();
        stack_.push_back(0);
        parent_[0] = 0;
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            for (const std::size_t arc_id : adjacency_[node]) {
                const auto& arc = arcs_[arc_id];
                const std::size_t other = node < m_ ? node_of_col(arc.col) : arc.row;
                if (parent_[other] != SIZE_MAX) continue;
                parent_[other] = node;
                parent_arc_[other] = arc_id;
                if (other < m_) {
                    u_[other] = cost_[arc.row * n_ + arc.col] - v_[arc.col];
                } else {
                    v_[arc.col] = cost_[arc.row * n_ + arc.col] - u_[arc.row];
                }
                stack_.push_back(other);
            }
        }
    }

    // Push theta around the unique tree cycle closed by the entering arc
    // (ei -> col ej). On the directed cycle, a tree arc traversed row-to-col
    // gains flow and one traversed col-to-row loses flow.
    void pivot(std::size_t ei, std::size_t ej) {
        path_a_.clear();
        cycle_.clear();
        on_a_.assign(m_ + n_, 0);
        for (std::size_t node = ei;; node = parent_[node]) {
            path_a_.push_back(node);
            on_a_[node] = 1;
            if (parent_[node] == node) break;
        }
        std::size_t lca = node_of_col(ej);
        std::size_t n_b = 0;
        path_b_.clear();
        for (; !on_a_[lca]; lca = parent_[lca]) {
            path_b_.push_back(lca);
            ++n_b;
        }

        // cycle direction: ei --entering--> col ej --tree--> lca --tree--> ei.
        // Leg lca -> ei visits each arc parent-to-node, so the arc is
        // traversed row-to-col exactly when the path node is a column.
        for (const std::size_t node : path_a_) {
            if (node == lca) break;
            cycle_.emplace_back(parent_arc_[node], node < m_ ? -1 : +1);
        }
        // Leg col ej -> lca visits each arc node-to-parent: row-to-col
        // exactly when the path node is a row.
        for (std::size_t k = 0; k < n_b; ++k) {
            const std::size_t node = path_b_[k];
            cycle_.emplace_back(parent_arc_[node], node < m_ ? +1 : -1);
        }

        std::int64_t theta = std::numeric_limits<std::int64_t>::max();
        std::size_t leaving = SIZE_MAX;
        for (const auto& [arc_id, dir] : cycle_) {
            if (dir < 0 && arcs_[arc_id].flow < theta) {
                theta = arcs_[arc_id].flow;
                leaving = arc_id;
            }
        }
        if (leaving == SIZE_MAX) throw std::runtime_error("transport simplex: unbounded pivot");

        for (const auto& [arc_id, dir] : cycle_) arcs_[arc_id].flow += dir * theta;

        detach_arc(leaving);
        arcs_[leaving] = {ei, ej, theta};
        adjacency_[ei].push_back(leaving);
        adjacency_[node_of_col(ej)].push_back(leaving);
        basic_[ei * n_ + ej] = 1;
    }

    // Unique flows on the optimal basis tree under unperturbed supplies
    // (rows ship n, columns receive m), found by peeling leaves.
    std::vector<std::int64_t> unperturbed_flows() {
        std::vector<std::int64_t> balance(m_ + n_);
        for (std::size_t i = 0; i < m_; ++i) balance[i] = static_cast<std::int64_t>(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            balance[node_of_col(j)] = -static_cast<std::int64_t>(m_);
        }

        std::vector<std::size_t> degree(m_ + n_);
        std::vector<char> arc_done(arcs_.size(), 0);
        std::vector<std::size_t> queue;
        for (std::size_t node = 0; node < m_ + n_; ++node) {
            degree[node] = adjacency_[node].size();
            if (degree[node] == 1) queue.push_back(node);
        }

        std::vector<std::int64_t> result(m_ * n_, 0);
        while (!queue.empty()) {
            const std::size_t node = queue.back();
            queue.pop_back();
            for (const std::size_t arc_id : adjacency_[node]) {
                if (arc_done[arc_id]) continue;
                const auto& arc = arcs_[arc_id];
                std::int64_t f;
                if (node < m_) {
                    f = balance[node];  // remaining supply ships out here
                    balance[node_of_col(arc.col)] += f;
                } else {
                    f = -balance[node];  // remaining demand arrives here
                    balance[arc.row] -= f;
                }
                if (f < 0) throw std::runtime_error("transport simplex: negative basis flow");
                balance[node] = 0;
                result[arc.row * n_ + arc.col] = f;
                arc_done[arc_id] = 1;
                const std::size_t other = node < m_ ? node_of_col(arc.col) : arc.row;
                if (--degree[other] == 1) queue.push_back(other);
                break;
            }
        }
        return result;
    }

    const std::size_t m_, n_;
    const std::vector<double>& cost_;
    std::vector<BasicArc> arcs_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::vector<char> basic_;
    std::vector<double> u_, v_;
    std::vector<std::size_t> parent_, parent_arc_, stack_;
    std::vector<std::size_t> path_a_, path_b_;
    std::vector<char> on_a_;
    std::vector<std::pair<std::size_t, int>> cycle_;
};

std::vector<double> squared_cost_matrix(const PointSet& source, const PointSet& dest,
                                        bool standardize) {
    const std::size_t m = source.size(), n = dest.size(), d = source[0].size();
    std::vector<double> scale(d, 1.0);
    if (standardize) {
        for (std::size_t k = 0; k < d; ++k) {
            double sum = 0.0, sq = 0.0;
            for (const auto& p : source) sum += p[k];
            for (const auto& p : dest) sum += p[k];
            const double mean = sum / (m + n);
            for (const auto& p : source) sq += (p[k] - mean) * (p[k] - mean);
            for (const auto& p : dest) sq += (p[k] - mean) * (p[k] - mean);
            const double sd = std::sqrt(sq / (m + n));
            scale[k] = sd > 0.0 ? 1.0 / sd : 1.0;
        }
    }
    std::vector<double> cost(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = (source[i][k] - dest[j][k]) * scale[k];
                s += diff * diff;
            }
            cost[i * n + j] = s;
        }
    }
    return cost;
}

// Deterministic smoother seed for batch b of a batched fit.
std::uint64_t batch_seed(std::uint64_t seed, int b) {
    return seed + 1000003ull * static_cast<std::uint64_t>(b + 1);
}

} // namespace

double DiscreteCoupling::row_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += gamma[i * n + j];
    return s;
}

double DiscreteCoupling::col_sum(std::size_t j) const {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += gamma[i * n + j];
    return s;
}

DiscreteCoupling solve_coupling(const PointSet& source, const PointSet& dest,
                                const TransportOptions& options) {
    check_points(source, dest);
    const std::size_t m = source.size(), n = dest.size();
    if (m * n > options.memory_budget) {
        throw std::invalid_argument(
            "coupling of " + std::to_string(m) + "x" + std::to_string(n) +
            " exceeds the memory budget of " + std::to_string(options.memory_budget) +
            " entries; use batched_fit_map instead");
    }

    const auto cost = squared_cost_matrix(source, dest, options.standardize);
    TransportSimplex simplex(m, n, cost);
    const auto flows = simplex.solve();

    DiscreteCoupling coupling;
    coupling.m = m;
    coupling.n = n;
    coupling.source_points = source;
    coupling.dest_points = dest;
    coupling.gamma.resize(m * n);
    const double total = static_cast<double>(m) * static_cast<double>(n);
    double objective_flow = 0.0;
    for (std::size_t a = 0; a < m * n; ++a) {
        coupling.gamma[a] = static_cast<double>(flows[a]) / total;
        if (flows[a] != 0) objective_flow += cost[a] * static_cast<double>(flows[a]);
    }
    coupling.objective = objective_flow / total;
    return coupling;
}

std::vector<std::pair<std::vector<double>, std::vector<double>>> barycentric_project(
    const DiscreteCoupling& coupling) {
    const std::size_t m = coupling.m, n = coupling.n;
    const std::size_t d = coupling.dest_points[0].size();
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    pairs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> yhat(d, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double g = coupling.at(i, j);
            if (g == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) yhat[k] += g * coupling.dest_points[j][k];
        }
        for (std::size_t k = 0; k < d; ++k) yhat[k] *= static_cast<double>(m);
        pairs.emplace_back(coupling.source_points[i], std::move(yhat));
    }
    return pairs;
}

std::vector<double> TransportMap::apply(const std::vector<double>& x) const {
    if (components_.empty()) throw std::runtime_error("transport map is empty");
    const std::size_t d = components_[0].coordinate_forests.size();
    if (x.size() != d) {
        throw std::invalid_argument("transport map expects dimension " + std::to_string(d) +
                                    ", got " + std::to_string(x.size()));
    }
    std::vector<double> out(d, 0.0);
    for (const auto& component : components_) {
        for (std::size_t k = 0; k < d; ++k) {
            out[k] += component.coordinate_forests[k].predict(x);
        }
    }
    for (double& v : out) v /= static_cast<double>(components_.size());
    return out;
}

std::size_t TransportMap::dimension() const {
    return components_.empty() ? 0 : components_[0].coordinate_forests.size();
}

TransportMap fit_smoothed_map(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
    std::uint64_t seed, const SmootherConfig& smoother) {
    if (pairs.size() < 20) {
        throw std::invalid_argument("need at least 20 pairs to fit a smoothed map, got " +
                                    std::to_string(pairs.size()));
    }
    const std::size_t d = pairs[0].first.size();
    PointSet x;
    x.reserve(pairs.size());
    for (const auto& [src, dst] : pairs) x.push_back(src);

    TransportMap map;
    TransportMap::Component component;
    component.coordinate_forests.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> y;
        y.reserve(pairs.size());
        for (const auto& [src, dst] : pairs) y.push_back(dst[k]);
        ForestConfig cfg;
        cfg.n_trees = smoother.n_trees;
        cfg.min_leaf = smoother.min_leaf;
        cfg.mtry = smoother.mtry;
        cfg.seed = seed + k;  // distinct stream per coordinate
        component.coordinate_forests.push_back(RegressionForest::fit(x, y, cfg));
    }
    map.components_.push_back(std::move(component));
    map.training_pairs_ = pairs;
    return map;
}

TransportMap batched_fit_map(const PointSet& source, const PointSet& dest, int n_batches,
                             std::size_t batch_size, std::uint64_t seed,
                             const TransportOptions& options, const SmootherConfig& smoother,
                             bool pool_pairs) {
    check_points(source, dest);
    if (n_batches <= 0) throw std::invalid_argument("n_batches must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (batch_size * batch_size > options.memory_budget) {
        throw std::invalid_argument("batch_size^2 exceeds the memory budget");
    }
    const std::size_t need = static_cast<std::size_t>(n_batches) * batch_size;
    if (source.size() < need || dest.size() < need) {
        throw std::invalid_argument(
            "need " + std::to_string(need) + " records per side for " +
            std::to_string(n_batches) + " batches of " + std::to_string(batch_size) + ", have " +
            std::to_string(source.size()) + " source and " + std::to_string(dest.size()) +
            " dest");
    }

    Rng rng(seed);
    std::vector<std::size_t> src_order(source.size()), dst_order(dest.size());
    std::iota(src_order.begin(), src_order.end(), 0);
    std::iota(dst_order.begin(), dst_order.end(), 0);
    rng.shuffle(src_order);
    rng.shuffle(dst_order);

    TransportMap map;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pooled;
    pooled.reserve(need);
    for (int b = 0; b < n_batches; ++b) {
        // sorted batch indices keep n_batches=1 identical to the unbatched path
        std::vector<std::size_t> src_idx(src_order.begin() + b * batch_size,
                                         src_order.begin() + (b + 1) * batch_size);
        std::vector<std::size_t> dst_idx(dst_order.begin() + b * batch_size,
                                         dst_order.begin() + (b + 1) * batch_size);
        std::sort(src_idx.begin(), src_idx.end());
        std::sort(dst_idx.begin(), dst_idx.end());

        PointSet src_batch, dst_batch;
        src_batch.reserve(batch_size);
        dst_batch.reserve(batch_size);
        for (std::size_t i : src_idx) src_batch.push_back(source[i]);
        for (std::size_t j : dst_idx) dst_batch.push_back(dest[j]);

        const auto coupling = solve_coupling(src_batch, dst_batch, options);
        auto pairs = barycentric_project(coupling);
        if (!pool_pairs) {
            TransportMap batch_map = fit_smoothed_map(pairs, batch_seed(seed, b), smoother);
            map.components_.push_back(std::move(batch_map.components_[0]));
        }
        pooled.insert(pooled.end(), std::make_move_iterator(pairs.begin()),
                      std::make_move_iterator(pairs.end()));
    }

    if (pool_pairs) {
        TransportMap pooled_map = fit_smoothed_map(pooled, batch_seed(seed, n_batches), smoother);
        map.components_ = std::move(pooled_map.components_);
    }
    map.training_pairs_ = std::move(pooled);
    return map;
}

nlohmann::json TransportMap::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "transport_map";
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& component : components_) {
        nlohmann::json forests = nlohmann::json::array();
        for (const auto& forest : component.coordinate_forests) forests.push_back(forest.to_json());
        comps.push_back(std::move(forests));
    }
    j["components"] = std::move(comps);
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [src, dst] : training_pairs_) {
        pairs.push_back(nlohmann::json{{"x", src}, {"y", dst}});
    }
    j["training_pairs"] = std::move(pairs);
    return j;
}

TransportMap TransportMap::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1 || j.at("kind") != "transport_map") {
        throw std::runtime_error("unsupported transport map format");
    }
    TransportMap map;
    for (const auto& comp : j.at("components")) {
        Component component;
        for (const auto& forest : comp) {
            component.coordinate_forests.push_back(RegressionForest::from_json(forest));
        }
        map.components_.push_back(std::move(component));
    }
    for (const auto& pair : j.at("training_pairs")) {
        map.training_pairs_.emplace_back(pair.at("x").get<std::vector<double>>(),
                                         pair.at("y").get<std::vector<double>>());
    }
    return map;
}

std::string MarginalDiagnostic::to_csv() const {
    std::ostringstream out;
    out << "bin_left,bin_right,count_a,count_b\n";
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i) {
        out << format_double(bin_edges[i]) << ',' << format_double(bin_edges[i + 1]) << ','
            << counts_a[i] << ',' << counts_b[i] << '\n';
    }
    out << "overlap,,," << format_double(overlap) << '\n';
    return out.str();
}

double overlap_coefficient(const std::vector<double>& a, const std::vector<double>& b,
                           int n_bins) {
    if (a.empty() || b.empty()) throw std::invalid_argument("overlap requires nonempty samples");
    if (n_bins <= 0) throw std::invalid_argument("n_bins must be positive");
    double lo = std::min(*std::min_element(a.begin(), a.end()),
                         *std::min_element(b.begin(), b.end()));
    double hi = std::max(*std::max_element(a.begin(), a.end()),
                         *std::max_element(b.begin(), b.end()));
    if (lo == hi) return 1.0;  // all mass shares one bin
    const double width = (hi - lo) / n_bins;
    std::vector<double> pa(n_bins, 0.0), pb(n_bins, 0.0);
    auto bin_of = [&](double v) {
        const int idx = static_cast<int>((v - lo) / width);
        return std::min(n_bins - 1, std::max(0, idx));
    };
    for (double v : a) pa[bin_of(v)] += 1.0 / a.size();
    for (double v : b) pb[bin_of(v)] += 1.0 / b.size();
    double overlap = 0.0;
    for (int i = 0; i < n_bins; ++i) overlap += std::min(pa[i], pb[i]);
    return std::min(1.0, overlap);
}

MarginalDiagnostic diagnose_marginals(const Dataset& a, const Dataset& b,
                                      const std::string& feature, int n_bins) {
    if (n_bins <= 0) throw std::invalid_argument("n_bins must be positive");
    const auto col_a = a.feature_column(a.feature_index(feature));
    const auto col_b = b.feature_column(b.feature_index(feature));
    if (col_a.empty() || col_b.empty()) {
        throw std::invalid_argument("diagnose_marginals requires nonempty datasets");
    }

    MarginalDiagnostic diag;
    diag.feature = feature;
    double lo = std::min(*std::min_element(col_a.begin(), col_a.end()),
                         *std::min_element(col_b.begin(), col_b.end()));
    double hi = std::max(*std::max_element(col_a.begin(), col_a.end()),
                         *std::max_element(col_b.begin(), col_b.end()));
    if (lo == hi) hi = lo + 1.0;
    const double width = (hi - lo) / n_bins;
    diag.bin_edges.resize(n_bins + 1);
    for (int i = 0; i <= n_bins; ++i) diag.bin_edges[i] = lo + i * width;
    diag.counts_a.assign(n_bins, 0);
    diag.counts_b.assign(n_bins, 0);
    auto bin_of = [&](double v) {
        const int idx = static_cast<int>((v - lo) / width);
        return std::min(n_bins - 1, std::max(0, idx));
    };
    for (double v : col_a) diag.counts_a[bin_of(v)] += 1;
    for (double v : col_b) diag.counts_b[bin_of(v)] += 1;
    double overlap = 0.0;
    for (int i = 0; i < n_bins; ++i) {
        overlap += std::min(static_cast<double>(diag.counts_a[i]) / col_a.size(),
                            static_cast<double>(diag.counts_b[i]) / col_b.size());
    }
    diag.overlap = std::min(1.0, overlap);
    return diag;
}

} // namespace fairot
