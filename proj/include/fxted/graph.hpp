#pragma once

#include "fxted/error.hpp"
#include "fxted/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fxted {

inline constexpr double kEigenDedupTol = 1e-9;
inline constexpr double kConnectivityTol = 1e-9;

/// Undirected, unweighted communication graph over generator buses.
class Topology {
public:
    Topology() = default;

    explicit Topology(std::size_t n) : adjacency_(n, n) {}

    /// Throws ValidationError on out-of-range indices or self loops.
    static Topology from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
        Topology g(n);
        for (auto [i, j] : edges) {
            if (i >= n || j >= n)
                throw ValidationError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") out of range for n=" + std::to_string(n));
            if (i == j) throw ValidationError("self loop at node " + std::to_string(i));
            g.adjacency_(i, j) = 1.0;
            g.adjacency_(j, i) = 1.0;
        }
        return g;
    }

    static Topology from_adjacency(const Matrix& a) {
        if (a.rows() != a.cols()) throw ValidationError("adjacency must be square");
        for (std::size_t i = 0; i < a.rows(); ++i) {
            if (a(i, i) != 0.0) throw ValidationError("adjacency diagonal must be zero");
            for (std::size_t j = 0; j < a.cols(); ++j) {
                if (a(i, j) != 0.0 && a(i, j) != 1.0)
                    throw ValidationError("adjacency entries must be 0 or 1");
                if (a(i, j) != a(j, i)) throw ValidationError("adjacency must be symmetric");
            }
        }
        Topology g;
        g.adjacency_ = a;
        return g;
    }

    static Topology complete(std::size_t n) {
        Topology g(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) g.adjacency_(i, j) = 1.0;
        return g;
    }

    static Topology path(std::size_t n) {
        Topology g(n);
        for (std::size_t i = 0; i + 1 < n; ++i) g.adjacency_(i, i + 1) = g.adjacency_(i + 1, i) = 1.0;
        return g;
    }

    static Topology ring(std::size_t n) {
        Topology g = path(n);
        if (n > 2) g.adjacency_(0, n - 1) = g.adjacency_(n - 1, 0) = 1.0;
        return g;
    }

    std::size_t size() const noexcept { return adjacency_.rows(); }
    const Matrix& adjacency() const noexcept { return adjacency_; }
    bool has_edge(std::size_t i, std::size_t j) const noexcept { return adjacency_(i, j) != 0.0; }

    /// Edges with i < j, in row-major order.
    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = i + 1; j < size(); ++j)
                if (has_edge(i, j)) out.emplace_back(i, j);
        return out;
    }

    std::size_t degree(std::size_t i) const {
        std::size_t d = 0;
        for (std::size_t j = 0; j < size(); ++j) d += has_edge(i, j) ? 1 : 0;
        return d;
    }

    friend bool operator==(const Topology&, const Topology&) = default;

private:
    Matrix adjacency_;
};

struct Spectrum {
    std::vector<double> eigenvalues;       // ascending
    std::vector<double> distinct_nonzero;  // ascending, merged at kEigenDedupTol
    double lambda2 = 0.0;
};

inline Matrix laplacian(const Topology& g) {
    const std::size_t n = g.size();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            deg += g.adjacency()(i, j);
            l(i, j) = -g.adjacency()(i, j);
        }
        l(i, i) = deg;
    }
    return l;
}

inline std::vector<double> distinct_positive(const std::vector<double>& ascending, double tol = kEigenDedupTol) {
    std::vector<double> out;
    for (double v : ascending) {
        if (v <= tol) continue;
        if (out.empty() || v - out.back() > tol) out.push_back(v);
    }
    return out;
}

/// Eigenvalues of a symmetric matrix. Throws NonSymmetricError if asymmetry exceeds 1e-12.
inline Spectrum spectrum(const Matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols()) throw NonSymmetricError("matrix is not square");
    if (max_asymmetry(symmetric) > 1e-12) throw NonSymmetricError("matrix is not symmetric");
    Spectrum s;
    s.eigenvalues = jacobi_eigen(symmetric).values;
    s.distinct_nonzero = distinct_positive(s.eigenvalues);
    s.lambda2 = s.eigenvalues.size() > 1 ? s.eigenvalues[1] : 0.0;
    return s;
}

/// Breadth-first reachability from node 0.
inline bool is_connected(const Topology& g) {
    const std::size_t n = g.size();
    if (n <= 1) return true;
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop();
        for (std::size_t j = 0; j < n; ++j) {
            if (!seen[j] && g.has_edge(i, j)) {
                seen[j] = true;
                ++reached;
                frontier.push(j);
            }
        }
    }
    return reached == n;
}

/// Piecewise-constant, right-continuous switching signal over a fixed set of topologies.
class TopologySchedule {
public:
    struct Phase {
        double start_time;
        std::size_t topology_index;
        friend bool operator==(const Phase&, const Phase&) = default;
    };

    TopologySchedule() = default;

    /// Validates shared node count, strictly increasing start times beginning at 0,
    /// index ranges and connectivity of every referenced topology.
    TopologySchedule(std::vector<Topology> topologies, std::vector<Phase> phases)
        : topologies_(std::move(topologies)), phases_(std::move(phases)) {
        if (topologies_.empty() || phases_.empty())
            throw ValidationError("schedule needs at least one topology and one phase");
        const std::size_t n = topologies_.front().size();
        for (const auto& g : topologies_)
            if (g.size() != n) throw ValidationError("schedule topologies must share node count");
        if (phases_.front().start_time != 0.0) throw ValidationError("first phase must start at t=0");
        for (std::size_t k = 0; k < phases_.size(); ++k) {
            if (phases_[k].topology_index >= topologies_.size())
                throw ValidationError("phase " + std::to_string(k) + " references missing topology");
            if (k > 0 && !(phases_[k].start_time > phases_[k - 1].start_time))
                throw ValidationError("phase start times must be strictly increasing");
            if (!is_connected(topologies_[phases_[k].topology_index]))
                throw DisconnectedTopologyError("phase " + std::to_string(k) + " topology is disconnected");
        }
    }

    static TopologySchedule fixed(Topology g) {
        return TopologySchedule({std::move(g)}, {{0.0, 0}});
    }

    std::size_t node_count() const noexcept { return topologies_.front().size(); }
    const std::vector<Topology>& topologies() const noexcept { return topologies_; }
    const std::vector<Phase>& phases() const noexcept { return phases_; }

    std::size_t phase_index_at(double t) const {
        auto it = std::upper_bound(phases_.begin(), phases_.end(), t,
                                   [](double v, const Phase& p) { return v < p.start_time; });
        return it == phases_.begin() ? 0 : static_cast<std::size_t>(it - phases_.begin()) - 1;
    }

    /// Phase active at integration step `k` when switch instants are snapped
    /// forward to the step grid of width `dt`.
    std::size_t phase_index_at_step(long long k, double dt) const {
        auto it = std::partition_point(phases_.begin() + 1, phases_.end(),
                                       [&](const Phase& p) { return snap_to_grid(p.start_time, dt) <= k; });
        return static_cast<std::size_t>(it - phases_.begin()) - 1;
    }

    static long long snap_to_grid(double t, double dt) {
        return static_cast<long long>(std::ceil(t / dt - 1e-9));
    }

    friend bool operator==(const TopologySchedule&, const TopologySchedule&) = default;

private:
    std::vector<Topology> topologies_;
    std::vector<Phase> phases_;
};

inline const Topology& active_topology(const TopologySchedule& schedule, double t) {
    const auto& phase = schedule.phases()[schedule.phase_index_at(t)];
    return schedule.topologies()[phase.topology_index];
}

/// Smallest algebraic connectivity over the topologies the schedule actually uses.
/// A one-node network needs no consensus and reports +infinity.
inline double lambda2_star(const TopologySchedule& schedule) {
    if (schedule.node_count() <= 1) return std::numeric_limits<double>::infinity();
    std::vector<bool> used(schedule.topologies().size(), false);
    for (const auto& phase : schedule.phases()) used[phase.topology_index] = true;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < used.size(); ++k) {
        if (!used[k]) continue;
        const auto& g = schedule.topologies()[k];
        if (!is_connected(g)) throw DisconnectedTopologyError("schedule contains a disconnected topology");
        best = std::min(best, spectrum(laplacian(g)).lambda2);
    }
    return best;
}

/// Erdos-Renyi G(n, edge_prob), redrawn until connected.
template <class Rng>
Topology random_connected_topology(std::size_t n, double edge_prob, Rng& rng) {
    std::bernoulli_distribution coin(edge_prob);
    for (;;) {
        Topology g(n);
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (coin(rng)) edges.emplace_back(i, j);
        g = Topology::from_edges(n, edges);
        if (is_connected(g)) return g;
    }
}

/// `phases` random connected graphs, switching every `interval` seconds.
template <class Rng>
TopologySchedule random_switching_schedule(std::size_t n, std::size_t phases, double interval,
                                           double edge_prob, Rng& rng) {
    std::vector<Topology> graphs;
    std::vector<TopologySchedule::Phase> order;
    for (std::size_t k = 0; k < phases; ++k) {
        graphs.push_back(random_connected_topology(n, edge_prob, rng));
        order.push_back({static_cast<double>(k) * interval, k});
    }
    return TopologySchedule(std::move(graphs), std::move(order));
}

/// A pool of `pool_size` random connected graphs; every `interval` seconds the
/// active graph is redrawn uniformly from the pool, for `phases` phases.
template <class Rng>
TopologySchedule random_pool_schedule(std::size_t n, std::size_t pool_size, std::size_t phases,
                                      double interval, double edge_prob, Rng& rng) {
    std::vector<Topology> pool;
    for (std::size_t k = 0; k < pool_size; ++k) pool.push_back(random_connected_topology(n, edge_prob, rng));
    std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
    std::vector<TopologySchedule::Phase> order;
    for (std::size_t k = 0; k < phases; ++k) order.push_back({static_cast<double>(k) * interval, pick(rng)});
    return TopologySchedule(std::move(pool), std::move(order));
}

} // namespace fxted
