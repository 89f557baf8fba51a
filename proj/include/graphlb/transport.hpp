#pragma once

#include "graphlb/geometry.hpp"

#include <numeric>
#include <queue>

namespace graphlb {

enum class TransportMetric { Euclidean, Geodesic };

/// Perfect matching between two equal-size point sets realizing the minimal
/// possible maximum pair distance (the bottleneck / infinity-OT cost between
/// the two empirical measures).
struct Matching {
    double cost = 0.0;
    std::vector<int> match; // match[a] = index into B
};

/// Balanced semi-discrete assignment of a fine quadrature cloud to the data
/// points: every data point receives exactly capacity = N/n quadrature
/// points, so each transport cell carries empirical mass exactly 1/n.
/// eps_hat is the realized bottleneck cost, an estimate (from below, up to
/// the quadrature cloud's own fill distance) of the infinity-OT distance
/// between the sampling measure and the empirical measure of the data.
struct TransportPlan {
    std::vector<int> assignment; // quadrature index -> data index
    int capacity = 0;
    double eps_hat = 0.0;
    std::vector<std::vector<int>> cells; // per data point, ascending quadrature indices
};

struct VoronoiPartition {
    std::vector<int> owner; // quadrature index -> nearest data index, lowest index on ties
};

namespace detail {

/// Capacitated bipartite matching feasibility by Hopcroft-Karp. Left
/// vertices carry sorted (distance, site) candidate lists; a site may hold
/// up to `cap` left vertices. Edges with distance > threshold are ignored.
class CapacitatedMatcher {
public:
    CapacitatedMatcher(const std::vector<std::vector<std::pair<double, int>>>& adj,
                       int sites, int cap)
        : adj_(adj), sites_(sites), cap_(cap), L_(static_cast<int>(adj.size())) {}

    /// True iff every left vertex can be matched using edges <= threshold.
    /// On success `match_left` holds the witnessing assignment.
    bool feasible(double threshold, std::vector<int>& match_left) {
        match_left.assign(L_, -1);
        owners_.assign(sites_, {});
        int matched = 0;
        while (bfs(threshold, match_left)) {
            int found = 0;
            for (int l = 0; l < L_; ++l) {
                if (match_left[l] < 0 && dfs(l, threshold, match_left)) ++found;
            }
            if (found == 0) break;
            matched += found;
            if (matched == L_) return true;
        }
        return matched == L_;
    }

private:
    bool bfs(double threshold, const std::vector<int>& match_left) {
        dist_.assign(L_, -1);
        std::queue<int> q;
        for (int l = 0; l < L_; ++l) {
            if (match_left[l] < 0) {
                dist_[l] = 0;
                q.push(l);
            }
        }
        bool reachable_free_site = false;
        while (!q.empty()) {
            const int l = q.front();
            q.pop();
            for (const auto& [d, s] : adj_[l]) {
                if (d > threshold) break;
                if (static_cast<int>(owners_[s].size()) < cap_) {
                    reachable_free_site = true;
                    continue;
                }
                for (int l2 : owners_[s]) {
                    if (dist_[l2] < 0) {
                        dist_[l2] = dist_[l] + 1;
                        q.push(l2);
                    }
                }
            }
        }
        return reachable_free_site;
    }

    bool dfs(int l, double threshold, std::vector<int>& match_left) {
        for (const auto& [d, s] : adj_[l]) {
            if (d > threshold) break;
            if (static_cast<int>(owners_[s].size()) < cap_) {
                owners_[s].push_back(l);
                match_left[l] = s;
                return true;
            }
            // A saturated site never grows during the recursion, so slot
            // indices stay valid; dist strictly increases along the path,
            // so the slot's owner cannot have been displaced on success.
            for (std::size_t t = 0; t < owners_[s].size(); ++t) {
                const int l2 = owners_[s][t];
                if (dist_[l2] == dist_[l] + 1 && dfs(l2, threshold, match_left)) {
                    owners_[s][t] = l;
                    match_left[l] = s;
                    return true;
                }
            }
        }
        dist_[l] = -1; // dead end for this phase
        return false;
    }

    const std::vector<std::vector<std::pair<double, int>>>& adj_;
    int sites_, cap_, L_;
    std::vector<std::vector<int>> owners_;
    std::vector<int> dist_;
};

/// Minimal feasible bottleneck threshold by binary search over the sorted
/// candidate distances (deduplicated at 1e-15 relative tolerance). The
/// largest candidate must be feasible.
inline std::pair<double, std::vector<int>> min_bottleneck(
    const std::vector<std::vector<std::pair<double, int>>>& adj, int sites, int cap,
    double lower_bound = -1.0) {
    std::vector<double> cand;
    for (const auto& row : adj) {
        for (const auto& [d, s] : row) {
            (void)s;
            cand.push_back(d);
        }
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end(),
                           [](double a, double b) {
                               return b - a <= 1e-15 * std::max(std::abs(a), std::abs(b));
                           }),
               cand.end());
    if (cand.empty()) throw std::runtime_error("min_bottleneck: no candidate edges");

    CapacitatedMatcher matcher(adj, sites, cap);
    std::vector<int> match;
    int lo = 0, hi = static_cast<int>(cand.size()) - 1;
    if (lower_bound > 0.0) {
        lo = static_cast<int>(std::lower_bound(cand.begin(), cand.end(),
                                               lower_bound * (1.0 - 1e-12)) -
                              cand.begin());
        lo = std::min(lo, hi);
    }
    if (!matcher.feasible(cand[hi], match)) {
        throw std::runtime_error("min_bottleneck: candidate edge set is infeasible at its maximum");
    }
    // Invariant: `best` witnesses feasibility at cand[hi].
    std::vector<int> best = match;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (matcher.feasible(cand[mid], match)) {
            best = match;
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return {cand[hi], best};
}

inline double pair_distance(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b,
                            TransportMetric metric, const ManifoldSpec* manifold) {
    if (metric == TransportMetric::Euclidean) return (a - b).norm();
    return manifold->geodesic_unchecked(a, b);
}

} // namespace detail

/// Exact bottleneck-optimal perfect matching between equal-size sets A and
/// B: binary search over the sorted multiset of pairwise distances, with
/// feasibility at each threshold decided by maximum bipartite matching on
/// the below-threshold graph.
inline Matching bottleneck_match(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 TransportMetric metric = TransportMetric::Euclidean,
                                 const ManifoldSpec* manifold = nullptr) {
    const int n = static_cast<int>(A.rows());
    if (B.rows() != n || n < 1) throw std::invalid_argument("bottleneck_match: size mismatch");
    if (metric == TransportMetric::Geodesic && manifold == nullptr) {
        throw std::invalid_argument("bottleneck_match: geodesic metric needs a manifold");
    }
    std::vector<std::vector<std::pair<double, int>>> adj(n);
    for (int i = 0; i < n; ++i) {
        adj[i].reserve(n);
        for (int j = 0; j < n; ++j) {
            adj[i].emplace_back(detail::pair_distance(A.row(i), B.row(j), metric, manifold), j);
        }
        std::sort(adj[i].begin(), adj[i].end());
    }
    auto [cost, match] = detail::min_bottleneck(adj, n, 1);
    Matching r;
    r.cost = cost;
    r.match = std::move(match);
    return r;
}

/// Balanced bottleneck assignment of the quadrature cloud to the data cloud,
/// the computational realization of the transport map at quadrature
/// resolution. Candidate edges are generated by spatial hashing with a
/// radius that doubles until the assignment is feasible; the minimal
/// feasible threshold is then located exactly within that radius.
inline TransportPlan estimate_eps(const PointCloud& cloud, const PointCloud& quadrature,
                                  TransportMetric metric = TransportMetric::Geodesic) {
    const int n = cloud.n();
    const int N = quadrature.n();
    if (n < 1 || N < 1 || N % n != 0) {
        throw std::invalid_argument("estimate_eps: quadrature size must be a positive multiple of n");
    }
    const int cap = N / n;
    const ManifoldSpec* manifold = &cloud.manifold;
    const Eigen::MatrixXd tc_sites = manifold->intrinsic_coords(cloud.points);
    const Eigen::MatrixXd tc_quad = manifold->intrinsic_coords(quadrature.points);
    auto metric_dist = [&](int q, int s) {
        if (metric == TransportMetric::Euclidean) {
            return (quadrature.points.row(q) - cloud.points.row(s)).norm();
        }
        return manifold->intrinsic_distance(tc_quad.row(q), tc_sites.row(s));
    };

    // Lower bound on any feasible threshold: the worst quadrature point's
    // distance to its metric-nearest site. The Euclidean-nearest site gives
    // an upper bound on that minimum; since geodesic dominates Euclidean, the
    // true metric-nearest site lies inside the Euclidean ball of that bound.
    double e_max = 0.0;
    {
        const double span = (cloud.points.colwise().maxCoeff() - cloud.points.colwise().minCoeff()).maxCoeff();
        const double cell = std::max(span / std::max(2.0, std::floor(std::pow(double(n), 1.0 / cloud.points.cols()))), 1e-12);
        UniformGrid site_grid(cloud.points, cell);
        std::vector<double> bound(N);
        double bound_max = 0.0;
        for (int q = 0; q < N; ++q) {
            const int s = site_grid.nearest(quadrature.points.row(q));
            bound[q] = metric_dist(q, s);
            bound_max = std::max(bound_max, bound[q]);
        }
        if (metric == TransportMetric::Euclidean) {
            e_max = bound_max;
        } else {
            UniformGrid wide_grid(cloud.points, std::max(bound_max, 1e-12));
            std::vector<int> near;
            for (int q = 0; q < N; ++q) {
                double qmin = bound[q];
                wide_grid.query_ball(quadrature.points.row(q), bound[q], near);
                for (int s : near) qmin = std::min(qmin, metric_dist(q, s));
                e_max = std::max(e_max, qmin);
            }
        }
    }

    std::vector<std::vector<std::pair<double, int>>> adj(N);
    std::vector<int> match;
    double cost = 0.0;
    double radius = std::max(2.0 * e_max, 1e-12);
    for (;;) {
        UniformGrid site_grid(cloud.points, radius);
        std::vector<int> near;
        for (int q = 0; q < N; ++q) {
            adj[q].clear();
            site_grid.query_ball(quadrature.points.row(q), radius, near);
            for (int s : near) {
                const double d = metric_dist(q, s);
                // Geodesic >= Euclidean, so candidates within metric radius
                // are never missed by the Euclidean ball query.
                if (d <= radius) adj[q].emplace_back(d, s);
            }
            std::sort(adj[q].begin(), adj[q].end());
        }
        detail::CapacitatedMatcher matcher(adj, n, cap);
        if (matcher.feasible(radius, match)) {
            auto [c, m] = detail::min_bottleneck(adj, n, cap, e_max);
            cost = c;
            match = std::move(m);
            break;
        }
        radius *= 2.0;
        if (radius > 1e6) throw std::runtime_error("estimate_eps: failed to find a feasible radius");
    }

    TransportPlan plan;
    plan.capacity = cap;
    plan.eps_hat = cost;
    plan.assignment = std::move(match);
    plan.cells.assign(n, {});
    for (int q = 0; q < N; ++q) plan.cells[plan.assignment[q]].push_back(q);
    for (auto& cell : plan.cells) {
        if (static_cast<int>(cell.size()) != cap) {
            throw std::logic_error("estimate_eps: unbalanced transport cell");
        }
    }
    return plan;
}

/// Euclidean Voronoi ownership of the quadrature points among the data
/// points, lowest index on exact ties.
inline VoronoiPartition voronoi_partition(const PointCloud& cloud, const PointCloud& quadrature) {
    if (cloud.points.cols() != quadrature.points.cols()) {
        throw std::invalid_argument("voronoi_partition: ambient dimensions differ");
    }
    const double span = (cloud.points.colwise().maxCoeff() - cloud.points.colwise().minCoeff()).maxCoeff();
    const double cell = std::max(span / std::max(2.0, std::floor(std::pow(double(cloud.n()), 1.0 / cloud.points.cols()))), 1e-12);
    UniformGrid grid(cloud.points, cell);
    VoronoiPartition part;
    part.owner.resize(quadrature.n());
    for (int q = 0; q < quadrature.n(); ++q) {
        part.owner[q] = grid.nearest(quadrature.points.row(q));
    }
    return part;
}

} // namespace graphlb
