#pragma once

#include "graphlb/geometry.hpp"
#include "graphlb/kernel.hpp"

#include <tuple>

namespace graphlb {

struct GraphBuildOptions {
    bool self_loops = true;
};

/// Kernel-weighted h-neighborhood graph on a point cloud: symmetric sparse
/// weights w_ij = eta(|x_i - x_j|/h) / (n h^m) for ambient Euclidean distance
/// |x_i - x_j| <= h, stored in CSR with both triangles materialized and
/// column indices ascending per row. The exponent m is the intrinsic
/// dimension of the kernel, never the ambient one.
struct WeightedGraph {
    int n = 0;
    double h = 0.0;
    KernelSpec kernel;
    std::vector<int> row_ptr;  // size n+1
    std::vector<int> col;      // ascending within each row
    std::vector<double> w;     // strictly positive
    bool empty_warning = false;

    std::size_t nnz() const { return col.size(); }

    double weight(int i, int j) const {
        for (int e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
            if (col[e] == j) return w[e];
        }
        return 0.0;
    }
};

namespace detail {

inline WeightedGraph graph_from_pairs(
    int n, double h, const KernelSpec& kernel,
    std::vector<std::tuple<int, int, double>>& entries) {
    WeightedGraph g;
    g.n = n;
    g.h = h;
    g.kernel = kernel;
    g.row_ptr.assign(n + 1, 0);
    for (const auto& [i, j, wij] : entries) {
        (void)wij;
        ++g.row_ptr[i + 1];
        if (j != i) ++g.row_ptr[j + 1];
    }
    for (int i = 0; i < n; ++i) g.row_ptr[i + 1] += g.row_ptr[i];
    g.col.resize(g.row_ptr[n]);
    g.w.resize(g.row_ptr[n]);
    std::vector<int> fill(g.row_ptr.begin(), g.row_ptr.end() - 1);
    for (const auto& [i, j, wij] : entries) {
        g.col[fill[i]] = j;
        g.w[fill[i]++] = wij;
        if (j != i) {
            g.col[fill[j]] = i;
            g.w[fill[j]++] = wij;
        }
    }
    for (int i = 0; i < n; ++i) {
        const int b = g.row_ptr[i], e = g.row_ptr[i + 1];
        std::vector<std::pair<int, double>> row;
        row.reserve(e - b);
        for (int t = b; t < e; ++t) row.emplace_back(g.col[t], g.w[t]);
        std::sort(row.begin(), row.end());
        for (int t = b; t < e; ++t) {
            g.col[t] = row[t - b].first;
            g.w[t] = row[t - b].second;
        }
    }
    g.empty_warning = g.col.empty();
    return g;
}

} // namespace detail

/// Build the weighted graph with uniform-grid spatial hashing (cell side h,
/// 3^d neighbor scan). Each unordered pair is computed once, so symmetry is
/// structural. Above ambient dimension 6 the grid degenerates and an
/// all-pairs scan is used instead (n <= 20000 there).
inline WeightedGraph build_graph(const PointCloud& cloud, double h, const KernelSpec& kernel,
                                 GraphBuildOptions options = {}) {
    if (h <= 0.0) throw std::invalid_argument("build_graph: bandwidth h must be positive");
    if (kernel.m != cloud.manifold.m) {
        throw std::invalid_argument("build_graph: kernel dimension does not match the cloud's intrinsic dimension");
    }
    const int n = cloud.n();
    const double scale = 1.0 / (n * int_pow(h, kernel.m));

    std::vector<std::tuple<int, int, double>> entries;
    if (options.self_loops && kernel.eta0 > 0.0) {
        for (int i = 0; i < n; ++i) entries.emplace_back(i, i, scale * kernel.eta0);
    }
    auto add_pair = [&](int i, int j, double dist) {
        const double wij = scale * kernel.eta(dist / h);
        if (wij > 0.0) entries.emplace_back(i, j, wij);
    };
    if (cloud.manifold.d <= 6) {
        UniformGrid grid(cloud.points, h);
        grid.for_each_pair_within(h, add_pair);
    } else {
        if (n > 20000) throw std::invalid_argument("build_graph: all-pairs fallback capped at n = 20000");
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double dist = (cloud.points.row(i) - cloud.points.row(j)).norm();
                if (dist <= h) add_pair(i, j, dist);
            }
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) {
                  return std::tie(std::get<0>(a), std::get<1>(a)) <
                         std::tie(std::get<0>(b), std::get<1>(b));
              });
    return detail::graph_from_pairs(n, h, kernel, entries);
}

/// Assemble a graph directly from upper-triangle entries (i <= j); used by
/// tests and file loaders. Entries are mirrored, so symmetry is structural
/// here as well.
inline WeightedGraph graph_from_triplets(int n, double h, const KernelSpec& kernel,
                                         std::vector<std::tuple<int, int, double>> entries) {
    for (auto& [i, j, wij] : entries) {
        (void)wij;
        if (i > j) std::swap(i, j);
        if (i < 0 || j >= n) throw std::invalid_argument("graph_from_triplets: index out of range");
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) {
                  return std::tie(std::get<0>(a), std::get<1>(a)) <
                         std::tie(std::get<0>(b), std::get<1>(b));
              });
    return detail::graph_from_pairs(n, h, kernel, entries);
}

/// Degree weights m_i = sum_j w_ij, self-loop included.
inline Eigen::VectorXd degrees(const WeightedGraph& g) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(g.n);
    for (int i = 0; i < g.n; ++i) {
        double s = 0.0;
        for (int e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) s += g.w[e];
        m[i] = s;
    }
    return m;
}

/// Discrete Dirichlet form b(u) = (1/(n*sigma)) sum over ordered edge pairs
/// of w_ij ((u_j - u_i)/h)^2. The CSR stores both ordered copies of each
/// edge, so the plain sum over stored entries realizes the ordered-pair sum.
inline double dirichlet_b(const WeightedGraph& g, const Eigen::VectorXd& u) {
    if (u.size() != g.n) throw std::invalid_argument("dirichlet_b: u must have n entries");
    double s = 0.0;
    for (int i = 0; i < g.n; ++i) {
        for (int e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
            const double diff = u[g.col[e]] - u[i];
            s += g.w[e] * diff * diff;
        }
    }
    return s / (g.n * g.kernel.sigma * g.h * g.h);
}

/// Connected components by BFS over positive weights; returns component id
/// per vertex and the component count.
inline std::pair<std::vector<int>, int> connected_components(const WeightedGraph& g) {
    std::vector<int> comp(g.n, -1);
    int count = 0;
    std::vector<int> stack;
    for (int s = 0; s < g.n; ++s) {
        if (comp[s] >= 0) continue;
        comp[s] = count;
        stack.push_back(s);
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
                const int j = g.col[e];
                if (comp[j] < 0) {
                    comp[j] = count;
                    stack.push_back(j);
                }
            }
        }
        ++count;
    }
    return {comp, count};
}

} // namespace graphlb
