#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace graphlb {

inline constexpr double kPi = 3.14159265358979323846;

/// x^k for small nonnegative integer k, by repeated multiplication.
inline double int_pow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

/// Volume of the unit ball in R^m.
inline double unit_ball_volume(int m) {
    return std::pow(kPi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

/// Surface area of the unit m-sphere S^m embedded in R^{m+1}.
inline double sphere_surface_area(int m) {
    return 2.0 * std::pow(kPi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent RNG stream for (seed, index). Streams for distinct indices do
/// not overlap in practice, so points can be generated in any order.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 1)));
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson quadrature of f on [a,b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-12) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = detail::simpson(f, a, b, fa, fm, fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

/// Uniform spatial hash over points in R^d with a fixed cell side. Supports
/// fixed-radius ball queries (radius <= cell side) and nearest-neighbor
/// queries with the lowest-index tie rule. Ambient dimension is capped at 8;
/// callers fall back to brute force beyond that.
class UniformGrid {
public:
    static constexpr int kMaxDim = 8;

    UniformGrid(const Eigen::MatrixXd& points, double cell)
        : points_(points), cell_(cell) {
        if (cell <= 0.0) throw std::invalid_argument("UniformGrid: cell side must be positive");
        if (points.cols() > kMaxDim) throw std::invalid_argument("UniformGrid: ambient dimension > 8");
        if (points.rows() == 0) throw std::invalid_argument("UniformGrid: empty point set");
        d_ = static_cast<int>(points.cols());
        lo_ = points.colwise().minCoeff();
        hi_ = points.colwise().maxCoeff();
        for (int i = 0; i < points.rows(); ++i) {
            cells_[key_of(points.row(i))].push_back(i);
        }
    }

    /// Indices j with |points[j] - q| <= radius, ascending. Requires radius <= cell side.
    void query_ball(const Eigen::RowVectorXd& q, double radius, std::vector<int>& out) const {
        out.clear();
        if (radius > cell_) throw std::invalid_argument("UniformGrid: query radius exceeds cell side");
        const double r2 = radius * radius;
        scan_neighbors(key_of(q), 1, [&](int j) {
            if ((points_.row(j) - q).squaredNorm() <= r2) out.push_back(j);
        });
        std::sort(out.begin(), out.end());
    }

    /// Nearest point index under Euclidean distance; lowest index on ties.
    int nearest(const Eigen::RowVectorXd& q) const {
        const Key center = key_of(q);
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        const int cap = ring_cap(q);
        for (int ring = 0; ring <= cap; ++ring) {
            scan_ring(center, ring, [&](int j) {
                const double d2 = (points_.row(j) - q).squaredNorm();
                if (d2 < best_d2 || (d2 == best_d2 && j < best)) {
                    best_d2 = d2;
                    best = j;
                }
            });
            // Any point in ring >= ring+1 is at distance >= ring*cell.
            if (best >= 0 && std::sqrt(best_d2) <= ring * cell_) return best;
        }
        return best;
    }

    /// Calls f(i, j, dist) for every unordered pair with |x_i - x_j| <= radius,
    /// i < j, in ascending (i, j) order. Requires radius <= cell side.
    template <class F>
    void for_each_pair_within(double radius, F&& f) const {
        if (radius > cell_) throw std::invalid_argument("UniformGrid: query radius exceeds cell side");
        const double r2 = radius * radius;
        std::vector<int> cand;
        for (int i = 0; i < points_.rows(); ++i) {
            cand.clear();
            scan_neighbors(key_of(points_.row(i)), 1, [&](int j) {
                if (j > i) cand.push_back(j);
            });
            std::sort(cand.begin(), cand.end());
            for (int j : cand) {
                const double d2 = (points_.row(i) - points_.row(j)).squaredNorm();
                if (d2 <= r2) f(i, j, std::sqrt(d2));
            }
        }
    }

private:
    using Key = std::array<std::int64_t, kMaxDim>;

    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = 0x811c9dc5u;
            for (auto v : k) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
            return static_cast<std::size_t>(h);
        }
    };

    Key key_of(const Eigen::RowVectorXd& p) const {
        Key k{};
        for (int a = 0; a < d_; ++a) k[a] = static_cast<std::int64_t>(std::floor(p[a] / cell_));
        return k;
    }

    template <class F>
    void visit_cell(const Key& k, F&& f) const {
        auto it = cells_.find(k);
        if (it == cells_.end()) return;
        for (int j : it->second) f(j);
    }

    // All cells with Chebyshev offset <= width from center.
    template <class F>
    void scan_neighbors(const Key& center, int width, F&& f) const {
        Key k = center;
        scan_rec(center, k, 0, width, std::forward<F>(f));
    }

    template <class F>
    void scan_rec(const Key& center, Key& k, int axis, int width, F&& f) const {
        if (axis == d_) {
            visit_cell(k, f);
            return;
        }
        for (std::int64_t off = -width; off <= width; ++off) {
            k[axis] = center[axis] + off;
            scan_rec(center, k, axis + 1, width, f);
        }
        k[axis] = center[axis];
    }

    // Cells at exact Chebyshev offset == ring.
    template <class F>
    void scan_ring(const Key& center, int ring, F&& f) const {
        Key k = center;
        scan_ring_rec(center, k, 0, ring, false, f);
    }

    template <class F>
    void scan_ring_rec(const Key& center, Key& k, int axis, int ring, bool on_shell,
                       F&& f) const {
        if (axis == d_) {
            if (on_shell || ring == 0) visit_cell(k, f);
            return;
        }
        for (std::int64_t off = -ring; off <= ring; ++off) {
            k[axis] = center[axis] + off;
            scan_ring_rec(center, k, axis + 1, ring, on_shell || std::abs(off) == ring, f);
        }
        k[axis] = center[axis];
    }

    // Rings needed from q's cell to cover every occupied cell.
    int ring_cap(const Eigen::RowVectorXd& q) const {
        double reach = 0.0;
        for (int a = 0; a < d_; ++a) {
            reach = std::max(reach, std::max(std::abs(q[a] - lo_[a]), std::abs(q[a] - hi_[a])));
        }
        return static_cast<int>(reach / cell_) + 2;
    }

    Eigen::MatrixXd points_;
    double cell_;
    int d_ = 0;
    Eigen::RowVectorXd lo_, hi_;
    std::unordered_map<Key, std::vector<int>, KeyHash> cells_;
};

} // namespace graphlb
