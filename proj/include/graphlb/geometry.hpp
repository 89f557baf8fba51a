#pragma once

#include "graphlb/common.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>

namespace graphlb {

enum class ManifoldKind { Sphere, FlatTorus };
enum class LaplacianKind { Unnormalized, RandomWalk, Symmetric };

inline std::string to_string(ManifoldKind k) {
    return k == ManifoldKind::Sphere ? "sphere" : "torus";
}
inline std::string to_string(LaplacianKind k) {
    switch (k) {
        case LaplacianKind::Unnormalized: return "un";
        case LaplacianKind::RandomWalk: return "rw";
        default: return "sym";
    }
}

/// A model manifold with closed-form geometry: the unit sphere S^m in
/// R^{m+1}, or the unit-volume flat torus T^m embedded in R^{2m} as a product
/// of circles of radius 1/(2*pi). Both supply exact geodesic distances and
/// the geometric constants (curvature bound, injectivity radius, reach) that
/// the bandwidth regime checks depend on.
struct ManifoldSpec {
    ManifoldKind kind;
    int m = 0;                  // intrinsic dimension
    int d = 0;                  // ambient dimension
    double volume = 0.0;        // total Riemannian volume
    double curvature_bound = 0.0;
    double injectivity_radius = 0.0;
    double reach = 0.0;

    static constexpr double kOnManifoldTol = 1e-12;

    static ManifoldSpec sphere(int m) {
        if (m < 2) throw std::invalid_argument("ManifoldSpec: dimension must be >= 2");
        ManifoldSpec s;
        s.kind = ManifoldKind::Sphere;
        s.m = m;
        s.d = m + 1;
        s.volume = sphere_surface_area(m);
        s.curvature_bound = 1.0;
        s.injectivity_radius = kPi;
        s.reach = 1.0;
        return s;
    }

    static ManifoldSpec flat_torus(int m) {
        if (m < 2) throw std::invalid_argument("ManifoldSpec: dimension must be >= 2");
        ManifoldSpec s;
        s.kind = ManifoldKind::FlatTorus;
        s.m = m;
        s.d = 2 * m;
        s.volume = 1.0;
        s.curvature_bound = 0.0;
        s.injectivity_radius = 0.5;
        s.reach = 1.0 / (2.0 * kPi);
        return s;
    }

    static ManifoldSpec make(ManifoldKind kind, int m) {
        return kind == ManifoldKind::Sphere ? sphere(m) : flat_torus(m);
    }

    double circle_radius() const { return 1.0 / (2.0 * kPi); }

    bool on_manifold(const Eigen::RowVectorXd& x, double tol = kOnManifoldTol) const {
        if (x.size() != d) return false;
        if (kind == ManifoldKind::Sphere) return std::abs(x.norm() - 1.0) <= tol;
        for (int j = 0; j < m; ++j) {
            const double r = std::hypot(x[2 * j], x[2 * j + 1]);
            if (std::abs(r - circle_radius()) > tol) return false;
        }
        return true;
    }

    /// Embed intrinsic torus coordinates t in [0,1)^m into R^{2m}.
    Eigen::RowVectorXd torus_embed(const Eigen::RowVectorXd& t) const {
        const double r = circle_radius();
        Eigen::RowVectorXd x(d);
        for (int j = 0; j < m; ++j) {
            x[2 * j] = r * std::cos(2.0 * kPi * t[j]);
            x[2 * j + 1] = r * std::sin(2.0 * kPi * t[j]);
        }
        return x;
    }

    /// Intrinsic torus coordinates in [0,1)^m of an ambient point. The
    /// intrinsic coordinate is arc length: one full loop has length 1.
    Eigen::RowVectorXd torus_angles(const Eigen::RowVectorXd& x) const {
        Eigen::RowVectorXd t(m);
        for (int j = 0; j < m; ++j) {
            double a = std::atan2(x[2 * j + 1], x[2 * j]) / (2.0 * kPi);
            if (a < 0.0) a += 1.0;
            t[j] = a;
        }
        return t;
    }

    /// Geodesic distance between two on-manifold points.
    double geodesic(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) const {
        if (!on_manifold(x) || !on_manifold(y)) {
            throw std::domain_error("geodesic: point is off the manifold");
        }
        return geodesic_unchecked(x, y);
    }

    /// Per-point data from which geodesic distances are cheap to evaluate:
    /// intrinsic angles for the torus, the ambient unit vectors for the
    /// sphere. Pairs with intrinsic_distance below.
    Eigen::MatrixXd intrinsic_coords(const Eigen::MatrixXd& points) const {
        if (kind == ManifoldKind::Sphere) return points;
        Eigen::MatrixXd t(points.rows(), m);
        for (int i = 0; i < points.rows(); ++i) t.row(i) = torus_angles(points.row(i));
        return t;
    }

    double intrinsic_distance(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
        if (kind == ManifoldKind::Sphere) {
            return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
        }
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            double arc = std::abs(a[j] - b[j]);
            if (arc > 0.5) arc = 1.0 - arc;
            s += arc * arc;
        }
        return std::sqrt(s);
    }

    /// Same as geodesic() but skips the on-manifold validation; used in inner
    /// loops on points that were validated when sampled.
    double geodesic_unchecked(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) const {
        if (kind == ManifoldKind::Sphere) {
            const double c = std::clamp(x.dot(y) / (x.norm() * y.norm()), -1.0, 1.0);
            return std::acos(c);
        }
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            double a = std::atan2(x[2 * j + 1], x[2 * j]) - std::atan2(y[2 * j + 1], y[2 * j]);
            a = std::abs(a);
            if (a > kPi) a = 2.0 * kPi - a;
            const double arc = a / (2.0 * kPi); // circle radius 1/(2*pi)
            s += arc * arc;
        }
        return std::sqrt(s);
    }
};

/// Sampling density on a manifold, given as a closed form with user-supplied
/// constants; nothing is estimated from data. `value` returns the density
/// with respect to the Riemannian volume form (uniform: 1/vol(M)). `alpha`
/// bounds the density relative to uniform, 1/alpha <= p(x)*vol(M) <= alpha,
/// and doubles as the rejection-sampling envelope.
struct DensitySpec {
    bool uniform = true;
    double alpha = 1.0;
    double lipschitz = 0.0; // Lipschitz constant of p w.r.t. geodesic distance
    std::function<double(const Eigen::RowVectorXd&)> p; // density w.r.t. volume

    static DensitySpec uniform_density() { return DensitySpec{}; }

    static DensitySpec closed_form(std::function<double(const Eigen::RowVectorXd&)> density,
                                   double alpha, double lipschitz) {
        if (alpha < 1.0) throw std::invalid_argument("DensitySpec: alpha must be >= 1");
        DensitySpec s;
        s.uniform = false;
        s.alpha = alpha;
        s.lipschitz = lipschitz;
        s.p = std::move(density);
        return s;
    }

    double value(const ManifoldSpec& manifold, const Eigen::RowVectorXd& x) const {
        return uniform ? 1.0 / manifold.volume : p(x);
    }
};

/// n sample coordinates in R^d together with the generating manifold,
/// density, and RNG seed, so every downstream quantity is reproducible.
struct PointCloud {
    ManifoldSpec manifold;
    DensitySpec density;
    std::uint64_t seed = 0;
    Eigen::MatrixXd points; // n x d, row per point

    int n() const { return static_cast<int>(points.rows()); }

    double density_at(int i) const { return density.value(manifold, points.row(i)); }
};

namespace detail {

inline Eigen::RowVectorXd sample_uniform_point(const ManifoldSpec& manifold,
                                               std::mt19937_64& rng) {
    if (manifold.kind == ManifoldKind::Sphere) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::RowVectorXd x(manifold.d);
        double norm2 = 0.0;
        do {
            for (int a = 0; a < manifold.d; ++a) x[a] = gauss(rng);
            norm2 = x.squaredNorm();
        } while (norm2 < 1e-300);
        return x / std::sqrt(norm2);
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::RowVectorXd t(manifold.m);
    for (int j = 0; j < manifold.m; ++j) t[j] = unif(rng);
    return manifold.torus_embed(t);
}

} // namespace detail

/// Draw n i.i.d. samples from the density on the manifold. Uniform densities
/// sample directly (normalized Gaussians on S^m, uniform intrinsic
/// coordinates on T^m); closed-form densities use rejection sampling against
/// the alpha-scaled uniform envelope. Each point has its own RNG stream
/// derived from (seed, index), so clouds are bit-identical for identical
/// inputs no matter how sampling is scheduled.
inline PointCloud sample(const ManifoldSpec& manifold, const DensitySpec& density,
                         int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    PointCloud cloud;
    cloud.manifold = manifold;
    cloud.density = density;
    cloud.seed = seed;
    cloud.points.resize(n, manifold.d);

    long long proposals = 0, accepts = 0;
    for (int i = 0; i < n; ++i) {
        auto rng = stream_rng(seed, static_cast<std::uint64_t>(i));
        if (density.uniform) {
            cloud.points.row(i) = detail::sample_uniform_point(manifold, rng);
            continue;
        }
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double envelope = density.alpha / manifold.volume;
        for (;;) {
            const Eigen::RowVectorXd x = detail::sample_uniform_point(manifold, rng);
            ++proposals;
            if (unif(rng) * envelope <= density.p(x)) {
                cloud.points.row(i) = x;
                ++accepts;
                break;
            }
            // Warm-up of 50 acceptances before judging the envelope.
            if (accepts >= 50 && proposals > 10.0 * density.alpha * (accepts + 1)) {
                throw std::runtime_error(
                    "sample: rejection acceptance rate below 1/(10*alpha); "
                    "density bound alpha is not a valid envelope");
            }
        }
    }
    return cloud;
}

/// A fine i.i.d. cloud from the same distribution, used as the shared Monte
/// Carlo quadrature for every L^2(M, rho*mu) inner product in the artifact.
inline PointCloud quadrature_cloud(const ManifoldSpec& manifold, const DensitySpec& density,
                                   int N, std::uint64_t seed) {
    return sample(manifold, density, N, seed);
}

/// Quadrature value of <f,g> in L^2(M, rho*mu): the average of f*g*rho over
/// the cloud.
template <class F, class G, class R>
double quadrature_inner(const PointCloud& quad, F&& f, G&& g, R&& rho) {
    double s = 0.0;
    for (int q = 0; q < quad.n(); ++q) {
        const Eigen::RowVectorXd x = quad.points.row(q);
        s += f(x) * g(x) * rho(x);
    }
    return s / quad.n();
}

/// One closed-form eigenfunction: its value and the squared norm of its
/// tangential gradient at an ambient point.
struct EigenFunction {
    std::function<double(const Eigen::RowVectorXd&)> value;
    std::function<double(const Eigen::RowVectorXd&)> grad_sq;
};

/// One eigenvalue of the limit operator with its multiplicity and a full set
/// of closed-form eigenfunction evaluators spanning the eigenspace.
struct SpectrumEntry {
    double eigenvalue = 0.0;
    int multiplicity = 1;
    std::vector<EigenFunction> functions;
};

/// Ground-truth spectrum of the weighted Laplace-Beltrami operator, entries
/// ascending by eigenvalue and grouped by multiplicity.
struct SpectrumTable {
    LaplacianKind laplacian_kind = LaplacianKind::RandomWalk;
    std::vector<SpectrumEntry> entries;

    int total_multiplicity() const {
        int t = 0;
        for (const auto& e : entries) t += e.multiplicity;
        return t;
    }

    /// Eigenvalue at flat (multiplicity-repeated) 0-based index.
    double eigenvalue_at(int flat_index) const {
        int i = flat_index;
        for (const auto& e : entries) {
            if (i < e.multiplicity) return e.eigenvalue;
            i -= e.multiplicity;
        }
        throw std::out_of_range("SpectrumTable: index beyond tabulated spectrum");
    }

    /// Entry index of the cluster holding flat index k.
    int cluster_of(int flat_index) const {
        int i = flat_index;
        for (std::size_t c = 0; c < entries.size(); ++c) {
            if (i < entries[c].multiplicity) return static_cast<int>(c);
            i -= entries[c].multiplicity;
        }
        throw std::out_of_range("SpectrumTable: index beyond tabulated spectrum");
    }

    /// First flat index occupied by cluster c.
    int cluster_start(int c) const {
        int s = 0;
        for (int i = 0; i < c; ++i) s += entries[i].multiplicity;
        return s;
    }

    /// Spectral gap of cluster c: distance between the nearest distinct
    /// eigenvalues below and above it.
    double gap(int c) const {
        const double lo = c > 0 ? entries[c - 1].eigenvalue : entries[c].eigenvalue;
        const double hi = c + 1 < static_cast<int>(entries.size())
                              ? entries[c + 1].eigenvalue
                              : std::numeric_limits<double>::infinity();
        return hi - lo;
    }
};

namespace detail {

// Homogeneous harmonic polynomial restricted to the sphere. For degree-l
// harmonics, Euler's identity gives |grad_S f|^2 = |grad P|^2 - l^2 P^2.
inline EigenFunction sphere_harmonic(std::function<double(const Eigen::RowVectorXd&)> poly,
                                     std::function<Eigen::RowVectorXd(const Eigen::RowVectorXd&)> grad,
                                     int degree) {
    EigenFunction f;
    f.value = poly;
    f.grad_sq = [poly, grad, degree](const Eigen::RowVectorXd& x) {
        const double p = poly(x);
        return grad(x).squaredNorm() - double(degree) * double(degree) * p * p;
    };
    return f;
}

inline std::vector<EigenFunction> sphere_eigenfunctions(int d, int degree) {
    std::vector<EigenFunction> fs;
    if (degree == 0) {
        fs.push_back({[](const Eigen::RowVectorXd&) { return 1.0; },
                      [](const Eigen::RowVectorXd&) { return 0.0; }});
        return fs;
    }
    if (degree == 1) {
        for (int a = 0; a < d; ++a) {
            fs.push_back(sphere_harmonic(
                [a](const Eigen::RowVectorXd& x) { return x[a]; },
                [a, d](const Eigen::RowVectorXd&) {
                    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(d);
                    g[a] = 1.0;
                    return g;
                },
                1));
        }
        return fs;
    }
    if (degree == 2) {
        for (int a = 0; a < d; ++a) {
            for (int b = a + 1; b < d; ++b) {
                fs.push_back(sphere_harmonic(
                    [a, b](const Eigen::RowVectorXd& x) { return x[a] * x[b]; },
                    [a, b, d](const Eigen::RowVectorXd& x) {
                        Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(d);
                        g[a] = x[b];
                        g[b] = x[a];
                        return g;
                    },
                    2));
            }
        }
        for (int a = 0; a + 1 < d; ++a) {
            fs.push_back(sphere_harmonic(
                [a](const Eigen::RowVectorXd& x) { return x[a] * x[a] - x[a + 1] * x[a + 1]; },
                [a, d](const Eigen::RowVectorXd& x) {
                    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(d);
                    g[a] = 2.0 * x[a];
                    g[a + 1] = -2.0 * x[a + 1];
                    return g;
                },
                2));
        }
        return fs;
    }
    throw std::invalid_argument("sphere eigenfunctions tabulated for degree <= 2 only");
}

inline EigenFunction torus_mode(const ManifoldSpec& manifold, const Eigen::VectorXi& k, bool is_sin) {
    // sqrt(2)*cos(2*pi*k.t) / sqrt(2)*sin(2*pi*k.t); |grad|^2 in arc-length
    // coordinates is 2*(2*pi)^2*|k|^2*sin^2 resp. cos^2.
    const double kk = k.cast<double>().squaredNorm();
    EigenFunction f;
    f.value = [manifold, k, is_sin](const Eigen::RowVectorXd& x) {
        const Eigen::RowVectorXd t = manifold.torus_angles(x);
        const double phase = 2.0 * kPi * t.dot(k.cast<double>().transpose());
        return std::sqrt(2.0) * (is_sin ? std::sin(phase) : std::cos(phase));
    };
    f.grad_sq = [manifold, k, is_sin, kk](const Eigen::RowVectorXd& x) {
        const Eigen::RowVectorXd t = manifold.torus_angles(x);
        const double phase = 2.0 * kPi * t.dot(k.cast<double>().transpose());
        const double osc = is_sin ? std::cos(phase) : std::sin(phase);
        return 2.0 * 4.0 * kPi * kPi * kk * osc * osc;
    };
    return f;
}

// Enumerate torus lattice modes grouped by |k|^2, smallest first.
inline std::map<long long, std::vector<Eigen::VectorXi>> torus_lattice_groups(int m, int max_norm2) {
    std::map<long long, std::vector<Eigen::VectorXi>> groups;
    const int kmax = static_cast<int>(std::sqrt(double(max_norm2))) + 1;
    std::vector<int> k(m, -kmax);
    for (;;) {
        long long n2 = 0;
        for (int v : k) n2 += static_cast<long long>(v) * v;
        if (n2 <= max_norm2) {
            Eigen::VectorXi kv(m);
            for (int j = 0; j < m; ++j) kv[j] = k[j];
            groups[n2].push_back(kv);
        }
        int axis = 0;
        while (axis < m && k[axis] == kmax) k[axis++] = -kmax;
        if (axis == m) break;
        ++k[axis];
    }
    return groups;
}

} // namespace detail

/// Closed-form spectrum of the limit operator under the uniform density.
/// Random-walk normalization gives the plain Laplace-Beltrami spectrum;
/// the unnormalized limit is the same spectrum scaled by 1/vol(M) (the
/// symmetric kind shares the random-walk spectrum). Sphere eigenfunctions
/// are harmonic polynomials (tabulated through degree 2); torus
/// eigenfunctions are lattice sine/cosine modes (any count).
inline SpectrumTable analytic_spectrum(const ManifoldSpec& manifold, const DensitySpec& density,
                                       LaplacianKind kind, int count) {
    if (!density.uniform) {
        throw std::invalid_argument(
            "analytic_spectrum: closed forms cover the uniform density only; "
            "use the numerical continuum oracle for non-uniform densities");
    }
    if (count < 1) throw std::invalid_argument("analytic_spectrum: count must be >= 1");
    const double scale = kind == LaplacianKind::Unnormalized ? 1.0 / manifold.volume : 1.0;

    SpectrumTable table;
    table.laplacian_kind = kind == LaplacianKind::Unnormalized ? LaplacianKind::Unnormalized
                                                               : LaplacianKind::RandomWalk;
    if (manifold.kind == ManifoldKind::Sphere) {
        const int m = manifold.m;
        for (int l = 0; table.total_multiplicity() < count; ++l) {
            SpectrumEntry e;
            e.eigenvalue = scale * double(l) * double(l + m - 1);
            e.functions = detail::sphere_eigenfunctions(manifold.d, l);
            e.multiplicity = static_cast<int>(e.functions.size());
            table.entries.push_back(std::move(e));
        }
        return table;
    }

    // Flat torus: eigenvalues 4*pi^2*|k|^2 over the integer lattice; each
    // +/-k pair contributes one cosine and one sine mode.
    int max_norm2 = 4;
    for (;;) {
        auto groups = detail::torus_lattice_groups(manifold.m, max_norm2);
        // The largest |k|^2 group may be incomplete at this enumeration
        // radius; only trust groups strictly below max_norm2.
        int usable = 0;
        for (const auto& [n2, ks] : groups) {
            if (n2 < max_norm2) usable += static_cast<int>(ks.size());
        }
        if (usable < count) {
            max_norm2 *= 2;
            continue;
        }
        table.entries.clear();
        for (const auto& [n2, ks] : groups) {
            if (n2 >= max_norm2) break;
            SpectrumEntry e;
            e.eigenvalue = scale * 4.0 * kPi * kPi * static_cast<double>(n2);
            if (n2 == 0) {
                e.functions.push_back({[](const Eigen::RowVectorXd&) { return 1.0; },
                                       [](const Eigen::RowVectorXd&) { return 0.0; }});
            } else {
                for (const auto& k : ks) {
                    // Take one representative per antipodal pair (first
                    // nonzero coordinate positive) and attach cos and sin.
                    int first_nonzero = 0;
                    while (k[first_nonzero] == 0) ++first_nonzero;
                    if (k[first_nonzero] < 0) continue;
                    e.functions.push_back(detail::torus_mode(manifold, k, false));
                    e.functions.push_back(detail::torus_mode(manifold, k, true));
                }
            }
            e.multiplicity = static_cast<int>(e.functions.size());
            table.entries.push_back(std::move(e));
            if (table.total_multiplicity() >= count) break;
        }
        return table;
    }
}

} // namespace graphlb
