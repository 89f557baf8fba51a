#pragma once

#include "graphlb/graph.hpp"
#include "graphlb/transport.hpp"

namespace graphlb {

/// A function on the manifold represented by its values on the shared
/// quadrature cloud, together with the weight density rho at the same
/// points. All L^2(M, rho*mu) integrals are Monte Carlo averages over this
/// cloud, so fields built on the same cloud are mutually consistent.
struct ContinuumField {
    Eigen::VectorXd values;
    const PointCloud* cloud = nullptr; // non-owning; must outlive the field
    Eigen::VectorXd rho;

    int size() const { return static_cast<int>(values.size()); }

    double inner(const ContinuumField& other) const {
        return values.cwiseProduct(other.values).dot(rho) / values.size();
    }

    double norm() const { return std::sqrt(values.cwiseAbs2().dot(rho) / values.size()); }
};

/// Evaluate a closed-form function and weight density on a quadrature cloud.
template <class F, class R>
ContinuumField make_field(const PointCloud& quad, F&& f, R&& rho) {
    ContinuumField field;
    field.cloud = &quad;
    field.values.resize(quad.n());
    field.rho.resize(quad.n());
    for (int q = 0; q < quad.n(); ++q) {
        field.values[q] = f(quad.points.row(q));
        field.rho[q] = rho(quad.points.row(q));
    }
    return field;
}

inline ContinuumField field_from_values(const PointCloud& quad, Eigen::VectorXd values,
                                        Eigen::VectorXd rho) {
    if (values.size() != quad.n() || rho.size() != quad.n()) {
        throw std::invalid_argument("field_from_values: length mismatch with quadrature cloud");
    }
    ContinuumField field;
    field.cloud = &quad;
    field.values = std::move(values);
    field.rho = std::move(rho);
    return field;
}

/// The smoothing kernel k_r(x,y) = psi(d(x,y)/r) / r^m at scale r, with psi
/// derived from the graph kernel's profile.
struct SmoothingKernel {
    double r = 0.0;
    KernelSpec kernel;

    double operator()(double geodesic_dist) const {
        return kernel.psi(geodesic_dist / r) / int_pow(r, kernel.m);
    }
};

/// Contractive discretization P: cell averages over the balanced transport
/// cells, (Pf)(x_i) = n * integral of f over U_i. With mass exactly 1/n per
/// cell this is the plain mean over the cell's quadrature points.
inline Eigen::VectorXd discretize_P(const ContinuumField& f, const TransportPlan& plan) {
    const int n = static_cast<int>(plan.cells.size());
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int q : plan.cells[i]) s += f.values[q];
        u[i] = s / plan.cells[i].size();
    }
    return u;
}

/// Extension P*: the piecewise-constant field taking the value u(x_i) on the
/// transport cell U_i (u composed with the transport map).
inline ContinuumField extend_Pstar(const Eigen::VectorXd& u, const TransportPlan& plan,
                                   const PointCloud& quad, Eigen::VectorXd rho) {
    if (static_cast<int>(plan.assignment.size()) != quad.n()) {
        throw std::invalid_argument("extend_Pstar: plan does not cover the quadrature cloud");
    }
    Eigen::VectorXd values(quad.n());
    for (int q = 0; q < quad.n(); ++q) values[q] = u[plan.assignment[q]];
    return field_from_values(quad, std::move(values), std::move(rho));
}

/// Voronoi extension: the value at each quadrature point is u at its
/// Euclidean-nearest data point.
inline ContinuumField voronoi_extend(const Eigen::VectorXd& u, const VoronoiPartition& part,
                                     const PointCloud& quad, Eigen::VectorXd rho) {
    if (static_cast<int>(part.owner.size()) != quad.n()) {
        throw std::invalid_argument("voronoi_extend: partition does not cover the quadrature cloud");
    }
    Eigen::VectorXd values(quad.n());
    for (int q = 0; q < quad.n(); ++q) values[q] = u[part.owner[q]];
    return field_from_values(quad, std::move(values), std::move(rho));
}

/// Normalized smoothing Lambda_r f = (Lambda_r^0 f) / theta with
/// theta = Lambda_r^0 1, built from the psi profile the kernel induces. The
/// volume integral behind Lambda_r^0 is estimated by reweighting the
/// mu-distributed quadrature samples with 1/p, and theta uses the same sum,
/// so constants are preserved exactly.
inline ContinuumField smooth_lambda(const ContinuumField& f, double r, const KernelSpec& kernel) {
    if (r <= 0.0) throw std::invalid_argument("smooth_lambda: radius must be positive");
    const PointCloud& quad = *f.cloud;
    const ManifoldSpec& manifold = quad.manifold;
    if (kernel.m != manifold.m) throw std::invalid_argument("smooth_lambda: kernel dimension mismatch");
    SmoothingKernel k;
    k.r = r;
    k.kernel = kernel;

    Eigen::VectorXd inv_p(quad.n());
    for (int q = 0; q < quad.n(); ++q) inv_p[q] = 1.0 / quad.density_at(q);

    const Eigen::MatrixXd tc = manifold.intrinsic_coords(quad.points);
    UniformGrid grid(quad.points, r);
    std::vector<int> near;
    Eigen::VectorXd values(quad.n());
    for (int x = 0; x < quad.n(); ++x) {
        grid.query_ball(quad.points.row(x), r, near);
        double num = 0.0, theta = 0.0;
        for (int y : near) {
            const double dist = manifold.intrinsic_distance(tc.row(x), tc.row(y));
            if (dist >= r) continue;
            const double w = k(dist) * inv_p[y];
            num += w * f.values[y];
            theta += w;
        }
        if (theta <= 0.0) {
            throw std::runtime_error("smooth_lambda: radius too small, no quadrature neighbor at point " +
                                     std::to_string(x));
        }
        values[x] = num / theta;
    }
    return field_from_values(quad, std::move(values), f.rho);
}

/// Normalizer theta = Lambda_r^0 1 by itself, for diagnostics.
inline ContinuumField smoothing_theta(const PointCloud& quad, double r, const KernelSpec& kernel) {
    if (r <= 0.0) throw std::invalid_argument("smoothing_theta: radius must be positive");
    const ManifoldSpec& manifold = quad.manifold;
    SmoothingKernel k;
    k.r = r;
    k.kernel = kernel;
    Eigen::VectorXd inv_p(quad.n());
    for (int q = 0; q < quad.n(); ++q) inv_p[q] = 1.0 / quad.density_at(q);
    const Eigen::MatrixXd tc = manifold.intrinsic_coords(quad.points);
    UniformGrid grid(quad.points, r);
    std::vector<int> near;
    Eigen::VectorXd values(quad.n());
    for (int x = 0; x < quad.n(); ++x) {
        grid.query_ball(quad.points.row(x), r, near);
        double theta = 0.0;
        for (int y : near) {
            const double dist = manifold.intrinsic_distance(tc.row(x), tc.row(y));
            if (dist < r) theta += k(dist) * inv_p[y];
        }
        values[x] = theta / quad.n();
    }
    return field_from_values(quad, std::move(values), Eigen::VectorXd::Ones(quad.n()));
}

/// Interpolation I u = Lambda_{h - 2 eps} P* u, the out-of-sample extension
/// whose Dirichlet energy nearly lower-bounds b(u).
inline ContinuumField interpolate_I(const Eigen::VectorXd& u, const TransportPlan& plan,
                                    double h, double eps_hat, const PointCloud& quad,
                                    Eigen::VectorXd rho, const KernelSpec& kernel) {
    const double radius = h - 2.0 * eps_hat;
    if (radius <= 0.0) {
        throw std::runtime_error(
            "interpolate_I: smoothing radius h - 2*eps is not positive; outside the "
            "(m+5)*eps < h bandwidth regime");
    }
    const ContinuumField pu = extend_Pstar(u, plan, quad, std::move(rho));
    return smooth_lambda(pu, radius, kernel);
}

/// Nonlocal Dirichlet energy at scale r:
/// E_r(f) = double integral of eta(d(x,y)/r) |f(y)-f(x)|^2 over mu x mu,
/// realized as the quadrature double sum restricted to geodesic range r.
inline double nonlocal_energy(const ContinuumField& f, double r, const KernelSpec& kernel) {
    if (r <= 0.0) throw std::invalid_argument("nonlocal_energy: radius must be positive");
    const PointCloud& quad = *f.cloud;
    const ManifoldSpec& manifold = quad.manifold;
    const Eigen::MatrixXd tc = manifold.intrinsic_coords(quad.points);
    UniformGrid grid(quad.points, r);
    double s = 0.0;
    grid.for_each_pair_within(r, [&](int a, int b, double /*euclid*/) {
        const double dist = manifold.intrinsic_distance(tc.row(a), tc.row(b));
        if (dist > r) return;
        const double diff = f.values[b] - f.values[a];
        s += 2.0 * kernel.eta(dist / r) * diff * diff; // both ordered pairs
    });
    const double N = quad.n();
    return s / (N * N);
}

/// Continuum Dirichlet form D(f) = integral of |grad f|^2 p^2 dVol for a
/// closed-form tangential gradient, by quadrature (one density power is
/// absorbed by sampling from mu).
template <class GradSq>
double continuum_dirichlet_D(GradSq&& grad_sq, const PointCloud& quad) {
    double s = 0.0;
    for (int q = 0; q < quad.n(); ++q) {
        s += grad_sq(quad.points.row(q)) * quad.density_at(q);
    }
    return s / quad.n();
}

/// How well a field matches one eigenvalue cluster of the limit operator.
struct AlignmentReport {
    double lambda_discrete = std::numeric_limits<double>::quiet_NaN();
    double lambda_continuum = 0.0;
    int cluster = 1;              // continuum multiplicity used
    double subspace_error = 0.0;  // ||g - Pi g|| / ||g||
    double gap = 0.0;             // spectral gap around the cluster
    Eigen::VectorXd matched;      // Pi g / ||Pi g|| on the quadrature cloud
};

/// Project a field onto the subspace spanned by a cluster's eigenfunctions
/// in the quadrature rho*mu inner product (stabilized Gram-Schmidt) and
/// report the relative projection error and the cluster's spectral gap.
inline AlignmentReport align_eigenspace(const ContinuumField& g, const SpectrumTable& table,
                                        int cluster_index,
                                        double lambda_discrete = std::numeric_limits<double>::quiet_NaN()) {
    if (cluster_index < 0 || cluster_index >= static_cast<int>(table.entries.size())) {
        throw std::invalid_argument("align_eigenspace: cluster index out of range");
    }
    const double gnorm = g.norm();
    if (gnorm < 1e-14) throw std::invalid_argument("align_eigenspace: field is numerically zero");

    const auto& entry = table.entries[cluster_index];
    const PointCloud& quad = *g.cloud;
    const int N = quad.n();
    const int mult = entry.multiplicity;

    Eigen::MatrixXd F(N, mult);
    for (int a = 0; a < mult; ++a) {
        for (int q = 0; q < N; ++q) F(q, a) = entry.functions[a].value(quad.points.row(q));
    }
    auto dot = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return x.cwiseProduct(y).dot(g.rho) / N;
    };

    // Conditioning of the raw cluster Gram matrix.
    Eigen::MatrixXd G(mult, mult);
    for (int a = 0; a < mult; ++a) {
        for (int b = a; b < mult; ++b) G(a, b) = G(b, a) = dot(F.col(a), F.col(b));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ges(G);
    if (ges.eigenvalues().minCoeff() <= 0.0 ||
        ges.eigenvalues().maxCoeff() / ges.eigenvalues().minCoeff() > 1e8) {
        throw std::runtime_error("align_eigenspace: quadrature too coarse to resolve the cluster");
    }

    // Modified Gram-Schmidt in the rho*mu inner product.
    for (int a = 0; a < mult; ++a) {
        for (int b = 0; b < a; ++b) {
            F.col(a) -= dot(F.col(b), F.col(a)) * F.col(b);
        }
        F.col(a) /= std::sqrt(dot(F.col(a), F.col(a)));
    }

    Eigen::VectorXd proj = Eigen::VectorXd::Zero(N);
    for (int a = 0; a < mult; ++a) proj += dot(F.col(a), g.values) * F.col(a);

    AlignmentReport rep;
    rep.lambda_discrete = lambda_discrete;
    rep.lambda_continuum = entry.eigenvalue;
    rep.cluster = mult;
    const Eigen::VectorXd resid = g.values - proj;
    rep.subspace_error = std::sqrt(std::max(0.0, dot(resid, resid))) / gnorm;
    rep.gap = table.gap(cluster_index);
    const double pn = std::sqrt(dot(proj, proj));
    rep.matched = pn > 0.0 ? (proj / pn).eval() : proj;
    return rep;
}

/// Kernel-density comparison between the degree weights and the sampling
/// density, with the structural pieces of the transport-based bound
/// evaluated for reporting.
struct KdeReport {
    double max_error = 0.0;
    Eigen::VectorXd errors;        // |m_i - p(x_i)| per vertex
    double piece_lipschitz = 0.0;  // L_p * h
    double piece_transport = 0.0;  // eta(0) * m * omega_m * eps_hat / h
    double piece_curvature = 0.0;  // (K + 1/R^2) * h^2
};

inline KdeReport kde_report(const WeightedGraph& g, const PointCloud& cloud,
                            double eps_hat = std::numeric_limits<double>::quiet_NaN()) {
    const Eigen::VectorXd m = degrees(g);
    KdeReport rep;
    rep.errors.resize(g.n);
    for (int i = 0; i < g.n; ++i) {
        rep.errors[i] = std::abs(m[i] - cloud.density_at(i));
    }
    rep.max_error = rep.errors.maxCoeff();
    const auto& spec = cloud.manifold;
    rep.piece_lipschitz = cloud.density.lipschitz * g.h;
    rep.piece_transport = std::isfinite(eps_hat)
                              ? g.kernel.eta0 * spec.m * unit_ball_volume(spec.m) * eps_hat / g.h
                              : std::numeric_limits<double>::quiet_NaN();
    rep.piece_curvature =
        (spec.curvature_bound + 1.0 / (spec.reach * spec.reach)) * g.h * g.h;
    return rep;
}

} // namespace graphlb
