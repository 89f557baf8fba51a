#include "graphlb/eigensolve.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace graphlb;

namespace {

// Roots of the characteristic cubic of a symmetric 3x3 matrix, via the
// trigonometric method (all roots are real). Independent of dense_sym_eig.
std::array<double, 3> characteristic_roots(const Eigen::Matrix3d& A) {
    const double a = -A.trace();
    const double b = 0.5 * (A.trace() * A.trace() - (A * A).trace());
    const double c = -A.determinant();
    // lambda^3 + a lambda^2 + b lambda + c; depressed: t^3 + p t + q.
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    std::array<double, 3> roots;
    if (std::abs(p) < 1e-30) {
        const double t = std::cbrt(-q);
        roots = {t, t, t};
    } else {
        const double mm = 2.0 * std::sqrt(-p / 3.0);
        double arg = 3.0 * q / (p * mm);
        arg = std::clamp(arg, -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            roots[k] = mm * std::cos(phi - 2.0 * kPi * k / 3.0);
        }
    }
    for (auto& r : roots) r -= a / 3.0;
    std::sort(roots.begin(), roots.end());
    return roots;
}

WeightedGraph torus_graph(int n, std::uint64_t seed, double h) {
    const auto kernel = make_kernel(KernelProfile::Indicator, 2);
    const auto cloud = sample(ManifoldSpec::flat_torus(2), DensitySpec::uniform_density(), n, seed);
    return build_graph(cloud, h, kernel);
}

} // namespace

TEST_CASE("dense oracle basics") {
    SECTION("identity has a flat spectrum") {
        const auto r = dense_sym_eig(Eigen::MatrixXd::Identity(5, 5));
        for (int i = 0; i < 5; ++i) CHECK(r.eigenvalues[i] == Catch::Approx(1.0));
    }
    SECTION("diagonal matrices sort ascending with coordinate eigenvectors") {
        Eigen::MatrixXd A = Eigen::Vector3d(3, 1, 2).asDiagonal();
        const auto r = dense_sym_eig(A);
        CHECK(r.eigenvalues[0] == Catch::Approx(1.0));
        CHECK(r.eigenvalues[1] == Catch::Approx(2.0));
        CHECK(r.eigenvalues[2] == Catch::Approx(3.0));
        CHECK(std::abs(r.eigenvectors.col(0)[1]) == Catch::Approx(1.0));
        CHECK(std::abs(r.eigenvectors.col(1)[2]) == Catch::Approx(1.0));
        CHECK(std::abs(r.eigenvectors.col(2)[0]) == Catch::Approx(1.0));
    }
    SECTION("random 3x3 spectra match the characteristic cubic") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> gauss;
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::Matrix3d A;
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j) A(i, j) = A(j, i) = gauss(rng);
            const auto r = dense_sym_eig(A);
            const auto roots = characteristic_roots(A);
            const double s = std::max(1.0, A.cwiseAbs().maxCoeff());
            for (int i = 0; i < 3; ++i) {
                CHECK(std::abs(r.eigenvalues[i] - roots[i]) <= 1e-10 * s);
            }
        }
    }
    SECTION("non-symmetric input is refused") {
        Eigen::MatrixXd A(2, 2);
        A << 0, 1, 0, 0;
        CHECK_THROWS_AS(dense_sym_eig(A), std::invalid_argument);
    }
    SECTION("generalized problems are B-orthonormal") {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> gauss;
        Eigen::MatrixXd M(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = i; j < 8; ++j) M(i, j) = M(j, i) = gauss(rng);
        Eigen::VectorXd b(8);
        for (int i = 0; i < 8; ++i) b[i] = 0.5 + std::abs(gauss(rng));
        const auto r = dense_sym_eig(M, &b);
        const Eigen::MatrixXd G =
            r.eigenvectors.transpose() * b.asDiagonal() * r.eigenvectors;
        CHECK((G - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-8);
        for (int i = 0; i < 8; ++i) CHECK(r.residuals[i] <= 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("hand-built path graph has combinatorial spectrum 0, 1, 3") {
    const auto kernel = make_kernel(KernelProfile::Indicator, 2);
    const auto g = graph_from_triplets(3, 1.0, kernel, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto op = assemble(g, LaplacianKind::Unnormalized);
    const auto r = dense_sym_eig(Eigen::MatrixXd(op.form), &op.b_diag);
    // Remove the 2/(sigma h^2) scale to read the combinatorial values.
    CHECK(r.eigenvalues[0] / op.scale == Catch::Approx(0.0).margin(1e-12));
    CHECK(r.eigenvalues[1] / op.scale == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(r.eigenvalues[2] / op.scale == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("smallest_k reports an exact zero with the constant mode") {
    const auto g = torus_graph(200, 3, 0.4);
    for (auto kind : {LaplacianKind::Unnormalized, LaplacianKind::RandomWalk, LaplacianKind::Symmetric}) {
        const auto op = assemble(g, kind);
        const auto r = smallest_k(op, 1, 1e-8, 300);
        REQUIRE(r.zero_multiplicity == 1);
        CHECK(r.eigenvalues[0] == 0.0);
        // B-normalized multiple of the kernel direction.
        const Eigen::VectorXd expect =
            op.kernel_direction() /
            std::sqrt(op.kernel_direction().cwiseAbs2().dot(op.b_diag));
        CHECK((r.eigenvectors.col(0) - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("sparse solver agrees with the dense oracle on a torus graph") {
    const auto g = torus_graph(400, 7, 0.44);
    for (auto kind : {LaplacianKind::Unnormalized, LaplacianKind::RandomWalk}) {
        const auto op = assemble(g, kind);
        const auto sparse = smallest_k(op, 10, 1e-9, 500);
        REQUIRE(sparse.converged);
        const auto dense = dense_sym_eig(Eigen::MatrixXd(op.form), &op.b_diag);
        for (int i = 1; i < 10; ++i) {
            CHECK(std::abs(sparse.eigenvalues[i] - dense.eigenvalues[i]) <=
                  1e-7 * std::abs(dense.eigenvalues[i]));
        }
        // Residual contract on every solver-computed pair; the deflated zero
        // mode is checked at machine scale instead.
        const double form_scale = Eigen::VectorXd(op.form.diagonal()).cwiseAbs().maxCoeff();
        for (int i = 0; i < 10; ++i) {
            const Eigen::VectorXd v = sparse.eigenvectors.col(i);
            const Eigen::VectorXd Av = op.form * v;
            const Eigen::VectorXd Bv = op.b_diag.cwiseProduct(v);
            if (i < sparse.zero_multiplicity) {
                CHECK(Av.norm() <= 1e-12 * form_scale * v.norm());
            } else {
                CHECK((Av - sparse.eigenvalues[i] * Bv).norm() <=
                      1e-8 * (Av.norm() + std::abs(sparse.eigenvalues[i]) * Bv.norm()));
            }
        }
        // B-orthonormality of the returned block.
        const Eigen::MatrixXd G = sparse.eigenvectors.transpose() *
                                  sparse.b_diag.asDiagonal() * sparse.eigenvectors;
        CHECK((G - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("Courant minmax lower bound holds on random subspaces") {
    const auto g = torus_graph(150, 11, 0.4);
    const auto op = assemble(g, LaplacianKind::Unnormalized);
    const int k = 4;
    const auto r = smallest_k(op, k, 1e-9, 500);
    REQUIRE(r.converged);

    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd S(g.n, k);
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < g.n; ++i) S(i, j) = gauss(rng);
        const Eigen::MatrixXd A = S.transpose() * (op.form * S).eval();
        const Eigen::MatrixXd B = S.transpose() * op.b_diag.asDiagonal() * S;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
            0.5 * (A + A.transpose()), 0.5 * (B + B.transpose()));
        const double max_rayleigh = ges.eigenvalues().maxCoeff();
        CHECK(max_rayleigh >= r.eigenvalues[k - 1] - 1e-9);
    }
}

TEST_CASE("random-walk back-transform matches the symmetric eigenvectors") {
    const auto g = torus_graph(150, 13, 0.4);
    const auto rw = assemble(g, LaplacianKind::RandomWalk);
    const auto sym = assemble(g, LaplacianKind::Symmetric);
    const int k = 6;
    const auto r_rw = smallest_k(rw, k, 1e-10, 500);
    const auto r_sym = smallest_k(sym, k, 1e-10, 500);
    REQUIRE(r_rw.converged);
    REQUIRE(r_sym.converged);
    const Eigen::VectorXd sqrt_m = rw.degree.cwiseSqrt();
    for (int i = 0; i < k; ++i) {
        CHECK(std::abs(r_rw.eigenvalues[i] - r_sym.eigenvalues[i]) <=
              1e-8 * std::max(1.0, std::abs(r_sym.eigenvalues[i])));
        const Eigen::VectorXd lifted = sqrt_m.cwiseProduct(r_rw.eigenvectors.col(i));
        const Eigen::VectorXd u = r_sym.eigenvectors.col(i);
        const double sign = lifted.dot(u) >= 0.0 ? 1.0 : -1.0;
        CHECK((lifted - sign * u).norm() <= 1e-8 * u.norm());
    }
}

TEST_CASE("disconnected graphs report the multiplicity of zero") {
    const auto kernel = make_kernel(KernelProfile::Indicator, 2);
    // Two 4-cliques with no edges between them.
    std::vector<std::tuple<int, int, double>> trips;
    for (int a = 0; a < 2; ++a) {
        const int base = 4 * a;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) trips.emplace_back(base + i, base + j, 1.0);
    }
    const auto g = graph_from_triplets(8, 1.0, kernel, trips);
    const auto op = assemble(g, LaplacianKind::Unnormalized);
    const auto r = smallest_k(op, 2, 1e-9, 200);
    CHECK(r.zero_multiplicity == 2);
    CHECK(r.eigenvalues[0] == 0.0);
    CHECK(r.eigenvalues[1] == 0.0);
}

TEST_CASE("argument checks") {
    const auto g = torus_graph(40, 17, 0.5);
    const auto op = assemble(g, LaplacianKind::Unnormalized);
    CHECK_THROWS_AS(smallest_k(op, 0), std::invalid_argument);
    CHECK_THROWS_AS(smallest_k(op, 11), std::invalid_argument); // > n/4
    CHECK_NOTHROW(smallest_k(op, 10, 1e-7, 500));
}

TEST_CASE("non-convergence surfaces as a flagged partial result") {
    const auto g = torus_graph(300, 19, 0.35);
    const auto op = assemble(g, LaplacianKind::Unnormalized);
    const auto r = smallest_k(op, 8, 1e-13, 2);
    CHECK_FALSE(r.converged);
    CHECK(r.converged_count >= 1); // the exact zero mode
    CHECK(r.converged_count <= 8);
    CHECK(r.eigenvalues.size() == 8);
}
