#pragma once

#include "graphlb/laplacian.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace graphlb {

/// Smallest eigenpairs of a (possibly generalized) symmetric eigenproblem
/// A v = lambda B v. Eigenvalues ascending; eigenvectors B-orthonormal in
/// the stated inner product; residuals are ||A v - lambda B v|| / ||v||.
struct EigenResult {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;       // column per pair
    Eigen::VectorXd b_diag;             // diagonal of B
    std::string inner_product = "euclidean";
    Eigen::VectorXd residuals;
    int iterations = 0;
    bool converged = true;
    int converged_count = 0;
    int zero_multiplicity = 1;          // multiplicity of the zero eigenvalue (graph solves)
};

/// Dense oracle: full spectrum of A v = lambda B v for symmetric A and
/// positive diagonal B, via the B^{-1/2} similarity and a Householder
/// tridiagonalization + implicit-shift QL solve. Capped at n = 3000.
inline EigenResult dense_sym_eig(const Eigen::MatrixXd& A,
                                 const Eigen::VectorXd* b_diag = nullptr) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n) throw std::invalid_argument("dense_sym_eig: matrix must be square");
    if (n > 3000) throw std::invalid_argument("dense_sym_eig: capped at n = 3000");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument("dense_sym_eig: matrix is not symmetric");
    }
    Eigen::VectorXd b = b_diag ? *b_diag : Eigen::VectorXd::Ones(n);
    if (b_diag && (b.array() <= 0.0).any()) {
        throw std::invalid_argument("dense_sym_eig: B must be positive");
    }
    const Eigen::VectorXd b_isqrt = b.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd M =
        b_isqrt.asDiagonal() * A * b_isqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("dense_sym_eig: solver failed");

    EigenResult r;
    r.eigenvalues = es.eigenvalues();
    r.eigenvectors = b_isqrt.asDiagonal() * es.eigenvectors();
    r.b_diag = b;
    r.inner_product = b_diag ? "diagonal" : "euclidean";
    r.residuals.resize(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd v = r.eigenvectors.col(i);
        r.residuals[i] = (A * v - r.eigenvalues[i] * b.cwiseProduct(v)).norm() / v.norm();
    }
    r.iterations = es.eigenvalues().size() > 0 ? 1 : 0;
    r.converged_count = n;
    return r;
}

struct LobpcgOptions {
    int block = 0;        // 0: want + 5
    double tol = 1e-8;
    int max_iter = 500;
};

struct LobpcgOutcome {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd vectors;
    int iterations = 0;
    bool converged = true;
    int converged_count = 0;
};

namespace detail {

// B-orthonormalize the columns of S in place; rank-deficient directions are
// dropped (SVQB). Returns the retained column count.
template <class ApplyB>
int b_orthonormalize(Eigen::MatrixXd& S, ApplyB&& applyB) {
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::MatrixXd BS = applyB(S);
        Eigen::MatrixXd G = S.transpose() * BS;
        G = 0.5 * (G + G.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const double gmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
        const double cut = std::max(gmax * 1e-13, 1e-300);
        int kept = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            if (es.eigenvalues()[i] > cut) ++kept;
        }
        if (kept == 0) return 0;
        Eigen::MatrixXd T(S.cols(), kept);
        int c = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            if (es.eigenvalues()[i] > cut) {
                T.col(c++) = es.eigenvectors().col(i) / std::sqrt(es.eigenvalues()[i]);
            }
        }
        S = (S * T).eval();
    }
    return static_cast<int>(S.cols());
}

} // namespace detail

/// Locally optimal block preconditioned conjugate gradient for the smallest
/// `want` eigenpairs of A v = lambda B v, with a diagonal (Jacobi)
/// preconditioner, full B-reorthogonalization every iteration and soft
/// locking of converged pairs. `deflate`, when nonempty, must hold
/// B-orthonormal columns; the iteration runs in their B-orthogonal
/// complement. A and B are functors mapping an n x b block to its image.
template <class ApplyA, class ApplyB>
LobpcgOutcome lobpcg(int n, ApplyA&& applyA, ApplyB&& applyB,
                     const Eigen::VectorXd& jacobi_diag, const Eigen::MatrixXd& deflate,
                     int want, LobpcgOptions opt = {}) {
    if (want < 1) throw std::invalid_argument("lobpcg: want must be >= 1");
    const int z = static_cast<int>(deflate.cols());
    if (want > n - z) throw std::invalid_argument("lobpcg: requested more pairs than the deflated space holds");
    int block = opt.block > 0 ? opt.block : want + 5;
    block = std::min(block, n - z);
    block = std::max(block, want);

    const double floor = jacobi_diag.size() > 0
        ? std::max(1e-300, 1e-12 * jacobi_diag.cwiseAbs().maxCoeff()) : 1.0;
    auto precondition = [&](Eigen::MatrixXd& R) {
        if (jacobi_diag.size() == 0) return;
        for (int i = 0; i < R.rows(); ++i) {
            R.row(i) /= std::max(jacobi_diag[i], floor);
        }
    };
    auto project_out_deflation = [&](Eigen::MatrixXd& S) {
        if (z == 0) return;
        S -= deflate * (applyB(deflate).transpose() * S);
    };

    // Deterministic pseudo-random start.
    std::mt19937_64 rng(0x51ab5eedULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd X(n, block);
    for (int j = 0; j < block; ++j) {
        for (int i = 0; i < n; ++i) X(i, j) = gauss(rng);
    }
    project_out_deflation(X);
    if (detail::b_orthonormalize(X, applyB) < block) {
        throw std::runtime_error("lobpcg: failed to build an initial block");
    }

    Eigen::MatrixXd P(n, 0);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(block);
    LobpcgOutcome out;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const Eigen::MatrixXd AX = applyA(X);
        const Eigen::MatrixXd BX = applyB(X);
        const Eigen::MatrixXd XtAX = X.transpose() * AX;
        theta = XtAX.diagonal();

        Eigen::MatrixXd R = AX - BX * theta.asDiagonal();
        std::vector<bool> done(block, false);
        int converged_prefix = 0;
        bool prefix_open = true;
        for (int j = 0; j < block; ++j) {
            const double target =
                opt.tol * (AX.col(j).norm() + std::abs(theta[j]) * BX.col(j).norm());
            done[j] = R.col(j).norm() <= target;
            if (prefix_open && done[j]) ++converged_prefix;
            else prefix_open = false;
        }
        out.converged_count = std::min(converged_prefix, want);
        if (converged_prefix >= want) {
            out.converged = true;
            break;
        }

        // Soft locking: converged columns stay in the subspace but spawn no
        // new search direction.
        int active = 0;
        for (int j = 0; j < block; ++j) active += done[j] ? 0 : 1;
        Eigen::MatrixXd W(n, active);
        int c = 0;
        for (int j = 0; j < block; ++j) {
            if (!done[j]) W.col(c++) = R.col(j);
        }
        precondition(W);
        project_out_deflation(W);

        // Stage-wise B-orthonormalization keeps the [X | W | P] block
        // structure intact so the conjugate directions can be read off the
        // Ritz coefficients below. X is B-orthonormal by construction.
        W -= X * (BX.transpose() * W);
        if (detail::b_orthonormalize(W, applyB) == 0) {
            throw std::runtime_error("lobpcg: stagnation, no admissible search direction");
        }
        if (P.cols() > 0) {
            P -= X * (BX.transpose() * P);
            P -= W * (applyB(W).transpose() * P);
            if (detail::b_orthonormalize(P, applyB) == 0) P.resize(n, 0);
        }

        Eigen::MatrixXd S(n, X.cols() + W.cols() + P.cols());
        S << X, W, P;
        const Eigen::MatrixXd AS = applyA(S);
        Eigen::MatrixXd H = S.transpose() * AS;
        H = 0.5 * (H + H.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        const Eigen::MatrixXd Y = es.eigenvectors().leftCols(block);
        theta = es.eigenvalues().head(block);

        const Eigen::MatrixXd Xnew = S * Y;
        // Next conjugate directions: the part of the update outside span(X).
        Eigen::MatrixXd Yp = Y;
        Yp.topRows(block).setZero();
        P = S * Yp;
        X = Xnew;
    }
    if (it == opt.max_iter) out.converged = false;
    out.iterations = it;
    out.eigenvalues = theta.head(want);
    out.vectors = X.leftCols(want);
    return out;
}

namespace detail {

inline std::pair<std::vector<int>, int> components_of_form(const Eigen::SparseMatrix<double>& A) {
    const int n = static_cast<int>(A.rows());
    std::vector<int> comp(n, -1);
    int count = 0;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        comp[s] = count;
        stack.push_back(s);
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, i); it; ++it) {
                const int j = static_cast<int>(it.row());
                if (j != i && it.value() != 0.0 && comp[j] < 0) {
                    comp[j] = count;
                    stack.push_back(j);
                }
            }
        }
        ++count;
    }
    return {comp, count};
}

} // namespace detail

/// Smallest k eigenpairs of a graph Laplacian. The zero eigenvalue is
/// reported exactly, with the constant eigenvector on a connected graph and
/// with one indicator per component otherwise; the positive spectrum is
/// computed by LOBPCG in the deflated complement. The random-walk kind is
/// solved through its symmetric similarity and back-transformed with
/// v_i = m_i^{-1/2} u_i.
inline EigenResult smallest_k(const LaplacianOperator& op, int k, double tol = 1e-8,
                              int max_iter = 500) {
    const int n = op.n;
    if (k < 1) throw std::invalid_argument("smallest_k: k must be >= 1");
    if (4 * k > n) throw std::invalid_argument("smallest_k: k must be at most n/4");

    // Zero modes from connectivity. For the symmetric kind the kernel is
    // D^{1/2} applied to the component indicators.
    auto [comp, ncomp] = detail::components_of_form(op.form);
    const Eigen::VectorXd kernel_scale = op.kind == LaplacianKind::Symmetric
                                             ? op.degree.cwiseSqrt().eval()
                                             : Eigen::VectorXd::Ones(n).eval();
    Eigen::MatrixXd zero_modes = Eigen::MatrixXd::Zero(n, ncomp);
    for (int i = 0; i < n; ++i) zero_modes(i, comp[i]) = kernel_scale[i];
    for (int c = 0; c < ncomp; ++c) {
        const double norm2 = zero_modes.col(c).cwiseAbs2().dot(op.b_diag);
        zero_modes.col(c) /= std::sqrt(norm2);
    }

    // Solve in symmetric coordinates: identical matrices for un/sym kinds,
    // the D^{-1/2}-similar form for rw.
    Eigen::SparseMatrix<double> A = op.form;
    Eigen::VectorXd b = op.b_diag;
    Eigen::MatrixXd defl = zero_modes;
    if (op.kind == LaplacianKind::RandomWalk) {
        const Eigen::VectorXd s = op.degree.cwiseSqrt().cwiseInverse();
        A = s.asDiagonal() * op.form * s.asDiagonal();
        b = Eigen::VectorXd::Constant(n, 1.0 / n);
        for (int c = 0; c < ncomp; ++c) {
            defl.col(c) = zero_modes.col(c).cwiseProduct(op.degree.cwiseSqrt());
            defl.col(c) /= std::sqrt(defl.col(c).cwiseAbs2().dot(b));
        }
    }

    EigenResult r;
    r.b_diag = op.b_diag;
    r.inner_product = op.kind == LaplacianKind::RandomWalk ? "degree" : "euclidean";
    r.zero_multiplicity = ncomp;
    r.eigenvalues = Eigen::VectorXd::Zero(k);
    r.eigenvectors = Eigen::MatrixXd::Zero(n, k);
    const int nz = std::min(ncomp, k);
    r.eigenvectors.leftCols(nz) = zero_modes.leftCols(nz);

    const int want = k - nz;
    if (want > 0) {
        LobpcgOptions opt;
        opt.tol = tol;
        opt.max_iter = max_iter;
        opt.block = k + 5;
        auto applyA = [&](const Eigen::MatrixXd& V) -> Eigen::MatrixXd { return A * V; };
        auto applyB = [&](const Eigen::MatrixXd& V) -> Eigen::MatrixXd {
            return b.asDiagonal() * V;
        };
        const Eigen::VectorXd jacobi = A.diagonal();
        auto sol = lobpcg(n, applyA, applyB, jacobi, defl, want, opt);
        r.eigenvalues.tail(want) = sol.eigenvalues;
        Eigen::MatrixXd V = sol.vectors;
        if (op.kind == LaplacianKind::RandomWalk) {
            V = op.degree.cwiseSqrt().cwiseInverse().asDiagonal() * V;
        }
        r.eigenvectors.rightCols(want) = V;
        r.iterations = sol.iterations;
        r.converged = sol.converged;
        r.converged_count = nz + sol.converged_count;
    } else {
        r.converged_count = nz;
    }

    // Residuals against the operator's own generalized problem.
    r.residuals.resize(k);
    for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd v = r.eigenvectors.col(j);
        r.residuals[j] =
            (op.form * v - r.eigenvalues[j] * op.b_diag.cwiseProduct(v)).norm() / v.norm();
    }
    return r;
}

} // namespace graphlb
