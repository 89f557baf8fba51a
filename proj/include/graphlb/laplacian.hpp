#pragma once

#include "graphlb/graph.hpp"

#include <Eigen/Sparse>

#include <sstream>

namespace graphlb {

/// A graph Laplacian in one of the three normalizations of the construction:
///
///   unnormalized   (Du)_i = (2/(sigma h^2)) sum_j w_ij (u_i - u_j)
///   random-walk    (Du)_i = (2/(sigma h^2)) sum_j (w_ij/m_i) (u_i - u_j)
///   symmetric      (Du)_i = (2/(sigma h^2)) sum_j (w_ij/sqrt(m_i)) (u_i/sqrt(m_i) - u_j/sqrt(m_j))
///
/// Each kind is self-adjoint and positive semidefinite in its own inner
/// product <u,v>_B = sum_i B_ii u_i v_i with B = diag(m)/n for the
/// random-walk kind and B = I/n otherwise. `form` is the matrix of the
/// bilinear form, so <Du, v>_B = u^T form v = b(u, v) and the eigenproblem
/// reads form*u = lambda*B*u.
struct LaplacianOperator {
    LaplacianKind kind = LaplacianKind::Unnormalized;
    int n = 0;
    double h = 0.0;
    double sigma = 0.0;
    double scale = 0.0;           // 2/(sigma h^2)
    Eigen::VectorXd degree;       // m_i, self-loops included
    Eigen::VectorXd b_diag;       // inner-product weights B_ii
    Eigen::SparseMatrix<double> form;

    /// Operator action Du = B^{-1} form u.
    Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
        return (form * u).cwiseQuotient(b_diag);
    }

    /// Explicit sparse matrix of the operator action.
    Eigen::SparseMatrix<double> to_sparse() const {
        Eigen::SparseMatrix<double> inv_b(n, n);
        for (int i = 0; i < n; ++i) inv_b.insert(i, i) = 1.0 / b_diag[i];
        inv_b.makeCompressed();
        return inv_b * form;
    }

    /// Direction annihilated by the operator on a connected graph:
    /// constants, or sqrt(m) entrywise for the symmetric kind.
    Eigen::VectorXd kernel_direction() const {
        if (kind == LaplacianKind::Symmetric) return degree.cwiseSqrt();
        return Eigen::VectorXd::Ones(n);
    }
};

/// Assemble the Laplacian of the requested kind. Normalized kinds require
/// every degree positive; isolated vertices are reported by index.
inline LaplacianOperator assemble(const WeightedGraph& g, LaplacianKind kind) {
    LaplacianOperator op;
    op.kind = kind;
    op.n = g.n;
    op.h = g.h;
    op.sigma = g.kernel.sigma;
    op.scale = 2.0 / (g.kernel.sigma * g.h * g.h);
    op.degree = degrees(g);

    if (kind != LaplacianKind::Unnormalized) {
        std::vector<int> isolated;
        for (int i = 0; i < g.n; ++i) {
            if (op.degree[i] <= 0.0) isolated.push_back(i);
        }
        if (!isolated.empty()) {
            std::ostringstream msg;
            msg << "assemble: zero-degree vertices under a normalized kind:";
            for (std::size_t t = 0; t < isolated.size() && t < 16; ++t) msg << ' ' << isolated[t];
            if (isolated.size() > 16) msg << " ...";
            throw std::runtime_error(msg.str());
        }
    }

    op.b_diag = kind == LaplacianKind::RandomWalk
                    ? (op.degree / g.n).eval()
                    : Eigen::VectorXd::Constant(g.n, 1.0 / g.n).eval();

    // form = (scale/n) * S^T (D - W) S with S = I (un, rw) or D^{-1/2} (sym).
    Eigen::VectorXd s = kind == LaplacianKind::Symmetric
                            ? op.degree.cwiseSqrt().cwiseInverse().eval()
                            : Eigen::VectorXd::Ones(g.n).eval();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.nnz() + g.n);
    const double c = op.scale / g.n;
    for (int i = 0; i < g.n; ++i) {
        for (int e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
            const int j = g.col[e];
            if (j != i) trips.emplace_back(i, j, -c * g.w[e] * s[i] * s[j]);
        }
        // Self-loop weight cancels in D - W.
        double off_degree = 0.0;
        for (int e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
            if (g.col[e] != i) off_degree += g.w[e];
        }
        trips.emplace_back(i, i, c * off_degree * s[i] * s[i]);
    }
    op.form.resize(g.n, g.n);
    op.form.setFromTriplets(trips.begin(), trips.end());
    op.form.makeCompressed();
    return op;
}

} // namespace graphlb
