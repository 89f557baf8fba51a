#pragma once

#include "graphlb/eigensolve.hpp"
#include "graphlb/geometry.hpp"

#include <complex>
#include <memory>

namespace graphlb {

/// Weight density of the limit operator: rho = 1 (unnormalized limit) or
/// rho = p (random-walk limit).
enum class RhoKind { One, SamplingDensity };

namespace detail {

/// Fourier coefficients hat{g}(j) = int g(t) e^{-2 pi i j.t} dt on [0,1)^m,
/// tabulated for |j|_inf <= maxj by separable DFT on a periodic grid.
class FourierTable {
public:
    template <class G>
    FourierTable(G&& g, int m, int maxj) : m_(m), maxj_(maxj), width_(2 * maxj + 1) {
        const int grid = 2 * maxj + 16;
        // Sample g on the tensor grid.
        std::vector<std::complex<double>> data(int_pow_i(grid, m));
        Eigen::RowVectorXd t(m);
        std::vector<int> idx(m, 0);
        for (std::size_t flat = 0; flat < data.size(); ++flat) {
            for (int a = 0; a < m; ++a) t[a] = double(idx[a]) / grid;
            data[flat] = g(t);
            int axis = 0;
            while (axis < m && ++idx[axis] == grid) idx[axis++] = 0;
        }
        // Transform axis by axis onto the needed frequency window.
        std::vector<std::complex<double>> twiddle(grid * width_);
        for (int l = -maxj; l <= maxj; ++l) {
            for (int i = 0; i < grid; ++i) {
                const double phase = -2.0 * kPi * l * i / grid;
                twiddle[(l + maxj) * grid + i] = {std::cos(phase), std::sin(phase)};
            }
        }
        std::vector<int> dims(m, grid);
        for (int axis = 0; axis < m; ++axis) {
            std::vector<int> new_dims = dims;
            new_dims[axis] = width_;
            std::vector<std::complex<double>> next(product(new_dims));
            std::vector<int> pos(m, 0);
            const std::size_t lines = product(dims) / dims[axis];
            // Iterate all lines along `axis`.
            std::vector<int> line_pos(m, 0);
            for (std::size_t line = 0; line < lines; ++line) {
                for (int l = 0; l < width_; ++l) {
                    std::complex<double> acc = 0.0;
                    for (int i = 0; i < dims[axis]; ++i) {
                        line_pos[axis] = i;
                        acc += data[flatten(line_pos, dims)] * twiddle[l * grid + i];
                    }
                    line_pos[axis] = l;
                    next[flatten(line_pos, new_dims)] = acc;
                }
                line_pos[axis] = 0;
                advance_line(line_pos, dims, axis);
            }
            data.swap(next);
            dims = new_dims;
        }
        const double norm = 1.0 / int_pow_i(grid, m);
        coeffs_.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) coeffs_[i] = data[i] * norm;
        max_abs_ = 0.0;
        for (const auto& c : coeffs_) max_abs_ = std::max(max_abs_, std::abs(c));
    }

    std::complex<double> coeff(const Eigen::VectorXi& j) const {
        std::size_t flat = 0;
        for (int a = m_ - 1; a >= 0; --a) {
            if (std::abs(j[a]) > maxj_) return 0.0;
            flat = flat * width_ + (j[a] + maxj_);
        }
        return coeffs_[flat];
    }

    double real_at(const Eigen::VectorXi& j) const { return coeff(j).real(); }
    double imag_at(const Eigen::VectorXi& j) const { return coeff(j).imag(); }
    double max_abs() const { return max_abs_; }

    /// Frequencies with non-negligible coefficients.
    std::vector<Eigen::VectorXi> significant(double rel_tol) const {
        std::vector<Eigen::VectorXi> sig;
        std::vector<int> idx(m_, 0);
        for (std::size_t flat = 0; flat < coeffs_.size(); ++flat) {
            if (std::abs(coeffs_[flat]) > rel_tol * max_abs_) {
                Eigen::VectorXi j(m_);
                for (int a = 0; a < m_; ++a) j[a] = idx[a] - maxj_;
                sig.push_back(j);
            }
            int axis = 0;
            while (axis < m_ && ++idx[axis] == width_) idx[axis++] = 0;
        }
        return sig;
    }

private:
    static std::size_t int_pow_i(int base, int e) {
        std::size_t r = 1;
        for (int i = 0; i < e; ++i) r *= base;
        return r;
    }
    static std::size_t product(const std::vector<int>& dims) {
        std::size_t r = 1;
        for (int d : dims) r *= d;
        return r;
    }
    static std::size_t flatten(const std::vector<int>& pos, const std::vector<int>& dims) {
        std::size_t flat = 0;
        for (int a = static_cast<int>(dims.size()) - 1; a >= 0; --a) flat = flat * dims[a] + pos[a];
        return flat;
    }
    static void advance_line(std::vector<int>& pos, const std::vector<int>& dims, int skip_axis) {
        for (int a = 0; a < static_cast<int>(dims.size()); ++a) {
            if (a == skip_axis) continue;
            if (++pos[a] < dims[a]) return;
            pos[a] = 0;
        }
    }

    int m_, maxj_, width_;
    std::vector<std::complex<double>> coeffs_;
    double max_abs_ = 0.0;
};

/// Real Fourier basis on the torus: the constant plus a cosine/sine pair per
/// half-lattice representative (first nonzero coordinate positive).
struct TorusBasis {
    enum Type { Const = 0, Cos = 1, Sin = 2 };
    struct Fn {
        Type type;
        Eigen::VectorXi k;
    };
    int m = 0, cutoff = 0;
    std::vector<Fn> fns;

    static TorusBasis build(int m, int cutoff) {
        TorusBasis basis;
        basis.m = m;
        basis.cutoff = cutoff;
        basis.fns.push_back({Const, Eigen::VectorXi::Zero(m)});
        std::vector<int> k(m, -cutoff);
        for (;;) {
            bool zero = true, rep = false;
            for (int a = m - 1; a >= 0; --a) {
                if (k[a] != 0) zero = false;
            }
            if (!zero) {
                for (int a = 0; a < m; ++a) {
                    if (k[a] != 0) {
                        rep = k[a] > 0;
                        break;
                    }
                }
            }
            if (rep) {
                Eigen::VectorXi kv(m);
                for (int a = 0; a < m; ++a) kv[a] = k[a];
                basis.fns.push_back({Cos, kv});
                basis.fns.push_back({Sin, kv});
            }
            int axis = 0;
            while (axis < m && k[axis] == cutoff) k[axis++] = -cutoff;
            if (axis == m) break;
            ++k[axis];
        }
        return basis;
    }

    int size() const { return static_cast<int>(fns.size()); }

    double value(int a, const Eigen::RowVectorXd& t) const {
        const auto& f = fns[a];
        if (f.type == Const) return 1.0;
        const double phase = 2.0 * kPi * t.dot(f.k.cast<double>().transpose());
        return std::sqrt(2.0) * (f.type == Cos ? std::cos(phase) : std::sin(phase));
    }

    Eigen::RowVectorXd gradient(int a, const Eigen::RowVectorXd& t) const {
        const auto& f = fns[a];
        if (f.type == Const) return Eigen::RowVectorXd::Zero(m);
        const double phase = 2.0 * kPi * t.dot(f.k.cast<double>().transpose());
        const double osc = f.type == Cos ? -std::sin(phase) : std::cos(phase);
        return (2.0 * kPi * std::sqrt(2.0) * osc) * f.k.cast<double>().transpose();
    }
};

/// Mass-type integral int phi_a phi_b g dt from the Fourier table of g.
inline double basis_product_integral(const TorusBasis& basis, int a, int b,
                                     const FourierTable& g) {
    const auto& fa = basis.fns[a];
    const auto& fb = basis.fns[b];
    using T = TorusBasis;
    if (fa.type == T::Const && fb.type == T::Const) return g.real_at(fa.k);
    if (fa.type == T::Const || fb.type == T::Const) {
        const auto& f = fa.type == T::Const ? fb : fa;
        if (f.type == T::Cos) return std::sqrt(2.0) * g.real_at(f.k);
        return -std::sqrt(2.0) * g.imag_at(f.k);
    }
    const Eigen::VectorXi diff = fa.k - fb.k;
    const Eigen::VectorXi sum = fa.k + fb.k;
    if (fa.type == T::Cos && fb.type == T::Cos) return g.real_at(diff) + g.real_at(sum);
    if (fa.type == T::Sin && fb.type == T::Sin) return g.real_at(diff) - g.real_at(sum);
    // One cosine, one sine; orient so that a carries the cosine.
    const Eigen::VectorXi d = fa.type == T::Cos ? diff : (-diff).eval();
    return g.imag_at(d) - g.imag_at(sum);
}

/// Stiffness-type integral int <grad phi_a, grad phi_b> g dt.
inline double basis_dirichlet_integral(const TorusBasis& basis, int a, int b,
                                       const FourierTable& g) {
    const auto& fa = basis.fns[a];
    const auto& fb = basis.fns[b];
    using T = TorusBasis;
    if (fa.type == T::Const || fb.type == T::Const) return 0.0;
    const double factor = 4.0 * kPi * kPi * fa.k.cast<double>().dot(fb.k.cast<double>());
    const Eigen::VectorXi diff = fa.k - fb.k;
    const Eigen::VectorXi sum = fa.k + fb.k;
    if (fa.type == T::Cos && fb.type == T::Cos) {
        return factor * (g.real_at(diff) - g.real_at(sum));
    }
    if (fa.type == T::Sin && fb.type == T::Sin) {
        return factor * (g.real_at(diff) + g.real_at(sum));
    }
    // grad(cos_a).grad(sin_b) integrates 2 sin_ka cos_kb with a minus sign.
    const Eigen::VectorXi d = fa.type == T::Cos ? diff : (-diff).eval();
    return factor * (g.imag_at(d) + g.imag_at(sum));
}

struct GalerkinSolve {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd coefficients; // basis coefficients, column per pair
    TorusBasis basis;
};

inline GalerkinSolve galerkin_torus(const ManifoldSpec& manifold, const DensitySpec& density,
                                    RhoKind rho, int count, int cutoff) {
    const int m = manifold.m;
    auto p_at = [&](const Eigen::RowVectorXd& t) {
        return density.value(manifold, manifold.torus_embed(t));
    };
    const FourierTable table_p2(
        [&](const Eigen::RowVectorXd& t) { const double p = p_at(t); return p * p; }, m, 2 * cutoff);
    const FourierTable table_rp(
        [&](const Eigen::RowVectorXd& t) {
            const double p = p_at(t);
            return rho == RhoKind::One ? p : p * p;
        },
        m, 2 * cutoff);

    const TorusBasis basis = TorusBasis::build(m, cutoff);
    const int M = basis.size();
    if (count > M) throw std::invalid_argument("galerkin_torus: count exceeds the basis size");

    std::vector<Eigen::Triplet<double>> ta, tb;
    const double drop_a = 1e-14 * std::max(1.0, table_p2.max_abs()) * 4.0 * kPi * kPi *
                          double(cutoff) * double(cutoff) * m;
    const double drop_b = 1e-14 * std::max(1.0, table_rp.max_abs());
    for (int a = 0; a < M; ++a) {
        for (int b = a; b < M; ++b) {
            const double va = basis_dirichlet_integral(basis, a, b, table_p2);
            if (std::abs(va) > drop_a) {
                ta.emplace_back(a, b, va);
                if (a != b) ta.emplace_back(b, a, va);
            }
            const double vb = basis_product_integral(basis, a, b, table_rp);
            if (std::abs(vb) > drop_b) {
                tb.emplace_back(a, b, vb);
                if (a != b) tb.emplace_back(b, a, vb);
            }
        }
    }
    Eigen::SparseMatrix<double> A(M, M), B(M, M);
    A.setFromTriplets(ta.begin(), ta.end());
    B.setFromTriplets(tb.begin(), tb.end());

    GalerkinSolve out;
    out.basis = basis;
    if (M <= 1200) {
        const Eigen::MatrixXd Ad(A), Bd(B);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ad, Bd);
        if (ges.info() != Eigen::Success) throw std::runtime_error("galerkin_torus: dense solve failed");
        out.eigenvalues = ges.eigenvalues().head(count);
        out.coefficients = ges.eigenvectors().leftCols(count);
        return out;
    }

    // Constants are an exact eigenpair at zero; deflate and iterate for the rest.
    Eigen::MatrixXd defl = Eigen::MatrixXd::Zero(M, 1);
    defl(0, 0) = 1.0;
    const double b00 = Eigen::MatrixXd(B)(0, 0);
    defl /= std::sqrt(b00);
    auto applyA = [&](const Eigen::MatrixXd& V) -> Eigen::MatrixXd { return A * V; };
    auto applyB = [&](const Eigen::MatrixXd& V) -> Eigen::MatrixXd { return B * V; };
    LobpcgOptions opt;
    opt.tol = 1e-10;
    opt.max_iter = 800;
    opt.block = count + 6;
    auto sol = lobpcg(M, applyA, applyB, Eigen::VectorXd(A.diagonal()), defl, count - 1, opt);
    if (!sol.converged) throw std::runtime_error("galerkin_torus: eigensolver did not converge");
    out.eigenvalues = Eigen::VectorXd::Zero(count);
    out.eigenvalues.tail(count - 1) = sol.eigenvalues;
    out.coefficients = Eigen::MatrixXd::Zero(M, count);
    out.coefficients.col(0) = defl;
    out.coefficients.rightCols(count - 1) = sol.vectors;
    return out;
}

inline EigenFunction galerkin_eigenfunction(const ManifoldSpec& manifold,
                                            const TorusBasis& basis,
                                            const Eigen::VectorXd& coeff) {
    // Keep only the coefficients that matter; Galerkin eigenvectors of
    // smooth problems decay spectrally.
    struct Term {
        TorusBasis::Fn fn;
        double c;
    };
    auto terms = std::make_shared<std::vector<Term>>();
    const double cut = 1e-12 * coeff.cwiseAbs().maxCoeff();
    for (int a = 0; a < basis.size(); ++a) {
        if (std::abs(coeff[a]) > cut) terms->push_back({basis.fns[a], coeff[a]});
    }
    const int m = basis.m;
    EigenFunction f;
    f.value = [manifold, terms](const Eigen::RowVectorXd& x) {
        const Eigen::RowVectorXd t = manifold.torus_angles(x);
        double s = 0.0;
        for (const auto& term : *terms) {
            if (term.fn.type == TorusBasis::Const) {
                s += term.c;
            } else {
                const double phase = 2.0 * kPi * t.dot(term.fn.k.cast<double>().transpose());
                s += term.c * std::sqrt(2.0) *
                     (term.fn.type == TorusBasis::Cos ? std::cos(phase) : std::sin(phase));
            }
        }
        return s;
    };
    f.grad_sq = [manifold, terms, m](const Eigen::RowVectorXd& x) {
        const Eigen::RowVectorXd t = manifold.torus_angles(x);
        Eigen::RowVectorXd grad = Eigen::RowVectorXd::Zero(m);
        for (const auto& term : *terms) {
            if (term.fn.type == TorusBasis::Const) continue;
            const double phase = 2.0 * kPi * t.dot(term.fn.k.cast<double>().transpose());
            const double osc = term.fn.type == TorusBasis::Cos ? -std::sin(phase) : std::cos(phase);
            grad += term.c * 2.0 * kPi * std::sqrt(2.0) * osc * term.fn.k.cast<double>().transpose();
        }
        return grad.squaredNorm();
    };
    return f;
}

} // namespace detail

/// Numerical continuum spectrum of the weighted operator
/// -(1/(rho p)) div(p^2 grad f) on the flat torus for closed-form densities:
/// Fourier-Galerkin discretization of the form pair (D, <.,.>_{rho mu}),
/// verified by cutoff doubling (relative change of the requested eigenvalues
/// at most 0.1%, hard failure above 1%).
inline SpectrumTable continuum_oracle_spectrum(const ManifoldSpec& manifold,
                                               const DensitySpec& density, RhoKind rho,
                                               int count, int initial_cutoff = 16) {
    if (manifold.kind != ManifoldKind::FlatTorus) {
        throw std::invalid_argument("continuum_oracle_spectrum: flat torus only");
    }
    if (count < 1) throw std::invalid_argument("continuum_oracle_spectrum: count must be >= 1");

    const int max_cutoff = 64;
    int cutoff = initial_cutoff;
    auto solve = detail::galerkin_torus(manifold, density, rho, count, cutoff);
    double change = std::numeric_limits<double>::infinity();
    while (cutoff < max_cutoff) {
        cutoff *= 2;
        auto finer = detail::galerkin_torus(manifold, density, rho, count, cutoff);
        change = 0.0;
        for (int i = 0; i < count; ++i) {
            const double scale = std::max(std::abs(finer.eigenvalues[i]), 1e-12);
            change = std::max(change, std::abs(finer.eigenvalues[i] - solve.eigenvalues[i]) / scale);
        }
        solve = std::move(finer);
        if (change <= 1e-3) break;
    }
    if (change > 1e-2) {
        throw std::runtime_error("continuum_oracle_spectrum: cutoff doubling did not converge");
    }

    // Group numerically degenerate eigenvalues into clusters.
    SpectrumTable table;
    table.laplacian_kind =
        rho == RhoKind::One ? LaplacianKind::Unnormalized : LaplacianKind::RandomWalk;
    const double lam_max = std::max(solve.eigenvalues.maxCoeff(), 1.0);
    int i = 0;
    while (i < count) {
        SpectrumEntry entry;
        entry.eigenvalue = solve.eigenvalues[i];
        int j = i;
        while (j < count && solve.eigenvalues[j] - entry.eigenvalue <= 1e-6 * lam_max) {
            entry.functions.push_back(
                detail::galerkin_eigenfunction(manifold, solve.basis, solve.coefficients.col(j)));
            ++j;
        }
        entry.multiplicity = j - i;
        // Report the cluster mean as the eigenvalue.
        double mean = 0.0;
        for (int t = i; t < j; ++t) mean += solve.eigenvalues[t];
        entry.eigenvalue = mean / entry.multiplicity;
        if (std::abs(entry.eigenvalue) <= 1e-9 * lam_max) entry.eigenvalue = 0.0;
        table.entries.push_back(std::move(entry));
        i = j;
    }
    return table;
}

} // namespace graphlb
