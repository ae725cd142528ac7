#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "twopatch/exact.hpp"
#include "twopatch/field.hpp"
#include "twopatch/params.hpp"

namespace twopatch {

/// Uniform square grid with spacing h = 1/n on both axes.
class PdeGrid {
public:
    explicit PdeGrid(int n) : n_(n) {
        if (n < 4) throw InvariantError("PdeGrid: n must be >= 4");
    }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] double h() const noexcept { return 1.0 / n_; }
    [[nodiscard]] std::size_t n_nodes() const noexcept {
        return static_cast<std::size_t>(n_ + 1) * static_cast<std::size_t>(n_ + 1);
    }
    [[nodiscard]] Eigen::Index node(int i, int k) const noexcept {
        return static_cast<Eigen::Index>(i) * (n_ + 1) + k;
    }

private:
    int n_;
};

/// Sign and dominance audit of the assembled -L_h (corner rows set to identity).
struct MMatrixCertificate {
    bool offdiagonal_nonpositive = true;
    bool diagonal_nonnegative = true;
    bool weakly_diagonally_dominant = true;
    /// Every row is linked through nonzero entries to a strictly dominant row
    /// (weak chaining), which makes the matrix nonsingular.
    bool weakly_chained = true;
    std::size_t zero_rows = 0;
    double min_diagonal = std::numeric_limits<double>::infinity();
    double max_offdiagonal = -std::numeric_limits<double>::infinity();
    double min_row_sum = std::numeric_limits<double>::infinity();
    double max_row_sum = -std::numeric_limits<double>::infinity();

    /// Z-matrix with nonnegative diagonal and weak row dominance: an M-matrix,
    /// possibly singular.
    [[nodiscard]] bool holds() const noexcept {
        return offdiagonal_nonpositive && diagonal_nonnegative && weakly_diagonally_dominant;
    }
    [[nodiscard]] bool nonsingular() const noexcept { return holds() && weakly_chained; }
};

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// First-order upwind / central-difference discretization of
///   L_d u = x1(1-x1)/2 u_11 + x2(1-x2)/(2d) u_22 - kappa M x . grad u
/// on a PdeGrid. Only (0,0) and (1,1) carry Dirichlet data; every other
/// boundary node keeps the degenerate operator.
class DiscreteOperator {
public:
    DiscreteOperator(PdeGrid grid, double d, double kappa) : grid_(grid), d_(d), kappa_(kappa) {
        if (!(d > 0.0 && d <= 1.0)) throw InvariantError("discretize_Ld: d must lie in (0,1]");
        if (!std::isfinite(kappa) || kappa < 0.0) throw InvariantError("discretize_Ld: kappa must be >= 0");
        assemble();
        certify();
        if (!certificate_.holds())
            throw InvariantError("discretize_Ld: assembled -L_h is not an M-matrix (sign or dominance check failed)");
    }

    [[nodiscard]] const PdeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] double d() const noexcept { return d_; }
    [[nodiscard]] double kappa() const noexcept { return kappa_; }
    [[nodiscard]] const MMatrixCertificate& certificate() const noexcept { return certificate_; }
    /// L_h itself; the rows of the two Dirichlet corners are empty.
    [[nodiscard]] const SparseRowMatrix& generator() const noexcept { return lh_; }
    /// -L_h with the corner rows replaced by identity rows.
    [[nodiscard]] const SparseRowMatrix& system() const noexcept { return system_; }
    [[nodiscard]] std::array<Eigen::Index, 2> dirichlet_nodes() const noexcept {
        return {grid_.node(0, 0), grid_.node(grid_.n(), grid_.n())};
    }
    [[nodiscard]] bool is_dirichlet(Eigen::Index node) const noexcept {
        return node == grid_.node(0, 0) || node == grid_.node(grid_.n(), grid_.n());
    }

    /// L_h u at every node (zero at the corners).
    [[nodiscard]] Field apply(const Field& u) const {
        require_grid(u);
        Eigen::Map<const Eigen::VectorXd> v(u.values().data(), static_cast<Eigen::Index>(u.size()));
        Eigen::VectorXd r = lh_ * v;
        return Field(grid_.n(), grid_.n(), std::vector<double>(r.data(), r.data() + r.size()));
    }

    void require_grid(const Field& u) const {
        if (u.n1() != grid_.n() || u.n2() != grid_.n())
            throw InvariantError("field does not live on the operator's PDE grid");
    }

private:
    void assemble() {
        const int n = grid_.n();
        const double h = grid_.h();
        const double h2 = h * h;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(grid_.n_nodes() * 5);
        for (int i = 0; i <= n; ++i) {
            const double x1 = static_cast<double>(i) / n;
            for (int k = 0; k <= n; ++k) {
                const double x2 = static_cast<double>(k) / n;
                const Eigen::Index row = grid_.node(i, k);
                if (is_dirichlet(row)) continue;
                const double a1 = 0.5 * x1 * (1.0 - x1) / h2;
                const double a2 = 0.5 * x2 * (1.0 - x2) / (d_ * h2);
                const double b1 = -kappa_ * d_ * (x1 - x2) / h;
                const double b2 = kappa_ * (x1 - x2) / h;
                double diag = 0.0;
                auto couple = [&](int ii, int kk, double w) {
                    if (w == 0.0) return;
                    trip.emplace_back(row, grid_.node(ii, kk), w);
                    diag -= w;
                };
                if (a1 > 0.0) {
                    couple(i + 1, k, a1);
                    couple(i - 1, k, a1);
                }
                if (a2 > 0.0) {
                    couple(i, k + 1, a2);
                    couple(i, k - 1, a2);
                }
                if (b1 > 0.0) couple(i + 1, k, b1);
                if (b1 < 0.0) couple(i - 1, k, -b1);
                if (b2 > 0.0) couple(i, k + 1, b2);
                if (b2 < 0.0) couple(i, k - 1, -b2);
                if (diag != 0.0) trip.emplace_back(row, row, diag);
            }
        }
        lh_.resize(static_cast<Eigen::Index>(grid_.n_nodes()), static_cast<Eigen::Index>(grid_.n_nodes()));
        lh_.setFromTriplets(trip.begin(), trip.end());
        lh_.makeCompressed();

        system_ = -lh_;
        for (Eigen::Index c : dirichlet_nodes()) system_.coeffRef(c, c) = 1.0;
        system_.makeCompressed();
    }

    void certify() {
        MMatrixCertificate& c = certificate_;
        const Eigen::Index rows = system_.rows();
        std::vector<char> strict(static_cast<std::size_t>(rows), 0);
        for (Eigen::Index r = 0; r < rows; ++r) {
            double diag = 0.0, off_abs = 0.0, sum = 0.0;
            bool any = false;
            for (SparseRowMatrix::InnerIterator it(system_, r); it; ++it) {
                if (it.value() == 0.0) continue;
                any = true;
                sum += it.value();
                if (it.col() == r) {
                    diag = it.value();
                } else {
                    off_abs += std::abs(it.value());
                    c.max_offdiagonal = std::max(c.max_offdiagonal, it.value());
                    if (it.value() > 0.0) c.offdiagonal_nonpositive = false;
                }
            }
            if (!any) ++c.zero_rows;
            if (diag < 0.0) c.diagonal_nonnegative = false;
            c.min_diagonal = std::min(c.min_diagonal, diag);
            c.min_row_sum = std::min(c.min_row_sum, sum);
            c.max_row_sum = std::max(c.max_row_sum, sum);
            const double slack = 1e-12 * std::max(diag, 1.0);
            if (diag - off_abs < -slack) c.weakly_diagonally_dominant = false;
            if (diag - off_abs > slack) strict[static_cast<std::size_t>(r)] = 1;
        }
        // Weak chaining: walk the row graph backwards from strictly dominant rows.
        SparseColMatrix by_col = system_;
        std::vector<char> reached = strict;
        std::deque<Eigen::Index> queue;
        for (Eigen::Index r = 0; r < rows; ++r)
            if (strict[static_cast<std::size_t>(r)]) queue.push_back(r);
        while (!queue.empty()) {
            const Eigen::Index t = queue.front();
            queue.pop_front();
            for (SparseColMatrix::InnerIterator it(by_col, t); it; ++it) {
                const auto s = static_cast<std::size_t>(it.row());
                if (it.value() != 0.0 && !reached[s]) {
                    reached[s] = 1;
                    queue.push_back(it.row());
                }
            }
        }
        c.weakly_chained = std::all_of(reached.begin(), reached.end(), [](char v) { return v != 0; });
    }

    PdeGrid grid_;
    double d_;
    double kappa_;
    SparseRowMatrix lh_;
    SparseRowMatrix system_;
    MMatrixCertificate certificate_;
};

inline DiscreteOperator discretize_Ld(PdeGrid grid, double d, double kappa) { return DiscreteOperator(grid, d, kappa); }

namespace detail {

/// Outcome of a refined sparse solve of a x = b.
struct RefinedSolve {
    Eigen::VectorXd x;
    /// ||b - a x||_inf.
    double residual;
    /// Rounding floor 8 u || |a| |x| + |b| ||_inf below which the residual of a
    /// 64-bit solution cannot be pushed.
    double floor;
    [[nodiscard]] bool acceptable(double tolerance) const noexcept {
        return std::isfinite(residual) && residual <= std::max(tolerance, floor);
    }
};

/// Sparse LU solve followed by iterative refinement until the residual
/// stops shrinking.
inline RefinedSolve solve_refined(const SparseColMatrix& a, const Eigen::VectorXd& b,
                                  Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>>& lu,
                                  double tolerance) {
    Eigen::VectorXd x = lu.solve(b);
    Eigen::VectorXd r = b - a * x;
    double res = r.lpNorm<Eigen::Infinity>();
    for (int pass = 0; pass < 8 && res > 0.01 * tolerance; ++pass) {
        Eigen::VectorXd trial = x + lu.solve(r);
        Eigen::VectorXd tr = b - a * trial;
        const double tres = tr.lpNorm<Eigen::Infinity>();
        if (!(tres < res)) break;
        x = std::move(trial);
        r = std::move(tr);
        res = tres;
    }
    const Eigen::VectorXd scale = a.cwiseAbs() * x.cwiseAbs() + b.cwiseAbs();
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * scale.lpNorm<Eigen::Infinity>();
    return {std::move(x), res, floor};
}

inline std::string format_residual(double r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", r);
    return buf;
}

}  // namespace detail

struct EllipticSolution {
    Field tau;
    /// ||-L_h tau - 1||_inf over non-Dirichlet nodes.
    double residual;
    /// Rounding floor of that residual for 64-bit storage of tau.
    double residual_floor;
};

/// Solves -L_h tau = 1 with tau = 0 at (0,0) and (1,1).
inline EllipticSolution solve_elliptic(const DiscreteOperator& op, double tolerance = 1e-10) {
    if (!op.certificate().nonsingular())
        throw SolveError(
            "solve_elliptic: operator is a singular M-matrix (some nodes have no path to the Dirichlet corners; "
            "kappa = 0 strands (0,1) and (1,0))",
            std::numeric_limits<double>::infinity());
    const SparseColMatrix a = op.system();
    Eigen::VectorXd b = Eigen::VectorXd::Ones(a.rows());
    for (Eigen::Index c : op.dirichlet_nodes()) b(c) = 0.0;
    Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw SolveError("solve_elliptic: sparse LU factorization failed", NAN);
    detail::RefinedSolve sol = detail::solve_refined(a, b, lu, tolerance);
    if (!sol.acceptable(tolerance))
        throw SolveError("solve_elliptic: residual " + detail::format_residual(sol.residual) +
                             " exceeds tolerance " + detail::format_residual(tolerance) + " (rounding floor " +
                             detail::format_residual(sol.floor) + ")",
                         sol.residual);
    for (Eigen::Index c : op.dirichlet_nodes()) sol.x(c) = 0.0;
    const int n = op.grid().n();
    return {Field(n, n, std::vector<double>(sol.x.data(), sol.x.data() + sol.x.size())), sol.residual, sol.floor};
}

struct ParabolicSolution {
    Field u;
    /// Minimum over every node and every time level, initial data included.
    double min_value;
    /// ||u^m||_inf for m = 0..nt.
    std::vector<double> sup_norms;
    /// Largest linear-solve residual over all steps.
    double max_residual;
};

/// Implicit Euler for du/dt = L_h u on [0, t_final] with nt steps; the
/// corner values stay 0.
inline ParabolicSolution solve_parabolic(const DiscreteOperator& op, const Field& f, double t_final, int nt,
                                         double tolerance = 1e-10) {
    op.require_grid(f);
    if (nt < 1) throw InvariantError("solve_parabolic: nt must be >= 1");
    if (!(t_final > 0.0) || !std::isfinite(t_final)) throw InvariantError("solve_parabolic: T must be > 0");
    if (!f.all_finite()) throw InvariantError("solve_parabolic: initial field has non-finite values");
    for (Eigen::Index c : op.dirichlet_nodes())
        if (f.values()[static_cast<std::size_t>(c)] != 0.0)
            throw InvariantError("solve_parabolic: initial field must vanish at (0,0) and (1,1)");

    const double dt = t_final / nt;
    SparseColMatrix a = dt * op.generator();
    a = -a;
    for (Eigen::Index i = 0; i < a.rows(); ++i) a.coeffRef(i, i) += 1.0;
    a.makeCompressed();
    Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw SolveError("solve_parabolic: sparse LU factorization failed", NAN);

    Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
    ParabolicSolution out{Field(), u.minCoeff(), {u.lpNorm<Eigen::Infinity>()}, 0.0};
    out.sup_norms.reserve(static_cast<std::size_t>(nt) + 1);
    for (int m = 0; m < nt; ++m) {
        detail::RefinedSolve sol = detail::solve_refined(a, u, lu, tolerance);
        if (!sol.acceptable(tolerance))
            throw SolveError("solve_parabolic: step " + std::to_string(m + 1) + " residual " +
                                 detail::format_residual(sol.residual) + " exceeds tolerance",
                             sol.residual);
        out.max_residual = std::max(out.max_residual, sol.residual);
        u = std::move(sol.x);
        for (Eigen::Index c : op.dirichlet_nodes()) u(c) = 0.0;
        out.min_value = std::min(out.min_value, u.minCoeff());
        out.sup_norms.push_back(u.lpNorm<Eigen::Infinity>());
    }
    const int n = op.grid().n();
    out.u = Field(n, n, std::vector<double>(u.data(), u.data() + u.size()));
    return out;
}

/// Nodal values g_i at z_i = i/n of a one-dimensional problem.
struct Profile {
    int n = 0;
    std::vector<double> values;
    [[nodiscard]] double z(int i) const noexcept { return static_cast<double>(i) / n; }
};

/// Merged single patch: -(z(1-z) / (2(1+d))) g'' = 1, g(0) = g(1) = 0, by
/// central differences and a tridiagonal solve.
inline Profile solve_single_patch(double d, int n) {
    if (n < 4) throw InvariantError("solve_single_patch: n must be >= 4");
    if (!(d > 0.0 && d <= 1.0)) throw InvariantError("solve_single_patch: d must lie in (0,1]");
    const double h2 = 1.0 / (static_cast<double>(n) * n);
    const int m = n - 1;
    // Interior unknowns g_1..g_{n-1}: -c_i g_{i-1} + 2 c_i g_i - c_i g_{i+1} = 1.
    std::vector<double> diag(m), off(m), rhs(m, 1.0);
    for (int r = 0; r < m; ++r) {
        const double z = static_cast<double>(r + 1) / n;
        const double c = z * (1.0 - z) / (2.0 * (1.0 + d)) / h2;
        diag[r] = 2.0 * c;
        off[r] = -c;
    }
    // Thomas sweep; lower coefficient of row r is off[r], upper is off[r].
    std::vector<double> cp(m), dp(m);
    cp[0] = off[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for (int r = 1; r < m; ++r) {
        const double denom = diag[r] - off[r] * cp[r - 1];
        cp[r] = off[r] / denom;
        dp[r] = (rhs[r] - off[r] * dp[r - 1]) / denom;
    }
    Profile g{n, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0)};
    g.values[m] = dp[m - 1];
    for (int r = m - 2; r >= 0; --r) g.values[r + 1] = dp[r] - cp[r] * g.values[r + 2];
    return g;
}

}  // namespace twopatch
