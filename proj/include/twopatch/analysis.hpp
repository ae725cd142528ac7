#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "twopatch/closed_form.hpp"
#include "twopatch/exact.hpp"
#include "twopatch/field.hpp"
#include "twopatch/pde.hpp"

namespace twopatch {

struct NodeRef {
    int i = 0;
    int k = 0;
    double x1 = 0.0;
    double x2 = 0.0;
};

/// Outcome of a nodewise check lower <= upper.
struct ComparisonReport {
    std::string name;
    /// min over nodes of upper - lower; negative values are violations.
    double min_margin = 0.0;
    NodeRef node_of_min;
    double tolerance = 0.0;
    bool passed = false;
};

inline ComparisonReport compare_fields(const Field& lower, const Field& upper, double tolerance,
                                       std::string name = "comparison") {
    if (!lower.same_grid(upper)) throw InvariantError("compare_fields: fields live on different grids");
    if (!(tolerance >= 0.0)) throw InvariantError("compare_fields: tolerance must be >= 0");
    ComparisonReport rep;
    rep.name = std::move(name);
    rep.tolerance = tolerance;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= lower.n1(); ++i)
        for (int k = 0; k <= lower.n2(); ++k) {
            const double m = upper(i, k) - lower(i, k);
            if (m < rep.min_margin) {
                rep.min_margin = m;
                rep.node_of_min = {i, k, lower.x1(i), lower.x2(k)};
            }
        }
    rep.passed = rep.min_margin >= -tolerance;
    return rep;
}

inline Field sample_tau_lower(int n1, int n2, double d) {
    return Field::sample(n1, n2, [d](double a, double b) { return tau_lower({a, b}, d); });
}

inline Field sample_barrier_V(int n, double kappa) {
    return Field::sample(n, n, [kappa](double a, double b) { return barrier_V({a, b}, kappa); });
}

/// Discretization slack eps_h = c * h for nodewise inequalities.
///
/// c is the largest observed max-norm error / h of the merged single-patch
/// solver against (1+d)H at d = 1 (the worst case of d in (0,1]).
struct SlackPolicy {
    double c = 0.0;
    struct Sample {
        int n;
        double max_error;
    };
    std::vector<Sample> calibration;
    [[nodiscard]] double eps(double h) const noexcept { return c * h; }
};

inline SlackPolicy calibrate_slack(const std::vector<int>& resolutions = {64, 128, 256}) {
    SlackPolicy pol;
    for (int n : resolutions) {
        const Profile g = solve_single_patch(1.0, n);
        double err = 0.0;
        for (int i = 0; i <= n; ++i) err = std::max(err, std::abs(g.values[i] - 2.0 * entropy_H(g.z(i))));
        pol.calibration.push_back({n, err});
        pol.c = std::max(pol.c, err * n);
    }
    return pol;
}

struct ConvergenceRow {
    int n1;
    int n2;
    double sup_error;
};

/// sup over chain nodes of |tau_N - reference| for each chain size.
/// `reference` must live on a grid containing every chain node.
inline std::vector<ConvergenceRow> convergence_study(const std::vector<ModelParams>& chains, const Field& reference) {
    std::vector<ConvergenceRow> rows;
    rows.reserve(chains.size());
    for (const ModelParams& p : chains) {
        const HittingTimeTable t = solve_hitting_times(p);
        rows.push_back({p.n1(), p.n2(), sup_distance(t.values, reference.restrict_to(p.n1(), p.n2()))});
    }
    return rows;
}

/// Chain sizes N1 in `n1_list` with N2 = d * N1 (must be integral), against
/// the elliptic solution on an n x n grid.
inline std::vector<ConvergenceRow> convergence_study(double d, double kappa, const std::vector<int>& n1_list, int n) {
    std::vector<ModelParams> chains;
    for (int n1 : n1_list) {
        const double n2r = d * n1;
        const int n2 = static_cast<int>(std::lround(n2r));
        if (std::abs(n2r - n2) > 1e-9) throw InvariantError("convergence_study: d*N1 must be an integer");
        if (n % n1 != 0 || n % n2 != 0)
            throw InvariantError("convergence_study: PDE grid n must be a multiple of N1 and N2");
        chains.emplace_back(n1, n2, kappa);
    }
    const EllipticSolution ref = solve_elliptic(discretize_Ld(PdeGrid(n), d, kappa));
    return convergence_study(chains, ref.tau);
}

struct DLimitRow {
    double d;
    double max_gap;       // max of tau - tau_lower
    double min_gap;       // min of tau - tau_lower
    double max_excess;    // max of tau - tau_lower - 2d(H2 + D)
    NodeRef node_of_max_excess;
    double eps;           // slack used for both halves
    bool lower_ok;        // min_gap >= -eps
    bool bound_ok;        // lower_ok and max_excess <= eps
    double residual;
};

struct DLimitStudy {
    double kappa;
    int n;
    std::vector<DLimitRow> rows;
    /// Largest tested d such that the sandwich held at it and at every smaller tested d.
    std::optional<double> d_star;
    /// max_gap strictly decreases along the (decreasing) d list.
    bool gap_decreasing;
};

/// Nodewise check of 0 <= tau - tau_lower <= 2d(H(x2) + D) (+/- eps_h) for each d.
inline DLimitStudy d_limit_check(double kappa, const std::vector<double>& d_list, int n, const SlackPolicy& slack) {
    for (std::size_t i = 1; i < d_list.size(); ++i)
        if (!(d_list[i] < d_list[i - 1])) throw InvariantError("d_limit_check: d_list must be strictly decreasing");
    const PdeGrid grid(n);
    DLimitStudy study{kappa, n, {}, std::nullopt, true};
    for (double d : d_list) {
        const EllipticSolution sol = solve_elliptic(discretize_Ld(grid, d, kappa));
        DLimitRow row{d, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                      -std::numeric_limits<double>::infinity(), {}, slack.eps(grid.h()), false, false, sol.residual};
        for (int i = 0; i <= n; ++i)
            for (int k = 0; k <= n; ++k) {
                const Density x{sol.tau.x1(i), sol.tau.x2(k)};
                const double gap = sol.tau(i, k) - tau_lower(x, d);
                const double excess = gap - small_d_gap_bound(x, d);
                row.max_gap = std::max(row.max_gap, gap);
                row.min_gap = std::min(row.min_gap, gap);
                if (excess > row.max_excess) {
                    row.max_excess = excess;
                    row.node_of_max_excess = {i, k, x.x1, x.x2};
                }
            }
        row.lower_ok = row.min_gap >= -row.eps;
        row.bound_ok = row.lower_ok && row.max_excess <= row.eps;
        study.rows.push_back(row);
    }
    for (std::size_t i = 1; i < study.rows.size(); ++i)
        if (!(study.rows[i].max_gap < study.rows[i - 1].max_gap)) study.gap_decreasing = false;
    for (auto it = study.rows.rbegin(); it != study.rows.rend() && it->bound_ok; ++it) study.d_star = it->d;
    return study;
}

}  // namespace twopatch
