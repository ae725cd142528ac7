#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "twopatch/field.hpp"
#include "twopatch/kernel.hpp"
#include "twopatch/parallel.hpp"
#include "twopatch/params.hpp"

namespace twopatch {

inline constexpr std::size_t kDefaultStateCap = 20'000;

/// State-space size exceeds the configured cap.
class SizeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear solve failed, or the system is singular for structural reasons.
class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Dense transition matrix of the split-step chain over all (N1+1)(N2+1)
/// states, indexed by j1*(N2+1)+j2.
class TransitionMatrix {
public:
    TransitionMatrix(const ModelParams& p, Eigen::MatrixXd rows, std::size_t renormalized, double max_deviation)
        : params_(p), rows_(std::move(rows)), renormalized_rows_(renormalized), max_row_deviation_(max_deviation) {}

    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    [[nodiscard]] std::size_t n_states() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return rows_; }
    [[nodiscard]] double operator()(std::size_t from, std::size_t to) const { return rows_(from, to); }
    /// Rows whose raw pmf-product sum deviated from 1 by more than 1e-12 before renormalization.
    [[nodiscard]] std::size_t renormalized_rows() const noexcept { return renormalized_rows_; }
    /// Largest raw deviation |row sum - 1| seen during construction.
    [[nodiscard]] double max_row_deviation() const noexcept { return max_row_deviation_; }

    [[nodiscard]] Field apply(const Field& f) const {
        require_chain_field(f, params_);
        Eigen::Map<const Eigen::VectorXd> v(f.values().data(), static_cast<Eigen::Index>(f.size()));
        Eigen::VectorXd r = rows_ * v;
        return Field(params_.n1(), params_.n2(), std::vector<double>(r.data(), r.data() + r.size()));
    }

private:
    ModelParams params_;
    Eigen::MatrixXd rows_;
    std::size_t renormalized_rows_;
    double max_row_deviation_;
};

inline TransitionMatrix build_transition_matrix(const ModelParams& p, std::size_t state_cap = kDefaultStateCap) {
    const std::size_t n = p.n_states();
    if (n > state_cap)
        throw SizeError("build_transition_matrix: " + std::to_string(n) + " states exceed the cap of " +
                        std::to_string(state_cap));
    const KernelRows kernel(p);
    const int w2 = p.n2() + 1;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> deviation(n, 0.0);
    parallel_for(n, [&](std::size_t idx) {
        const GridState s = GridState::from_index(idx, p);
        const auto r = static_cast<Eigen::Index>(idx);
        if (s.absorbing(p)) {
            m.row(r).setZero();
            m(r, r) = 1.0;
            return;
        }
        const KernelRow row = kernel.row(s);
        double sum = 0.0;
        for (int a = 0; a <= p.n1(); ++a)
            for (int b = 0; b <= p.n2(); ++b) {
                const double v = row.pmf1[a] * row.pmf2[b];
                m(r, static_cast<Eigen::Index>(a) * w2 + b) = v;
                sum += v;
            }
        deviation[idx] = sum - 1.0;
        if (std::abs(sum - 1.0) > 1e-12) m.row(r) /= sum;
    });
    std::size_t renormalized = 0;
    double max_dev = 0.0;
    for (double dv : deviation) {
        if (std::abs(dv) > 1e-12) ++renormalized;
        max_dev = std::max(max_dev, std::abs(dv));
    }
    return TransitionMatrix(p, std::move(m), renormalized, max_dev);
}

/// Expected absorption times E_x(Theta_N) in time units; 0 at both absorbing nodes.
struct HittingTimeTable {
    Field values;
    /// ||N1 (I - P~) T - 1||_inf over the transient states.
    double residual;
};

namespace detail {

/// Transient states from which no positive-probability path reaches absorption.
inline std::vector<std::size_t> stranded_states(const TransitionMatrix& tm) {
    const ModelParams& p = tm.params();
    const std::size_t n = tm.n_states();
    std::vector<char> reaches(n, 0);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i)
        if (GridState::from_index(i, p).absorbing(p)) {
            reaches[i] = 1;
            queue.push_back(i);
        }
    const Eigen::MatrixXd& m = tm.matrix();
    while (!queue.empty()) {
        const std::size_t t = queue.front();
        queue.pop_front();
        for (std::size_t s = 0; s < n; ++s)
            if (!reaches[s] && m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) > 0.0) {
                reaches[s] = 1;
                queue.push_back(s);
            }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!reaches[i]) out.push_back(i);
    return out;
}

}  // namespace detail

/// Solves N1 (I - P~) T = 1 on the transient states by LU with partial
/// pivoting plus one step of iterative refinement.
inline HittingTimeTable solve_hitting_times(const TransitionMatrix& tm, double tolerance = 1e-10) {
    const ModelParams& p = tm.params();
    if (p.kappa() == 0.0)
        throw SolveError(
            "solve_hitting_times: kappa = 0 leaves mixed states such as (0,N2) with no path to the absorbing "
            "states (0,0) and (N1,N2)",
            std::numeric_limits<double>::infinity());
    if (const auto stranded = detail::stranded_states(tm); !stranded.empty()) {
        const GridState s = GridState::from_index(stranded.front(), p);
        throw SolveError("solve_hitting_times: " + std::to_string(stranded.size()) +
                             " transient states cannot reach absorption, e.g. (" + std::to_string(s.j1) + "," +
                             std::to_string(s.j2) + ")",
                         std::numeric_limits<double>::infinity());
    }

    const std::size_t n = tm.n_states();
    const std::size_t lo = 0, hi = n - 1;  // absorbing states are the first and last index
    const auto m = static_cast<Eigen::Index>(n - 2);
    const double scale = p.n1();
    Eigen::MatrixXd sys = -scale * tm.matrix().block(1, 1, m, m);
    sys.diagonal().array() += scale;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
    Eigen::VectorXd t = lu.solve(ones);
    Eigen::VectorXd r = ones - sys * t;
    t += lu.solve(r);
    r = ones - sys * t;
    const double residual = r.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(residual) || residual > tolerance)
        throw SolveError("solve_hitting_times: residual " + std::to_string(residual) + " exceeds tolerance " +
                             std::to_string(tolerance),
                         residual);

    Field values(p.n1(), p.n2());
    values.values()[lo] = 0.0;
    values.values()[hi] = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) values.values()[static_cast<std::size_t>(i) + 1] = t(i);
    return {std::move(values), residual};
}

inline HittingTimeTable solve_hitting_times(const ModelParams& p, std::size_t state_cap = kDefaultStateCap) {
    return solve_hitting_times(build_transition_matrix(p, state_cap));
}

/// (P^wf P^ex)^n f on the chain grid.
inline Field iterate_semigroup(const Field& f, int n, const TransitionMatrix& tm) {
    if (n < 0) throw InvariantError("iterate_semigroup: n must be >= 0");
    require_chain_field(f, tm.params());
    Field cur = f;
    for (int k = 0; k < n; ++k) cur = tm.apply(cur);
    return cur;
}

inline Field iterate_semigroup(const Field& f, int n, const ModelParams& p) {
    require_chain_field(f, p);
    if (n == 0) return f;
    return iterate_semigroup(f, n, build_transition_matrix(p));
}

}  // namespace twopatch
