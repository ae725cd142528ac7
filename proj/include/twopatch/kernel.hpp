#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "twopatch/exchange.hpp"
#include "twopatch/field.hpp"
#include "twopatch/params.hpp"
#include "twopatch/random.hpp"

namespace twopatch {

/// log(k!) for k = 0..n.
inline std::vector<double> log_factorials(int n) {
    std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 2; k <= n; ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
    return lf;
}

/// Binomial(n, p) probability mass over 0..n, evaluated in log space.
/// `lf` must hold log-factorials up to at least n.
inline std::vector<double> binomial_pmf(int n, double p, const std::vector<double>& lf) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
    if (p <= 0.0) {
        pmf.front() = 1.0;
        return pmf;
    }
    if (p >= 1.0) {
        pmf.back() = 1.0;
        return pmf;
    }
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    for (int j = 0; j <= n; ++j)
        pmf[j] = std::exp(lf[n] - lf[j] - lf[n - j] + j * lp + (n - j) * lq);
    return pmf;
}

inline std::vector<double> binomial_pmf(int n, double p) { return binomial_pmf(n, p, log_factorials(n)); }

/// One split-step transition: exchange x -> A x, then independent
/// Wright-Fisher resampling of each patch with parameter (A x)_i.
inline GridState step(const GridState& s, const ModelParams& p, RandomStream& rng) {
    if (s.absorbing(p)) return s;
    const Density q = apply_exchange(s.density(p), build_exchange_matrix(p));
    const int j1 = wf_sample(q.x1, p.n1(), rng);
    const int j2 = wf_sample(q.x2, p.n2(), rng);
    return {j1, j2};
}

/// Conditional law of the next state given the current one: the pair of
/// binomial marginals whose product is the kernel row.
struct KernelRow {
    Density mean;  // A x
    std::vector<double> pmf1;
    std::vector<double> pmf2;
};

class KernelRows {
public:
    explicit KernelRows(const ModelParams& p)
        : params_(p), a_(build_exchange_matrix(p)), lf_(log_factorials(p.n1())) {}

    [[nodiscard]] KernelRow row(const GridState& s) const {
        const Density q = apply_exchange(s.density(params_), a_);
        return {q, binomial_pmf(params_.n1(), q.x1, lf_), binomial_pmf(params_.n2(), q.x2, lf_)};
    }

    /// E(f(x') | x = s) for f given on the chain grid.
    [[nodiscard]] double expect(const GridState& s, const Field& f) const {
        const KernelRow r = row(s);
        double acc = 0.0;
        for (int a = 0; a <= params_.n1(); ++a) {
            if (r.pmf1[a] == 0.0) continue;
            double inner = 0.0;
            for (int b = 0; b <= params_.n2(); ++b) inner += r.pmf2[b] * f(a, b);
            acc += r.pmf1[a] * inner;
        }
        return acc;
    }

    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    [[nodiscard]] const ExchangeMatrix& exchange() const noexcept { return a_; }

private:
    ModelParams params_;
    ExchangeMatrix a_;
    std::vector<double> lf_;
};

inline void require_chain_field(const Field& f, const ModelParams& p) {
    if (f.n1() != p.n1() || f.n2() != p.n2())
        throw InvariantError("field is not sampled on the (N1,N2) chain grid");
    if (!f.all_finite()) throw InvariantError("field has non-finite values");
}

/// K f: one application of the exact transition kernel.
inline Field kernel_apply(const Field& f, const ModelParams& p) {
    require_chain_field(f, p);
    const KernelRows rows(p);
    Field out(p.n1(), p.n2());
    for (int i = 0; i <= p.n1(); ++i)
        for (int k = 0; k <= p.n2(); ++k) out(i, k) = rows.expect({i, k}, f);
    return out;
}

/// Discrete generator N1 * (K f - f), evaluated exactly through the full
/// binomial-product kernel.
inline Field generator_apply(const Field& f, const ModelParams& p) {
    Field out = kernel_apply(f, p);
    const double n = p.n1();
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = n * (out.values()[i] - f.values()[i]);
    return out;
}

/// Raw moments E[(X/N)^k], k = 0..4, of X ~ Binomial(N, x), summed from the pmf.
inline std::array<double, 5> bernstein_moments(int n, double x) {
    if (n < 1) throw InvariantError("bernstein_moments: N must be >= 1");
    if (!(x >= 0.0 && x <= 1.0)) throw InvariantError("bernstein_moments: x outside [0,1]");
    const std::vector<double> pmf = binomial_pmf(n, x);
    std::array<double, 5> m{};
    for (int j = 0; j <= n; ++j) {
        const double y = static_cast<double>(j) / n;
        double pw = pmf[j];
        for (double& mk : m) {
            mk += pw;
            pw *= y;
        }
    }
    return m;
}

/// B_N((X - x)^4): centered fourth moment of Binomial(N, x)/N, from the pmf.
inline double bernstein_centered_fourth(int n, double x) {
    const std::vector<double> pmf = binomial_pmf(n, x);
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double e = static_cast<double>(j) / n - x;
        acc += pmf[j] * e * e * e * e;
    }
    return acc;
}

}  // namespace twopatch
