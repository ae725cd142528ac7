#pragma once

#include "twopatch/params.hpp"

namespace twopatch {

/// Row-stochastic 2x2 map x -> A x acting on patch densities.
///
/// A = I - kappa*dt*M with M = [[d, -d], [-1, 1]]; it fixes (0,0) and (1,1)
/// and conserves x1 + d*x2.
struct ExchangeMatrix {
    double a11 = 1.0, a12 = 0.0;
    double a21 = 0.0, a22 = 1.0;

    [[nodiscard]] Density apply(Density x) const noexcept {
        return {a11 * x.x1 + a12 * x.x2, a21 * x.x1 + a22 * x.x2};
    }
};

inline ExchangeMatrix build_exchange_matrix(const ModelParams& p) {
    const double s = p.kappa() * p.dt();
    if (s > 1.0) throw InvariantError("build_exchange_matrix: kappa*dt <= 1 violated");
    const double sd = s * p.d();
    return {1.0 - sd, sd, s, 1.0 - s};
}

/// A x, clamped to [0,1]^2 against rounding at the unit edges.
inline Density apply_exchange(Density x, const ExchangeMatrix& a) {
    if (!(x.x1 >= 0.0 && x.x1 <= 1.0 && x.x2 >= 0.0 && x.x2 <= 1.0))
        throw InvariantError("apply_exchange: density outside [0,1]^2");
    Density y = a.apply(x);
    auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    return {clamp01(y.x1), clamp01(y.x2)};
}

}  // namespace twopatch
