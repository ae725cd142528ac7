#pragma once

#include <cmath>
#include <optional>

#include "twopatch/params.hpp"

namespace twopatch {

namespace detail {
inline double xlogx(double x) noexcept { return x > 0.0 ? x * std::log(x) : 0.0; }
inline bool in_unit(double x) noexcept { return x >= 0.0 && x <= 1.0; }
inline void require_unit_square(Density x, const char* who) {
    if (!in_unit(x.x1) || !in_unit(x.x2)) throw InvariantError(std::string(who) + ": density outside [0,1]^2");
}
}  // namespace detail

/// Single-patch expected fixation time in the diffusion limit,
/// H(x) = -2 (x ln x + (1-x) ln(1-x)), with 0 ln 0 = 0.
inline double entropy_H(double x) {
    if (!detail::in_unit(x)) throw InvariantError("entropy_H: x outside [0,1]");
    return -2.0 * (detail::xlogx(x) + detail::xlogx(1.0 - x));
}

/// Averaged starting density z = (x1 + d x2) / (1 + d).
inline double averaged_density(Density x, double d) noexcept { return (x.x1 + d * x.x2) / (1.0 + d); }

/// Extinction time of a single merged patch of capacity N1 + N2: (1 + d) H(z).
inline double tau_lower(Density x, double d) {
    detail::require_unit_square(x, "tau_lower");
    if (!(d > 0.0 && d <= 1.0)) throw InvariantError("tau_lower: d must lie in (0,1]");
    const double z = averaged_density(x, d);
    return (d + 1.0) * entropy_H(z < 0.0 ? 0.0 : (z > 1.0 ? 1.0 : z));
}

/// Slow-exchange barrier V = (x1(1-x2) + x2(1-x1)) / (12 kappa).
inline double barrier_V(Density x, double kappa) {
    detail::require_unit_square(x, "barrier_V");
    if (!(kappa > 0.0)) throw InvariantError("barrier_V: kappa must be > 0");
    return (x.x1 * (1.0 - x.x2) + x.x2 * (1.0 - x.x1)) / (12.0 * kappa);
}

/// Width 2d(H(x2) + D) of the small-distortion sandwich, with
/// D = x1 x2^d + (1-x1)(1-x2)^d.
inline double small_d_gap_bound(Density x, double d) {
    detail::require_unit_square(x, "small_d_gap_bound");
    if (!(d > 0.0 && d <= 1.0)) throw InvariantError("small_d_gap_bound: d must lie in (0,1]");
    const double D = x.x1 * std::pow(x.x2, d) + (1.0 - x.x1) * std::pow(1.0 - x.x2, d);
    return 2.0 * d * (entropy_H(x.x2) + D);
}

/// Difference of the two sides of
///   (x1(1-x1) + d x2(1-x2)) / ((1+d) z(1-z)) = 1 - d (x1-x2)^2 / ((1+d)^2 z(1-z)).
/// Undefined (nullopt) where z(1-z) = 0.
inline std::optional<double> subsolution_identity_residual(Density x, double d) {
    detail::require_unit_square(x, "subsolution_identity_residual");
    const double z = averaged_density(x, d);
    const double zz = z * (1.0 - z);
    if (!(zz > 0.0)) return std::nullopt;
    const double lhs = (x.x1 * (1.0 - x.x1) + d * x.x2 * (1.0 - x.x2)) / ((1.0 + d) * zz);
    const double diff = x.x1 - x.x2;
    const double rhs = 1.0 - d * diff * diff / ((1.0 + d) * (1.0 + d) * zz);
    return lhs - rhs;
}

struct AnalyticBounds {
    double V;
    double pfut_bound;
    std::optional<double> residual_identity;
};

inline AnalyticBounds analytic_bounds(Density x, const ModelParams& p) {
    return {barrier_V(x, p.kappa()), small_d_gap_bound(x, p.d()), subsolution_identity_residual(x, p.d())};
}

}  // namespace twopatch
