#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace twopatch {

/// Raised when a value object would be constructed in violation of its invariants.
class InvariantError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Patch capacities and exchange speed of the two-patch model.
///
/// The distortion d = N2/N1 and the time step dt = 1/N1 are always derived
/// from the integer capacities; they are never free parameters.
class ModelParams {
public:
    /// Throws InvariantError unless 1 <= N2 <= N1, kappa >= 0 and kappa*dt <= 1.
    ModelParams(int n1, int n2, double kappa) : n1_(n1), n2_(n2), kappa_(kappa) {
        if (n1 < 1 || n2 < 1)
            throw InvariantError("ModelParams: capacities must satisfy N1 >= 1 and N2 >= 1");
        if (n2 > n1)
            throw InvariantError("ModelParams: distortion d = N2/N1 must be <= 1 (N2 <= N1)");
        if (!std::isfinite(kappa) || kappa < 0.0)
            throw InvariantError("ModelParams: kappa must be finite and >= 0");
        if (kappa * dt() > 1.0)
            throw InvariantError("ModelParams: kappa*dt <= 1 violated (kappa=" + std::to_string(kappa) +
                                 ", dt=" + std::to_string(dt()) + ")");
    }

    [[nodiscard]] int n1() const noexcept { return n1_; }
    [[nodiscard]] int n2() const noexcept { return n2_; }
    [[nodiscard]] double kappa() const noexcept { return kappa_; }
    [[nodiscard]] double d() const noexcept { return static_cast<double>(n2_) / n1_; }
    [[nodiscard]] double dt() const noexcept { return 1.0 / n1_; }
    [[nodiscard]] std::size_t n_states() const noexcept {
        return static_cast<std::size_t>(n1_ + 1) * static_cast<std::size_t>(n2_ + 1);
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    int n1_;
    int n2_;
    double kappa_;
};

/// A point of the (x1, x2) density square.
struct Density {
    double x1 = 0.0;
    double x2 = 0.0;
    friend bool operator==(const Density&, const Density&) = default;
};

/// Integer abundances of species alpha in patch 1 and patch 2.
struct GridState {
    int j1 = 0;
    int j2 = 0;

    [[nodiscard]] bool valid(const ModelParams& p) const noexcept {
        return j1 >= 0 && j1 <= p.n1() && j2 >= 0 && j2 <= p.n2();
    }
    [[nodiscard]] bool absorbing(const ModelParams& p) const noexcept {
        return (j1 == 0 && j2 == 0) || (j1 == p.n1() && j2 == p.n2());
    }
    [[nodiscard]] Density density(const ModelParams& p) const noexcept {
        return {static_cast<double>(j1) / p.n1(), static_cast<double>(j2) / p.n2()};
    }
    /// Row-major state index j1*(N2+1)+j2.
    [[nodiscard]] std::size_t index(const ModelParams& p) const noexcept {
        return static_cast<std::size_t>(j1) * static_cast<std::size_t>(p.n2() + 1) +
               static_cast<std::size_t>(j2);
    }
    [[nodiscard]] static GridState from_index(std::size_t idx, const ModelParams& p) noexcept {
        const auto stride = static_cast<std::size_t>(p.n2() + 1);
        return {static_cast<int>(idx / stride), static_cast<int>(idx % stride)};
    }
    /// Species swap (j1, j2) -> (N1-j1, N2-j2).
    [[nodiscard]] GridState mirrored(const ModelParams& p) const noexcept {
        return {p.n1() - j1, p.n2() - j2};
    }

    friend bool operator==(const GridState&, const GridState&) = default;
};

inline void require_valid(const GridState& s, const ModelParams& p) {
    if (!s.valid(p))
        throw InvariantError("GridState (" + std::to_string(s.j1) + "," + std::to_string(s.j2) +
                             ") outside [0,N1]x[0,N2]");
}

}  // namespace twopatch
