#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "twopatch/params.hpp"

namespace twopatch {

/// Real values on the (n1+1) x (n2+1) nodes of a uniform grid over [0,1]^2.
/// Node (i, k) sits at (i/n1, k/n2); storage is row-major in i.
class Field {
public:
    Field() = default;

    Field(int n1, int n2, double fill = 0.0) : n1_(n1), n2_(n2) {
        if (n1 < 1 || n2 < 1) throw InvariantError("Field: resolutions must be >= 1");
        values_.assign(static_cast<std::size_t>(n1 + 1) * static_cast<std::size_t>(n2 + 1), fill);
    }

    Field(int n1, int n2, std::vector<double> values) : n1_(n1), n2_(n2), values_(std::move(values)) {
        if (n1 < 1 || n2 < 1) throw InvariantError("Field: resolutions must be >= 1");
        if (values_.size() != static_cast<std::size_t>(n1 + 1) * static_cast<std::size_t>(n2 + 1))
            throw InvariantError("Field: value count does not match (n1+1)*(n2+1)");
    }

    /// Samples f(x1, x2) at every node.
    template <class F>
    static Field sample(int n1, int n2, F&& f) {
        Field out(n1, n2);
        for (int i = 0; i <= n1; ++i)
            for (int k = 0; k <= n2; ++k)
                out(i, k) = f(static_cast<double>(i) / n1, static_cast<double>(k) / n2);
        return out;
    }

    /// Field on the chain grid of `p` (n1 = N1, n2 = N2).
    template <class F>
    static Field sample_chain(const ModelParams& p, F&& f) {
        return sample(p.n1(), p.n2(), std::forward<F>(f));
    }

    [[nodiscard]] int n1() const noexcept { return n1_; }
    [[nodiscard]] int n2() const noexcept { return n2_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::size_t index(int i, int k) const noexcept {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n2_ + 1) + static_cast<std::size_t>(k);
    }
    [[nodiscard]] double x1(int i) const noexcept { return static_cast<double>(i) / n1_; }
    [[nodiscard]] double x2(int k) const noexcept { return static_cast<double>(k) / n2_; }

    double& operator()(int i, int k) noexcept { return values_[index(i, k)]; }
    double operator()(int i, int k) const noexcept { return values_[index(i, k)]; }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }
    [[nodiscard]] double sup_norm() const noexcept {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    [[nodiscard]] double min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
    [[nodiscard]] double max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

    [[nodiscard]] bool same_grid(const Field& o) const noexcept { return n1_ == o.n1_ && n2_ == o.n2_; }

    /// Values at the nodes of a coarser grid whose nodes are a subset of this one.
    [[nodiscard]] Field restrict_to(int m1, int m2) const {
        if (m1 < 1 || m2 < 1 || n1_ % m1 != 0 || n2_ % m2 != 0)
            throw InvariantError("Field::restrict_to: target grid nodes are not a subset of this grid");
        Field out(m1, m2);
        const int s1 = n1_ / m1, s2 = n2_ / m2;
        for (int i = 0; i <= m1; ++i)
            for (int k = 0; k <= m2; ++k) out(i, k) = (*this)(i * s1, k * s2);
        return out;
    }

private:
    int n1_ = 0;
    int n2_ = 0;
    std::vector<double> values_;
};

inline double sup_distance(const Field& a, const Field& b) {
    if (!a.same_grid(b)) throw InvariantError("sup_distance: fields live on different grids");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace twopatch
