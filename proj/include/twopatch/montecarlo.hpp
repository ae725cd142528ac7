#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "twopatch/kernel.hpp"
#include "twopatch/parallel.hpp"
#include "twopatch/params.hpp"
#include "twopatch/random.hpp"

namespace twopatch {

struct Trajectory {
    std::int64_t steps = 0;  // steps taken; equals the horizon when censored
    bool censored = false;
    GridState terminal;
};

/// Iterates the split-step chain from `start` until (0,0) or (N1,N2) is hit,
/// or `max_steps` steps have been taken.
inline Trajectory simulate_trajectory(const ModelParams& p, GridState start, RandomStream& rng,
                                      std::int64_t max_steps) {
    require_valid(start, p);
    if (max_steps < 1) throw InvariantError("simulate_trajectory: max_steps must be >= 1");
    const ExchangeMatrix a = build_exchange_matrix(p);
    Trajectory t{0, false, start};
    while (!t.terminal.absorbing(p)) {
        if (t.steps == max_steps) {
            t.censored = true;
            return t;
        }
        const Density q = apply_exchange(t.terminal.density(p), a);
        t.terminal = {wf_sample(q.x1, p.n1(), rng), wf_sample(q.x2, p.n2(), rng)};
        ++t.steps;
    }
    return t;
}

inline std::int64_t default_max_steps(const ModelParams& p) { return 200 * static_cast<std::int64_t>(p.n1()); }

struct McConfig {
    std::int64_t replicates = 1000;
    std::uint64_t seed = 0;
    std::int64_t max_steps = 0;  // 0 selects default_max_steps
    GridState start;
    bool keep_raw = false;
    unsigned threads = 0;  // 0 = hardware concurrency; results do not depend on it
};

struct ReplicateRecord {
    std::int64_t index;
    std::int64_t steps;
    bool censored;
    friend bool operator==(const ReplicateRecord&, const ReplicateRecord&) = default;
};

struct McResult {
    double mean_time = 0.0;  // time units (steps * dt)
    double stderr_time = 0.0;
    double censored_fraction = 0.0;
    /// Censored replicates enter at the horizon, so the mean only bounds E(Theta) from below.
    bool mean_is_lower_bound = false;
    std::int64_t replicates = 0;
    std::int64_t max_steps = 0;
    std::vector<ReplicateRecord> raw;

    friend bool operator==(const McResult&, const McResult&) = default;
};

/// Mean absorption time over independent replicates; replicate r draws from
/// derive_stream(seed, r), so the result is fixed by (seed, replicates, max_steps).
inline McResult estimate_extinction_time(const ModelParams& p, const McConfig& cfg) {
    if (cfg.replicates < 1) throw InvariantError("McConfig: replicates must be >= 1");
    const std::int64_t horizon = cfg.max_steps == 0 ? default_max_steps(p) : cfg.max_steps;
    if (horizon < 1) throw InvariantError("McConfig: max_steps must be >= 1");
    require_valid(cfg.start, p);

    const auto n = static_cast<std::size_t>(cfg.replicates);
    std::vector<Trajectory> runs(n);
    parallel_for(
        n,
        [&](std::size_t r) {
            RandomStream rng = derive_stream(cfg.seed, r);
            runs[r] = simulate_trajectory(p, cfg.start, rng, horizon);
        },
        cfg.threads);

    CompensatedSum sum, sum_sq;
    std::int64_t censored = 0;
    for (const Trajectory& t : runs) {
        const double time = static_cast<double>(t.steps) * p.dt();
        sum.add(time);
        sum_sq.add(time * time);
        censored += t.censored ? 1 : 0;
    }
    McResult out;
    out.replicates = cfg.replicates;
    out.max_steps = horizon;
    const double rn = static_cast<double>(n);
    out.mean_time = sum.value() / rn;
    if (n > 1) {
        const double var = std::max(0.0, (sum_sq.value() - rn * out.mean_time * out.mean_time) / (rn - 1.0));
        out.stderr_time = std::sqrt(var / rn);
    }
    out.censored_fraction = static_cast<double>(censored) / rn;
    out.mean_is_lower_bound = censored > 0;
    if (cfg.keep_raw) {
        out.raw.reserve(n);
        for (std::size_t r = 0; r < n; ++r)
            out.raw.push_back({static_cast<std::int64_t>(r), runs[r].steps, runs[r].censored});
    }
    return out;
}

struct MomentRow {
    int lag;
    double p2;  // E|x^lag - x^0|^2
    double p4;  // E|x^lag - x^0|^4
    /// p2 * N1 / lag and p4 * N1^2 / lag^2; zero at lag 0.
    double p2_scaled;
    double p4_scaled;
};

/// Empirical second and fourth displacement moments of the density chain
/// after `lag` steps from `start`, for lag = 0..horizon.
inline std::vector<MomentRow> moment_check(const ModelParams& p, GridState start, int horizon,
                                           std::int64_t replicates, std::uint64_t seed, unsigned threads = 0) {
    require_valid(start, p);
    if (horizon < 0) throw InvariantError("moment_check: horizon must be >= 0");
    if (replicates < 1) throw InvariantError("moment_check: replicates must be >= 1");
    const auto n = static_cast<std::size_t>(replicates);
    const auto width = static_cast<std::size_t>(horizon) + 1;
    std::vector<double> sq(n * width, 0.0);
    const ExchangeMatrix a = build_exchange_matrix(p);
    const Density x0 = start.density(p);
    parallel_for(
        n,
        [&](std::size_t r) {
            RandomStream rng = derive_stream(seed, r);
            GridState s = start;
            for (int lag = 1; lag <= horizon; ++lag) {
                if (!s.absorbing(p)) {
                    const Density q = apply_exchange(s.density(p), a);
                    s = {wf_sample(q.x1, p.n1(), rng), wf_sample(q.x2, p.n2(), rng)};
                }
                const Density x = s.density(p);
                const double e1 = x.x1 - x0.x1, e2 = x.x2 - x0.x2;
                sq[r * width + static_cast<std::size_t>(lag)] = e1 * e1 + e2 * e2;
            }
        },
        threads);

    std::vector<MomentRow> table;
    table.reserve(width);
    const double big_n = p.n1();
    for (std::size_t lag = 0; lag < width; ++lag) {
        CompensatedSum s2, s4;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = sq[r * width + lag];
            s2.add(v);
            s4.add(v * v);
        }
        MomentRow row{static_cast<int>(lag), s2.value() / static_cast<double>(n), s4.value() / static_cast<double>(n),
                      0.0, 0.0};
        if (lag > 0) {
            const double l = static_cast<double>(lag);
            row.p2_scaled = row.p2 * big_n / l;
            row.p4_scaled = row.p4 * big_n * big_n / (l * l);
        }
        table.push_back(row);
    }
    return table;
}

}  // namespace twopatch
