#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "twopatch/analysis.hpp"
#include "twopatch/closed_form.hpp"
#include "twopatch/exact.hpp"
#include "twopatch/io.hpp"
#include "twopatch/kernel.hpp"
#include "twopatch/montecarlo.hpp"
#include "twopatch/pde.hpp"

namespace twopatch::cli {

using json = nlohmann::json;

inline constexpr const char* kOutputDirEnv = "TWOPATCH_OUTPUT_DIR";

enum class ExitCode : int { ok = 0, usage = 1, check_failed = 2 };

/// Bad flags, bad config file, or a parameter invariant violation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Effective configuration after layering defaults < config file < flags.
struct RunConfig {
    std::string command;
    std::optional<int> n1, n2;
    std::optional<double> kappa, d;
    std::int64_t replicates = 10000;
    std::uint64_t seed = 0;
    std::int64_t max_steps = 0;
    std::optional<int> start_j1, start_j2;
    int n = 128;
    double t_final = 1.0;
    int nt = 100;
    std::string initial = "logistic";
    std::vector<int> n_list{8, 16, 32};
    std::vector<double> d_list{0.1, 0.05, 0.02};
    std::string output_dir = ".";
    bool raw = false;
    unsigned threads = 0;

    /// Echoed into every report. `threads` is left out: it never changes results.
    [[nodiscard]] json to_json() const {
        auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
        return {{"command", command},   {"n1", opt(n1)},
                {"n2", opt(n2)},        {"kappa", opt(kappa)},
                {"d", opt(d)},          {"replicates", replicates},
                {"seed", seed},         {"max_steps", max_steps},
                {"start_j1", opt(start_j1)}, {"start_j2", opt(start_j2)},
                {"n", n},               {"t_final", t_final},
                {"nt", nt},             {"initial", initial},
                {"n_list", n_list},     {"d_list", d_list},
                {"output_dir", output_dir}, {"raw", raw}};
    }
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"simulate", "exact-hitting", "pde-elliptic", "pde-parabolic",
                                            "compare",  "sweep",         "validate"};
    return c;
}

namespace detail {

template <class T>
T json_get(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

/// Applies a JSON config object; unknown keys are rejected.
inline void apply_file(RunConfig& cfg, const json& j) {
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "n1") cfg.n1 = json_get<int>(v, key);
        else if (key == "n2") cfg.n2 = json_get<int>(v, key);
        else if (key == "kappa") cfg.kappa = json_get<double>(v, key);
        else if (key == "d") cfg.d = json_get<double>(v, key);
        else if (key == "replicates") cfg.replicates = json_get<std::int64_t>(v, key);
        else if (key == "seed") cfg.seed = json_get<std::uint64_t>(v, key);
        else if (key == "max_steps") cfg.max_steps = json_get<std::int64_t>(v, key);
        else if (key == "start_j1") cfg.start_j1 = json_get<int>(v, key);
        else if (key == "start_j2") cfg.start_j2 = json_get<int>(v, key);
        else if (key == "n") cfg.n = json_get<int>(v, key);
        else if (key == "t_final") cfg.t_final = json_get<double>(v, key);
        else if (key == "nt") cfg.nt = json_get<int>(v, key);
        else if (key == "initial") cfg.initial = json_get<std::string>(v, key);
        else if (key == "n_list") cfg.n_list = json_get<std::vector<int>>(v, key);
        else if (key == "d_list") cfg.d_list = json_get<std::vector<double>>(v, key);
        else if (key == "output_dir") cfg.output_dir = json_get<std::string>(v, key);
        else if (key == "raw") cfg.raw = json_get<bool>(v, key);
        else if (key == "threads") cfg.threads = json_get<unsigned>(v, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline ModelParams chain_params(const RunConfig& c) {
    if (!c.n1 || !c.n2 || !c.kappa) throw ConfigError(c.command + " requires --n1, --n2 and --kappa");
    try {
        return ModelParams(*c.n1, *c.n2, *c.kappa);
    } catch (const InvariantError& e) {
        throw ConfigError(e.what());
    }
}

inline double pde_d(const RunConfig& c) {
    double d = 0.0;
    if (c.d) d = *c.d;
    else if (c.n1 && c.n2 && *c.n1 > 0) d = static_cast<double>(*c.n2) / *c.n1;
    else throw ConfigError(c.command + " requires --d or both --n1 and --n2");
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("distortion d must lie in (0,1]");
    return d;
}

inline double pde_kappa(const RunConfig& c) {
    if (!c.kappa) throw ConfigError(c.command + " requires --kappa");
    if (!(*c.kappa >= 0.0) || !std::isfinite(*c.kappa)) throw ConfigError("kappa must be finite and >= 0");
    return *c.kappa;
}

inline int pde_n(const RunConfig& c) {
    if (c.n < 4) throw ConfigError("PdeGrid invariant n >= 4 violated");
    return c.n;
}

inline GridState start_state(const RunConfig& c, const ModelParams& p) {
    const GridState s{c.start_j1.value_or(p.n1() / 2), c.start_j2.value_or(p.n2() / 2)};
    if (!s.valid(p)) throw ConfigError("start state outside [0,N1]x[0,N2]");
    return s;
}

inline Field initial_field(const std::string& name, int n) {
    Field f;
    if (name == "logistic") {
        f = Field::sample(n, n, [](double a, double) { return a * (1.0 - a); });
    } else if (name == "cross") {
        f = Field::sample(n, n, [](double a, double b) { return (a - b) * (a - b); });
    } else if (name == "bump") {
        f = Field::sample(n, n, [](double a, double b) {
            return std::sin(std::numbers::pi * a) * std::sin(std::numbers::pi * b);
        });
    } else {
        throw ConfigError("unknown initial field '" + name + "' (expected logistic, cross or bump)");
    }
    // sin(pi) is not exactly 0 in floating point; the Dirichlet corners are.
    f.values().front() = 0.0;
    f.values().back() = 0.0;
    return f;
}

struct Outcome {
    ExitCode code = ExitCode::ok;
    json headline = json::object();
};

inline json report_header(const RunConfig& c) { return {{"config", c.to_json()}}; }

inline Outcome run_simulate(const RunConfig& c, io::ArtifactSet& out) {
    const ModelParams p = chain_params(c);
    McConfig mc;
    mc.replicates = c.replicates;
    mc.seed = c.seed;
    mc.max_steps = c.max_steps;
    mc.start = start_state(c, p);
    mc.keep_raw = c.raw;
    mc.threads = c.threads;
    if (mc.replicates < 1) throw ConfigError("McConfig invariant replicates >= 1 violated");
    if (mc.max_steps < 0) throw ConfigError("McConfig invariant max_steps >= 1 violated");
    const McResult r = estimate_extinction_time(p, mc);
    json rep = report_header(c);
    rep["start"] = {{"j1", mc.start.j1}, {"j2", mc.start.j2}};
    rep["result"] = io::to_json(r);
    out.add("simulate.json", rep.dump(2) + "\n");
    if (c.raw) out.add("raw_times.csv", io::raw_times_csv(r));
    return {ExitCode::ok, {{"mean_time", r.mean_time}, {"stderr", r.stderr_time}, {"censored_fraction", r.censored_fraction}}};
}

inline Outcome run_exact(const RunConfig& c, io::ArtifactSet& out) {
    const ModelParams p = chain_params(c);
    if (p.kappa() == 0.0)
        throw ConfigError("exact-hitting: kappa = 0 leaves mixed states with no path to (0,0) or (N1,N2)");
    const TransitionMatrix tm = build_transition_matrix(p);
    const HittingTimeTable t = solve_hitting_times(tm);
    json rep = report_header(c);
    rep["matrix"] = io::to_json(tm);
    rep["residual"] = t.residual;
    out.add("hitting_times.csv", io::hitting_times_csv(t));
    out.add("exact_stats.json", rep.dump(2) + "\n");
    return {ExitCode::ok, {{"max_T", t.values.max()}, {"residual", t.residual}}};
}

inline Outcome run_pde_elliptic(const RunConfig& c, io::ArtifactSet& out) {
    const DiscreteOperator op = discretize_Ld(PdeGrid(pde_n(c)), pde_d(c), pde_kappa(c));
    if (!op.certificate().nonsingular())
        throw ConfigError("pde-elliptic: operator is singular (kappa = 0 strands the corners (0,1) and (1,0))");
    const EllipticSolution sol = solve_elliptic(op);
    json rep = report_header(c);
    rep["certificate"] = io::to_json(op.certificate());
    rep["residual"] = sol.residual;
    rep["residual_floor"] = sol.residual_floor;
    rep["min_tau"] = sol.tau.min();
    rep["max_tau"] = sol.tau.max();
    out.add("tau.csv", io::field_csv(sol.tau));
    out.add("operator.json", rep.dump(2) + "\n");
    return {ExitCode::ok, {{"max_tau", sol.tau.max()}, {"residual", sol.residual}}};
}

inline Outcome run_pde_parabolic(const RunConfig& c, io::ArtifactSet& out) {
    const int n = pde_n(c);
    if (c.nt < 1) throw ConfigError("nt >= 1 violated");
    if (!(c.t_final > 0.0)) throw ConfigError("t_final > 0 violated");
    const DiscreteOperator op = discretize_Ld(PdeGrid(n), pde_d(c), pde_kappa(c));
    const Field f = initial_field(c.initial, n);
    const ParabolicSolution sol = solve_parabolic(op, f, c.t_final, c.nt);
    bool contraction = true;
    for (std::size_t m = 1; m < sol.sup_norms.size(); ++m)
        if (sol.sup_norms[m] > sol.sup_norms[m - 1] * (1.0 + 1e-12)) contraction = false;
    const bool positive = f.min() < 0.0 || sol.min_value >= -1e-10;
    json rep = report_header(c);
    rep["certificate"] = io::to_json(op.certificate());
    rep["min_value"] = sol.min_value;
    rep["sup_norms"] = sol.sup_norms;
    rep["max_residual"] = sol.max_residual;
    rep["positivity_ok"] = positive;
    rep["contraction_ok"] = contraction;
    out.add("u_final.csv", io::field_csv(sol.u));
    out.add("parabolic.json", rep.dump(2) + "\n");
    return {positive && contraction ? ExitCode::ok : ExitCode::check_failed,
            {{"min_value", sol.min_value}, {"final_sup_norm", sol.sup_norms.back()}}};
}

inline Outcome run_compare(const RunConfig& c, io::ArtifactSet& out) {
    const int n = pde_n(c);
    const double d = pde_d(c), kappa = pde_kappa(c);
    if (kappa == 0.0) throw ConfigError("compare requires kappa > 0");
    const SlackPolicy slack = calibrate_slack();
    const double eps = slack.eps(1.0 / n);
    const EllipticSolution sol = solve_elliptic(discretize_Ld(PdeGrid(n), d, kappa));
    const ComparisonReport compex = compare_fields(sample_tau_lower(n, n, d), sol.tau, eps, "tau_lower <= tau");
    const ComparisonReport barrier = compare_fields(sample_barrier_V(n, kappa), sol.tau, eps, "V <= tau");
    json rep = report_header(c);
    rep["slack"] = io::to_json(slack);
    rep["eps_h"] = eps;
    rep["comparisons"] = {io::to_json(compex), io::to_json(barrier)};
    out.add("compare.json", rep.dump(2) + "\n");
    const bool ok = compex.passed && barrier.passed;
    return {ok ? ExitCode::ok : ExitCode::check_failed,
            {{"tau_lower_margin", compex.min_margin}, {"V_margin", barrier.min_margin}, {"eps_h", eps}}};
}

inline Outcome run_sweep(const RunConfig& c, io::ArtifactSet& out) {
    const int n = pde_n(c);
    const double d = pde_d(c), kappa = pde_kappa(c);
    if (kappa == 0.0) throw ConfigError("sweep requires kappa > 0");
    if (c.n_list.empty() || c.d_list.empty()) throw ConfigError("sweep requires non-empty n_list and d_list");
    for (double dd : c.d_list)
        if (!(dd > 0.0 && dd <= 1.0)) throw ConfigError("every d in d_list must lie in (0,1]");
    std::vector<ConvergenceRow> conv;
    std::vector<DLimitRow> dl;
    try {
        conv = convergence_study(d, kappa, c.n_list, n);
    } catch (const InvariantError& e) {
        throw ConfigError(e.what());
    }
    bool conv_ok = true;
    for (std::size_t i = 1; i < conv.size(); ++i)
        if (!(conv[i].sup_error < conv[i - 1].sup_error)) conv_ok = false;
    std::ostringstream conv_csv;
    conv_csv << "n1,n2,sup_error\n";
    json conv_json = json::array();
    for (const auto& r : conv) {
        conv_csv << r.n1 << ',' << r.n2 << ',' << io::fmt17(r.sup_error) << '\n';
        conv_json.push_back({{"n1", r.n1}, {"n2", r.n2}, {"sup_error", r.sup_error}});
    }
    const SlackPolicy slack = calibrate_slack();
    DLimitStudy study;
    try {
        study = d_limit_check(kappa, c.d_list, n, slack);
    } catch (const InvariantError& e) {
        throw ConfigError(e.what());
    }
    std::ostringstream dl_csv;
    dl_csv << "d,max_gap,min_gap,max_excess,eps,lower_ok,bound_ok\n";
    bool lower_ok = true, bound_ok = true;
    for (const auto& r : study.rows) {
        dl_csv << io::fmt17(r.d) << ',' << io::fmt17(r.max_gap) << ',' << io::fmt17(r.min_gap) << ','
               << io::fmt17(r.max_excess) << ',' << io::fmt17(r.eps) << ',' << r.lower_ok << ',' << r.bound_ok << '\n';
        lower_ok = lower_ok && r.lower_ok;
        bound_ok = bound_ok && r.bound_ok;
    }
    json rep = report_header(c);
    rep["convergence"] = {{"rows", conv_json}, {"strictly_decreasing", conv_ok}};
    rep["slack"] = io::to_json(slack);
    rep["d_limit"] = io::to_json(study);
    out.add("convergence.csv", conv_csv.str());
    out.add("d_limit.csv", dl_csv.str());
    out.add("sweep.json", rep.dump(2) + "\n");
    const bool ok = conv_ok && lower_ok && bound_ok && study.gap_decreasing;
    return {ok ? ExitCode::ok : ExitCode::check_failed,
            {{"convergence_decreasing", conv_ok},
             {"d_limit_lower_ok", lower_ok},
             {"d_limit_bound_ok", bound_ok},
             {"d_limit_gap_decreasing", study.gap_decreasing}}};
}

/// One named invariant suite inside `validate`.
struct Suite {
    std::string name;
    bool passed = true;
    json details = json::object();
    void check(const std::string& what, bool ok, json value) {
        details[what] = {{"passed", ok}, {"value", std::move(value)}};
        passed = passed && ok;
    }
};

inline Outcome run_validate(const RunConfig& c, io::ArtifactSet& out) {
    const ModelParams p = chain_params(c);
    if (p.kappa() == 0.0) throw ConfigError("validate requires kappa > 0 (hitting times are infinite at kappa = 0)");
    std::vector<Suite> suites;
    const ExchangeMatrix a = build_exchange_matrix(p);
    const double d = p.d();

    {
        Suite s{"exchange"};
        s.check("row_sums", std::abs(a.a11 + a.a12 - 1.0) <= 1e-15 && std::abs(a.a21 + a.a22 - 1.0) <= 1e-15,
                json::array({a.a11 + a.a12, a.a21 + a.a22}));
        double worst = 0.0;
        for (int i = 0; i <= p.n1(); ++i)
            for (int k = 0; k <= p.n2(); ++k) {
                const Density x = GridState{i, k}.density(p);
                const Density y = apply_exchange(x, a);
                worst = std::max(worst, std::abs((y.x1 + d * y.x2) - (x.x1 + d * x.x2)));
            }
        s.check("conservation", worst <= 2e-15, worst);
        const Density one = apply_exchange({1.0, 1.0}, a), zero = apply_exchange({0.0, 0.0}, a);
        s.check("fixed_corners",
                std::abs(one.x1 - 1.0) <= 1e-15 && std::abs(one.x2 - 1.0) <= 1e-15 && zero == Density{0.0, 0.0},
                true);
        suites.push_back(std::move(s));
    }

    const TransitionMatrix tm = build_transition_matrix(p);
    {
        Suite s{"kernel"};
        const Eigen::MatrixXd& m = tm.matrix();
        s.check("row_sums", (m.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12,
                (m.rowwise().sum().array() - 1.0).abs().maxCoeff());
        s.check("nonnegative", m.minCoeff() >= 0.0, m.minCoeff());
        double mean_err = 0.0;
        for (std::size_t idx = 0; idx < tm.n_states(); ++idx) {
            const GridState st = GridState::from_index(idx, p);
            const Density ax = apply_exchange(st.density(p), a);
            double e1 = 0.0, e2 = 0.0;
            for (std::size_t to = 0; to < tm.n_states(); ++to) {
                const Density y = GridState::from_index(to, p).density(p);
                e1 += tm(idx, to) * y.x1;
                e2 += tm(idx, to) * y.x2;
            }
            mean_err = std::max({mean_err, std::abs(e1 - ax.x1), std::abs(e2 - ax.x2)});
        }
        s.check("mean_identity", mean_err <= 1e-12, mean_err);
        const Field lin = Field::sample_chain(p, [d](double x1, double x2) { return x1 + d * x2; });
        s.check("generator_annihilates_conserved", generator_apply(lin, p).sup_norm() <= 1e-10,
                generator_apply(lin, p).sup_norm());
        suites.push_back(std::move(s));
    }

    const HittingTimeTable t = solve_hitting_times(tm);
    {
        Suite s{"hitting_times"};
        s.check("residual", t.residual <= 1e-10, t.residual);
        s.check("nonnegative", t.values.min() >= 0.0, t.values.min());
        s.check("zero_at_absorbing", t.values(0, 0) == 0.0 && t.values(p.n1(), p.n2()) == 0.0, true);
        double swap = 0.0, patch = 0.0;
        for (int i = 0; i <= p.n1(); ++i)
            for (int k = 0; k <= p.n2(); ++k) {
                swap = std::max(swap, std::abs(t.values(i, k) - t.values(p.n1() - i, p.n2() - k)));
                if (p.n1() == p.n2()) patch = std::max(patch, std::abs(t.values(i, k) - t.values(k, i)));
            }
        s.check("species_swap", swap <= 1e-9, swap);
        if (p.n1() == p.n2()) s.check("patch_swap", patch <= 1e-9, patch);
        suites.push_back(std::move(s));
    }

    {
        Suite s{"semigroup"};
        const Field lin = Field::sample_chain(p, [d](double x1, double x2) { return x1 + d * x2; });
        s.check("conserved_functional", sup_distance(iterate_semigroup(lin, 10, tm), lin) <= 1e-12,
                sup_distance(iterate_semigroup(lin, 10, tm), lin));
        const Field bump = Field::sample_chain(p, [](double x1, double x2) { return x1 * (1.0 - x1) + x2 * (1.0 - x2); });
        bool contraction = true;
        Field cur = bump;
        for (int k = 0; k < 10; ++k) {
            Field next = tm.apply(cur);
            if (next.sup_norm() > cur.sup_norm() * (1.0 + 1e-12) || next.min() < -1e-15) contraction = false;
            cur = std::move(next);
        }
        s.check("sup_norm_contraction_and_positivity", contraction, contraction);
        suites.push_back(std::move(s));
    }

    {
        Suite s{"montecarlo"};
        McConfig mc;
        mc.replicates = c.replicates;
        mc.seed = c.seed;
        mc.max_steps = c.max_steps;
        mc.start = start_state(c, p);
        mc.threads = c.threads;
        if (mc.replicates < 2) throw ConfigError("validate needs replicates >= 2 for a standard error");
        const McResult r = estimate_extinction_time(p, mc);
        const double exact = t.values(mc.start.j1, mc.start.j2);
        const double z = r.stderr_time > 0.0 ? std::abs(r.mean_time - exact) / r.stderr_time
                                             : (r.mean_time == exact ? 0.0 : INFINITY);
        s.check("exact_agreement_4se", r.censored_fraction == 0.0 && z <= 4.0,
                {{"mc_mean", r.mean_time}, {"stderr", r.stderr_time}, {"exact", exact}, {"z", z},
                 {"censored_fraction", r.censored_fraction}});
        suites.push_back(std::move(s));
    }

    {
        Suite s{"pde"};
        const int n = pde_n(c);
        const DiscreteOperator op = discretize_Ld(PdeGrid(n), d, p.kappa());
        s.check("m_matrix_certificate", op.certificate().nonsingular(), io::to_json(op.certificate()));
        const EllipticSolution sol = solve_elliptic(op);
        s.check("elliptic_residual", sol.residual <= std::max(1e-10, sol.residual_floor), sol.residual);
        double min_interior = INFINITY, swap = 0.0;
        for (int i = 0; i <= n; ++i)
            for (int k = 0; k <= n; ++k) {
                if (!op.is_dirichlet(op.grid().node(i, k))) min_interior = std::min(min_interior, sol.tau(i, k));
                swap = std::max(swap, std::abs(sol.tau(i, k) - sol.tau(n - i, n - k)));
            }
        s.check("strictly_positive", min_interior > 0.0, min_interior);
        s.check("species_swap", swap <= 5e-9, swap);
        const SlackPolicy slack = calibrate_slack();
        const ComparisonReport cmp =
            compare_fields(sample_tau_lower(n, n, d), sol.tau, slack.eps(1.0 / n), "tau_lower <= tau");
        s.check("tau_lower_comparison", cmp.passed, io::to_json(cmp));
        suites.push_back(std::move(s));
    }

    json rep = report_header(c);
    json js = json::array();
    bool all = true;
    for (const Suite& s : suites) {
        js.push_back({{"name", s.name}, {"passed", s.passed}, {"checks", s.details}});
        all = all && s.passed;
    }
    rep["suites"] = js;
    rep["passed"] = all;
    out.add("validate.json", rep.dump(2) + "\n");
    json failed = json::array();
    for (const Suite& s : suites)
        if (!s.passed) failed.push_back(s.name);
    return {all ? ExitCode::ok : ExitCode::check_failed, {{"suites", suites.size()}, {"failed", failed}}};
}

inline Outcome dispatch(const RunConfig& c, io::ArtifactSet& out) {
    if (c.command == "simulate") return run_simulate(c, out);
    if (c.command == "exact-hitting") return run_exact(c, out);
    if (c.command == "pde-elliptic") return run_pde_elliptic(c, out);
    if (c.command == "pde-parabolic") return run_pde_parabolic(c, out);
    if (c.command == "compare") return run_compare(c, out);
    if (c.command == "sweep") return run_sweep(c, out);
    if (c.command == "validate") return run_validate(c, out);
    throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace detail

/// Parses argv-style arguments (without the program name) into a RunConfig.
/// Returns nullopt when help was requested (text written to `out`).
inline std::optional<RunConfig> parse(const std::vector<std::string>& args, std::ostream& out) {
    CLI::App app{"Two-patch Wright-Fisher exchange model: simulation, exact hitting times and diffusion limits",
                 "twopatch"};
    app.require_subcommand(1);

    struct Flags {
        std::string config;
        int n1 = 0, n2 = 0, start_j1 = 0, start_j2 = 0, n = 0, nt = 0;
        double kappa = 0, d = 0, t_final = 0;
        std::int64_t replicates = 0, max_steps = 0;
        std::uint64_t seed = 0;
        std::string initial, output_dir;
        std::vector<int> n_list;
        std::vector<double> d_list;
        bool raw = false;
        unsigned threads = 0;
    } f;

    std::vector<std::pair<CLI::App*, std::vector<CLI::Option*>>> subs;
    for (const std::string& name : commands()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
        std::vector<CLI::Option*> o;
        o.push_back(sub->add_option("--config", f.config, "JSON config file (flags override it)"));
        o.push_back(sub->add_option("--n1", f.n1, "patch-1 capacity N1"));
        o.push_back(sub->add_option("--n2", f.n2, "patch-2 capacity N2 (<= N1)"));
        o.push_back(sub->add_option("--kappa", f.kappa, "exchange speed kappa"));
        o.push_back(sub->add_option("--d", f.d, "distortion d for PDE commands (default N2/N1)"));
        o.push_back(sub->add_option("--replicates", f.replicates, "Monte Carlo replicates"));
        o.push_back(sub->add_option("--seed", f.seed, "master random seed"));
        o.push_back(sub->add_option("--max-steps", f.max_steps, "censoring horizon in steps (0 = 200*N1)"));
        o.push_back(sub->add_option("--start-j1", f.start_j1, "starting abundance in patch 1"));
        o.push_back(sub->add_option("--start-j2", f.start_j2, "starting abundance in patch 2"));
        o.push_back(sub->add_option("--n", f.n, "PDE grid resolution (h = 1/n)"));
        o.push_back(sub->add_option("--t-final", f.t_final, "parabolic time horizon"));
        o.push_back(sub->add_option("--nt", f.nt, "parabolic time steps"));
        o.push_back(sub->add_option("--initial", f.initial, "parabolic initial field: logistic, cross, bump"));
        o.push_back(sub->add_option("--n-list", f.n_list, "chain sizes N1 for the convergence sweep")->delimiter(','));
        o.push_back(sub->add_option("--d-list", f.d_list, "decreasing d values for the d-limit sweep")->delimiter(','));
        o.push_back(sub->add_option("--output-dir", f.output_dir, "artifact directory"));
        o.push_back(sub->add_flag("--raw", f.raw, "also write per-replicate raw times"));
        o.push_back(sub->add_option("--threads", f.threads, "worker threads (0 = all cores)"));
        subs.emplace_back(sub, std::move(o));
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return std::nullopt;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    RunConfig cfg;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
    for (auto& [sub, o] : subs) {
        if (!sub->parsed()) continue;
        cfg.command = sub->get_name();
        auto given = [&](std::size_t i) { return o[i]->count() > 0; };
        if (given(0)) {
            std::ifstream is(f.config);
            if (!is) throw ConfigError("cannot read config file '" + f.config + "'");
            json j;
            try {
                j = json::parse(is);
            } catch (const json::exception& e) {
                throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
            }
            detail::apply_file(cfg, j);
        }
        if (given(1)) cfg.n1 = f.n1;
        if (given(2)) cfg.n2 = f.n2;
        if (given(3)) cfg.kappa = f.kappa;
        if (given(4)) cfg.d = f.d;
        if (given(5)) cfg.replicates = f.replicates;
        if (given(6)) cfg.seed = f.seed;
        if (given(7)) cfg.max_steps = f.max_steps;
        if (given(8)) cfg.start_j1 = f.start_j1;
        if (given(9)) cfg.start_j2 = f.start_j2;
        if (given(10)) cfg.n = f.n;
        if (given(11)) cfg.t_final = f.t_final;
        if (given(12)) cfg.nt = f.nt;
        if (given(13)) cfg.initial = f.initial;
        if (given(14)) cfg.n_list = f.n_list;
        if (given(15)) cfg.d_list = f.d_list;
        if (given(16)) cfg.output_dir = f.output_dir;
        if (given(17)) cfg.raw = f.raw;
        if (given(18)) cfg.threads = f.threads;
    }
    return cfg;
}

/// Full front end: parse, dispatch, publish artifacts, print the one-line
/// JSON summary on `out`. Returns the process exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    json summary{{"status", "error"}, {"exit_code", static_cast<int>(ExitCode::usage)}};
    std::optional<RunConfig> cfg;
    try {
        cfg = parse(args, out);
        if (!cfg) return 0;
        summary["command"] = cfg->command;
        io::ArtifactSet artifacts(cfg->output_dir);
        const detail::Outcome o = detail::dispatch(*cfg, artifacts);
        artifacts.commit();
        summary["status"] = o.code == ExitCode::ok ? "ok" : "check_failed";
        summary["exit_code"] = static_cast<int>(o.code);
        summary["outputs"] = artifacts.paths();
        summary["result"] = o.headline;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        summary["message"] = e.what();
    } catch (const InvariantError& e) {
        err << "error: " << e.what() << "\n";
        summary["message"] = e.what();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        summary["message"] = e.what();
    }
    summary["timestamp"] = detail::utc_timestamp();
    out << summary.dump() << "\n";
    return summary["exit_code"].get<int>();
}

}  // namespace twopatch::cli
