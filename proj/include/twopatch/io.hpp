#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "twopatch/analysis.hpp"
#include "twopatch/exact.hpp"
#include "twopatch/field.hpp"
#include "twopatch/montecarlo.hpp"
#include "twopatch/pde.hpp"

namespace twopatch::io {

using json = nlohmann::json;

/// Round-trip decimal form of a double (17 significant digits).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// j1,j2,x1,x2,T for every chain node.
inline std::string hitting_times_csv(const HittingTimeTable& t) {
    std::ostringstream os;
    os << "j1,j2,x1,x2,T\n";
    const Field& f = t.values;
    for (int i = 0; i <= f.n1(); ++i)
        for (int k = 0; k <= f.n2(); ++k)
            os << i << ',' << k << ',' << fmt17(f.x1(i)) << ',' << fmt17(f.x2(k)) << ',' << fmt17(f(i, k)) << '\n';
    return os.str();
}

/// i,k,x1,x2,value for every grid node.
inline std::string field_csv(const Field& f) {
    std::ostringstream os;
    os << "i,k,x1,x2,value\n";
    for (int i = 0; i <= f.n1(); ++i)
        for (int k = 0; k <= f.n2(); ++k)
            os << i << ',' << k << ',' << fmt17(f.x1(i)) << ',' << fmt17(f.x2(k)) << ',' << fmt17(f(i, k)) << '\n';
    return os.str();
}

/// replicate_index,steps,censored_flag per replicate.
inline std::string raw_times_csv(const McResult& r) {
    std::ostringstream os;
    os << "replicate_index,steps,censored_flag\n";
    for (const ReplicateRecord& rec : r.raw) os << rec.index << ',' << rec.steps << ',' << (rec.censored ? 1 : 0) << '\n';
    return os.str();
}

inline json to_json(const McResult& r) {
    return {{"mean_time", r.mean_time},
            {"stderr", r.stderr_time},
            {"censored_fraction", r.censored_fraction},
            {"mean_is_lower_bound", r.mean_is_lower_bound},
            {"replicates", r.replicates},
            {"max_steps", r.max_steps}};
}

inline json to_json(const MMatrixCertificate& c) {
    return {{"m_matrix", c.holds()},
            {"nonsingular", c.nonsingular()},
            {"offdiagonal_nonpositive", c.offdiagonal_nonpositive},
            {"diagonal_nonnegative", c.diagonal_nonnegative},
            {"weakly_diagonally_dominant", c.weakly_diagonally_dominant},
            {"weakly_chained", c.weakly_chained},
            {"zero_rows", c.zero_rows},
            {"min_diagonal", c.min_diagonal},
            {"max_offdiagonal", c.max_offdiagonal},
            {"min_row_sum", c.min_row_sum},
            {"max_row_sum", c.max_row_sum}};
}

inline json to_json(const TransitionMatrix& t) {
    return {{"n_states", t.n_states()},
            {"renormalized_rows", t.renormalized_rows()},
            {"max_row_deviation", t.max_row_deviation()}};
}

inline json to_json(const NodeRef& n) { return {{"i", n.i}, {"k", n.k}, {"x1", n.x1}, {"x2", n.x2}}; }

inline json to_json(const ComparisonReport& r) {
    return {{"name", r.name},
            {"min_margin", r.min_margin},
            {"node_of_min", to_json(r.node_of_min)},
            {"tolerance", r.tolerance},
            {"passed", r.passed}};
}

inline json to_json(const SlackPolicy& s) {
    json cal = json::array();
    for (const auto& c : s.calibration) cal.push_back({{"n", c.n}, {"max_error", c.max_error}});
    return {{"c", s.c}, {"calibration", cal}};
}

inline json to_json(const DLimitStudy& s) {
    json rows = json::array();
    for (const DLimitRow& r : s.rows)
        rows.push_back({{"d", r.d},
                        {"max_gap", r.max_gap},
                        {"min_gap", r.min_gap},
                        {"max_excess", r.max_excess},
                        {"node_of_max_excess", to_json(r.node_of_max_excess)},
                        {"eps", r.eps},
                        {"lower_ok", r.lower_ok},
                        {"bound_ok", r.bound_ok},
                        {"residual", r.residual}});
    return {{"kappa", s.kappa},
            {"n", s.n},
            {"rows", rows},
            {"d_star", s.d_star ? json(*s.d_star) : json(nullptr)},
            {"gap_decreasing", s.gap_decreasing}};
}

/// Collects output files in memory and publishes them together: every file
/// is written to a temporary sibling first, then renamed into place.
class ArtifactSet {
public:
    explicit ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

    [[nodiscard]] std::vector<std::string> paths() const {
        std::vector<std::string> out;
        for (const auto& f : files_) out.push_back((dir_ / f.first).string());
        return out;
    }

    /// Throws std::runtime_error and leaves no temporary files behind on failure.
    void commit() const {
        namespace fs = std::filesystem;
        fs::create_directories(dir_);
        std::vector<fs::path> temps;
        auto cleanup = [&] {
            std::error_code ec;
            for (const auto& t : temps) fs::remove(t, ec);
        };
        for (const auto& [name, content] : files_) {
            const fs::path tmp = dir_ / ("." + name + ".tmp");
            temps.push_back(tmp);
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            os << content;
            os.close();
            if (!os) {
                cleanup();
                throw std::runtime_error("cannot write " + tmp.string());
            }
        }
        for (std::size_t i = 0; i < files_.size(); ++i) {
            std::error_code ec;
            fs::rename(temps[i], dir_ / files_[i].first, ec);
            if (ec) {
                cleanup();
                throw std::runtime_error("cannot publish " + (dir_ / files_[i].first).string() + ": " + ec.message());
            }
        }
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace twopatch::io
