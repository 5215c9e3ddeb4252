#pragma once

#include "iobs/errors.hpp"
#include "iobs/harness.hpp"
#include "iobs/model.hpp"
#include "iobs/signal.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace iobs {

using Json = nlohmann::json;

class ConfigError : public ValidationError {
public:
    ConfigError(const std::string& what) : ValidationError("ConfigError", what) {}
};

// Everything a config file describes: the scenario plus design choices.
struct ScenarioConfig {
    Scenario scenario;
    DesignOverrides overrides;
    BasisStrategy basis = BasisStrategy::Pivot;
    Tolerances tol;
};

// =====================================================================
// JSON <-> model
// =====================================================================

namespace detail {

inline Matrix matrix_from_json(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty())
        throw ConfigError(key + " must be a non-empty array of rows");
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty())
        throw ConfigError(key + " rows must be non-empty arrays of numbers");
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ConfigError(key + " rows must all have " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number())
                throw ConfigError(key + " entries must be numbers");
            m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
        }
    }
    return m;
}

inline Vector vector_from_json(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) throw ConfigError(key + " must be a non-empty array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(key + " entries must be numbers");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline VectorSignal signals_from_json(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty())
        throw ConfigError(key + " must be a non-empty array of signal strings");
    VectorSignal out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) throw ConfigError(key + " entries must be strings");
        try {
            out.push_back(parse_signal(j[i].get<std::string>()));
        } catch (const SyntaxError& e) {
            throw ConfigError(key + "[" + std::to_string(i) + "]: " + e.what());
        }
    }
    return out;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Json signals_to_json(const VectorSignal& sig) {
    Json out = Json::array();
    for (const auto& expr : sig) out.push_back(print_signal(expr));
    return out;
}

inline const Json& need(const Json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing required field \"" + key + "\"");
    return j.at(key);
}

} // namespace detail

inline ScenarioConfig config_from_json(const Json& j) {
    ScenarioConfig cfg;
    const std::string domain = detail::need(j, "domain").get<std::string>();
    if (domain == "dt")
        cfg.scenario.system.domain = TimeDomain::Discrete;
    else if (domain == "ct")
        cfg.scenario.system.domain = TimeDomain::Continuous;
    else
        throw ConfigError("domain must be \"dt\" or \"ct\"");

    cfg.scenario.system.F = detail::matrix_from_json(detail::need(j, "F"), "F");
    cfg.scenario.system.D = detail::matrix_from_json(detail::need(j, "D"), "D");
    cfg.scenario.system.H = detail::matrix_from_json(detail::need(j, "H"), "H");
    cfg.scenario.system.W = detail::matrix_from_json(detail::need(j, "W"), "W");
    cfg.scenario.x0 = detail::vector_from_json(detail::need(j, "x0"), "x0");

    const Json& b = detail::need(j, "bounds");
    cfg.scenario.bounds.x0_upper = detail::vector_from_json(detail::need(b, "x0_upper"),
                                                            "bounds.x0_upper");
    cfg.scenario.bounds.x0_lower = detail::vector_from_json(detail::need(b, "x0_lower"),
                                                            "bounds.x0_lower");
    cfg.scenario.bounds.d_upper = detail::signals_from_json(detail::need(b, "d_upper"),
                                                            "bounds.d_upper");
    cfg.scenario.bounds.d_lower = detail::signals_from_json(detail::need(b, "d_lower"),
                                                            "bounds.d_lower");
    cfg.scenario.bounds.w_upper = detail::signals_from_json(detail::need(b, "w_upper"),
                                                            "bounds.w_upper");
    cfg.scenario.bounds.w_lower = detail::signals_from_json(detail::need(b, "w_lower"),
                                                            "bounds.w_lower");

    const Json& s = detail::need(j, "signals");
    cfg.scenario.u = detail::signals_from_json(detail::need(s, "u"), "signals.u");
    cfg.scenario.d_true = detail::signals_from_json(detail::need(s, "d"), "signals.d");
    cfg.scenario.w_true = detail::signals_from_json(detail::need(s, "w"), "signals.w");

    if (j.contains("design")) {
        const Json& d = j.at("design");
        if (d.contains("A_o"))
            cfg.overrides.A_o = detail::matrix_from_json(d.at("A_o"), "design.A_o");
        if (d.contains("B_o"))
            cfg.overrides.B_o = detail::matrix_from_json(d.at("B_o"), "design.B_o");
        if (d.contains("basis")) {
            const std::string basis = d.at("basis").get<std::string>();
            if (basis == "pivot")
                cfg.basis = BasisStrategy::Pivot;
            else if (basis == "orthonormal")
                cfg.basis = BasisStrategy::Orthonormal;
            else
                throw ConfigError("design.basis must be \"pivot\" or \"orthonormal\"");
        }
        if (d.contains("tolerances")) {
            const Json& t = d.at("tolerances");
            auto get = [&](const char* key, double fallback) {
                return t.contains(key) ? t.at(key).get<double>() : fallback;
            };
            cfg.tol.rank_rel_tol = get("rank_rel_tol", cfg.tol.rank_rel_tol);
            cfg.tol.rcond_min = get("rcond_min", cfg.tol.rcond_min);
            cfg.tol.jordan_cond_max = get("jordan_cond_max", cfg.tol.jordan_cond_max);
            cfg.tol.stability_margin = get("stability_margin", cfg.tol.stability_margin);
            cfg.tol.containment_slack_dt =
                get("containment_slack_dt", cfg.tol.containment_slack_dt);
            cfg.tol.containment_slack_ct =
                get("containment_slack_ct", cfg.tol.containment_slack_ct);
            cfg.tol.equivalence_tol = get("equivalence_tol", cfg.tol.equivalence_tol);
        }
    }
    return cfg;
}

inline Json config_to_json(const ScenarioConfig& cfg) {
    Json j;
    j["domain"] = cfg.scenario.system.domain == TimeDomain::Discrete ? "dt" : "ct";
    j["F"] = detail::matrix_to_json(cfg.scenario.system.F);
    j["D"] = detail::matrix_to_json(cfg.scenario.system.D);
    j["H"] = detail::matrix_to_json(cfg.scenario.system.H);
    j["W"] = detail::matrix_to_json(cfg.scenario.system.W);
    j["x0"] = detail::vector_to_json(cfg.scenario.x0);
    j["bounds"] = {{"x0_upper", detail::vector_to_json(cfg.scenario.bounds.x0_upper)},
                   {"x0_lower", detail::vector_to_json(cfg.scenario.bounds.x0_lower)},
                   {"d_upper", detail::signals_to_json(cfg.scenario.bounds.d_upper)},
                   {"d_lower", detail::signals_to_json(cfg.scenario.bounds.d_lower)},
                   {"w_upper", detail::signals_to_json(cfg.scenario.bounds.w_upper)},
                   {"w_lower", detail::signals_to_json(cfg.scenario.bounds.w_lower)}};
    j["signals"] = {{"u", detail::signals_to_json(cfg.scenario.u)},
                    {"d", detail::signals_to_json(cfg.scenario.d_true)},
                    {"w", detail::signals_to_json(cfg.scenario.w_true)}};
    Json d;
    if (cfg.overrides.A_o) d["A_o"] = detail::matrix_to_json(*cfg.overrides.A_o);
    if (cfg.overrides.B_o) d["B_o"] = detail::matrix_to_json(*cfg.overrides.B_o);
    d["basis"] = to_string(cfg.basis);
    j["design"] = std::move(d);
    return j;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    return config_from_json(j);
}

// =====================================================================
// Built-in presets
// =====================================================================

// Four-state single-output discrete plant with one unobservable direction,
// harmonic input, and band-limited disturbance/noise envelopes.
inline Json paper_dt_json() {
    return Json{
        {"domain", "dt"},
        {"F", {{-1.0, 0.0, 1.0, 0.0}, {1.0, -0.5, -1.0, 1.0}, {0.0, 0.0, 0.0, -1.0},
               {0.0, 0.0, -1.0, 0.0}}},
        {"D", {{1.0}, {0.0}, {0.0}, {0.0}}},
        {"H", {{1.0, 0.0, 1.0, 1.0}}},
        {"W", {{1.0}}},
        {"x0", {0.0, 0.0, 0.0, 0.0}},
        {"bounds",
         {{"x0_upper", {1.0, 1.0, 1.0, 1.0}},
          {"x0_lower", {-1.0, -1.0, -1.0, -1.0}},
          {"d_upper", {"0.02"}},
          {"d_lower", {"-0.02"}},
          {"w_upper", {"0.01"}},
          {"w_lower", {"-0.01"}}}},
        {"signals",
         {{"u", {"sin(1*t)", "0", "-0.5*cos(1*t)", "0"}},
          {"d", {"0.02*cos(5*t)"}},
          {"w", {"0.01*sin(20*t)"}}}},
        {"design",
         {{"A_o", {{0.1, 0.0, 0.0}, {0.0, 0.2, 0.0}, {0.0, 0.0, 0.3}}},
          {"B_o", {{1.0}, {1.0}, {1.0}}},
          {"basis", "pivot"}}}};
}

// Two-state continuous plant, one observable direction; uncertainty enters
// only through the initial box so widths contract at the design rates.
inline Json paper_ct_json() {
    return Json{{"domain", "ct"},
                {"F", {{-1.0, 0.0}, {1.0, -2.0}}},
                {"D", {{1.0}, {0.0}}},
                {"H", {{1.0, 0.0}}},
                {"W", {{1.0}}},
                {"x0", {0.5, -0.25}},
                {"bounds",
                 {{"x0_upper", {1.0, 1.0}},
                  {"x0_lower", {-1.0, -1.0}},
                  {"d_upper", {"0"}},
                  {"d_lower", {"0"}},
                  {"w_upper", {"0"}},
                  {"w_lower", {"0"}}}},
                {"signals", {{"u", {"sin(1*t)", "0"}}, {"d", {"0"}}, {"w", {"0"}}}},
                {"design", {{"basis", "pivot"}}}};
}

inline std::optional<Json> preset_json(const std::string& name) {
    if (name == "paper-dt") return paper_dt_json();
    if (name == "paper-ct") return paper_ct_json();
    return std::nullopt;
}

// =====================================================================
// Design document
// =====================================================================

inline Json design_document(const ScenarioConfig& cfg, const DesignBundle& b,
                            const CertificateReport& cert, std::uint64_t seed) {
    Json j;
    j["domain"] = to_string(cfg.scenario.system.domain);
    j["basis"] = to_string(cfg.basis);
    j["n_x"] = cfg.scenario.system.n_x();
    j["n_o"] = b.dec.n_o;
    j["n_no"] = b.dec.n_no;
    j["M_o"] = detail::matrix_to_json(b.dec.M_o);
    j["M_no"] = detail::matrix_to_json(b.dec.M_no);
    j["N"] = detail::matrix_to_json(b.dec.N);
    j["F_o"] = detail::matrix_to_json(b.dec.F_o);
    j["F_noo"] = detail::matrix_to_json(b.dec.F_noo);
    j["F_no"] = detail::matrix_to_json(b.dec.F_no);
    j["D_o"] = detail::matrix_to_json(b.dec.D_o);
    j["D_no"] = detail::matrix_to_json(b.dec.D_no);
    j["H_o"] = detail::matrix_to_json(b.dec.H_o);
    j["A_o"] = detail::matrix_to_json(b.design.A_o);
    j["B_o"] = detail::matrix_to_json(b.design.B_o);
    j["T"] = detail::matrix_to_json(b.design.T);
    j["Lambda"] = detail::matrix_to_json(b.jt.Lambda);
    j["sigma"] = b.jt.sigma;
    j["identity_transform"] = b.jt.identity;
    Json blocks = Json::array();
    for (const auto& blk : b.jt.blocks) {
        Json jb;
        jb["offset"] = blk.offset;
        jb["size"] = blk.size;
        if (blk.size == 1)
            jb["lambda"] = blk.lambda;
        else {
            jb["r"] = blk.r;
            jb["theta"] = blk.theta;
        }
        blocks.push_back(std::move(jb));
    }
    j["blocks"] = std::move(blocks);
    j["certificates"] = {{"basis_residual", cert.basis_residual},
                         {"kernel_residual", cert.kernel_residual},
                         {"output_residual", cert.output_residual},
                         {"coupling_residual", cert.coupling_residual},
                         {"observable_rank", cert.observable_rank},
                         {"observable_pair_full", cert.observable_pair_full},
                         {"stable_unobservable", cert.stable_unobservable},
                         {"sylvester_residual", b.design.sylvester_residual},
                         {"t_rcond", b.design.t_rcond},
                         {"pass", cert.pass}};
    j["rng"] = {{"algorithm", Rng::algorithm}, {"seed", seed}};
    return j;
}

// =====================================================================
// Trajectory CSV
// =====================================================================

namespace detail {

inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v); // 17 significant digits
    return buf;
}

} // namespace detail

// Columns: t, then x_i, xupper_i, xlower_i per component, then width_i per
// component; numbers carry 17 significant digits so parsing them back is
// exact.
inline void write_trajectory_csv(const IntervalTrajectory& traj, std::ostream& out) {
    if (traj.times.empty()) return;
    const Index n = traj.x_true.front().size();
    out << "t";
    for (Index i = 0; i < n; ++i)
        out << ",x_" << (i + 1) << ",xupper_" << (i + 1) << ",xlower_" << (i + 1);
    for (Index i = 0; i < n; ++i) out << ",width_" << (i + 1);
    out << "\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out << detail::csv_number(traj.times[k]);
        for (Index i = 0; i < n; ++i) {
            out << "," << detail::csv_number(traj.x_true[k](i));
            out << "," << detail::csv_number(traj.x_upper[k](i));
            out << "," << detail::csv_number(traj.x_lower[k](i));
        }
        for (Index i = 0; i < n; ++i)
            out << "," << detail::csv_number(traj.x_upper[k](i) - traj.x_lower[k](i));
        out << "\n";
    }
}

} // namespace iobs
