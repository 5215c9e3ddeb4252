#pragma once

#include "iobs/linalg.hpp"
#include "iobs/signal.hpp"

#include <string>
#include <vector>

namespace iobs {

enum class TimeDomain { Continuous, Discrete };

inline const char* to_string(TimeDomain d) {
    return d == TimeDomain::Continuous ? "ct" : "dt";
}

// x^+ = F x + u + D d,  y = H x + W w.  In CT "x^+" is the derivative,
// in DT the next state; d and w are unknown but bounded.
struct LtiSystem {
    TimeDomain domain = TimeDomain::Discrete;
    Matrix F; // n_x x n_x
    Matrix D; // n_x x n_d
    Matrix H; // n_y x n_x
    Matrix W; // n_y x n_w

    Index n_x() const { return F.rows(); }
    Index n_d() const { return D.cols(); }
    Index n_y() const { return H.rows(); }
    Index n_w() const { return W.cols(); }
};

// Assumption data: initial-state box plus signal envelopes for d and w.
struct UncertaintyBounds {
    Vector x0_upper, x0_lower;
    VectorSignal d_upper, d_lower;
    VectorSignal w_upper, w_lower;
};

// A complete experiment: plant, uncertainty description, the known input,
// and the (hidden from the observer) true realizations.
struct Scenario {
    LtiSystem system;
    UncertaintyBounds bounds;
    VectorSignal u;      // n_x components
    VectorSignal d_true; // n_d components
    VectorSignal w_true; // n_w components
    Vector x0;           // true initial state
};

// Every numeric guard in the pipeline, overridable from the config file.
struct Tolerances {
    double rank_rel_tol = 1e-9;      // singular-value cutoff for rank decisions
    double rcond_min = 1e-9;         // reciprocal-condition floor for inversions
    double jordan_cond_max = 1e6;    // eigenvector-basis conditioning ceiling
    double stability_margin = 0.0;   // extra margin demanded from Schur/Hurwitz tests
    double containment_slack_dt = 1e-9;
    double containment_slack_ct = 1e-6;
    double equivalence_tol = 1e-9;   // cascade-vs-direct agreement
};

struct Diagnostic {
    std::string check;
    std::string message;
};

struct ValidationReport {
    std::vector<Diagnostic> failures;
    bool ok() const { return failures.empty(); }
    std::string summary() const {
        std::string out;
        for (const auto& f : failures) out += f.check + ": " + f.message + "\n";
        return out;
    }
};

namespace detail {

inline void check_dims(const Scenario& sc, ValidationReport& rep) {
    const auto& sys = sc.system;
    auto fail = [&](const std::string& msg) { rep.failures.push_back({"dimensions", msg}); };
    if (sys.F.rows() < 1 || sys.F.rows() != sys.F.cols())
        fail("F must be square with n_x >= 1");
    if (sys.D.rows() != sys.F.rows() || sys.D.cols() < 1)
        fail("D must be n_x x n_d with n_d >= 1");
    if (sys.H.cols() != sys.F.rows() || sys.H.rows() < 1)
        fail("H must be n_y x n_x with n_y >= 1");
    if (sys.W.rows() != sys.H.rows() || sys.W.cols() < 1)
        fail("W must be n_y x n_w with n_w >= 1");
    if (sc.x0.size() != sys.n_x()) fail("x0 must have n_x components");
    if (sc.bounds.x0_upper.size() != sys.n_x() || sc.bounds.x0_lower.size() != sys.n_x())
        fail("x0 bounds must have n_x components");
    if (static_cast<Index>(sc.u.size()) != sys.n_x()) fail("u must have n_x components");
    if (static_cast<Index>(sc.d_true.size()) != sys.n_d()) fail("d must have n_d components");
    if (static_cast<Index>(sc.w_true.size()) != sys.n_w()) fail("w must have n_w components");
    if (static_cast<Index>(sc.bounds.d_upper.size()) != sys.n_d() ||
        static_cast<Index>(sc.bounds.d_lower.size()) != sys.n_d())
        fail("d envelopes must have n_d components");
    if (static_cast<Index>(sc.bounds.w_upper.size()) != sys.n_w() ||
        static_cast<Index>(sc.bounds.w_lower.size()) != sys.n_w())
        fail("w envelopes must have n_w components");
}

inline void check_finite(const Scenario& sc, ValidationReport& rep) {
    auto finite = [](const Matrix& m) { return m.allFinite(); };
    if (!finite(sc.system.F) || !finite(sc.system.D) || !finite(sc.system.H) ||
        !finite(sc.system.W))
        rep.failures.push_back({"finiteness", "system matrices must be finite"});
    if (!sc.x0.allFinite() || !sc.bounds.x0_upper.allFinite() || !sc.bounds.x0_lower.allFinite())
        rep.failures.push_back({"finiteness", "initial state data must be finite"});
}

// Sample sweep over the first stretch of the time axis; the harness
// re-checks at every step it actually takes.
inline void check_envelopes(const Scenario& sc, ValidationReport& rep) {
    const bool discrete = sc.system.domain == TimeDomain::Discrete;
    const double step = discrete ? 1.0 : 0.25;
    for (int k = 0; k <= 80; ++k) {
        const double t = k * step;
        const Vector du = eval_signal(sc.bounds.d_upper, t);
        const Vector dl = eval_signal(sc.bounds.d_lower, t);
        const Vector wu = eval_signal(sc.bounds.w_upper, t);
        const Vector wl = eval_signal(sc.bounds.w_lower, t);
        if (!(dl.array() <= du.array()).all() || !(wl.array() <= wu.array()).all()) {
            rep.failures.push_back(
                {"envelope_order", "envelope lower exceeds upper at t = " + std::to_string(t)});
            return;
        }
        const Vector d = eval_signal(sc.d_true, t);
        const Vector w = eval_signal(sc.w_true, t);
        if (!((dl.array() <= d.array()).all() && (d.array() <= du.array()).all()) ||
            !((wl.array() <= w.array()).all() && (w.array() <= wu.array()).all())) {
            rep.failures.push_back(
                {"envelope_membership",
                 "true disturbance or noise leaves its envelope at t = " + std::to_string(t)});
            return;
        }
    }
}

} // namespace detail

// Named-diagnostic validation; design aborts on any failure.
inline ValidationReport validate_scenario(const Scenario& sc) {
    ValidationReport rep;
    detail::check_dims(sc, rep);
    if (!rep.ok()) return rep; // later checks assume consistent shapes
    detail::check_finite(sc, rep);
    if (!(sc.bounds.x0_lower.array() <= sc.bounds.x0_upper.array()).all())
        rep.failures.push_back({"x0_box", "x0 lower bound exceeds upper bound"});
    else if (!((sc.bounds.x0_lower.array() <= sc.x0.array()).all() &&
               (sc.x0.array() <= sc.bounds.x0_upper.array()).all()))
        rep.failures.push_back({"x0_membership", "true x0 lies outside the initial box"});
    detail::check_envelopes(sc, rep);
    return rep;
}

} // namespace iobs
