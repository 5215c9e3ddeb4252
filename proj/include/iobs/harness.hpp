#pragma once

#include "iobs/decomposition.hpp"
#include "iobs/design.hpp"
#include "iobs/errors.hpp"
#include "iobs/jordan.hpp"
#include "iobs/model.hpp"
#include "iobs/observer.hpp"
#include "iobs/signal.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace iobs {

// =====================================================================
// Synthesis pipeline
// =====================================================================

struct DesignBundle {
    ObservabilityDecomposition dec;
    SylvesterDesign design;
    JordanTransform jt;
};

// Validate, decompose, solve the observable-part transform, build the
// unobservable-part transform. Throws ValidationError / DesignError.
inline DesignBundle synthesize(const Scenario& sc, const DesignOverrides& overrides = {},
                               BasisStrategy basis = BasisStrategy::Pivot,
                               std::uint64_t seed = 0, const Tolerances& tol = {}) {
    const ValidationReport rep = validate_scenario(sc);
    if (!rep.ok()) throw ValidationError("scenario validation failed:\n" + rep.summary());
    DesignBundle b;
    b.dec = decompose(sc.system, tol.rank_rel_tol, basis, tol.rcond_min);
    b.design = make_design(b.dec, sc.system.W, overrides, seed, tol.rcond_min);
    b.jt = build_transform(b.dec.F_no, sc.system.domain, tol.jordan_cond_max);
    return b;
}

// =====================================================================
// Simulation configuration and results
// =====================================================================

enum class ObserverForm { Cascade, Direct };

inline const char* to_string(ObserverForm f) {
    return f == ObserverForm::Cascade ? "cascade" : "direct";
}

struct SimulationConfig {
    long steps = 300;      // DT horizon (number of transitions)
    double t_final = 10.0; // CT horizon
    double dt = 1e-3;      // CT integrator step
    long record_stride = 1;
    std::uint64_t seed = 0;
    long trials = 100; // monte_carlo only
    Tolerances tol;
};

struct StateTrajectory {
    std::vector<double> times;
    std::vector<Vector> x;
    std::vector<Vector> y;
};

struct IntervalTrajectory {
    std::vector<double> times;
    std::vector<Vector> x_true;
    std::vector<Vector> x_upper;
    std::vector<Vector> x_lower;
};

struct ContainmentReport {
    long violations = 0;
    double worst_slack = -std::numeric_limits<double>::infinity(); // <= 0: contained
    Vector max_width;  // per component over all records
    Vector mean_width; // per component over all records
    double final_max_width = 0.0;
    double decay_estimate = 1.0; // per-step ratio of the overall max width
    long records = 0;
    long trials = 1;
    double runtime_seconds = 0.0;
    std::string rng_algorithm = Rng::algorithm;
    std::uint64_t seed = 0;
    bool contained() const { return violations == 0; }
};

// =====================================================================
// True-signal policies (nominal DSL replay vs in-envelope sampling)
// =====================================================================

namespace detail {

class SignalPolicy {
public:
    virtual ~SignalPolicy() = default;
    virtual void begin_step(long step) { (void)step; }
    virtual Vector d(double t) = 0;
    virtual Vector w(double t) = 0;
};

class DslPolicy final : public SignalPolicy {
public:
    explicit DslPolicy(const Scenario& sc) : sc_(&sc) {}
    Vector d(double t) override { return eval_signal(sc_->d_true, t); }
    Vector w(double t) override { return eval_signal(sc_->w_true, t); }

private:
    const Scenario* sc_;
};

// Monte Carlo draws: one theta per component per step, the signal value is
// the envelope interpolation lower + theta (upper - lower) at whatever time
// the integrator asks for. Stays inside moving envelopes at stage times.
class SampledPolicy final : public SignalPolicy {
public:
    SampledPolicy(const Scenario& sc, std::uint64_t seed)
        : sc_(&sc), rng_(seed), theta_d_(sc.system.n_d()), theta_w_(sc.system.n_w()) {
        theta_d_.setZero();
        theta_w_.setZero();
    }
    void begin_step(long) override {
        for (Index i = 0; i < theta_d_.size(); ++i) theta_d_(i) = rng_.uniform01();
        for (Index i = 0; i < theta_w_.size(); ++i) theta_w_(i) = rng_.uniform01();
    }
    Vector d(double t) override {
        const Vector lo = eval_signal(sc_->bounds.d_lower, t);
        const Vector hi = eval_signal(sc_->bounds.d_upper, t);
        return lo + theta_d_.cwiseProduct(hi - lo);
    }
    Vector w(double t) override {
        const Vector lo = eval_signal(sc_->bounds.w_lower, t);
        const Vector hi = eval_signal(sc_->bounds.w_upper, t);
        return lo + theta_w_.cwiseProduct(hi - lo);
    }

private:
    const Scenario* sc_;
    Rng rng_;
    Vector theta_d_, theta_w_;
};

inline Envelopes envelopes_at(const Scenario& sc, double t) {
    Envelopes env;
    env.d_upper = eval_signal(sc.bounds.d_upper, t);
    env.d_lower = eval_signal(sc.bounds.d_lower, t);
    env.w_upper = eval_signal(sc.bounds.w_upper, t);
    env.w_lower = eval_signal(sc.bounds.w_lower, t);
    if (!(env.d_lower.array() <= env.d_upper.array()).all() ||
        !(env.w_lower.array() <= env.w_upper.array()).all())
        throw ValidationError("envelope lower exceeds upper at t = " + std::to_string(t));
    return env;
}

inline void check_membership(const Envelopes& env, const Vector& d, const Vector& w, double t) {
    const double tol = 1e-12;
    auto inside = [&](const Vector& lo, const Vector& v, const Vector& hi) {
        return ((lo.array() - tol <= v.array()) && (v.array() <= hi.array() + tol)).all();
    };
    if (!inside(env.d_lower, d, env.d_upper) || !inside(env.w_lower, w, env.w_upper))
        throw EnvelopeViolation("true disturbance or noise leaves its envelope at t = " +
                                std::to_string(t));
}

// One step of the classical fixed-step fourth-order integrator.
template <typename Rhs>
Vector rk4_step(const Rhs& f, double t, const Vector& s, double h) {
    const Vector k1 = f(t, s);
    const Vector k2 = f(t + h / 2.0, s + (h / 2.0) * k1);
    const Vector k3 = f(t + h / 2.0, s + (h / 2.0) * k2);
    const Vector k4 = f(t + h, s + h * k3);
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Stacked plant+observer system: the observer sees y built from the plant
// block of the same stacked state, so CT stage times stay aligned.
struct StackedSystem {
    Index dim = 0;
    Index n_x = 0;
    std::function<Vector(double, const Vector&)> map; // DT: next state; CT: derivative
    std::function<Box(double, const Vector&)> bounds; // valid for t > 0
    std::function<void(const Vector& x0, const Vector& x0u, const Vector& x0l, Vector&)> init;
};

inline StackedSystem make_cascade_system(const Scenario& sc, const DesignBundle& b,
                                         SignalPolicy& policy) {
    const Index n_x = sc.system.n_x();
    const Index n_o = b.dec.n_o;
    const Index n_no = b.dec.n_no;
    StackedSystem sys;
    sys.dim = n_x + 2 * (n_o + n_no);
    sys.n_x = n_x;
    sys.map = [&, n_x, n_o, n_no](double t, const Vector& s) {
        const Vector x = s.head(n_x);
        const Vector zo_up = s.segment(n_x, n_o);
        const Vector zo_lo = s.segment(n_x + n_o, n_o);
        const Vector zno_up = s.segment(n_x + 2 * n_o, n_no);
        const Vector zno_lo = s.segment(n_x + 2 * n_o + n_no, n_no);
        const Vector u = eval_signal(sc.u, t);
        const Vector d = policy.d(t);
        const Vector w = policy.w(t);
        const Envelopes env = envelopes_at(sc, t);
        const Vector y = sc.system.H * x + sc.system.W * w;
        // Feed the running composition into the z_no block at every step so
        // cascade and direct forms share one derivation.
        const Box zo_box = zo_bounds(b.design, zo_up, zo_lo);
        auto [zo_up2, zo_lo2] = zo_rhs(b.design, b.dec, zo_up, zo_lo, y, u, env);
        auto [zno_up2, zno_lo2] = zno_rhs(b.jt, b.dec, zno_up, zno_lo, t, zo_box, u, env);
        Vector out(s.size());
        out.head(n_x) = sc.system.F * x + u + sc.system.D * d;
        out.segment(n_x, n_o) = zo_up2;
        out.segment(n_x + n_o, n_o) = zo_lo2;
        out.segment(n_x + 2 * n_o, n_no) = zno_up2;
        out.segment(n_x + 2 * n_o + n_no, n_no) = zno_lo2;
        return out;
    };
    sys.bounds = [&, n_x, n_o, n_no](double t, const Vector& s) {
        const Box zo = zo_bounds(b.design, s.segment(n_x, n_o), s.segment(n_x + n_o, n_o));
        const Box zno = zno_bounds(b.jt, s.segment(n_x + 2 * n_o, n_no),
                                   s.segment(n_x + 2 * n_o + n_no, n_no), t);
        return recombine(b.dec, zo, zno);
    };
    sys.init = [&, n_x, n_o, n_no](const Vector& x0, const Vector& x0u, const Vector& x0l,
                                   Vector& s) {
        const Box zo = zo_initial_state(b.design, x0u, x0l);
        const Box zno = zno_initial_state(b.jt, b.dec, x0u, x0l);
        s.head(n_x) = x0;
        s.segment(n_x, n_o) = zo.upper;
        s.segment(n_x + n_o, n_o) = zo.lower;
        s.segment(n_x + 2 * n_o, n_no) = zno.upper;
        s.segment(n_x + 2 * n_o + n_no, n_no) = zno.lower;
    };
    return sys;
}

inline StackedSystem make_direct_system(const Scenario& sc, const DirectObserver& dobs,
                                        SignalPolicy& policy) {
    const Index n_x = sc.system.n_x();
    StackedSystem sys;
    sys.dim = 3 * n_x;
    sys.n_x = n_x;
    sys.map = [&, n_x](double t, const Vector& s) {
        const Vector x = s.head(n_x);
        const Vector up = s.segment(n_x, n_x);
        const Vector lo = s.segment(2 * n_x, n_x);
        const Vector u = eval_signal(sc.u, t);
        const Vector d = policy.d(t);
        const Vector w = policy.w(t);
        const Envelopes env = envelopes_at(sc, t);
        const Vector y = sc.system.H * x + sc.system.W * w;
        auto [up2, lo2] = direct_rhs(dobs, up, lo, t, y, u, env);
        Vector out(s.size());
        out.head(n_x) = sc.system.F * x + u + sc.system.D * d;
        out.segment(n_x, n_x) = up2;
        out.segment(2 * n_x, n_x) = lo2;
        return out;
    };
    sys.bounds = [&, n_x](double t, const Vector& s) {
        return direct_bounds(dobs, s.segment(n_x, n_x), s.segment(2 * n_x, n_x), t);
    };
    sys.init = [&, n_x](const Vector& x0, const Vector& x0u, const Vector& x0l, Vector& s) {
        const Box hat = direct_init(dobs, x0u, x0l);
        s.head(n_x) = x0;
        s.segment(n_x, n_x) = hat.upper;
        s.segment(2 * n_x, n_x) = hat.lower;
    };
    return sys;
}

struct RunAccumulator {
    explicit RunAccumulator(Index n_x)
        : sum_width(Vector::Zero(n_x)), max_width(Vector::Zero(n_x)) {}

    void record(IntervalTrajectory& traj, double t, const Vector& x, const Box& box,
                double slack, ContainmentReport& rep) {
        traj.times.push_back(t);
        traj.x_true.push_back(x);
        traj.x_upper.push_back(box.upper);
        traj.x_lower.push_back(box.lower);
        const double overshoot =
            std::max((x - box.upper).maxCoeff(), (box.lower - x).maxCoeff());
        rep.worst_slack = std::max(rep.worst_slack, overshoot);
        if (overshoot > slack) ++rep.violations;
        const Vector width = box.upper - box.lower;
        sum_width += width;
        max_width = max_width.cwiseMax(width);
        max_width_series.push_back(width.maxCoeff());
        ++count;
    }

    void finalize(ContainmentReport& rep) const {
        rep.records = count;
        rep.max_width = max_width;
        rep.mean_width = count > 0 ? Vector(sum_width / static_cast<double>(count))
                                   : sum_width;
        if (!max_width_series.empty()) rep.final_max_width = max_width_series.back();
        // Geometric per-record ratio over the back half, above the fp floor.
        const std::size_t n = max_width_series.size();
        if (n >= 4) {
            const std::size_t mid = n / 2;
            const double w0 = max_width_series[mid];
            const double w1 = max_width_series[n - 1];
            if (w0 > 1e-13 && w1 > 1e-13)
                rep.decay_estimate =
                    std::pow(w1 / w0, 1.0 / static_cast<double>(n - 1 - mid));
        }
    }

    Vector sum_width, max_width;
    std::vector<double> max_width_series;
    long count = 0;
};

} // namespace detail

// =====================================================================
// Plant-only simulation
// =====================================================================

inline StateTrajectory simulate_plant(const Scenario& sc, const SimulationConfig& cfg) {
    detail::DslPolicy policy(sc);
    StateTrajectory traj;
    const bool discrete = sc.system.domain == TimeDomain::Discrete;
    const long steps =
        discrete ? cfg.steps : static_cast<long>(std::llround(cfg.t_final / cfg.dt));
    const double h = discrete ? 1.0 : cfg.dt;
    Vector x = sc.x0;
    auto rhs = [&](double t, const Vector& s) -> Vector {
        return sc.system.F * s + eval_signal(sc.u, t) + sc.system.D * policy.d(t);
    };
    for (long k = 0; k <= steps; ++k) {
        const double t = k * h;
        if (!x.allFinite())
            throw SimulationError("non-finite plant state at t = " + std::to_string(t));
        if (k % cfg.record_stride == 0 || k == steps) {
            traj.times.push_back(t);
            traj.x.push_back(x);
            traj.y.push_back(sc.system.H * x + sc.system.W * policy.w(t));
        }
        if (k == steps) break;
        x = discrete ? rhs(t, x) : detail::rk4_step(rhs, t, x, h);
    }
    return traj;
}

// =====================================================================
// Plant + observer lockstep run with containment checking
// =====================================================================

struct PipelineResult {
    IntervalTrajectory trajectory;
    ContainmentReport report;
};

namespace detail {

inline PipelineResult run_stacked(const Scenario& sc, const StackedSystem& sys,
                                  SignalPolicy& policy, const Vector& x0,
                                  const SimulationConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const bool discrete = sc.system.domain == TimeDomain::Discrete;
    const long steps =
        discrete ? cfg.steps : static_cast<long>(std::llround(cfg.t_final / cfg.dt));
    const double h = discrete ? 1.0 : cfg.dt;
    const double slack =
        discrete ? cfg.tol.containment_slack_dt : cfg.tol.containment_slack_ct;

    PipelineResult out;
    out.report.seed = cfg.seed;
    RunAccumulator acc(sc.system.n_x());

    Vector s(sys.dim);
    sys.init(x0, sc.bounds.x0_upper, sc.bounds.x0_lower, s);
    // Time 0 reports the assumption box itself.
    acc.record(out.trajectory, 0.0, s.head(sys.n_x),
               Box{sc.bounds.x0_upper, sc.bounds.x0_lower}, slack, out.report);

    for (long k = 0; k < steps; ++k) {
        const double t = k * h;
        policy.begin_step(k);
        const Envelopes env = envelopes_at(sc, t);
        check_membership(env, policy.d(t), policy.w(t), t);
        s = discrete ? sys.map(t, s) : rk4_step(sys.map, t, s, h);
        if (!s.allFinite())
            throw SimulationError("non-finite state at t = " + std::to_string(t + h));
        const double t_next = (k + 1) * h;
        if ((k + 1) % cfg.record_stride == 0 || k + 1 == steps)
            acc.record(out.trajectory, t_next, s.head(sys.n_x), sys.bounds(t_next, s), slack,
                       out.report);
    }
    acc.finalize(out.report);
    out.report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

} // namespace detail

inline PipelineResult run_pipeline(const Scenario& sc, const DesignBundle& bundle,
                                   const SimulationConfig& cfg,
                                   ObserverForm form = ObserverForm::Cascade) {
    detail::DslPolicy policy(sc);
    if (form == ObserverForm::Cascade) {
        const auto sys = detail::make_cascade_system(sc, bundle, policy);
        return detail::run_stacked(sc, sys, policy, sc.x0, cfg);
    }
    const DirectObserver dobs = assemble_direct(bundle.dec, bundle.design, bundle.jt);
    const auto sys = detail::make_direct_system(sc, dobs, policy);
    return detail::run_stacked(sc, sys, policy, sc.x0, cfg);
}

// Largest componentwise disagreement between the x-bounds of two runs over
// the same horizon (used by the cascade-vs-direct equivalence check).
inline double max_bound_divergence(const IntervalTrajectory& a, const IntervalTrajectory& b) {
    if (a.times.size() != b.times.size())
        throw ValidationError("max_bound_divergence: trajectories have different lengths");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        worst = std::max(worst, (a.x_upper[k] - b.x_upper[k]).cwiseAbs().maxCoeff());
        worst = std::max(worst, (a.x_lower[k] - b.x_lower[k]).cwiseAbs().maxCoeff());
    }
    return worst;
}

// =====================================================================
// Monte Carlo containment verification
// =====================================================================

// Deterministic given cfg.seed: trial k draws from an independent substream
// derived from (seed, k). x0 is drawn in the initial box, d and w inside
// their envelopes at every evaluation time.
inline ContainmentReport monte_carlo(const Scenario& sc, const DesignBundle& bundle,
                                     const SimulationConfig& cfg,
                                     ObserverForm form = ObserverForm::Cascade) {
    const auto t_start = std::chrono::steady_clock::now();
    ContainmentReport agg;
    agg.seed = cfg.seed;
    agg.trials = cfg.trials;
    agg.max_width = Vector::Zero(sc.system.n_x());
    agg.mean_width = Vector::Zero(sc.system.n_x());
    const DirectObserver dobs = form == ObserverForm::Direct
                                    ? assemble_direct(bundle.dec, bundle.design, bundle.jt)
                                    : DirectObserver{};
    for (long trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
        Rng x0_rng(derive_seed(trial_seed, 0));
        detail::SampledPolicy policy(sc, derive_seed(trial_seed, 1));
        const Vector x0 = sample_in_box(sc.bounds.x0_lower, sc.bounds.x0_upper, x0_rng);
        Scenario trial_sc = sc;
        trial_sc.x0 = x0;
        const auto sys = form == ObserverForm::Cascade
                             ? detail::make_cascade_system(trial_sc, bundle, policy)
                             : detail::make_direct_system(trial_sc, dobs, policy);
        const PipelineResult res = detail::run_stacked(trial_sc, sys, policy, x0, cfg);
        agg.violations += res.report.violations;
        agg.worst_slack = std::max(agg.worst_slack, res.report.worst_slack);
        agg.max_width = agg.max_width.cwiseMax(res.report.max_width);
        agg.mean_width += res.report.mean_width / static_cast<double>(cfg.trials);
        agg.records += res.report.records;
        agg.final_max_width = std::max(agg.final_max_width, res.report.final_max_width);
        agg.decay_estimate = res.report.decay_estimate;
    }
    agg.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return agg;
}

} // namespace iobs
