#include <catch2/catch_amalgamated.hpp>

#include "iobs/config.hpp"
#include "iobs/harness.hpp"

#include <cmath>

using namespace iobs;

namespace {

Scenario scalar_dt() {
    Scenario sc;
    sc.system.domain = TimeDomain::Discrete;
    sc.system.F = Matrix::Constant(1, 1, 0.5);
    sc.system.D = Matrix::Zero(1, 1);
    sc.system.H = Matrix::Constant(1, 1, 1.0);
    sc.system.W = Matrix::Zero(1, 1);
    sc.bounds.x0_upper = Vector::Constant(1, 1.0);
    sc.bounds.x0_lower = Vector::Constant(1, -1.0);
    sc.bounds.d_upper = parse_signals({"0"});
    sc.bounds.d_lower = parse_signals({"0"});
    sc.bounds.w_upper = parse_signals({"0"});
    sc.bounds.w_lower = parse_signals({"0"});
    sc.u = parse_signals({"1"});
    sc.d_true = parse_signals({"0"});
    sc.w_true = parse_signals({"0"});
    sc.x0 = Vector::Zero(1);
    return sc;
}

Scenario scalar_ct() {
    Scenario sc = scalar_dt();
    sc.system.domain = TimeDomain::Continuous;
    sc.system.F = Matrix::Constant(1, 1, -1.0);
    sc.u = parse_signals({"0"});
    sc.x0 = Vector::Constant(1, 1.0);
    return sc;
}

} // namespace

TEST_CASE("discrete plant recursion has the closed form") {
    const Scenario sc = scalar_dt();
    SimulationConfig cfg;
    cfg.steps = 40;
    const StateTrajectory traj = simulate_plant(sc, cfg);
    REQUIRE(traj.times.size() == 41);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        // x_{t+1} = 0.5 x_t + 1, x_0 = 0  =>  x_t = 2 (1 - 0.5^t)
        const double want = 2.0 * (1.0 - std::pow(0.5, static_cast<double>(k)));
        REQUIRE(std::abs(traj.x[k](0) - want) <= 1e-12);
        REQUIRE(traj.y[k](0) == traj.x[k](0));
    }
}

TEST_CASE("continuous integration matches the exponential") {
    const Scenario sc = scalar_ct();
    SimulationConfig cfg;
    cfg.t_final = 1.0;
    cfg.dt = 1e-3;
    const StateTrajectory traj = simulate_plant(sc, cfg);
    REQUIRE(traj.times.size() == 1001);
    REQUIRE(std::abs(traj.times.back() - 1.0) <= 1e-9);
    REQUIRE(std::abs(traj.x.back()(0) - std::exp(-1.0)) <= 1e-10);
}

TEST_CASE("benchmark pipeline is contained in both forms") {
    const ScenarioConfig cfg = config_from_json(paper_dt_json());
    const DesignBundle bundle = synthesize(cfg.scenario, cfg.overrides, cfg.basis);
    SimulationConfig sim;
    sim.steps = 300;

    const PipelineResult cascade = run_pipeline(cfg.scenario, bundle, sim, ObserverForm::Cascade);
    REQUIRE(cascade.report.contained());
    REQUIRE(cascade.report.records == 301);
    REQUIRE(cascade.report.worst_slack <= 1e-9);

    const PipelineResult direct = run_pipeline(cfg.scenario, bundle, sim, ObserverForm::Direct);
    REQUIRE(direct.report.contained());
    REQUIRE(max_bound_divergence(cascade.trajectory, direct.trajectory) <= 1e-9);

    // The plant block of the stacked run equals the standalone plant.
    const StateTrajectory plant = simulate_plant(cfg.scenario, sim);
    for (std::size_t k = 0; k < plant.times.size(); ++k)
        REQUIRE((plant.x[k] - cascade.trajectory.x_true[k]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("benchmark widths collapse without uncertainty") {
    ScenarioConfig cfg = config_from_json(paper_dt_json());
    cfg.scenario.bounds.d_upper = parse_signals({"0"});
    cfg.scenario.bounds.d_lower = parse_signals({"0"});
    cfg.scenario.bounds.w_upper = parse_signals({"0"});
    cfg.scenario.bounds.w_lower = parse_signals({"0"});
    cfg.scenario.d_true = parse_signals({"0"});
    cfg.scenario.w_true = parse_signals({"0"});
    const DesignBundle bundle = synthesize(cfg.scenario, cfg.overrides, cfg.basis);
    SimulationConfig sim;
    sim.steps = 300;
    const PipelineResult res = run_pipeline(cfg.scenario, bundle, sim);
    REQUIRE(res.report.contained());
    for (std::size_t k = 0; k < res.trajectory.times.size(); ++k) {
        if (res.trajectory.times[k] >= 60.0) {
            const Vector width = res.trajectory.x_upper[k] - res.trajectory.x_lower[k];
            REQUIRE(width.maxCoeff() <= 1e-10);
        }
    }
    // Rounding in the transformed frame leaves dust of order 1e-14 that the
    // recombination row sums (~5e2) amplify, so the floor sits near 1e-11.
    REQUIRE(res.report.final_max_width <= 1e-10);
}

TEST_CASE("continuous benchmark converges at the designed rate") {
    const ScenarioConfig cfg = config_from_json(paper_ct_json());
    const DesignBundle bundle = synthesize(cfg.scenario, cfg.overrides, cfg.basis);
    SimulationConfig sim;
    sim.t_final = 10.0;
    sim.dt = 1e-3;
    const PipelineResult res = run_pipeline(cfg.scenario, bundle, sim);
    REQUIRE(res.report.contained());
    REQUIRE(res.report.worst_slack <= 1e-6);
    // Slowest assigned mode: the nudged unit-rate pole.
    const double rate = -bundle.design.A_o(0, 0);
    const double want = 2.0 * std::exp(-rate * 10.0);
    REQUIRE(res.report.final_max_width == Catch::Approx(want).epsilon(1e-3));
}

TEST_CASE("sampled trials are reproducible and contained") {
    const ScenarioConfig cfg = config_from_json(paper_dt_json());
    const DesignBundle bundle = synthesize(cfg.scenario, cfg.overrides, cfg.basis);
    SimulationConfig sim;
    sim.steps = 120;
    sim.trials = 25;
    sim.seed = 99;

    const ContainmentReport a = monte_carlo(cfg.scenario, bundle, sim);
    REQUIRE(a.contained());
    REQUIRE(a.trials == 25);
    REQUIRE(a.records == 25 * 121);
    REQUIRE(a.rng_algorithm == "mt19937_64");
    REQUIRE(a.seed == 99);

    const ContainmentReport b = monte_carlo(cfg.scenario, bundle, sim);
    REQUIRE(a.worst_slack == b.worst_slack);
    REQUIRE(a.final_max_width == b.final_max_width);
    REQUIRE((a.max_width - b.max_width).cwiseAbs().maxCoeff() == 0.0);

    SimulationConfig other = sim;
    other.seed = 100;
    const ContainmentReport c = monte_carlo(cfg.scenario, bundle, other);
    REQUIRE(c.contained());
    REQUIRE(c.worst_slack != a.worst_slack);
}

TEST_CASE("direct-form trials are contained too") {
    const ScenarioConfig cfg = config_from_json(paper_dt_json());
    const DesignBundle bundle = synthesize(cfg.scenario, cfg.overrides, cfg.basis);
    SimulationConfig sim;
    sim.steps = 80;
    sim.trials = 10;
    sim.seed = 5;
    const ContainmentReport rep = monte_carlo(cfg.scenario, bundle, sim, ObserverForm::Direct);
    REQUIRE(rep.contained());
}

TEST_CASE("envelope guards fire on bad data") {
    const Scenario sc = scalar_dt();
    const Envelopes env = detail::envelopes_at(sc, 0.0);
    REQUIRE_THROWS_AS(
        detail::check_membership(env, Vector::Constant(1, 0.5), Vector::Zero(1), 0.0),
        EnvelopeViolation);
    REQUIRE_NOTHROW(
        detail::check_membership(env, Vector::Zero(1), Vector::Zero(1), 0.0));

    Scenario crossed = sc;
    crossed.bounds.d_upper = parse_signals({"-1"});
    REQUIRE_THROWS_AS(detail::envelopes_at(crossed, 0.0), ValidationError);
}

TEST_CASE("synthesize validates first") {
    Scenario sc = scalar_dt();
    sc.x0 = Vector::Constant(1, 5.0); // outside its own box
    REQUIRE_THROWS_AS(synthesize(sc), ValidationError);
}

TEST_CASE("divergence helper rejects mismatched horizons") {
    IntervalTrajectory a, b;
    a.times = {0.0, 1.0};
    a.x_upper = {Vector::Zero(1), Vector::Zero(1)};
    a.x_lower = a.x_upper;
    a.x_true = a.x_upper;
    b = a;
    REQUIRE(max_bound_divergence(a, b) == 0.0);
    b.times.push_back(2.0);
    b.x_upper.push_back(Vector::Zero(1));
    b.x_lower.push_back(Vector::Zero(1));
    REQUIRE_THROWS_AS(max_bound_divergence(a, b), ValidationError);
}

TEST_CASE("record stride thins the trajectory but keeps the last point") {
    const ScenarioConfig cfg = config_from_json(paper_dt_json());
    const DesignBundle bundle = synthesize(cfg.scenario, cfg.overrides, cfg.basis);
    SimulationConfig sim;
    sim.steps = 100;
    sim.record_stride = 7;
    const PipelineResult res = run_pipeline(cfg.scenario, bundle, sim);
    REQUIRE(res.trajectory.times.front() == 0.0);
    REQUIRE(res.trajectory.times.back() == 100.0);
    for (std::size_t k = 1; k + 1 < res.trajectory.times.size(); ++k)
        REQUIRE(std::fmod(res.trajectory.times[k], 7.0) == 0.0);
}
