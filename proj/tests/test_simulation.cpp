#include "cfcoh/scenario_io.hpp"
#include "cfcoh/simulation.hpp"

#include <gtest/gtest.h>

using namespace cfcoh;

namespace {

Scenario scenario(const std::string& name) { return load_scenario(std::string(CFCOH_SCENARIO_DIR) + "/" + name); }

Scenario two_bus(double p, double q, double x)
{
    Scenario sc;
    sc.network.buses = {{0, "src", 1.0, BusKind::slack, 1.0}, {1, "load"}};
    sc.network.branches.push_back({0, 1, {0.0, x}, {}});
    Device g{"G", 0, p, SynchronousMachine{5.0, 0.0, 0.1}};
    Device l{"L", 1, 0.0, ZipLoad{p, q}};
    sc.devices = {g, l};
    apply_system_base(sc);
    return sc;
}

double kcl_residual(const Trajectory& tr, const NetworkTopology& net)
{
    const auto y = build_admittance(net);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(tr.sample_count()); ++k) {
        ComplexVector r = -(y.values * tr.voltages.row(k).transpose());
        for (Eigen::Index d = 0; d < tr.currents.cols(); ++d) {
            r(tr.device_buses[static_cast<std::size_t>(d)]) += tr.currents(k, d);
        }
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace

TEST(PowerFlow, TwoBusMatchesClosedForm)
{
    // lossless line: V^4 + (2 Q x - E^2) V^2 + x^2 (P^2 + Q^2) = 0, upper root
    const double p = 2.0, q = 0.6, x = 0.1;
    const auto pf = power_flow(two_bus(p, q, x));
    const double b = 2.0 * q * x - 1.0;
    const double v2 = (-b + std::sqrt(b * b - 4.0 * x * x * (p * p + q * q))) / 2.0;
    EXPECT_NEAR(std::abs(pf.voltages(1)), std::sqrt(v2), 1e-9);
    EXPECT_NEAR(std::sin(-std::arg(pf.voltages(1))), p * x / std::sqrt(v2), 1e-9);
    EXPECT_LT(pf.max_mismatch, kPowerFlowTolerance);
}

TEST(PowerFlow, Ieee39Balance)
{
    const Scenario sc = scenario("ieee39.json");
    const auto pf = power_flow(sc);
    const auto s = bus_power_injection(build_admittance(sc.network), pf.voltages);
    const auto sched = scheduled_injection(sc);
    for (const auto& b : sc.network.buses) {
        if (b.kind != BusKind::slack) {
            EXPECT_NEAR(s(b.id).real(), sched(b.id).real(), 1e-7) << b.name;
        }
        if (b.kind == BusKind::load) {
            EXPECT_NEAR(s(b.id).imag(), sched(b.id).imag(), 1e-7) << b.name;
        } else {
            EXPECT_NEAR(std::abs(pf.voltages(b.id)), b.v_set, 1e-12) << b.name;
        }
    }
    EXPECT_LT(pf.iterations, 10);
}

TEST(PowerFlow, InfeasibleLoadDoesNotConverge)
{
    EXPECT_THROW(power_flow(two_bus(20.0, 0.0, 0.1)), SolverError);
}

TEST(Initialization, DerivativesVanish)
{
    for (const char* name : {"mixed.json", "ieee39.json", "ieee39_mod.json", "twomachine.json"}) {
        const Scenario sc = scenario(name);
        const auto ic = initialize(sc, power_flow(sc).voltages);
        DaeSystem sys(sc.network, ic.devices, sc.system);
        std::vector<double> xdot;
        std::vector<Complex> currents;
        sys.evaluate(ic.state.x, ic.state.v, xdot, currents);
        for (double d : xdot) {
            EXPECT_LT(std::abs(d), 1e-9) << name;
        }
        EXPECT_LT(sys.network_mismatch(ic.state.v, currents).cwiseAbs().maxCoeff(), 1e-8) << name;
    }
}

TEST(Simulation, EquilibriumIsPreserved)
{
    Scenario sc = scenario("mixed.json");
    sc.events.clear();
    sc.simulation.t_end = 10.0;
    const Trajectory tr = run(sc);
    const Eigen::RowVectorXd x0 = tr.states.row(0);
    const Eigen::RowVectorXcd v0 = tr.voltages.row(0);
    double drift = 0.0;
    for (Eigen::Index k = 0; k < tr.states.rows(); ++k) {
        drift = std::max(drift, (tr.states.row(k) - x0).cwiseAbs().maxCoeff());
        drift = std::max(drift, (tr.voltages.row(k) - v0).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(drift, 1e-7);
    EXPECT_EQ(tr.sample_count(), 10001u);
    EXPECT_TRUE(tr.event_samples.empty());
}

TEST(Simulation, NetworkEquationsHoldAlongTrajectory)
{
    Scenario sc = scenario("ieee39_mod.json");
    sc.simulation.t_end = 2.0;
    EXPECT_LT(kcl_residual(run(sc), sc.network), 1e-8);
    const Scenario mixed = scenario("mixed.json");
    EXPECT_LT(kcl_residual(run(mixed), mixed.network), 1e-8);
}

TEST(Simulation, SecondOrderConvergence)
{
    Scenario sc = scenario("mixed.json");
    sc.simulation.t_end = 1.6;
    sc.simulation.tolerance = 1e-12;
    sc.events.front().time = 0.4;
    auto final_state = [&](double dt) {
        Scenario s = sc;
        s.simulation.dt = dt;
        const Trajectory t = run(s);
        return Eigen::VectorXd(t.states.row(t.states.rows() - 1).transpose());
    };
    const Eigen::VectorXd ref = final_state(1.25e-4);
    const double e1 = (final_state(2e-3) - ref).cwiseAbs().maxCoeff();
    const double e2 = (final_state(1e-3) - ref).cwiseAbs().maxCoeff();
    EXPECT_GT(e1 / e2, 3.0);
    EXPECT_LT(e1 / e2, 5.5);
}

TEST(Simulation, CancellingEventsLeaveEquilibrium)
{
    Scenario sc = scenario("twomachine.json");
    for (auto& ev : sc.events) {
        ev.time = 1.0;
    }
    sc.simulation.t_end = 2.0;
    const Trajectory tr = run(sc);
    EXPECT_EQ(tr.event_samples, std::vector<std::size_t>{1000});
    EXPECT_LT((tr.states.row(tr.states.rows() - 1) - tr.states.row(0)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Simulation, PulseRecoversLoadLevel)
{
    const Scenario sc = scenario("twomachine.json");
    const Trajectory tr = run(sc);
    ASSERT_EQ(tr.event_samples, (std::vector<std::size_t>{1000, 1010}));
    const auto load = static_cast<Eigen::Index>(sc.device_index("LOAD"));
    const auto bus = static_cast<Eigen::Index>(sc.devices[static_cast<std::size_t>(load)].bus);
    // constant-impedance load: |i| / |v| is the admittance, restored after the pulse
    auto admittance = [&](Eigen::Index k) { return std::abs(tr.currents(k, load)) / std::abs(tr.voltages(k, bus)); };
    EXPECT_NEAR(admittance(1005) / admittance(999), 1.1, 1e-12);
    EXPECT_NEAR(admittance(2000) / admittance(999), 1.0, 1e-12);
}

TEST(Simulation, EventsSnapToStepGrid)
{
    EXPECT_EQ(event_sample_index(1.0004, 1e-3), 1000u);
    EXPECT_EQ(event_sample_index(1.0006, 1e-3), 1001u);
    Scenario sc = scenario("mixed.json");
    sc.events.front().time = 1.0004;
    EXPECT_EQ(run(sc).event_samples, std::vector<std::size_t>{1000});
}

TEST(Simulation, Deterministic)
{
    const Scenario sc = scenario("mixed.json");
    const Trajectory a = run(sc);
    const Trajectory b = run(sc);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.device_cf, b.device_cf);
}

TEST(Simulation, DisconnectWithoutLoadIsRejected)
{
    Scenario sc = scenario("mixed.json");
    sc.events.front().action = LoadDisconnect{0, 10.0};
    EXPECT_THROW(run(sc), InvalidModel);
}

TEST(Simulation, ParameterEventOnlyActsWhenRelevant)
{
    // changing inertia at equilibrium changes nothing; changing mechanical power does
    Scenario sc = scenario("mixed.json");
    sc.events = {{1.0, ParameterSet{"SM", "M", 20.0}}};
    const Trajectory same = run(sc);
    EXPECT_LT((same.states.row(same.states.rows() - 1) - same.states.row(0)).cwiseAbs().maxCoeff(), 1e-9);
    sc.events = {{1.0, ParameterSet{"SM", "p_m", 0.1}}};
    const Trajectory moved = run(sc);
    EXPECT_GT((moved.states.row(moved.states.rows() - 1) - moved.states.row(0)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Simulation, ScenarioValidation)
{
    Scenario sc = scenario("mixed.json");
    sc.network.buses[0].kind = BusKind::load;
    EXPECT_THROW(run(sc), InvalidModel);
    sc = scenario("mixed.json");
    sc.simulation.dt = 0.0;
    EXPECT_THROW(run(sc), InvalidModel);
    sc = scenario("mixed.json");
    sc.devices.push_back(sc.devices.front());
    EXPECT_THROW(run(sc), InvalidModel);
}
