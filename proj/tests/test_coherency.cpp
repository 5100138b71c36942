#include "cfcoh/coherency.hpp"
#include "cfcoh/scenario_io.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cfcoh;

namespace {

constexpr double kWb = 2.0 * kPi * 60.0;

Scenario scenario(const std::string& name) { return load_scenario(std::string(CFCOH_SCENARIO_DIR) + "/" + name); }

CfTrajectory constant_cf(std::size_t n, double dt, ComplexFrequency value)
{
    CfTrajectory cf;
    for (std::size_t k = 0; k < n; ++k) {
        cf.times.push_back(static_cast<double>(k) * dt);
        cf.values.push_back(value);
        cf.valid.push_back(true);
    }
    return cf;
}

CoherencyDistanceMatrix matrix(const std::vector<std::vector<double>>& rows)
{
    CoherencyDistanceMatrix d;
    const auto n = static_cast<Eigen::Index>(rows.size());
    d.values.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        d.labels.push_back("D" + std::to_string(a));
        for (Eigen::Index b = 0; b < n; ++b) {
            d.values(a, b) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        }
    }
    return d;
}

// Two well separated blocks plus noise: points on a line, |p_a - p_b| as distance.
CoherencyDistanceMatrix points(const std::vector<double>& p)
{
    std::vector<std::vector<double>> rows(p.size(), std::vector<double>(p.size()));
    for (std::size_t a = 0; a < p.size(); ++a) {
        for (std::size_t b = 0; b < p.size(); ++b) {
            rows[a][b] = std::abs(p[a] - p[b]);
        }
    }
    return matrix(rows);
}

} // namespace

TEST(NumericalCf, RotatingPhasor)
{
    const double dt = 1e-3;
    std::vector<Complex> x(200);
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = std::polar(1.2, 2.0 * kPi * 59.5 * static_cast<double>(k) * dt + 0.3);
    }
    const auto cf = numerical_cf(x, dt, kWb);
    for (const auto& e : cf.values) {
        EXPECT_NEAR(e.rho, 0.0, 1e-12);
        EXPECT_NEAR(e.omega, 59.5 / 60.0, 1e-10);
    }
}

TEST(NumericalCf, ConstantPhasorInRotatingFrame)
{
    const std::vector<Complex> x(50, Complex(0.3, -0.8));
    const auto cf = numerical_cf(x, 1e-3, kWb, {2.0, 1.0, 1});
    EXPECT_DOUBLE_EQ(cf.times.front(), 2.0);
    for (const auto& e : cf.values) {
        EXPECT_EQ(e, (ComplexFrequency{0.0, 1.0}));
    }
}

TEST(NumericalCf, DecayingPhasor)
{
    const double dt = 5e-4;
    const Complex s{-3.0, 40.0};
    std::vector<Complex> x(100);
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = 2.0 * std::exp(s * (static_cast<double>(k) * dt));
    }
    for (const auto& e : numerical_cf(x, dt, kWb).values) {
        EXPECT_NEAR(e.rho, -3.0 / kWb, 1e-12);
        EXPECT_NEAR(e.omega, 40.0 / kWb, 1e-12);
    }
}

TEST(NumericalCf, SecondOrderAccuracy)
{
    // x = 1 + 0.5 sin(t): rho = 0.5 cos(t) / (1 + 0.5 sin(t)) / Omega_b
    auto worst_error = [](double dt) {
        std::vector<Complex> x;
        for (double t = 0.0; t <= 1.0 + 1e-12; t += dt) {
            x.emplace_back(1.0 + 0.5 * std::sin(t), 0.0);
        }
        const auto cf = numerical_cf(x, dt, 1.0);
        double worst = 0.0;
        for (std::size_t k = 1; k + 1 < cf.size(); ++k) {
            const double t = cf.times[k];
            worst = std::max(worst, std::abs(cf.values[k].rho - 0.5 * std::cos(t) / (1.0 + 0.5 * std::sin(t))));
        }
        return worst;
    };
    const double ratio = worst_error(0.02) / worst_error(0.01);
    EXPECT_GT(ratio, 3.5);
    EXPECT_LT(ratio, 4.5);
}

TEST(NumericalCf, ScaleInvariance)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Complex> x(300), kx(300);
    const Complex factor = std::polar(3.3, 2.2);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double t = 1e-3 * static_cast<double>(k);
        x[k] = std::polar(1.0 + 0.2 * std::sin(7.0 * t) + 0.01 * u(rng), 3.0 * t * t);
        kx[k] = factor * x[k];
    }
    const auto a = numerical_cf(x, 1e-3, kWb);
    const auto b = numerical_cf(kx, 1e-3, kWb);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_LT((a.values[k] - b.values[k]).magnitude(), 1e-9);
    }
}

TEST(NumericalCf, Guards)
{
    EXPECT_THROW(numerical_cf(std::vector<Complex>(2, 1.0), 1e-3, kWb), std::invalid_argument);
    EXPECT_THROW(numerical_cf(std::vector<Complex>(5, 1.0), 0.0, kWb), std::invalid_argument);
    std::vector<Complex> x(5, 1.0);
    x[2] = 0.0;
    EXPECT_THROW(numerical_cf(x, 1e-3, kWb), MagnitudeUnderflow);
}

TEST(Masking, HalfWidthAroundCenters)
{
    auto cf = constant_cf(20, 0.1, {});
    const std::vector<std::size_t> centers{1, 10};
    mask_samples(cf, centers);
    for (std::size_t k = 0; k < 20; ++k) {
        const bool masked = k <= 3 || (k >= 8 && k <= 12);
        EXPECT_EQ(cf.valid[k], !masked) << k;
    }
    EXPECT_DOUBLE_EQ(cf.masked_fraction(), 9.0 / 20.0);
}

TEST(CoherencyFunction, Antisymmetric)
{
    auto a = constant_cf(10, 0.1, {0.01, 1.02});
    auto b = constant_cf(10, 0.1, {-0.02, 0.99});
    b.valid[4] = false;
    const auto ab = coherency_function(a, b);
    const auto ba = coherency_function(b, a);
    for (std::size_t k = 0; k < ab.size(); ++k) {
        EXPECT_EQ(ab.values[k], -ba.values[k]);
        EXPECT_EQ(ab.valid[k], k != 4);
    }
    EXPECT_EQ(coherency_function(a, a).values[3], (ComplexFrequency{0.0, 0.0}));
}

TEST(CoherencyFunction, TimeBaseMismatch)
{
    EXPECT_THROW(coherency_function(constant_cf(10, 0.1, {}), constant_cf(11, 0.1, {})), TimeBaseMismatch);
    EXPECT_THROW(coherency_function(constant_cf(10, 0.1, {}), constant_cf(10, 0.2, {})), TimeBaseMismatch);
}

TEST(Distance, ConstantOffset)
{
    const auto eps = constant_cf(101, 0.01, {0.003, -0.004});
    EXPECT_NEAR(coherency_distance(eps, 0.0, 1.0), 0.005, 1e-15);
    EXPECT_NEAR(coherency_distance(eps, 0.0, 1.0, DistanceComponent::real), 0.003, 1e-15);
    EXPECT_NEAR(coherency_distance(eps, 0.0, 1.0, DistanceComponent::imag), 0.004, 1e-15);
    EXPECT_NEAR(coherency_distance(eps, 0.25, 0.75), 0.0025, 1e-15);
}

TEST(Distance, TrapezoidOfRamp)
{
    CfTrajectory eps = constant_cf(11, 0.1, {});
    for (std::size_t k = 0; k < eps.size(); ++k) {
        eps.values[k] = {0.0, eps.times[k]};
    }
    EXPECT_NEAR(coherency_distance(eps, 0.0, 1.0), 0.5, 1e-15);
    // masking sample 5 drops the two intervals that touch it
    eps.valid[5] = false;
    EXPECT_NEAR(coherency_distance(eps, 0.0, 1.0), 0.5 - 0.1 * 0.5 * (0.4 + 0.5) - 0.1 * 0.5 * (0.5 + 0.6), 1e-15);
}

TEST(Distance, EmptyWindow)
{
    auto eps = constant_cf(10, 0.1, {0.1, 0.0});
    EXPECT_THROW(coherency_distance(eps, 5.0, 6.0), EmptyWindow);
    std::fill(eps.valid.begin(), eps.valid.end(), false);
    EXPECT_THROW(coherency_distance(eps, 0.0, 1.0), EmptyWindow);
}

TEST(Clustering, HandComputedMerges)
{
    const auto d = matrix({{0, 1, 5, 6}, {1, 0, 7, 8}, {5, 7, 0, 2}, {6, 8, 2, 0}});
    const ClusterTree tree(d);
    ASSERT_EQ(tree.merges().size(), 3u);
    const auto& m = tree.merges();
    EXPECT_EQ(m[0].left, 0);
    EXPECT_EQ(m[0].right, 1);
    EXPECT_DOUBLE_EQ(m[0].height, 1.0);
    EXPECT_EQ(m[1].left, 2);
    EXPECT_EQ(m[1].right, 3);
    EXPECT_DOUBLE_EQ(m[1].height, 2.0);
    EXPECT_EQ(m[2].left, 4);
    EXPECT_EQ(m[2].right, 5);
    EXPECT_DOUBLE_EQ(m[2].height, 6.5);
    EXPECT_EQ(m[2].size, 4);
}

TEST(Clustering, AverageWeightsBySize)
{
    const auto d = matrix({{0, 1, 2, 10}, {1, 0, 2.4, 10}, {2, 2.4, 0, 13}, {10, 10, 13, 0}});
    const ClusterTree tree(d);
    const auto& m = tree.merges();
    EXPECT_EQ(m[1].left, 4);
    EXPECT_EQ(m[1].right, 2);
    EXPECT_DOUBLE_EQ(m[1].height, 2.2);
    EXPECT_EQ(m[1].size, 3);
    EXPECT_EQ(m[2].left, 5);
    EXPECT_EQ(m[2].right, 3);
    EXPECT_DOUBLE_EQ(m[2].height, 11.0);
}

TEST(Clustering, TiesBreakOnSmallestMembers)
{
    const auto d = matrix({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    const ClusterTree tree(d);
    const auto& m = tree.merges();
    EXPECT_EQ(m[0].left, 0);
    EXPECT_EQ(m[0].right, 1);
    EXPECT_EQ(m[1].left, 3);
    EXPECT_EQ(m[1].right, 2);
}

TEST(Clustering, BlockStructureAndExtremeCuts)
{
    const auto d = points({0.0, 10.0, 0.1, 20.0, 10.2, 0.05, 20.3});
    EXPECT_EQ(average_linkage(d, 3), (std::vector<int>{0, 1, 0, 2, 1, 0, 2}));
    EXPECT_EQ(average_linkage(d, 7), (std::vector<int>{0, 1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(average_linkage(d, 1), std::vector<int>(7, 0));
    EXPECT_THROW(average_linkage(d, 0), std::invalid_argument);
    EXPECT_THROW(average_linkage(d, 8), std::invalid_argument);
    EXPECT_EQ(partition_groups(average_linkage(d, 3), d.labels),
              (std::vector<std::vector<std::string>>{{"D0", "D2", "D5"}, {"D1", "D4"}, {"D3", "D6"}}));
}

TEST(Clustering, PermutationInvariant)
{
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> p(9);
        for (std::size_t k = 0; k < p.size(); ++k) {
            p[k] = static_cast<double>(k % 3) * 10.0 + u(rng);
        }
        const auto d = points(p);
        std::vector<std::size_t> perm(p.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> q(p.size());
        std::vector<std::string> names(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
            q[k] = p[perm[k]];
            names[k] = d.labels[perm[k]];
        }
        auto shuffled = points(q);
        shuffled.labels = names;
        for (int k = 1; k <= 9; ++k) {
            EXPECT_EQ(partition_groups(average_linkage(d, k), d.labels),
                      partition_groups(average_linkage(shuffled, k), shuffled.labels))
                << "trial " << trial << " k " << k;
        }
    }
}

TEST(DistanceMatrix, SymmetricWithZeroDiagonal)
{
    std::vector<CfTrajectory> cfs{constant_cf(11, 0.1, {0.0, 1.0}), constant_cf(11, 0.1, {0.01, 1.0}),
                                  constant_cf(11, 0.1, {0.0, 1.03})};
    const auto d = distance_matrix(cfs, {"a", "b", "c"}, {0.0, 1.0});
    EXPECT_EQ(d.values, d.values.transpose());
    EXPECT_EQ(d.values.diagonal(), Eigen::Vector3d::Zero());
    EXPECT_NEAR(d.values(0, 1), 0.01, 1e-15);
    EXPECT_NEAR(d.values(1, 2), std::hypot(0.01, 0.03), 1e-15);
    EXPECT_NEAR(distance_matrix(cfs, {"a", "b", "c"}, {0.0, 1.0}, DistanceComponent::imag).values(1, 2), 0.03,
                1e-15);
    EXPECT_THROW(distance_matrix(std::span(cfs).first(1), {"a"}, {0.0, 1.0}), std::invalid_argument);
}

TEST(Window, DefaultsToFirstEventPlusOffset)
{
    const Scenario sc = scenario("mixed.json");
    const Trajectory tr = run(sc);
    const auto w = analysis_window(tr, std::nullopt);
    EXPECT_NEAR(w.start, 1.0 + 5e-3, 1e-12);
    EXPECT_NEAR(w.end, 3.0, 1e-12);
    const auto given = analysis_window(tr, std::pair{1.5, 2.5});
    EXPECT_EQ(given.start, 1.5);
    EXPECT_EQ(given.end, 2.5);
}

TEST(Observer, SameDeviceGivesZero)
{
    const Scenario sc = scenario("mixed.json");
    const Trajectory tr = run(sc);
    const auto z = impedance_matrix(build_admittance(sc.network));
    const auto check = observer_independence_check(tr, sc.network, z, 0, 0, sc.analysis.observation_points);
    EXPECT_EQ(check.per_point.size(), sc.analysis.observation_points.size());
    EXPECT_LT(check.max_deviation, 1e-12);
}

TEST(Observer, DevicePairsAreObserverIndependent)
{
    const Scenario sc = scenario("mixed.json");
    const Trajectory tr = run(sc);
    const auto z = impedance_matrix(build_admittance(sc.network));
    // finite-difference error of the observed power CF scales with dt^2
    const double tol = 10.0 * tr.dt * tr.dt * tr.omega_base;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
            EXPECT_LT(observer_independence_check(tr, sc.network, z, a, b, sc.analysis.observation_points)
                          .max_deviation,
                      tol);
        }
    }
}

TEST(Sweep, CoherentMachinesKeepCurrentRatio)
{
    const Scenario sc = sweep_cell_scenario(scenario("twomachine.json"), 0.7, 0.3);
    const auto [a, b] = sweep_machines(sc);
    const Trajectory tr = run(sc);
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    const Complex r0 = tr.currents(0, ia) / tr.currents(0, ib);
    const double m0 = std::norm(tr.currents(0, ia)) / std::norm(tr.currents(0, ib));
    EXPECT_NEAR(m0, (0.7 / 0.3) * (0.7 / 0.3), 1e-9);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(tr.sample_count()); ++k) {
        EXPECT_LT(std::abs(tr.currents(k, ia) / tr.currents(k, ib) - r0), 1e-8);
        EXPECT_LT(std::abs(std::norm(tr.currents(k, ia)) / std::norm(tr.currents(k, ib)) - m0), 1e-8);
    }
    const auto& sm1 = std::get<SynchronousMachine>(sc.devices[a].model);
    const auto& sm2 = std::get<SynchronousMachine>(sc.devices[b].model);
    EXPECT_LT(sm_coherency_condition(sm1, sm2, std::abs(tr.currents(0, ia)), std::abs(tr.currents(0, ib))), 1e-9);
}

TEST(Sweep, SymmetricUnderMachineSwap)
{
    const Scenario base = scenario("twomachine.json");
    for (auto [alpha, beta] : {std::pair{0.3, 0.6}, std::pair{0.8, 0.45}}) {
        const double d = sweep_cell(base, alpha, beta, std::nullopt);
        const double swapped = sweep_cell(base, 1.0 - alpha, 1.0 - beta, std::nullopt);
        EXPECT_NEAR(d, swapped, 1e-9 * d);
    }
}

TEST(Sweep, ValleyAndMonotonicity)
{
    const Scenario base = scenario("twomachine.json");
    const std::vector<double> alpha{0.5};
    const std::vector<double> beta{0.2, 0.35, 0.5, 0.65, 0.8};
    const auto res = alpha_beta_sweep(base, alpha, beta, std::nullopt, 2);
    EXPECT_LT(res.values(0, 2), 1e-9);
    EXPECT_GT(res.values(0, 1), res.values(0, 2));
    EXPECT_GT(res.values(0, 0), res.values(0, 1));
    EXPECT_GT(res.values(0, 3), res.values(0, 2));
    EXPECT_GT(res.values(0, 4), res.values(0, 3));
    for (const auto& e : res.errors) {
        EXPECT_TRUE(e.empty());
    }
}

TEST(Sweep, GridValidation)
{
    const Scenario base = scenario("twomachine.json");
    const std::vector<double> good{0.5};
    for (double bad : {0.0, 1.0, -0.1, 1.5}) {
        const std::vector<double> grid{0.3, bad};
        EXPECT_THROW(alpha_beta_sweep(base, grid, good), std::invalid_argument);
        EXPECT_THROW(alpha_beta_sweep(base, good, grid), std::invalid_argument);
    }
    EXPECT_THROW(alpha_beta_sweep(base, std::vector<double>{}, good), std::invalid_argument);
    Scenario one = base;
    one.devices.erase(one.devices.begin());
    EXPECT_THROW(alpha_beta_sweep(one, good, good), InvalidModel);
}
