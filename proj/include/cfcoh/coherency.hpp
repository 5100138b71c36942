#pragma once

// Coherency analysis on simulated trajectories: finite-difference complex
// frequency, the instantaneous coherency function eps = eta_1 - eta_2, its
// time integral as a distance, average-linkage clustering, the
// observer-independence check and the two-machine alpha-beta sweep.

#include "cfcoh/parallel.hpp"
#include "cfcoh/simulation.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cfcoh {

inline constexpr int kEventMaskHalfWidth = 2;
inline constexpr std::size_t kWindowOffsetSamples = 5;

struct CfTrajectory {
    std::vector<double> times;
    std::vector<ComplexFrequency> values;
    std::vector<bool> valid; ///< false for samples adjacent to discontinuities

    std::size_t size() const { return values.size(); }

    double masked_fraction() const
    {
        if (valid.empty()) {
            return 0.0;
        }
        return static_cast<double>(std::count(valid.begin(), valid.end(), false)) / static_cast<double>(valid.size());
    }
};

struct NumericalCfOptions {
    double t0 = 0.0;
    /// Added to omega; 1.0 converts synchronous-frame phasors to stationary-frame CF.
    double frame_rotation = 0.0;
    /// Centered moving-average width applied to the estimate (1 = none).
    int smoothing_width = 1;
};

namespace detail {

/// Second-order central differences; second-order one-sided at the ends.
inline std::vector<double> differentiate(const std::vector<double>& f, double dt)
{
    const std::size_t n = f.size();
    std::vector<double> d(n);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        d[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    return d;
}

inline std::vector<double> moving_average(const std::vector<double>& f, int width)
{
    if (width <= 1) {
        return f;
    }
    const auto half = static_cast<std::ptrdiff_t>(width / 2);
    const auto n = static_cast<std::ptrdiff_t>(f.size());
    std::vector<double> out(f.size());
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto lo = std::max<std::ptrdiff_t>(0, k - half);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, k + half);
        double acc = 0.0;
        for (auto j = lo; j <= hi; ++j) {
            acc += f[static_cast<std::size_t>(j)];
        }
        out[static_cast<std::size_t>(k)] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

} // namespace detail

/// CF of a uniformly sampled Clarke vector: rho from d ln|x|/dt, omega from the
/// unwrapped phase, both divided by omega_base.
inline CfTrajectory numerical_cf(std::span<const Complex> x, double dt, double omega_base,
                                 const NumericalCfOptions& opts = {})
{
    if (x.size() < 3) {
        throw std::invalid_argument("numerical_cf: at least 3 samples are required");
    }
    if (!(dt > 0.0) || !(omega_base > 0.0)) {
        throw std::invalid_argument("numerical_cf: dt and omega_base must be positive");
    }
    const std::size_t n = x.size();
    std::vector<double> log_mag(n), phase(n);
    for (std::size_t k = 0; k < n; ++k) {
        require_magnitude(x[k], "numerical_cf");
        log_mag[k] = std::log(std::abs(x[k]));
        phase[k] = std::arg(x[k]);
    }
    phase = unwrap_phase(phase);
    const auto rho = detail::moving_average(detail::differentiate(log_mag, dt), opts.smoothing_width);
    const auto omega = detail::moving_average(detail::differentiate(phase, dt), opts.smoothing_width);

    CfTrajectory out;
    out.times.resize(n);
    out.values.resize(n);
    out.valid.assign(n, true);
    for (std::size_t k = 0; k < n; ++k) {
        out.times[k] = opts.t0 + static_cast<double>(k) * dt;
        out.values[k] = {rho[k] / omega_base, omega[k] / omega_base + opts.frame_rotation};
    }
    return out;
}

/// Invalidates `half_width` samples on each side of every index in `centers` (inclusive).
inline void mask_samples(CfTrajectory& cf, std::span<const std::size_t> centers, int half_width = kEventMaskHalfWidth)
{
    const auto n = static_cast<std::ptrdiff_t>(cf.valid.size());
    for (std::size_t c : centers) {
        for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(c) - half_width;
             k <= static_cast<std::ptrdiff_t>(c) + half_width; ++k) {
            if (k >= 0 && k < n) {
                cf.valid[static_cast<std::size_t>(k)] = false;
            }
        }
    }
}

/// Analytical CF of a device's current as recorded by the simulator, masked around events.
inline CfTrajectory device_cf_trajectory(const Trajectory& tr, std::size_t device,
                                         int half_width = kEventMaskHalfWidth)
{
    CfTrajectory cf;
    cf.times = tr.times;
    cf.values = tr.cf_series(device);
    cf.valid.assign(cf.values.size(), true);
    mask_samples(cf, tr.event_samples, half_width);
    return cf;
}

/// Finite-difference CF of a device's simulated current (stationary frame), masked around events.
inline CfTrajectory device_numerical_cf(const Trajectory& tr, std::size_t device,
                                        int half_width = kEventMaskHalfWidth)
{
    std::vector<Complex> i(tr.sample_count());
    for (std::size_t k = 0; k < i.size(); ++k) {
        i[k] = tr.currents(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(device));
    }
    auto cf = numerical_cf(i, tr.dt, tr.omega_base, {tr.times.front(), 1.0, 1});
    mask_samples(cf, tr.event_samples, half_width);
    return cf;
}

/// eps(t) = eta_1(t) - eta_2(t); the mask is the union of both masks.
inline CfTrajectory coherency_function(const CfTrajectory& eta1, const CfTrajectory& eta2)
{
    if (eta1.size() != eta2.size() || eta1.times.size() != eta2.times.size()) {
        throw TimeBaseMismatch("coherency_function: trajectories have different lengths");
    }
    CfTrajectory eps;
    eps.times = eta1.times;
    eps.values.resize(eta1.size());
    eps.valid.resize(eta1.size());
    for (std::size_t k = 0; k < eta1.size(); ++k) {
        if (std::abs(eta1.times[k] - eta2.times[k]) > 1e-9) {
            throw TimeBaseMismatch("coherency_function: sample " + std::to_string(k) + " time mismatch");
        }
        eps.values[k] = eta1.values[k] - eta2.values[k];
        eps.valid[k] = eta1.valid[k] && eta2.valid[k];
    }
    return eps;
}

enum class DistanceComponent { magnitude, real, imag };

inline double component_value(ComplexFrequency e, DistanceComponent c)
{
    switch (c) {
    case DistanceComponent::real:
        return std::abs(e.rho);
    case DistanceComponent::imag:
        return std::abs(e.omega);
    default:
        return e.magnitude();
    }
}

/// Trapezoidal integral of |eps| over [t_start, t_end], using only intervals whose
/// two end samples are valid (pu s).
inline double coherency_distance(const CfTrajectory& eps, double t_start, double t_end,
                                 DistanceComponent component = DistanceComponent::magnitude)
{
    constexpr double slack = 1e-9;
    double total = 0.0;
    bool any = false;
    for (std::size_t k = 0; k + 1 < eps.size(); ++k) {
        const double ta = eps.times[k];
        const double tb = eps.times[k + 1];
        if (ta < t_start - slack || tb > t_end + slack || !eps.valid[k] || !eps.valid[k + 1]) {
            continue;
        }
        total += 0.5 * (tb - ta) *
                 (component_value(eps.values[k], component) + component_value(eps.values[k + 1], component));
        any = true;
    }
    if (!any) {
        throw EmptyWindow("coherency_distance: no valid samples in [" + std::to_string(t_start) + ", " +
                          std::to_string(t_end) + "]");
    }
    return total;
}

struct AnalysisWindow {
    double start = 0.0;
    double end = 0.0;
};

/// Explicit window if given, else from the first event + 5 samples to the end of the run.
inline AnalysisWindow analysis_window(const Trajectory& tr, const std::optional<std::pair<double, double>>& explicit_window)
{
    if (explicit_window) {
        return {explicit_window->first, explicit_window->second};
    }
    AnalysisWindow w{tr.times.front(), tr.times.back()};
    if (!tr.event_samples.empty()) {
        const std::size_t k = std::min(tr.event_samples.front() + kWindowOffsetSamples, tr.sample_count() - 1);
        w.start = tr.times[k];
    }
    return w;
}

struct CoherencyDistanceMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;

    std::size_t size() const { return labels.size(); }
};

inline CoherencyDistanceMatrix distance_matrix(std::span<const CfTrajectory> cfs, std::vector<std::string> labels,
                                               AnalysisWindow window,
                                               DistanceComponent component = DistanceComponent::magnitude)
{
    const std::size_t n = cfs.size();
    if (n < 2 || labels.size() != n) {
        throw std::invalid_argument("distance_matrix: need >= 2 devices with one label each");
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            pairs.emplace_back(a, b);
        }
    }
    std::vector<double> cell(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        const auto [a, b] = pairs[p];
        cell[p] = coherency_distance(coherency_function(cfs[a], cfs[b]), window.start, window.end, component);
    });
    CoherencyDistanceMatrix d{std::move(labels), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                                        static_cast<Eigen::Index>(n))};
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto a = static_cast<Eigen::Index>(pairs[p].first);
        const auto b = static_cast<Eigen::Index>(pairs[p].second);
        d.values(a, b) = cell[p];
        d.values(b, a) = cell[p];
    }
    return d;
}

/// Agglomerative clustering with unweighted average linkage (UPGMA).
/// Cluster ids follow the usual convention: leaves are 0..n-1 and merge s creates id n+s.
class ClusterTree {
public:
    struct Merge {
        int left = 0;   ///< cluster containing the lower device index
        int right = 0;
        double height = 0.0;
        int size = 0;
    };

    explicit ClusterTree(const CoherencyDistanceMatrix& d) : n_(static_cast<int>(d.size()))
    {
        struct Cluster {
            int id;
            int key; // smallest member index
            int size;
        };
        std::vector<Cluster> active;
        for (int k = 0; k < n_; ++k) {
            active.push_back({k, k, 1});
        }
        // dist[i][j] indexed by position in `active`
        std::vector<std::vector<double>> dist(n_, std::vector<double>(n_));
        for (int a = 0; a < n_; ++a) {
            for (int b = 0; b < n_; ++b) {
                dist[a][b] = d.values(a, b);
            }
        }
        while (active.size() > 1) {
            std::size_t best_a = 0, best_b = 1;
            double best = std::numeric_limits<double>::infinity();
            std::pair<int, int> best_key{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
            for (std::size_t a = 0; a < active.size(); ++a) {
                for (std::size_t b = a + 1; b < active.size(); ++b) {
                    const std::pair<int, int> key = std::minmax(active[a].key, active[b].key);
                    const double dab = dist[a][b];
                    if (dab < best || (dab == best && key < best_key)) {
                        best = dab;
                        best_key = key;
                        best_a = a;
                        best_b = b;
                    }
                }
            }
            if (active[best_b].key < active[best_a].key) {
                std::swap(best_a, best_b);
            }
            const Cluster ca = active[best_a];
            const Cluster cb = active[best_b];
            const int merged_size = ca.size + cb.size;
            merges_.push_back({ca.id, cb.id, best, merged_size});
            // Lance-Williams update for UPGMA, stored in slot best_a
            for (std::size_t k = 0; k < active.size(); ++k) {
                if (k == best_a || k == best_b) {
                    continue;
                }
                const double merged = (ca.size * dist[best_a][k] + cb.size * dist[best_b][k]) / merged_size;
                dist[best_a][k] = merged;
                dist[k][best_a] = merged;
            }
            active[best_a] = {n_ + static_cast<int>(merges_.size()) - 1, std::min(ca.key, cb.key), merged_size};
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
            dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(best_b));
            for (auto& row : dist) {
                row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_b));
            }
        }
    }

    int leaf_count() const { return n_; }
    const std::vector<Merge>& merges() const { return merges_; }

    /// Group label per leaf for a k-cluster cut; groups are numbered by their smallest member.
    std::vector<int> cut(int k) const
    {
        if (k < 1 || k > n_) {
            throw std::invalid_argument("ClusterTree::cut: k must lie in [1, n]");
        }
        std::vector<int> parent(static_cast<std::size_t>(2 * n_));
        std::iota(parent.begin(), parent.end(), 0);
        auto root = [&](int a) {
            while (parent[a] != a) {
                a = parent[a];
            }
            return a;
        };
        for (int s = 0; s < n_ - k; ++s) {
            const auto& m = merges_[static_cast<std::size_t>(s)];
            parent[root(m.left)] = n_ + s;
            parent[root(m.right)] = n_ + s;
        }
        std::vector<int> label(n_, -1);
        std::vector<int> root_label(static_cast<std::size_t>(2 * n_), -1);
        int next = 0;
        for (int leaf = 0; leaf < n_; ++leaf) {
            const int r = root(leaf);
            if (root_label[r] < 0) {
                root_label[r] = next++;
            }
            label[leaf] = root_label[r];
        }
        return label;
    }

private:
    int n_ = 0;
    std::vector<Merge> merges_;
};

inline std::vector<int> average_linkage(const CoherencyDistanceMatrix& d, int k) { return ClusterTree(d).cut(k); }

/// Partition as a set of sets of labels, convenient for order-free comparison.
inline std::vector<std::vector<std::string>> partition_groups(const std::vector<int>& labels,
                                                              const std::vector<std::string>& names)
{
    int groups = 0;
    for (int l : labels) {
        groups = std::max(groups, l + 1);
    }
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(groups));
    for (std::size_t k = 0; k < labels.size(); ++k) {
        out[static_cast<std::size_t>(labels[k])].push_back(names[k]);
    }
    for (auto& g : out) {
        std::sort(g.begin(), g.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Current flowing from bus h in the observation direction at every sample.
inline std::vector<Complex> observation_current(const Trajectory& tr, const NetworkTopology& net,
                                                const ObservationPoint& op, const std::vector<std::string>& device_names)
{
    std::vector<Complex> out(tr.sample_count());
    int device = -1;
    if (op.device) {
        const auto it = std::find(device_names.begin(), device_names.end(), *op.device);
        if (it == device_names.end()) {
            throw InvalidModel("observation point references unknown device " + *op.device);
        }
        device = static_cast<int>(it - device_names.begin());
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        if (device >= 0) {
            out[k] = -tr.currents(row, device); // drawn by the shunt device
        } else {
            const ComplexVector v = tr.voltages.row(row).transpose();
            out[k] = branch_current(net, op.bus, *op.to_bus, v);
        }
    }
    return out;
}

struct ObserverCheck {
    double max_deviation = 0.0;
    std::vector<double> per_point; ///< max deviation per observation point
};

/// For every observation point (h, j), forms s_{h->j,d} for both devices from the impedance
/// matrix, differentiates its CF numerically and compares the resulting coherency
/// function with the difference of the devices' own current CFs.
inline ObserverCheck observer_independence_check(const Trajectory& tr, const NetworkTopology& net,
                                                 const ImpedanceMatrix& z, std::size_t d1, std::size_t d2,
                                                 std::span<const ObservationPoint> points,
                                                 std::optional<AnalysisWindow> window = std::nullopt)
{
    const auto direct = coherency_function(device_cf_trajectory(tr, d1), device_cf_trajectory(tr, d2));
    ObserverCheck result;
    for (const auto& op : points) {
        const auto i_hj = observation_current(tr, net, op, tr.device_names);
        std::vector<Complex> s1(i_hj.size()), s2(i_hj.size());
        for (std::size_t k = 0; k < i_hj.size(); ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            s1[k] = power_contribution(op.bus, i_hj[k], tr.device_buses[d1], z,
                                       tr.currents(row, static_cast<Eigen::Index>(d1)));
            s2[k] = power_contribution(op.bus, i_hj[k], tr.device_buses[d2], z,
                                       tr.currents(row, static_cast<Eigen::Index>(d2)));
        }
        auto cf1 = numerical_cf(s1, tr.dt, tr.omega_base, {tr.times.front(), 0.0, 1});
        auto cf2 = numerical_cf(s2, tr.dt, tr.omega_base, {tr.times.front(), 0.0, 1});
        mask_samples(cf1, tr.event_samples);
        mask_samples(cf2, tr.event_samples);
        const auto eps = coherency_function(cf1, cf2);
        double worst = 0.0;
        for (std::size_t k = 0; k < eps.size(); ++k) {
            if (!eps.valid[k] || !direct.valid[k]) {
                continue;
            }
            if (window && (eps.times[k] < window->start || eps.times[k] > window->end)) {
                continue;
            }
            worst = std::max(worst, (eps.values[k] - direct.values[k]).magnitude());
        }
        result.per_point.push_back(worst);
        result.max_deviation = std::max(result.max_deviation, worst);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Two-machine alpha-beta sweep
// ---------------------------------------------------------------------------

/// Indices of the first two synchronous machines of a scenario.
inline std::pair<std::size_t, std::size_t> sweep_machines(const Scenario& sc)
{
    std::vector<std::size_t> sms;
    for (std::size_t k = 0; k < sc.devices.size() && sms.size() < 2; ++k) {
        if (std::holds_alternative<SynchronousMachine>(sc.devices[k].model)) {
            sms.push_back(k);
        }
    }
    if (sms.size() < 2) {
        throw InvalidModel("sweep scenario needs two synchronous machines");
    }
    return {sms[0], sms[1]};
}

/// alpha = M1/(M1+M2), beta = x'd1/(x'd1+x'd2); totals are taken from the base scenario and
/// dispatch is proportional to inertia.
inline Scenario sweep_cell_scenario(const Scenario& base, double alpha, double beta)
{
    Scenario sc = base;
    const auto [a, b] = sweep_machines(sc);
    auto& sm1 = std::get<SynchronousMachine>(sc.devices[a].model);
    auto& sm2 = std::get<SynchronousMachine>(sc.devices[b].model);
    const double m_total = sm1.inertia + sm2.inertia;
    const double x_total = sm1.xd_prime + sm2.xd_prime;
    double p_total = sc.devices[a].p_set + sc.devices[b].p_set;
    if (!(p_total > 0.0)) {
        p_total = 1.0;
    }
    sm1.inertia = alpha * m_total;
    sm2.inertia = (1.0 - alpha) * m_total;
    sm1.xd_prime = beta * x_total;
    sm2.xd_prime = (1.0 - beta) * x_total;
    sc.devices[a].p_set = alpha * p_total;
    sc.devices[b].p_set = (1.0 - alpha) * p_total;
    return sc;
}

struct SweepResult {
    std::vector<double> alpha;
    std::vector<double> beta;
    Eigen::MatrixXd values;          ///< [alpha][beta], NaN for failed cells
    std::vector<std::string> errors; ///< row-major, empty string when the cell succeeded
};

inline void validate_sweep_grid(std::span<const double> grid, const char* name)
{
    if (grid.empty()) {
        throw std::invalid_argument(std::string(name) + " grid is empty");
    }
    for (double g : grid) {
        if (!(g > 0.0 && g < 1.0)) {
            throw std::invalid_argument(std::string(name) + " grid value " + std::to_string(g) +
                                        " outside (0, 1)");
        }
    }
}

/// Integral of |eps| between the two machines of one sweep cell.
inline double sweep_cell(const Scenario& base, double alpha, double beta,
                         const std::optional<std::pair<double, double>>& window)
{
    const Scenario sc = sweep_cell_scenario(base, alpha, beta);
    const auto [a, b] = sweep_machines(sc);
    const Trajectory tr = run(sc);
    const auto eps = coherency_function(device_cf_trajectory(tr, a), device_cf_trajectory(tr, b));
    const auto w = analysis_window(tr, window ? window : sc.analysis.window);
    return coherency_distance(eps, w.start, w.end);
}

inline SweepResult alpha_beta_sweep(const Scenario& base, std::span<const double> alpha_grid,
                                    std::span<const double> beta_grid,
                                    std::optional<std::pair<double, double>> window = std::nullopt,
                                    unsigned threads = 0)
{
    validate_sweep_grid(alpha_grid, "alpha");
    validate_sweep_grid(beta_grid, "beta");
    sweep_machines(base);
    SweepResult res;
    res.alpha.assign(alpha_grid.begin(), alpha_grid.end());
    res.beta.assign(beta_grid.begin(), beta_grid.end());
    const std::size_t na = alpha_grid.size();
    const std::size_t nb = beta_grid.size();
    res.values.resize(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(nb));
    res.errors.assign(na * nb, {});
    parallel_for(
        na * nb,
        [&](std::size_t cell) {
            const std::size_t i = cell / nb;
            const std::size_t j = cell % nb;
            double value = std::numeric_limits<double>::quiet_NaN();
            try {
                value = sweep_cell(base, alpha_grid[i], beta_grid[j], window);
            } catch (const std::exception& e) {
                res.errors[cell] = e.what();
            }
            res.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
        },
        threads);
    return res;
}

} // namespace cfcoh
