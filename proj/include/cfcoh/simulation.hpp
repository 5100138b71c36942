#pragma once

// Time-domain simulation of the network DAE.
//
// Unknowns are the device states x and the bus voltages v (synchronous frame).
// The differential equations are discretized with the implicit trapezoidal rule
// and solved simultaneously with the algebraic network equations
//     sum_d i_d(x_d, v_{b_d}) - Y v = 0
// by Newton's method. The Jacobian is assembled from device-local finite
// differences plus the exact network block and reused across steps until the
// iteration stops contracting.

#include "cfcoh/powerflow.hpp"

#include <Eigen/LU>

#include <cstddef>
#include <string>
#include <vector>

namespace cfcoh {

struct DaeState {
    double time = 0.0;
    std::vector<double> x;
    ComplexVector v;
};

struct InitialCondition {
    std::vector<Device> devices; ///< with back-solved set-points
    DaeState state;
    double max_derivative = 0.0; ///< max |dx/dt| at t = 0
};

struct RunStats {
    std::size_t steps = 0;
    std::size_t newton_iterations = 0;
    std::size_t jacobian_updates = 0;
    std::size_t step_halvings = 0;
    std::size_t events_applied = 0;
};

/// Everything recorded at one sample instant.
struct SampleRecord {
    std::vector<double> xdot;
    std::vector<Complex> currents;
    ComplexVector v_dot;
    std::vector<ComplexFrequency> device_cf; ///< analytical, stationary frame
    std::vector<ComplexFrequency> bus_cf;    ///< analytical, stationary frame
};

namespace detail {

/// Real 2x2 block of the map w -> a w + c conj(w).
inline Eigen::Matrix2d real_linear_block(Complex a, Complex c)
{
    Eigen::Matrix2d m;
    m << a.real() + c.real(), -a.imag() + c.imag(), a.imag() + c.imag(), a.real() - c.real();
    return m;
}

} // namespace detail

/// Splits generation at each bus among its devices (weights p_set, equal if none positive)
/// and back-solves every device to an equilibrium at the power-flow voltages.
inline InitialCondition initialize(const Scenario& sc, const ComplexVector& bus_voltages)
{
    const auto y = build_admittance(sc.network);
    const int n = sc.network.bus_count();
    const ComplexVector s_net = bus_power_injection(y, bus_voltages);

    ComplexVector s_load = ComplexVector::Zero(n);
    std::vector<double> weight_sum(n, 0.0);
    std::vector<int> gen_count(n, 0);
    for (const auto& d : sc.devices) {
        if (const auto* zip = std::get_if<ZipLoad>(&d.model)) {
            s_load(d.bus) += Complex(zip->p0, zip->q0);
        } else {
            weight_sum[d.bus] += std::max(d.p_set, 0.0);
            ++gen_count[d.bus];
        }
    }

    InitialCondition ic;
    ic.devices = sc.devices;
    std::size_t nx = 0;
    for (const auto& d : ic.devices) {
        nx += state_count(d.model);
    }
    ic.state.x.assign(nx, 0.0);
    ic.state.v = bus_voltages;

    std::size_t offset = 0;
    for (auto& d : ic.devices) {
        const std::size_t m = state_count(d.model);
        std::span<double> x(ic.state.x.data() + offset, m);
        Complex s_dev{0.0, 0.0};
        if (std::holds_alternative<ZipLoad>(d.model)) {
            const auto& zip = std::get<ZipLoad>(d.model);
            s_dev = -Complex(zip.p0, zip.q0);
        } else {
            const double w = weight_sum[d.bus] > 0.0 ? std::max(d.p_set, 0.0) / weight_sum[d.bus]
                                                     : 1.0 / gen_count[d.bus];
            s_dev = (s_net(d.bus) + s_load(d.bus)) * w;
        }
        initialize_device(d.model, bus_voltages(d.bus), s_dev, x);
        offset += m;
    }

    offset = 0;
    std::vector<double> xdot;
    for (const auto& d : ic.devices) {
        const std::size_t m = state_count(d.model);
        xdot.assign(m, 0.0);
        evaluate_device(d.model, std::span<const double>(ic.state.x.data() + offset, m), bus_voltages(d.bus), xdot);
        for (double r : xdot) {
            ic.max_derivative = std::max(ic.max_derivative, std::abs(r));
        }
        offset += m;
    }
    return ic;
}

class DaeSystem {
public:
    DaeSystem(NetworkTopology network, std::vector<Device> devices, SystemBase base, double tolerance = 1e-8)
        : network_(std::move(network)),
          y_(build_admittance(network_)),
          devices_(std::move(devices)),
          base_(base),
          tolerance_(tolerance)
    {
        nb_ = network_.bus_count();
        for (const auto& d : devices_) {
            offsets_.push_back(nx_);
            nx_ += state_count(d.model);
        }
        refresh_cacheability();
    }

    std::size_t state_size() const { return nx_; }
    int bus_count() const { return nb_; }
    const std::vector<Device>& devices() const { return devices_; }
    const std::vector<std::size_t>& state_offsets() const { return offsets_; }
    const AdmittanceMatrix& admittance() const { return y_; }
    const NetworkTopology& network() const { return network_; }
    const RunStats& stats() const { return stats_; }
    double tolerance() const { return tolerance_; }

    std::span<const double> local(const std::vector<double>& x, std::size_t d) const
    {
        return {x.data() + offsets_[d], state_count(devices_[d].model)};
    }

    /// Device derivatives and injected currents at (x, v).
    void evaluate(const std::vector<double>& x, const ComplexVector& v, std::vector<double>& xdot,
                  std::vector<Complex>& currents) const
    {
        xdot.assign(nx_, 0.0);
        currents.resize(devices_.size());
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            const std::size_t m = state_count(devices_[d].model);
            currents[d] = evaluate_device(devices_[d].model, local(x, d), v(devices_[d].bus),
                                          std::span<double>(xdot.data() + offsets_[d], m));
        }
    }

    ComplexVector network_mismatch(const ComplexVector& v, const std::vector<Complex>& currents) const
    {
        std::vector<DeviceInjection> inj;
        inj.reserve(devices_.size());
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            inj.push_back({devices_[d].bus, currents[d]});
        }
        return network_residual(y_, v, inj);
    }

    /// One trapezoidal step; on Newton failure the step is split in halves (up to 4 levels).
    DaeState step(const DaeState& s, double dt) { return step_impl(s, dt, 0); }

    /// Re-solves the network voltages with the states frozen (after a discrete change).
    void solve_algebraic(DaeState& s)
    {
        const std::vector<double> frozen = s.x;
        const std::vector<double> xdot_prev(nx_, 0.0);
        if (!newton(s.x, s.v, frozen, xdot_prev, 0.0)) {
            throw NewtonDivergence("solve_algebraic", "algebraic re-solve did not converge at t = " +
                                                          std::to_string(s.time));
        }
    }

    void apply_event(const EventAction& action, double s_base)
    {
        std::visit(
            [&](const auto& a) {
                using A = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<A, LoadScale>) {
                    scale_loads(a.bus, a.factor);
                } else if constexpr (std::is_same_v<A, LoadDisconnect>) {
                    double p_bus = 0.0;
                    for (const auto& d : devices_) {
                        if (const auto* zip = std::get_if<ZipLoad>(&d.model); zip && d.bus == a.bus) {
                            p_bus += zip->p0;
                        }
                    }
                    if (!(p_bus > 0.0)) {
                        throw InvalidModel("load disconnection at bus " + std::to_string(a.bus) +
                                           " without active load");
                    }
                    scale_loads(a.bus, 1.0 - a.amount_mw / (s_base * p_bus));
                } else {
                    bool found = false;
                    for (auto& d : devices_) {
                        if (d.name == a.device) {
                            set_parameter(d.model, a.name, a.value);
                            found = true;
                        }
                    }
                    if (!found) {
                        throw InvalidModel("unknown device " + a.device);
                    }
                }
            },
            action);
        jacobian_valid_ = false;
        vdot_valid_ = false;
        refresh_cacheability();
        ++stats_.events_applied;
    }

    /// Derivatives, currents, voltage rates and analytical CFs at a consistent state.
    SampleRecord sample(const DaeState& s)
    {
        SampleRecord rec;
        evaluate(s.x, s.v, rec.xdot, rec.currents);

        std::vector<CurrentSensitivity> sens(devices_.size());
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * nb_);
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            const int b = devices_[d].bus;
            sens[d] = current_sensitivity(devices_[d].model, local(s.x, d),
                                          std::span<const double>(rec.xdot.data() + offsets_[d],
                                                                  state_count(devices_[d].model)),
                                          s.v(b));
            rhs(2 * b) -= sens[d].source_rate.real();
            rhs(2 * b + 1) -= sens[d].source_rate.imag();
        }
        if (!vdot_valid_ || !vdot_cacheable_) {
            Eigen::MatrixXd a = -real_admittance();
            for (std::size_t d = 0; d < devices_.size(); ++d) {
                const int b = devices_[d].bus;
                a.block<2, 2>(2 * b, 2 * b) += detail::real_linear_block(sens[d].direct, sens[d].conjugate);
            }
            vdot_lu_.compute(a);
            vdot_valid_ = true;
        }
        const Eigen::VectorXd w = vdot_lu_.solve(rhs);
        rec.v_dot.resize(nb_);
        rec.bus_cf.resize(nb_);
        const double wb = base_.omega_base();
        for (int b = 0; b < nb_; ++b) {
            rec.v_dot(b) = Complex(w(2 * b), w(2 * b + 1));
            rec.bus_cf[b] = cf_from_value_and_derivative(s.v(b), rec.v_dot(b), wb) + ComplexFrequency{0.0, 1.0};
        }
        rec.device_cf.resize(devices_.size());
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            const auto& model = devices_[d].model;
            const int b = devices_[d].bus;
            const auto* zip = std::get_if<ZipLoad>(&model);
            if (zip && !zip->is_constant_impedance() && !zip->is_constant_power()) {
                // no closed form: exact chain-rule rate of the injected current
                const Complex di = sens[d].source_rate + sens[d].direct * rec.v_dot(b) +
                                   sens[d].conjugate * std::conj(rec.v_dot(b));
                rec.device_cf[d] = cf_from_value_and_derivative(rec.currents[d], di, wb) + ComplexFrequency{0.0, 1.0};
            } else {
                rec.device_cf[d] = analytical_cf(model, local(s.x, d), s.v(b), rec.bus_cf[b]);
            }
        }
        return rec;
    }

private:
    void scale_loads(int bus, double factor)
    {
        for (auto& d : devices_) {
            if (auto* zip = std::get_if<ZipLoad>(&d.model); zip && d.bus == bus) {
                zip->p0 *= factor;
                zip->q0 *= factor;
            }
        }
    }

    void refresh_cacheability()
    {
        vdot_cacheable_ = std::all_of(devices_.begin(), devices_.end(),
                                      [](const Device& d) { return has_constant_voltage_sensitivity(d.model); });
    }

    Eigen::MatrixXd real_admittance() const
    {
        Eigen::MatrixXd a(2 * nb_, 2 * nb_);
        for (int r = 0; r < nb_; ++r) {
            for (int c = 0; c < nb_; ++c) {
                const Complex yrc = y_.values(r, c);
                a.block<2, 2>(2 * r, 2 * c) = detail::real_linear_block(yrc, {});
            }
        }
        return a;
    }

    DaeState step_impl(const DaeState& s, double dt, int depth)
    {
        std::vector<double> xdot_prev;
        std::vector<Complex> currents;
        evaluate(s.x, s.v, xdot_prev, currents);
        DaeState next = s;
        next.time = s.time + dt;
        if (newton(next.x, next.v, s.x, xdot_prev, dt)) {
            ++stats_.steps;
            return next;
        }
        if (depth >= 4) {
            throw NewtonDivergence("step", "Newton iteration failed at t = " + std::to_string(s.time) +
                                               " after 4 step halvings");
        }
        ++stats_.step_halvings;
        jacobian_valid_ = false;
        const DaeState mid = step_impl(s, 0.5 * dt, depth + 1);
        DaeState end = step_impl(mid, 0.5 * dt, depth + 1);
        jacobian_valid_ = false;
        return end;
    }

    /// Residual of the discretized system. h = 0 freezes the states (algebraic solve).
    Eigen::VectorXd residual(const std::vector<double>& x, const ComplexVector& v, const std::vector<double>& x_prev,
                             const std::vector<double>& xdot_prev, double h) const
    {
        std::vector<double> xdot;
        std::vector<Complex> currents;
        evaluate(x, v, xdot, currents);
        Eigen::VectorXd f(nx_ + 2 * nb_);
        for (std::size_t k = 0; k < nx_; ++k) {
            f(k) = x[k] - x_prev[k] - 0.5 * h * (xdot[k] + xdot_prev[k]);
        }
        const ComplexVector net = network_mismatch(v, currents);
        for (int b = 0; b < nb_; ++b) {
            f(nx_ + 2 * b) = net(b).real();
            f(nx_ + 2 * b + 1) = net(b).imag();
        }
        return f;
    }

    void build_jacobian(const std::vector<double>& x, const ComplexVector& v, double h)
    {
        const std::size_t n = nx_ + 2 * nb_;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        jac.topLeftCorner(nx_, nx_).setIdentity();
        jac.bottomRightCorner(2 * nb_, 2 * nb_) = -real_admittance();

        std::vector<double> xl, xdot_p, xdot_m;
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            const auto& model = devices_[d].model;
            const std::size_t m = state_count(model);
            const int b = devices_[d].bus;
            const auto row_x = static_cast<Eigen::Index>(offsets_[d]);
            const auto row_net = static_cast<Eigen::Index>(nx_ + 2 * b);
            const auto span_x = local(x, d);
            xl.assign(span_x.begin(), span_x.end());
            xdot_p.assign(m, 0.0);
            xdot_m.assign(m, 0.0);

            auto column = [&](Eigen::Index col, auto&& perturb, double step) {
                perturb(+step);
                const Complex ip = evaluate_device(model, xl, vb_, xdot_p);
                perturb(-2.0 * step);
                const Complex im = evaluate_device(model, xl, vb_, xdot_m);
                perturb(+step);
                for (std::size_t r = 0; r < m; ++r) {
                    jac(row_x + static_cast<Eigen::Index>(r), col) -= 0.5 * h * (xdot_p[r] - xdot_m[r]) / (2.0 * step);
                }
                const Complex di = (ip - im) / (2.0 * step);
                jac(row_net, col) += di.real();
                jac(row_net + 1, col) += di.imag();
            };

            vb_ = v(b);
            for (std::size_t k = 0; k < m; ++k) {
                const double step = 1e-6 * std::max(1.0, std::abs(xl[k]));
                column(row_x + static_cast<Eigen::Index>(k), [&](double dlt) { xl[k] += dlt; }, step);
            }
            const double vstep = 1e-6 * std::max(1.0, std::abs(vb_));
            column(row_net, [&](double dlt) { vb_ += dlt; }, vstep);
            column(row_net + 1, [&](double dlt) { vb_ += Complex(0.0, dlt); }, vstep);
        }
        lu_.compute(jac);
        jacobian_h_ = h;
        jacobian_valid_ = true;
        ++stats_.jacobian_updates;
    }

    bool newton(std::vector<double>& x, ComplexVector& v, const std::vector<double>& x_prev,
                const std::vector<double>& xdot_prev, double h)
    {
        constexpr int max_iterations = 30;
        double previous = std::numeric_limits<double>::infinity();
        bool fresh = false;
        for (int it = 0; it < max_iterations; ++it) {
            const Eigen::VectorXd f = residual(x, v, x_prev, xdot_prev, h);
            const double norm = f.cwiseAbs().maxCoeff();
            if (!std::isfinite(norm)) {
                return false;
            }
            const bool slow = norm > 0.25 * previous;
            // converge well below the tolerance unless the iteration has stalled
            if (norm < 1e-3 * tolerance_ || (norm < tolerance_ && slow)) {
                return true;
            }
            if (!jacobian_valid_ || jacobian_h_ != h || (slow && !fresh)) {
                build_jacobian(x, v, h);
                fresh = true;
            } else if (slow) {
                return false; // fresh Jacobian and still not contracting
            } else {
                fresh = false;
            }
            previous = norm;
            const Eigen::VectorXd dz = lu_.solve(-f);
            for (std::size_t k = 0; k < nx_; ++k) {
                x[k] += dz(k);
            }
            for (int b = 0; b < nb_; ++b) {
                v(b) += Complex(dz(nx_ + 2 * b), dz(nx_ + 2 * b + 1));
            }
            ++stats_.newton_iterations;
        }
        return false;
    }

    NetworkTopology network_;
    AdmittanceMatrix y_;
    std::vector<Device> devices_;
    SystemBase base_;
    double tolerance_;
    int nb_ = 0;
    std::size_t nx_ = 0;
    std::vector<std::size_t> offsets_;

    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double jacobian_h_ = -1.0;
    bool jacobian_valid_ = false;
    Complex vb_{0.0, 0.0};

    Eigen::PartialPivLU<Eigen::MatrixXd> vdot_lu_;
    bool vdot_valid_ = false;
    bool vdot_cacheable_ = true;

    RunStats stats_;
};

/// Uniformly sampled simulation output. Phasors are in the synchronous frame;
/// complex frequencies are analytical, stationary-frame, stored as rho + j omega.
struct Trajectory {
    std::vector<std::string> bus_names;
    std::vector<std::string> device_names;
    std::vector<std::string> device_types;
    std::vector<int> device_buses;
    std::vector<std::size_t> state_offsets;
    double dt = 0.0;
    double omega_base = 0.0;

    std::vector<double> times;
    Eigen::MatrixXd states;      ///< samples x states
    ComplexMatrix voltages;      ///< samples x buses
    ComplexMatrix currents;      ///< samples x devices
    ComplexMatrix device_cf;     ///< samples x devices
    ComplexMatrix bus_cf;        ///< samples x buses
    std::vector<std::size_t> event_samples;
    RunStats stats;

    std::size_t sample_count() const { return times.size(); }

    std::vector<ComplexFrequency> cf_series(std::size_t device) const
    {
        std::vector<ComplexFrequency> out(times.size());
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = ComplexFrequency::from_complex(device_cf(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(device)));
        }
        return out;
    }
};

/// Sample index an event snaps to.
inline std::size_t event_sample_index(double time, double dt) { return static_cast<std::size_t>(std::llround(time / dt)); }

/// Power flow, initialization and fixed-step integration with events applied at step boundaries.
inline Trajectory run(const Scenario& sc)
{
    validate_scenario(sc);
    const auto pf = power_flow(sc);
    auto ic = initialize(sc, pf.voltages);
    DaeSystem sys(sc.network, std::move(ic.devices), sc.system, sc.simulation.tolerance);
    DaeState state = std::move(ic.state);

    const double dt = sc.simulation.dt;
    const auto steps = static_cast<std::size_t>(std::llround(sc.simulation.t_end / dt));
    const std::size_t samples = steps + 1;

    Trajectory tr;
    for (const auto& b : sc.network.buses) {
        tr.bus_names.push_back(b.name.empty() ? std::to_string(b.id) : b.name);
    }
    for (const auto& d : sc.devices) {
        tr.device_names.push_back(d.name);
        tr.device_types.emplace_back(type_name(d.model));
        tr.device_buses.push_back(d.bus);
    }
    tr.state_offsets = sys.state_offsets();
    tr.dt = dt;
    tr.omega_base = sc.system.omega_base();
    tr.times.resize(samples);
    const auto nd = static_cast<Eigen::Index>(sc.devices.size());
    const auto nb = static_cast<Eigen::Index>(sys.bus_count());
    tr.states.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(sys.state_size()));
    tr.voltages.resize(static_cast<Eigen::Index>(samples), nb);
    tr.currents.resize(static_cast<Eigen::Index>(samples), nd);
    tr.device_cf.resize(static_cast<Eigen::Index>(samples), nd);
    tr.bus_cf.resize(static_cast<Eigen::Index>(samples), nb);

    std::vector<std::pair<std::size_t, const Event*>> pending;
    for (const auto& ev : sc.events) {
        pending.emplace_back(std::min(event_sample_index(ev.time, dt), steps), &ev);
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    auto next_event = pending.begin();

    for (std::size_t k = 0; k < samples; ++k) {
        state.time = static_cast<double>(k) * dt;
        bool changed = false;
        while (next_event != pending.end() && next_event->first == k) {
            sys.apply_event(next_event->second->action, sc.system.s_base);
            ++next_event;
            changed = true;
        }
        if (changed) {
            sys.solve_algebraic(state);
            tr.event_samples.push_back(k);
        }
        const auto rec = sys.sample(state);
        const auto row = static_cast<Eigen::Index>(k);
        tr.times[k] = state.time;
        for (std::size_t j = 0; j < state.x.size(); ++j) {
            tr.states(row, static_cast<Eigen::Index>(j)) = state.x[j];
        }
        tr.voltages.row(row) = state.v.transpose();
        for (Eigen::Index d = 0; d < nd; ++d) {
            tr.currents(row, d) = rec.currents[static_cast<std::size_t>(d)];
            tr.device_cf(row, d) = rec.device_cf[static_cast<std::size_t>(d)].as_complex();
        }
        for (Eigen::Index b = 0; b < nb; ++b) {
            tr.bus_cf(row, b) = rec.bus_cf[static_cast<std::size_t>(b)].as_complex();
        }
        if (k + 1 < samples) {
            state = sys.step(state, dt);
        }
    }
    tr.stats = sys.stats();
    return tr;
}

} // namespace cfcoh
