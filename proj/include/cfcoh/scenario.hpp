#pragma once

// Study definition: network, devices with bus attachments, discrete events,
// integration settings and analysis options.

#include "cfcoh/devices.hpp"
#include "cfcoh/network.hpp"

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace cfcoh {

struct SystemBase {
    double f_nominal = 60.0; ///< Hz
    double s_base = 100.0;   ///< MVA

    double omega_base() const { return 2.0 * kPi * f_nominal; }

    friend bool operator==(const SystemBase&, const SystemBase&) = default;
};

/// Multiplies p0 and q0 of every ZIP load at `bus`.
struct LoadScale {
    int bus = 0;
    double factor = 1.0;
    friend bool operator==(const LoadScale&, const LoadScale&) = default;
};

/// Removes `amount_mw` of active load at `bus`, scaling p0 and q0 by 1 - amount / P_bus.
struct LoadDisconnect {
    int bus = 0;
    double amount_mw = 0.0;
    friend bool operator==(const LoadDisconnect&, const LoadDisconnect&) = default;
};

struct ParameterSet {
    std::string device;
    std::string name;
    double value = 0.0;
    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

using EventAction = std::variant<LoadScale, LoadDisconnect, ParameterSet>;

struct Event {
    double time = 0.0;
    EventAction action;
    friend bool operator==(const Event&, const Event&) = default;
};

struct SimulationSettings {
    double t_end = 10.0;
    double dt = 1e-3;
    double tolerance = 1e-8; ///< Newton residual (max-norm)

    friend bool operator==(const SimulationSettings&, const SimulationSettings&) = default;
};

/// Direction j of an observation: towards a neighbouring bus, or drawn by a shunt device at h.
struct ObservationPoint {
    int bus = 0;
    std::optional<int> to_bus;
    std::optional<std::string> device;

    friend bool operator==(const ObservationPoint&, const ObservationPoint&) = default;
};

struct AnalysisSettings {
    std::optional<std::pair<double, double>> window; ///< default: first event + 5 samples .. t_end
    int k_clusters = 4;
    std::vector<ObservationPoint> observation_points;
    std::vector<std::string> devices; ///< devices to cluster; empty = every generation device

    friend bool operator==(const AnalysisSettings&, const AnalysisSettings&) = default;
};

struct Scenario {
    std::string description;
    SystemBase system;
    NetworkTopology network;
    std::vector<Device> devices;
    std::vector<Event> events;
    SimulationSettings simulation;
    AnalysisSettings analysis;

    friend bool operator==(const Scenario&, const Scenario&) = default;

    int device_index(const std::string& name) const
    {
        for (std::size_t k = 0; k < devices.size(); ++k) {
            if (devices[k].name == name) {
                return static_cast<int>(k);
            }
        }
        return -1;
    }
};

/// Propagates the system frequency base into every device model.
inline void apply_system_base(Scenario& sc)
{
    const double wb = sc.system.omega_base();
    for (auto& d : sc.devices) {
        std::visit(
            [wb](auto& m) {
                if constexpr (requires { m.omega_base; }) {
                    m.omega_base = wb;
                }
            },
            d.model);
    }
}

/// Cross-reference and range checks; throws InvalidModel.
inline void validate_scenario(const Scenario& sc)
{
    validate_topology(sc.network);
    const int n = sc.network.bus_count();
    int slack_count = 0;
    for (const auto& b : sc.network.buses) {
        if (b.kind == BusKind::slack) {
            ++slack_count;
        }
        if (b.kind != BusKind::load && !(b.v_set > 0.0)) {
            throw InvalidModel("bus " + std::to_string(b.id) + ": v_set must be positive");
        }
    }
    if (slack_count != 1) {
        throw InvalidModel("exactly one slack bus is required (found " + std::to_string(slack_count) + ")");
    }
    std::set<std::string> names;
    std::vector<int> generation_at(n, 0);
    for (const auto& d : sc.devices) {
        if (d.name.empty() || !names.insert(d.name).second) {
            throw InvalidModel("device names must be unique and non-empty ('" + d.name + "')");
        }
        if (d.bus < 0 || d.bus >= n) {
            throw InvalidModel("device " + d.name + " references unknown bus " + std::to_string(d.bus));
        }
        validate_device(d.model);
        if (is_generation(d.model)) {
            if (sc.network.buses[d.bus].kind == BusKind::load) {
                throw InvalidModel("generation device " + d.name + " must sit on a slack or generation bus");
            }
            ++generation_at[d.bus];
        }
    }
    for (const auto& b : sc.network.buses) {
        if (b.kind != BusKind::load && generation_at[b.id] == 0) {
            throw InvalidModel("bus " + std::to_string(b.id) + " is a " +
                               (b.kind == BusKind::slack ? "slack" : "generation") + " bus without generation devices");
        }
    }
    if (!(sc.simulation.dt > 0.0) || !(sc.simulation.t_end > 0.0) || !(sc.simulation.tolerance > 0.0)) {
        throw InvalidModel("simulation: dt, t_end and tolerance must be positive");
    }
    for (const auto& ev : sc.events) {
        if (ev.time < 0.0 || ev.time > sc.simulation.t_end) {
            throw InvalidModel("event time " + std::to_string(ev.time) + " outside [0, t_end]");
        }
        std::visit(
            [&](const auto& a) {
                using A = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<A, ParameterSet>) {
                    if (sc.device_index(a.device) < 0) {
                        throw InvalidModel("event references unknown device " + a.device);
                    }
                } else {
                    if (a.bus < 0 || a.bus >= n) {
                        throw InvalidModel("event references unknown bus " + std::to_string(a.bus));
                    }
                }
            },
            ev.action);
    }
    for (const auto& op : sc.analysis.observation_points) {
        if (op.bus < 0 || op.bus >= n || op.to_bus.has_value() == op.device.has_value()) {
            throw InvalidModel("observation point needs a valid bus and exactly one of to_bus / device");
        }
        if (op.device && sc.device_index(*op.device) < 0) {
            throw InvalidModel("observation point references unknown device " + *op.device);
        }
        if (op.device && sc.devices[sc.device_index(*op.device)].bus != op.bus) {
            throw InvalidModel("observation device " + *op.device + " is not connected at bus " +
                               std::to_string(op.bus));
        }
        if (op.to_bus && (*op.to_bus < 0 || *op.to_bus >= n)) {
            throw InvalidModel("observation point references unknown bus");
        }
    }
    for (const auto& name : sc.analysis.devices) {
        if (sc.device_index(name) < 0) {
            throw InvalidModel("analysis references unknown device " + name);
        }
    }
    if (sc.analysis.window && !(sc.analysis.window->first < sc.analysis.window->second)) {
        throw InvalidModel("analysis window must satisfy start < end");
    }
    if (sc.analysis.k_clusters < 1) {
        throw InvalidModel("k_clusters must be >= 1");
    }
}

} // namespace cfcoh
