#pragma once

// Algebraic transmission network: admittance/impedance matrices, KCL
// residual, branch currents and per-device power contributions.

#include "cfcoh/primitives.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace cfcoh {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

enum class BusKind { slack, generation, load };

struct Bus {
    int id = 0;
    std::string name;
    double nominal_voltage = 1.0; ///< informational (kV)
    BusKind kind = BusKind::load;
    double v_set = 1.0;           ///< slack/generation voltage magnitude set-point (pu)
    double angle = 0.0;           ///< slack angle (rad)

    friend bool operator==(const Bus&, const Bus&) = default;
};

/// Pi-model branch; the total shunt admittance is split evenly between ends. An
/// off-nominal tap sits on the from side (t:1).
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    ClarkeVector series_impedance{0.0, 0.0};
    ClarkeVector shunt_admittance_total{0.0, 0.0};
    double tap_ratio = 1.0;

    friend bool operator==(const Branch&, const Branch&) = default;
};

struct FixedShunt {
    int bus = 0;
    ClarkeVector admittance{0.0, 0.0};

    friend bool operator==(const FixedShunt&, const FixedShunt&) = default;
};

struct AdmittanceMatrix {
    ComplexMatrix values;
    Eigen::Index size() const { return values.rows(); }
};

struct ImpedanceMatrix {
    ComplexMatrix values;
    Eigen::Index size() const { return values.rows(); }
};

/// Current injected at a bus by one device (positive into the network).
struct DeviceInjection {
    int bus = 0;
    ClarkeVector current{0.0, 0.0};
};

inline constexpr double kSingularRcond = 1e-12;

struct NetworkTopology {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<FixedShunt> shunts;

    int bus_count() const { return static_cast<int>(buses.size()); }

    friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;
};

namespace detail {

inline int find_root(std::vector<int>& parent, int a)
{
    while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    return a;
}

} // namespace detail

/// Checks ids are 0..N-1, branch endpoints are valid and the graph is connected.
inline void validate_topology(const NetworkTopology& net)
{
    const int n = net.bus_count();
    if (n == 0) {
        throw InvalidModel("network has no buses");
    }
    for (int k = 0; k < n; ++k) {
        if (net.buses[k].id != k) {
            throw InvalidModel("bus ids must be contiguous 0..N-1 in declaration order; bus #" +
                               std::to_string(k) + " has id " + std::to_string(net.buses[k].id));
        }
    }
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& br : net.branches) {
        if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n) {
            throw InvalidModel("branch references unknown bus");
        }
        if (br.from_bus == br.to_bus) {
            throw InvalidModel("branch from_bus == to_bus (" + std::to_string(br.from_bus) + ")");
        }
        if (!(br.tap_ratio > 0.0)) {
            throw InvalidModel("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                               " has a non-positive tap ratio");
        }
        if (!(std::abs(br.series_impedance) > 0.0)) {
            throw ZeroImpedanceBranch("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                                      " has zero series impedance");
        }
        parent[detail::find_root(parent, br.from_bus)] = detail::find_root(parent, br.to_bus);
    }
    for (const auto& sh : net.shunts) {
        if (sh.bus < 0 || sh.bus >= n) {
            throw InvalidModel("shunt references unknown bus");
        }
    }
    const int root = detail::find_root(parent, 0);
    for (int k = 1; k < n; ++k) {
        if (detail::find_root(parent, k) != root) {
            throw DisconnectedNetwork("bus " + std::to_string(k) + " is not connected to bus 0");
        }
    }
}

inline AdmittanceMatrix build_admittance(const NetworkTopology& net)
{
    validate_topology(net);
    const int n = net.bus_count();
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (const auto& br : net.branches) {
        const Complex ys = 1.0 / br.series_impedance;
        const Complex half = 0.5 * br.shunt_admittance_total;
        const double t = br.tap_ratio;
        y(br.from_bus, br.from_bus) += (ys + half) / (t * t);
        y(br.to_bus, br.to_bus) += ys + half;
        y(br.from_bus, br.to_bus) -= ys / t;
        y(br.to_bus, br.from_bus) -= ys / t;
    }
    for (const auto& sh : net.shunts) {
        y(sh.bus, sh.bus) += sh.admittance;
    }
    return {std::move(y)};
}

/// Z = Y^-1. Throws SingularAdmittance when the reciprocal condition estimate is below 1e-12
/// or the inverse does not reproduce the identity to 1e-10.
inline ImpedanceMatrix impedance_matrix(const AdmittanceMatrix& y)
{
    const auto n = y.size();
    Eigen::PartialPivLU<ComplexMatrix> lu(y.values);
    const double rcond = lu.rcond();
    if (!(rcond >= kSingularRcond)) {
        throw SingularAdmittance("admittance matrix is singular (rcond " + std::to_string(rcond) + ")");
    }
    ComplexMatrix z = lu.inverse();
    const double residual = (y.values * z - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
    if (!(residual < 1e-10)) {
        throw SingularAdmittance("admittance inverse residual " + std::to_string(residual));
    }
    return {std::move(z)};
}

/// residual_h = sum of device currents at h - (Y v)_h. Zero at a consistent network state.
inline ComplexVector network_residual(const AdmittanceMatrix& y, const ComplexVector& bus_voltages,
                                      std::span<const DeviceInjection> injections)
{
    ComplexVector r = -(y.values * bus_voltages);
    for (const auto& inj : injections) {
        r(inj.bus) += inj.current;
    }
    return r;
}

/// Current leaving bus h through all branches connecting h and j (shunt halves at h included).
inline ClarkeVector branch_current(const NetworkTopology& net, int h, int j, const ComplexVector& v)
{
    Complex total{0.0, 0.0};
    bool found = false;
    for (const auto& br : net.branches) {
        const bool forward = br.from_bus == h && br.to_bus == j;
        const bool backward = br.from_bus == j && br.to_bus == h;
        if (!forward && !backward) {
            continue;
        }
        found = true;
        const Complex ys = 1.0 / br.series_impedance;
        const Complex half = 0.5 * br.shunt_admittance_total;
        const double t = br.tap_ratio;
        if (forward) {
            total += (ys + half) / (t * t) * v(h) - ys / t * v(j);
        } else {
            total += (ys + half) * v(h) - ys / t * v(j);
        }
    }
    if (!found) {
        throw NoSuchBranch("no branch between buses " + std::to_string(h) + " and " + std::to_string(j));
    }
    return total;
}

/// Contribution of a device (injecting `device_current` at `device_bus`) to the complex
/// power flowing from bus h along `dir_current`: conj(i_{h->j}) * z_{h,b_d} * i_d.
inline ClarkeVector power_contribution(int h, ClarkeVector dir_current, int device_bus, const ImpedanceMatrix& z,
                                       ClarkeVector device_current)
{
    return std::conj(dir_current) * z.values(h, device_bus) * device_current;
}

} // namespace cfcoh
