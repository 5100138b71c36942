#pragma once

// Newton-Raphson power flow (polar form) used to set the initial operating point.
// Loads enter as constant power p0 + j q0; generation buses hold |v| = v_set and
// inject the sum of their devices' p_set.

#include "cfcoh/scenario.hpp"

#include <limits>

namespace cfcoh {

struct PowerFlowResult {
    ComplexVector voltages;
    int iterations = 0;
    double max_mismatch = 0.0;
};

inline constexpr int kPowerFlowMaxIterations = 50;
inline constexpr double kPowerFlowTolerance = 1e-8;

/// Net complex power injected into the network at every bus: v conj(Y v).
inline ComplexVector bus_power_injection(const AdmittanceMatrix& y, const ComplexVector& v)
{
    return v.cwiseProduct((y.values * v).conjugate());
}

inline ComplexVector scheduled_injection(const Scenario& sc)
{
    ComplexVector s = ComplexVector::Zero(sc.network.bus_count());
    for (const auto& d : sc.devices) {
        if (const auto* zip = std::get_if<ZipLoad>(&d.model)) {
            s(d.bus) -= Complex(zip->p0, zip->q0);
        } else {
            s(d.bus) += d.p_set;
        }
    }
    return s;
}

inline PowerFlowResult power_flow(const Scenario& sc)
{
    const auto y = build_admittance(sc.network);
    const int n = sc.network.bus_count();
    const auto& buses = sc.network.buses;

    std::vector<int> angle_idx;     // non-slack buses
    std::vector<int> magnitude_idx; // load buses
    ComplexVector v(n);
    for (const auto& b : buses) {
        const double mag = b.kind == BusKind::load ? 1.0 : b.v_set;
        const double ang = b.kind == BusKind::slack ? b.angle : 0.0;
        v(b.id) = std::polar(mag, ang);
        if (b.kind != BusKind::slack) {
            angle_idx.push_back(b.id);
        }
        if (b.kind == BusKind::load) {
            magnitude_idx.push_back(b.id);
        }
    }
    if (sc.network.buses.end() ==
        std::find_if(buses.begin(), buses.end(), [](const Bus& b) { return b.kind == BusKind::slack; })) {
        throw InvalidModel("power flow requires a slack bus");
    }
    const ComplexVector s_sched = scheduled_injection(sc);
    const auto na = static_cast<Eigen::Index>(angle_idx.size());
    const auto nm = static_cast<Eigen::Index>(magnitude_idx.size());

    auto mismatch = [&](const ComplexVector& vv) {
        const ComplexVector ds = bus_power_injection(y, vv) - s_sched;
        Eigen::VectorXd f(na + nm);
        for (Eigen::Index k = 0; k < na; ++k) {
            f(k) = ds(angle_idx[k]).real();
        }
        for (Eigen::Index k = 0; k < nm; ++k) {
            f(na + k) = ds(magnitude_idx[k]).imag();
        }
        return f;
    };

    PowerFlowResult result;
    Eigen::VectorXd f = mismatch(v);
    result.max_mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    double previous = std::numeric_limits<double>::infinity();
    while (result.max_mismatch > 1e-13 && result.iterations < kPowerFlowMaxIterations) {
        if (result.max_mismatch < kPowerFlowTolerance && result.max_mismatch > 0.5 * previous) {
            break; // rounding floor reached
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        const ComplexVector current = y.values * v;
        const ComplexVector vnorm = v.cwiseQuotient(v.cwiseAbs().cast<Complex>());
        ComplexMatrix ds_da = -(y.values * v.asDiagonal()).conjugate();
        ds_da.diagonal() += current.conjugate();
        ds_da = (Complex(0.0, 1.0) * v).asDiagonal() * ds_da;
        ComplexMatrix ds_dm = v.asDiagonal() * (y.values * vnorm.asDiagonal()).conjugate();
        ds_dm.diagonal() += current.conjugate().cwiseProduct(vnorm);

        Eigen::MatrixXd jac(na + nm, na + nm);
        for (Eigen::Index r = 0; r < na; ++r) {
            for (Eigen::Index c = 0; c < na; ++c) {
                jac(r, c) = ds_da(angle_idx[r], angle_idx[c]).real();
            }
            for (Eigen::Index c = 0; c < nm; ++c) {
                jac(r, na + c) = ds_dm(angle_idx[r], magnitude_idx[c]).real();
            }
        }
        for (Eigen::Index r = 0; r < nm; ++r) {
            for (Eigen::Index c = 0; c < na; ++c) {
                jac(na + r, c) = ds_da(magnitude_idx[r], angle_idx[c]).imag();
            }
            for (Eigen::Index c = 0; c < nm; ++c) {
                jac(na + r, na + c) = ds_dm(magnitude_idx[r], magnitude_idx[c]).imag();
            }
        }
        const Eigen::VectorXd dx = jac.partialPivLu().solve(-f);
        Eigen::VectorXd angle = v.unaryExpr([](Complex z) { return std::arg(z); }).real();
        Eigen::VectorXd mag = v.cwiseAbs();
        for (Eigen::Index k = 0; k < na; ++k) {
            angle(angle_idx[k]) += dx(k);
        }
        for (Eigen::Index k = 0; k < nm; ++k) {
            mag(magnitude_idx[k]) += dx(na + k);
        }
        for (int k = 0; k < n; ++k) {
            v(k) = std::polar(mag(k), angle(k));
        }
        previous = result.max_mismatch;
        f = mismatch(v);
        result.max_mismatch = f.cwiseAbs().maxCoeff();
        ++result.iterations;
        if (!std::isfinite(result.max_mismatch)) {
            break;
        }
    }
    if (!(result.max_mismatch < kPowerFlowTolerance)) {
        throw NonConvergence("power_flow", "mismatch " + std::to_string(result.max_mismatch) + " after " +
                                               std::to_string(result.iterations) + " iterations");
    }
    result.voltages = std::move(v);
    return result;
}

} // namespace cfcoh
