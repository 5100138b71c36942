#pragma once

// Dynamic device models: classical synchronous machine, ZIP load,
// grid-following and grid-forming converters behind an output filter.
//
// All quantities are per unit on the system base and expressed in the
// synchronously rotating phasor frame. Complex frequencies returned by this
// header are stationary-frame values (synchronous rotation = j1 pu).
// Currents are positive when injected into the network.

#include "cfcoh/primitives.hpp"

#include <array>
#include <string>
#include <string_view>
#include <variant>

namespace cfcoh {

// ---------------------------------------------------------------------------
// Synchronous machine, lossless classical model
// ---------------------------------------------------------------------------

struct SynchronousMachine {
    double inertia = 1.0;        ///< M (s)
    double damping = 0.0;        ///< D (pu)
    double xd_prime = 0.1;       ///< x'_d (pu)
    double p_m = 0.0;            ///< mechanical power (pu), set by initialization
    double e_q_prime = 1.0;      ///< |E| (pu), set by initialization
    double omega_base = 2.0 * kPi * 60.0;

    friend bool operator==(const SynchronousMachine&, const SynchronousMachine&) = default;
};

struct SmState {
    double delta = 0.0;   ///< rad, relative to the synchronous frame
    double omega_r = 1.0; ///< pu
};

struct SmResiduals {
    SmState derivative;
    ClarkeVector current;  ///< injected
    ClarkeVector emf;      ///< E = e'_q exp(j delta)
    double p_e = 0.0;
    double algebraic_residual = 0.0; ///< |j x'_d i - E + v|
};

inline ClarkeVector sm_emf(const SynchronousMachine& sm, const SmState& x)
{
    return std::polar(sm.e_q_prime, x.delta);
}

inline SmResiduals sm_residuals(const SynchronousMachine& sm, const SmState& x, ClarkeVector v_terminal)
{
    SmResiduals r;
    r.emf = sm_emf(sm, x);
    r.current = (r.emf - v_terminal) / Complex(0.0, sm.xd_prime);
    r.p_e = (r.emf * std::conj(r.current)).real();
    r.derivative.delta = sm.omega_base * (x.omega_r - 1.0);
    r.derivative.omega_r = (sm.p_m - r.p_e - sm.damping * (x.omega_r - 1.0)) / sm.inertia;
    r.algebraic_residual = std::abs(Complex(0.0, sm.xd_prime) * r.current - r.emf + v_terminal);
    return r;
}

/// CF of the current injected by a classical machine:
///   eta_i = s / (j x'_d i^2) (j omega_r - eta_v) + j omega_r
inline ComplexFrequency sm_cf(double xd_prime, double omega_r, ClarkeVector s, ClarkeVector i,
                              ComplexFrequency eta_v)
{
    require_magnitude(i, "sm_cf");
    const Complex jw{0.0, omega_r};
    const Complex eta = s / (Complex(0.0, xd_prime) * std::norm(i)) * (jw - eta_v.as_complex()) + jw;
    return ComplexFrequency::from_complex(eta);
}

/// Residual of the sufficient coherency condition for two parallel classical machines,
///   x'_d1 / x'_d2 = M_2 / M_1 = i_2(t0) / i_1(t0).
inline double sm_coherency_condition(const SynchronousMachine& sm1, const SynchronousMachine& sm2, double i1_0,
                                     double i2_0)
{
    const double reactance_ratio = sm1.xd_prime / sm2.xd_prime;
    const double inertia_ratio = sm2.inertia / sm1.inertia;
    const double current_ratio = i2_0 / i1_0;
    return std::max(std::abs(reactance_ratio - inertia_ratio), std::abs(inertia_ratio - current_ratio));
}

// ---------------------------------------------------------------------------
// ZIP load
// ---------------------------------------------------------------------------

/// p = p0 (k_pp + k_ip u + k_zp u^2), q likewise, with u = |v| / v0.
/// v0 is the initialization voltage magnitude (1 pu unless initialized).
struct ZipLoad {
    double p0 = 0.0;
    double q0 = 0.0;
    double k_pp = 0.0, k_ip = 0.0, k_zp = 1.0;
    double k_pq = 0.0, k_iq = 0.0, k_zq = 1.0;
    double v0 = 1.0;

    bool is_constant_impedance() const { return k_zp == 1.0 && k_zq == 1.0; }
    bool is_constant_power() const { return k_pp == 1.0 && k_pq == 1.0; }

    friend bool operator==(const ZipLoad&, const ZipLoad&) = default;
};

/// Complex power drawn by the load at voltage magnitude `vmag`.
inline Complex zip_power(const ZipLoad& load, double vmag)
{
    const double u = vmag / load.v0;
    return {load.p0 * (load.k_pp + load.k_ip * u + load.k_zp * u * u),
            load.q0 * (load.k_pq + load.k_iq * u + load.k_zq * u * u)};
}

/// d(zip_power)/d|v|
inline Complex zip_power_slope(const ZipLoad& load, double vmag)
{
    const double u = vmag / load.v0;
    return Complex{load.p0 * (load.k_ip + 2.0 * load.k_zp * u), load.q0 * (load.k_iq + 2.0 * load.k_zq * u)} /
           load.v0;
}

/// Injected current -conj(s / v). The impedance share stays defined at v = 0.
inline ClarkeVector zip_current(const ZipLoad& load, ClarkeVector v)
{
    const Complex s_z{load.p0 * load.k_zp, load.q0 * load.k_zq};
    Complex i = -std::conj(s_z) * v / (load.v0 * load.v0);
    const bool needs_magnitude = load.k_pp != 0.0 || load.k_pq != 0.0 || load.k_ip != 0.0 || load.k_iq != 0.0;
    if (needs_magnitude) {
        require_magnitude(v, "zip_current");
        const double vmag = std::abs(v);
        const double u = vmag / load.v0;
        const Complex s_rest{load.p0 * (load.k_pp + load.k_ip * u), load.q0 * (load.k_pq + load.k_iq * u)};
        i -= std::conj(s_rest / v);
    }
    return i;
}

/// Constant-impedance load: the current follows the voltage.
inline ComplexFrequency zload_cf(ComplexFrequency eta_v) { return eta_v; }

/// Constant-power load: eta_i = -conj(eta_v).
inline ComplexFrequency sload_cf(ComplexFrequency eta_v) { return {-eta_v.rho, eta_v.omega}; }

inline ComplexFrequency zip_cf(const ZipLoad& load, ComplexFrequency eta_v)
{
    if (load.is_constant_impedance()) {
        return zload_cf(eta_v);
    }
    if (load.is_constant_power()) {
        return sload_cf(eta_v);
    }
    throw NotAnalytical("ZIP load with mixed components has no closed-form current CF");
}

// ---------------------------------------------------------------------------
// Converters: controlled voltage source behind a filter
// ---------------------------------------------------------------------------

struct IbrFilter {
    ClarkeVector z_f{0.0, 0.1}; ///< series impedance
    ClarkeVector y_f{0.0, 0.0}; ///< shunt admittance at the terminal
    double v_dc0 = 1.0;

    friend bool operator==(const IbrFilter&, const IbrFilter&) = default;
};

/// i = (e - (1 + z_f y_f) v) / z_f
inline ClarkeVector ibr_current(const IbrFilter& f, ClarkeVector e, ClarkeVector v)
{
    return (e - (1.0 + f.z_f * f.y_f) * v) / f.z_f;
}

/// Internal EMF required to inject current i at terminal voltage v.
inline ClarkeVector ibr_emf(const IbrFilter& f, ClarkeVector i, ClarkeVector v)
{
    return (1.0 + f.z_f * f.y_f) * v + f.z_f * i;
}

/// CF of the current injected by a voltage source behind a filter:
///   eta_i = s / (z_f i^2) (1 + z_f y_f)(eta_e - eta_v) + eta_e
inline ComplexFrequency ibr_cf(ClarkeVector s, ClarkeVector i, ClarkeVector z_f, ClarkeVector y_f,
                               ComplexFrequency eta_e, ComplexFrequency eta_v)
{
    require_magnitude(i, "ibr_cf");
    if (!(std::abs(z_f) > 0.0)) {
        throw InvalidModel("ibr_cf: zero filter impedance");
    }
    const Complex ee = eta_e.as_complex();
    const Complex eta = s / (z_f * std::norm(i)) * (1.0 + z_f * y_f) * (ee - eta_v.as_complex()) + ee;
    return ComplexFrequency::from_complex(eta);
}

/// Grid-following converter: SRF-PLL plus PI current control with fixed dq references.
struct GridFollowingConverter {
    IbrFilter filter;
    double k_p = 0.1;       ///< current PI proportional gain
    double k_i = 10.0;      ///< current PI integral gain (1/s)
    double t_m = 0.005;     ///< current measurement time constant (s)
    double k_p_pll = 0.1;
    double k_i_pll = 1.0;
    ClarkeVector i_ref{0.0, 0.0}; ///< dq reference, set by initialization
    double omega_ref = 1.0;
    double omega_base = 2.0 * kPi * 60.0;

    friend bool operator==(const GridFollowingConverter&, const GridFollowingConverter&) = default;
};

struct GflState {
    ClarkeVector x{0.0, 0.0};   ///< PI integrator (dq)
    ClarkeVector i_m{0.0, 0.0}; ///< measured current (dq)
    double x_pll = 0.0;
    double theta = 0.0;         ///< PLL angle relative to the synchronous frame (rad)
};

struct GflResiduals {
    GflState derivative;
    ClarkeVector m{0.0, 0.0};   ///< modulation (dq)
    ClarkeVector e{0.0, 0.0};   ///< internal voltage, network frame
    ClarkeVector v_dq{0.0, 0.0};
    double omega_tilde = 1.0;   ///< PLL frequency estimate (pu)
    ComplexFrequency eta_e;
};

inline ClarkeVector gfl_modulation(const GridFollowingConverter& c, const GflState& x)
{
    return x.x + c.k_p * (c.i_ref - x.i_m);
}

inline ClarkeVector gfl_internal_voltage(const GridFollowingConverter& c, const GflState& x)
{
    return gfl_modulation(c, x) * c.filter.v_dc0 * std::polar(1.0, x.theta);
}

/// State derivatives and internal-source CF. eta_e = (dm/dt)/(m Omega_b) + j omega_tilde with
/// dm/dt = dx/dt - K_p di_m/dt taken from the state equations.
inline GflResiduals gfl_residuals(const GridFollowingConverter& c, const GflState& x, ClarkeVector v_terminal,
                                  ClarkeVector i_injected)
{
    GflResiduals r;
    const Complex to_dq = std::polar(1.0, -x.theta);
    r.v_dq = v_terminal * to_dq;
    const Complex i_dq = i_injected * to_dq;
    const double v_q = r.v_dq.imag();
    const double delta_omega = c.k_p_pll * v_q + x.x_pll;
    r.omega_tilde = delta_omega + c.omega_ref;

    r.derivative.x = c.k_i * (c.i_ref - x.i_m);
    r.derivative.i_m = (i_dq - x.i_m) / c.t_m;
    r.derivative.x_pll = c.k_i_pll * v_q;
    r.derivative.theta = c.omega_base * (r.omega_tilde - 1.0);

    r.m = gfl_modulation(c, x);
    r.e = r.m * c.filter.v_dc0 * std::polar(1.0, x.theta);
    require_magnitude(r.m, "gfl_residuals");
    const Complex m_dot = r.derivative.x - c.k_p * r.derivative.i_m;
    r.eta_e = ComplexFrequency::from_complex(m_dot / r.m / c.omega_base) + ComplexFrequency{0.0, r.omega_tilde};
    return r;
}

/// Grid-forming converter: power-frequency droop and voltage-magnitude PI.
struct GridFormingConverter {
    IbrFilter filter;
    double k_p = 0.1;    ///< voltage PI proportional gain
    double k_i = 5.0;    ///< voltage PI integral gain (1/s)
    double t_v = 0.02;   ///< voltage measurement time constant (s)
    double t_p = 0.02;   ///< power measurement time constant (s)
    double m_p = 0.05;   ///< droop gain (pu frequency / pu power)
    double p_ref = 0.0;  ///< set by initialization
    double v_ref = 1.0;  ///< set by initialization
    double omega_base = 2.0 * kPi * 60.0;

    friend bool operator==(const GridFormingConverter&, const GridFormingConverter&) = default;
};

struct GfmState {
    double e = 1.0;     ///< internal voltage magnitude
    double delta = 0.0; ///< internal angle relative to the synchronous frame
    double v_m = 1.0;   ///< filtered terminal voltage magnitude
    double p_m = 0.0;   ///< filtered injected active power
};

struct GfmResiduals {
    GfmState derivative;
    double omega_gfm = 1.0;
    ClarkeVector e{0.0, 0.0}; ///< internal voltage, network frame
    ComplexFrequency eta_e;
};

inline ClarkeVector gfm_internal_voltage(const GridFormingConverter&, const GfmState& x)
{
    return std::polar(x.e, x.delta);
}

inline GfmResiduals gfm_residuals(const GridFormingConverter& c, const GfmState& x, ClarkeVector v_terminal,
                                  double p_injected)
{
    if (!(x.e > kMagnitudeGuard)) {
        throw MagnitudeUnderflow("gfm_residuals: internal voltage magnitude below guard");
    }
    GfmResiduals r;
    const double vmag = std::abs(v_terminal);
    r.omega_gfm = c.m_p * (c.p_ref - x.p_m) + 1.0;
    r.derivative.e = c.k_i * (c.v_ref - x.v_m) - c.k_p / c.t_v * (x.v_m - vmag);
    r.derivative.delta = c.omega_base * (r.omega_gfm - 1.0);
    r.derivative.v_m = (vmag - x.v_m) / c.t_v;
    r.derivative.p_m = (p_injected - x.p_m) / c.t_p;
    r.e = gfm_internal_voltage(c, x);
    r.eta_e = {r.derivative.e / x.e / c.omega_base, r.omega_gfm};
    return r;
}

// ---------------------------------------------------------------------------
// Type-erased device
// ---------------------------------------------------------------------------

using DeviceModel = std::variant<SynchronousMachine, ZipLoad, GridFollowingConverter, GridFormingConverter>;

struct Device {
    std::string name;
    int bus = 0;
    /// Active-power set-point used by the power flow and as dispatch weight at shared buses (pu).
    double p_set = 0.0;
    DeviceModel model;

    friend bool operator==(const Device&, const Device&) = default;
};

/// di/dt = source_rate + direct * dv/dt + conjugate * conj(dv/dt), synchronous frame, 1/s.
struct CurrentSensitivity {
    Complex source_rate{0.0, 0.0};
    Complex direct{0.0, 0.0};
    Complex conjugate{0.0, 0.0};
};

inline std::string_view type_name(const DeviceModel& m)
{
    constexpr std::array<std::string_view, 4> names{"sm", "zip", "gfl", "gfm"};
    return names[m.index()];
}

inline bool is_generation(const DeviceModel& m) { return !std::holds_alternative<ZipLoad>(m); }

inline std::size_t state_count(const DeviceModel& m)
{
    constexpr std::array<std::size_t, 4> counts{2, 0, 6, 4};
    return counts[m.index()];
}

namespace detail {

inline SmState unpack_sm(std::span<const double> x) { return {x[0], x[1]}; }
inline void pack(const SmState& s, std::span<double> out)
{
    out[0] = s.delta;
    out[1] = s.omega_r;
}

inline GflState unpack_gfl(std::span<const double> x) { return {{x[0], x[1]}, {x[2], x[3]}, x[4], x[5]}; }
inline void pack(const GflState& s, std::span<double> out)
{
    out[0] = s.x.real();
    out[1] = s.x.imag();
    out[2] = s.i_m.real();
    out[3] = s.i_m.imag();
    out[4] = s.x_pll;
    out[5] = s.theta;
}

inline GfmState unpack_gfm(std::span<const double> x) { return {x[0], x[1], x[2], x[3]}; }
inline void pack(const GfmState& s, std::span<double> out)
{
    out[0] = s.e;
    out[1] = s.delta;
    out[2] = s.v_m;
    out[3] = s.p_m;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace detail

inline ClarkeVector device_current(const DeviceModel& model, std::span<const double> x, ClarkeVector v)
{
    using namespace detail;
    return std::visit(
        overloaded{
            [&](const SynchronousMachine& m) { return (sm_emf(m, unpack_sm(x)) - v) / Complex(0.0, m.xd_prime); },
            [&](const ZipLoad& m) { return zip_current(m, v); },
            [&](const GridFollowingConverter& m) {
                return ibr_current(m.filter, gfl_internal_voltage(m, unpack_gfl(x)), v);
            },
            [&](const GridFormingConverter& m) {
                return ibr_current(m.filter, gfm_internal_voltage(m, unpack_gfm(x)), v);
            },
        },
        model);
}

/// Writes dx/dt into `xdot` and returns the injected current.
inline ClarkeVector evaluate_device(const DeviceModel& model, std::span<const double> x, ClarkeVector v,
                                    std::span<double> xdot)
{
    using namespace detail;
    return std::visit(overloaded{
                          [&](const SynchronousMachine& m) {
                              const auto r = sm_residuals(m, unpack_sm(x), v);
                              pack(r.derivative, xdot);
                              return r.current;
                          },
                          [&](const ZipLoad& m) { return zip_current(m, v); },
                          [&](const GridFollowingConverter& m) {
                              const auto s = unpack_gfl(x);
                              const Complex i = ibr_current(m.filter, gfl_internal_voltage(m, s), v);
                              pack(gfl_residuals(m, s, v, i).derivative, xdot);
                              return i;
                          },
                          [&](const GridFormingConverter& m) {
                              const auto s = unpack_gfm(x);
                              const Complex i = ibr_current(m.filter, gfm_internal_voltage(m, s), v);
                              const double p = (v * std::conj(i)).real();
                              pack(gfm_residuals(m, s, v, p).derivative, xdot);
                              return i;
                          },
                      },
                      model);
}

/// Rate of change of the injected current, split into the state-driven part and the
/// (real-linear) dependence on the terminal-voltage rate.
inline CurrentSensitivity current_sensitivity(const DeviceModel& model, std::span<const double> x,
                                              std::span<const double> xdot, ClarkeVector v)
{
    using namespace detail;
    return std::visit(
        overloaded{
            [&](const SynchronousMachine& m) {
                const auto s = unpack_sm(x);
                const Complex jx{0.0, m.xd_prime};
                const Complex e_dot = Complex(0.0, xdot[0]) * sm_emf(m, s);
                return CurrentSensitivity{e_dot / jx, -1.0 / jx, {}};
            },
            [&](const ZipLoad& m) {
                CurrentSensitivity cs;
                cs.direct = -Complex(m.p0 * m.k_zp, -m.q0 * m.k_zq) / (m.v0 * m.v0);
                const bool nonlinear = m.k_pp != 0.0 || m.k_pq != 0.0 || m.k_ip != 0.0 || m.k_iq != 0.0;
                if (nonlinear) {
                    require_magnitude(v, "current_sensitivity");
                    // i_rest = -conj(S_rest(|v|)) / conj(v)
                    const double vmag = std::abs(v);
                    const double u = vmag / m.v0;
                    const Complex s_rest{m.p0 * (m.k_pp + m.k_ip * u), m.q0 * (m.k_pq + m.k_iq * u)};
                    const Complex slope = Complex{m.p0 * m.k_ip, m.q0 * m.k_iq} / m.v0;
                    const Complex vc = std::conj(v);
                    // d|v| = (conj(v) dv + v conj(dv)) / (2|v|)
                    const Complex k = -std::conj(slope) / vc / (2.0 * vmag);
                    cs.direct += k * vc;
                    cs.conjugate += k * v + std::conj(s_rest) / (vc * vc);
                }
                return cs;
            },
            [&](const GridFollowingConverter& m) {
                const auto s = unpack_gfl(x);
                const auto d = unpack_gfl(xdot);
                const Complex mod = gfl_modulation(m, s);
                const Complex m_dot = d.x - m.k_p * d.i_m;
                const Complex e_dot =
                    m.filter.v_dc0 * std::polar(1.0, s.theta) * (m_dot + Complex(0.0, d.theta) * mod);
                return CurrentSensitivity{e_dot / m.filter.z_f, -(1.0 + m.filter.z_f * m.filter.y_f) / m.filter.z_f,
                                          {}};
            },
            [&](const GridFormingConverter& m) {
                const auto s = unpack_gfm(x);
                const auto d = unpack_gfm(xdot);
                const Complex e_dot = std::polar(1.0, s.delta) * Complex(d.e, d.delta * s.e);
                return CurrentSensitivity{e_dot / m.filter.z_f, -(1.0 + m.filter.z_f * m.filter.y_f) / m.filter.z_f,
                                          {}};
            },
        },
        model);
}

/// True when the voltage terms of current_sensitivity do not depend on the operating point.
inline bool has_constant_voltage_sensitivity(const DeviceModel& model)
{
    if (const auto* zip = std::get_if<ZipLoad>(&model)) {
        return zip->k_pp == 0.0 && zip->k_pq == 0.0 && zip->k_ip == 0.0 && zip->k_iq == 0.0;
    }
    return true;
}

/// Closed-form CF of the injected current (stationary frame) from the device's own formula.
/// eta_v is the stationary-frame CF of the terminal voltage. Throws NotAnalytical for mixed ZIP.
inline ComplexFrequency analytical_cf(const DeviceModel& model, std::span<const double> x, ClarkeVector v,
                                      ComplexFrequency eta_v)
{
    using namespace detail;
    return std::visit(overloaded{
                          [&](const SynchronousMachine& m) {
                              const auto s = unpack_sm(x);
                              const auto r = sm_residuals(m, s, v);
                              return sm_cf(m.xd_prime, s.omega_r, v * std::conj(r.current), r.current, eta_v);
                          },
                          [&](const ZipLoad& m) { return zip_cf(m, eta_v); },
                          [&](const GridFollowingConverter& m) {
                              const auto s = unpack_gfl(x);
                              const Complex i = ibr_current(m.filter, gfl_internal_voltage(m, s), v);
                              const auto r = gfl_residuals(m, s, v, i);
                              return ibr_cf(v * std::conj(i), i, m.filter.z_f, m.filter.y_f, r.eta_e, eta_v);
                          },
                          [&](const GridFormingConverter& m) {
                              const auto s = unpack_gfm(x);
                              const Complex i = ibr_current(m.filter, gfm_internal_voltage(m, s), v);
                              const auto r = gfm_residuals(m, s, v, (v * std::conj(i)).real());
                              return ibr_cf(v * std::conj(i), i, m.filter.z_f, m.filter.y_f, r.eta_e, eta_v);
                          },
                      },
                      model);
}

/// Back-solves set-points and equilibrium states so that the device injects complex
/// power `s_injected` at terminal voltage `v` with all derivatives zero.
inline void initialize_device(DeviceModel& model, ClarkeVector v, Complex s_injected, std::span<double> x)
{
    using namespace detail;
    require_magnitude(v, "initialize_device");
    const Complex i = std::conj(s_injected / v);
    std::visit(overloaded{
                   [&](SynchronousMachine& m) {
                       const Complex emf = v + Complex(0.0, m.xd_prime) * i;
                       if (!(std::abs(emf) > kMagnitudeGuard)) {
                           throw InfeasibleInit("initialize", "synchronous machine requires e'_q <= 0");
                       }
                       m.e_q_prime = std::abs(emf);
                       m.p_m = (emf * std::conj(i)).real();
                       pack(SmState{std::arg(emf), 1.0}, x);
                   },
                   [&](ZipLoad& m) { m.v0 = std::abs(v); },
                   [&](GridFollowingConverter& m) {
                       const double theta = std::arg(v);
                       const Complex to_dq = std::polar(1.0, -theta);
                       const Complex i_dq = i * to_dq;
                       const Complex mod = ibr_emf(m.filter, i, v) * to_dq / m.filter.v_dc0;
                       if (!(std::abs(mod) > kMagnitudeGuard)) {
                           throw InfeasibleInit("initialize", "grid-following converter modulation vanishes");
                       }
                       m.i_ref = i_dq;
                       m.omega_ref = 1.0;
                       pack(GflState{mod, i_dq, 0.0, theta}, x);
                   },
                   [&](GridFormingConverter& m) {
                       const Complex emf = ibr_emf(m.filter, i, v);
                       if (!(std::abs(emf) > kMagnitudeGuard)) {
                           throw InfeasibleInit("initialize", "grid-forming converter internal voltage vanishes");
                       }
                       m.p_ref = s_injected.real();
                       m.v_ref = std::abs(v);
                       pack(GfmState{std::abs(emf), std::arg(emf), std::abs(v), s_injected.real()}, x);
                   },
               },
               model);
}

/// Parameter validation; throws InvalidModel.
inline void validate_device(const DeviceModel& model)
{
    using namespace detail;
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw InvalidModel(what);
        }
    };
    std::visit(overloaded{
                   [&](const SynchronousMachine& m) {
                       require(m.inertia > 0.0, "sm: M must be positive");
                       require(m.xd_prime > 0.0, "sm: xd_prime must be positive");
                       require(m.damping >= 0.0, "sm: D must be non-negative");
                       require(m.omega_base > 0.0, "sm: omega_base must be positive");
                   },
                   [&](const ZipLoad& m) {
                       for (double k : {m.k_pp, m.k_ip, m.k_zp, m.k_pq, m.k_iq, m.k_zq}) {
                           require(k >= 0.0 && k <= 1.0, "zip: coefficients must lie in [0, 1]");
                       }
                       require(std::abs(m.k_pp + m.k_ip + m.k_zp - 1.0) <= 1e-12, "zip: k_pp + k_ip + k_zp != 1");
                       require(std::abs(m.k_pq + m.k_iq + m.k_zq - 1.0) <= 1e-12, "zip: k_pq + k_iq + k_zq != 1");
                       require(m.v0 > 0.0, "zip: v0 must be positive");
                   },
                   [&](const GridFollowingConverter& m) {
                       require(std::abs(m.filter.z_f) > 0.0, "gfl: z_f must be nonzero");
                       require(m.t_m > 0.0, "gfl: T_m must be positive");
                       require(m.k_p >= 0.0 && m.k_i >= 0.0 && m.k_p_pll >= 0.0 && m.k_i_pll >= 0.0,
                               "gfl: gains must be non-negative");
                       require(m.filter.v_dc0 > 0.0, "gfl: v_dc0 must be positive");
                   },
                   [&](const GridFormingConverter& m) {
                       require(std::abs(m.filter.z_f) > 0.0, "gfm: z_f must be nonzero");
                       require(m.t_v > 0.0 && m.t_p > 0.0, "gfm: T_v and T_p must be positive");
                       require(m.m_p >= 0.0, "gfm: m_p must be non-negative");
                       require(m.k_p >= 0.0 && m.k_i >= 0.0, "gfm: gains must be non-negative");
                       require(m.filter.v_dc0 > 0.0, "gfm: v_dc0 must be positive");
                   },
               },
               model);
}

/// Named parameter update (events). Throws InvalidModel for unknown names.
inline void set_parameter(DeviceModel& model, std::string_view name, double value)
{
    using namespace detail;
    auto unknown = [&](std::string_view type) {
        throw InvalidModel("unknown parameter '" + std::string(name) + "' for device type " + std::string(type));
    };
    std::visit(overloaded{
                   [&](SynchronousMachine& m) {
                       if (name == "M") m.inertia = value;
                       else if (name == "D") m.damping = value;
                       else if (name == "xd_prime") m.xd_prime = value;
                       else if (name == "p_m") m.p_m = value;
                       else if (name == "e_q_prime") m.e_q_prime = value;
                       else unknown("sm");
                   },
                   [&](ZipLoad& m) {
                       if (name == "p0") m.p0 = value;
                       else if (name == "q0") m.q0 = value;
                       else unknown("zip");
                   },
                   [&](GridFollowingConverter& m) {
                       if (name == "K_p") m.k_p = value;
                       else if (name == "K_i") m.k_i = value;
                       else if (name == "T_m") m.t_m = value;
                       else if (name == "K_p_pll") m.k_p_pll = value;
                       else if (name == "K_i_pll") m.k_i_pll = value;
                       else if (name == "i_ref_d") m.i_ref.real(value);
                       else if (name == "i_ref_q") m.i_ref.imag(value);
                       else if (name == "omega_ref") m.omega_ref = value;
                       else unknown("gfl");
                   },
                   [&](GridFormingConverter& m) {
                       if (name == "K_p") m.k_p = value;
                       else if (name == "K_i") m.k_i = value;
                       else if (name == "T_v") m.t_v = value;
                       else if (name == "T_p") m.t_p = value;
                       else if (name == "m_p") m.m_p = value;
                       else if (name == "p_ref") m.p_ref = value;
                       else if (name == "v_ref") m.v_ref = value;
                       else unknown("gfm");
                   },
               },
               model);
    validate_device(model);
}

} // namespace cfcoh
