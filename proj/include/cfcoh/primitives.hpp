#pragma once

// Clarke-vector arithmetic and complex-frequency algebra.
//
// A balanced three-phase quantity is carried as a single complex number
// (alpha + j beta). Its complex frequency is the log-derivative
//     eta = (dx/dt) / x = d|x|/dt / |x| + j dphi/dt
// expressed in per unit of the base angular frequency.

#include "cfcoh/errors.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace cfcoh {

using Complex = std::complex<double>;

/// Complex per-unit electrical quantity (voltage, current, power, modulation).
using ClarkeVector = Complex;

/// Smallest magnitude a Clarke vector may have before its complex frequency
/// is considered undefined.
inline constexpr double kMagnitudeGuard = 1e-9;

inline constexpr double kPi = std::numbers::pi;

/// eta = rho + j omega, both in pu of the base angular frequency.
struct ComplexFrequency {
    double rho = 0.0;
    double omega = 0.0;

    static ComplexFrequency from_complex(Complex z) noexcept { return {z.real(), z.imag()}; }
    Complex as_complex() const noexcept { return {rho, omega}; }

    double magnitude() const noexcept { return std::hypot(rho, omega); }
    ComplexFrequency conj() const noexcept { return {rho, -omega}; }

    friend ComplexFrequency operator+(ComplexFrequency a, ComplexFrequency b) noexcept
    {
        return {a.rho + b.rho, a.omega + b.omega};
    }
    friend ComplexFrequency operator-(ComplexFrequency a, ComplexFrequency b) noexcept
    {
        return {a.rho - b.rho, a.omega - b.omega};
    }
    friend ComplexFrequency operator-(ComplexFrequency a) noexcept { return {-a.rho, -a.omega}; }
    friend bool operator==(ComplexFrequency, ComplexFrequency) = default;
};

struct Polar {
    double magnitude = 0.0;
    double phase = 0.0; ///< (-pi, pi]
};

/// Zero vector maps to (0, 0).
inline Polar polar(ClarkeVector x) noexcept
{
    if (x == Complex{}) {
        return {};
    }
    double phase = std::arg(x);
    if (phase <= -kPi) {
        phase = kPi;
    }
    return {std::abs(x), phase};
}

inline ClarkeVector from_polar(Polar p) noexcept { return std::polar(p.magnitude, p.phase); }

inline void require_magnitude(ClarkeVector x, const char* what)
{
    if (!(std::abs(x) > kMagnitudeGuard)) {
        throw MagnitudeUnderflow(std::string(what) + ": |x| below singularity guard");
    }
}

/// Complex frequency of x given its time derivative (1/s), normalized by omega_base (rad/s).
inline ComplexFrequency cf_from_value_and_derivative(ClarkeVector x, ClarkeVector dx_dt, double omega_base)
{
    require_magnitude(x, "cf_from_value_and_derivative");
    if (!(omega_base > 0.0)) {
        throw std::invalid_argument("cf_from_value_and_derivative: omega_base must be positive");
    }
    return ComplexFrequency::from_complex(dx_dt / x / omega_base);
}

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) noexcept
{
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) {
        a += 2.0 * kPi;
    }
    return a;
}

/// Removes 2*pi jumps so that successive differences lie in (-pi, pi].
inline std::vector<double> unwrap_phase(std::span<const double> samples)
{
    std::vector<double> out(samples.begin(), samples.end());
    for (std::size_t k = 1; k < out.size(); ++k) {
        out[k] = out[k - 1] + wrap_angle(samples[k] - samples[k - 1]);
    }
    return out;
}

} // namespace cfcoh
