#include "cfcoh/primitives.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cfcoh;

namespace {

constexpr double kWb = 2.0 * kPi * 60.0;

} // namespace

TEST(ComplexFrequency, ExponentialPhasorHasConstantCf)
{
    // x = A exp((sigma + j w) t): dx/dt / x = sigma + j w
    const Complex a = std::polar(1.3, 0.4);
    const Complex s{-2.5, 2.0 * kPi * 61.0};
    for (double t : {0.0, 0.013, 0.5, 2.0}) {
        const Complex x = a * std::exp(s * t);
        const auto eta = cf_from_value_and_derivative(x, s * x, kWb);
        EXPECT_NEAR(eta.rho, -2.5 / kWb, 1e-14);
        EXPECT_NEAR(eta.omega, 61.0 / 60.0, 1e-12);
    }
}

TEST(ComplexFrequency, NominalRotationIsJ1)
{
    const Complex x = std::polar(0.97, -1.2);
    const auto eta = cf_from_value_and_derivative(x, Complex(0.0, kWb) * x, kWb);
    EXPECT_NEAR(eta.rho, 0.0, 1e-15);
    EXPECT_NEAR(eta.omega, 1.0, 1e-15);
}

TEST(ComplexFrequency, Arithmetic)
{
    const ComplexFrequency a{0.1, 1.0};
    const ComplexFrequency b{-0.3, 0.5};
    EXPECT_EQ(a + b, (ComplexFrequency{0.1 - 0.3, 1.5}));
    EXPECT_EQ(a - b, (ComplexFrequency{0.4, 0.5}));
    EXPECT_EQ(-a, (ComplexFrequency{-0.1, -1.0}));
    EXPECT_EQ(a.conj(), (ComplexFrequency{0.1, -1.0}));
    EXPECT_DOUBLE_EQ((ComplexFrequency{3.0, 4.0}).magnitude(), 5.0);
    EXPECT_EQ(ComplexFrequency::from_complex(a.as_complex()), a);
}

TEST(ComplexFrequency, GuardRejectsVanishingValue)
{
    EXPECT_THROW(cf_from_value_and_derivative(Complex(0.0, 0.0), Complex(1.0, 0.0), kWb), MagnitudeUnderflow);
    EXPECT_THROW(cf_from_value_and_derivative(Complex(5e-10, 0.0), Complex(1.0, 0.0), kWb), MagnitudeUnderflow);
    EXPECT_NO_THROW(cf_from_value_and_derivative(Complex(2e-9, 0.0), Complex(1.0, 0.0), kWb));
    EXPECT_THROW(cf_from_value_and_derivative(Complex(1.0, 0.0), Complex(1.0, 0.0), 0.0), std::invalid_argument);
}

TEST(Polar, KnownValues)
{
    const auto p = polar(Complex(0.0, 2.0));
    EXPECT_DOUBLE_EQ(p.magnitude, 2.0);
    EXPECT_DOUBLE_EQ(p.phase, kPi / 2.0);
    EXPECT_DOUBLE_EQ(polar(Complex(-1.0, 0.0)).phase, kPi);
    EXPECT_DOUBLE_EQ(polar(Complex(-1.0, -0.0)).phase, kPi);
    const auto zero = polar(Complex(0.0, 0.0));
    EXPECT_EQ(zero.magnitude, 0.0);
    EXPECT_EQ(zero.phase, 0.0);
}

TEST(Polar, RoundTrip)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int k = 0; k < 500; ++k) {
        const Complex x{u(rng), u(rng)};
        const auto p = polar(x);
        EXPECT_GT(p.phase, -kPi);
        EXPECT_LE(p.phase, kPi);
        EXPECT_LT(std::abs(from_polar(p) - x), 1e-14 * (1.0 + std::abs(x)));
    }
}

TEST(Angles, WrapIntoHalfOpenInterval)
{
    EXPECT_DOUBLE_EQ(wrap_angle(0.5), 0.5);
    EXPECT_NEAR(wrap_angle(2.0 * kPi + 0.25), 0.25, 1e-15);
    EXPECT_NEAR(wrap_angle(-2.0 * kPi - 0.25), -0.25, 1e-15);
    EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
    EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
}

TEST(Angles, UnwrapRecoversRamp)
{
    std::vector<double> ramp(400), wrapped(400);
    for (std::size_t k = 0; k < ramp.size(); ++k) {
        ramp[k] = -3.0 + 0.37 * static_cast<double>(k);
        wrapped[k] = wrap_angle(ramp[k]);
    }
    const auto un = unwrap_phase(wrapped);
    for (std::size_t k = 0; k < ramp.size(); ++k) {
        EXPECT_NEAR(un[k], ramp[k], 1e-9);
    }
    EXPECT_TRUE(unwrap_phase(std::vector<double>{}).empty());
}
