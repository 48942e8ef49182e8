#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "ramsey/atomphys.hpp"

using namespace ramsey;
using namespace ramsey::atomphys;

namespace {

constexpr double two_pi = constants::two_pi;

// x from CODATA constants, computed without the library.
double reference_x()
{
    const double muB = 9.2740100783e-24, h = 6.62607015e-34;
    return muB * (2.00233113 + 0.0009951414) / (h * 6.834682610904e9);
}

} // namespace

TEST(BreitRabi, ZeroFieldIsHyperfineSplitting)
{
    const auto rb = rubidium87();
    EXPECT_DOUBLE_EQ(breit_rabi_frequency(rb, 0.0), rb.hyperfine_hz);
    EXPECT_EQ(clock_shift_hz(rb, 0.0), 0.0);
}

TEST(BreitRabi, ClockShiftAtFourGauss)
{
    const auto rb = rubidium87();
    const double B = units::gauss_to_tesla(4.0);
    const double x = reference_x();
    const double quadratic = 6.834682610904e9 * B * B * x * x / 2.0;
    const double shift = clock_shift_hz(rb, B);
    EXPECT_NEAR(shift, quadratic, 1e-5 * quadratic);
    EXPECT_NEAR(shift, 9.2e3, 0.05e3);
    EXPECT_NEAR(breit_rabi_frequency(rb, B) - rb.hyperfine_hz, shift, 1e-3);
}

TEST(BreitRabi, MonotonicInField)
{
    const auto rb = rubidium87();
    double prev = -1;
    for (double g = 0; g <= 200; g += 0.5) {
        const double f = clock_shift_hz(rb, units::gauss_to_tesla(g));
        EXPECT_GT(f, prev);
        prev = f;
    }
    EXPECT_GT(breit_rabi_frequency(rb, units::gauss_to_tesla(160)),
              breit_rabi_frequency(rb, units::gauss_to_tesla(4)));
}

TEST(BreitRabi, QuadraticExpansionBelowTenGauss)
{
    const auto rb = rubidium87();
    const double x = breit_rabi_x(rb);
    for (double g = 0.1; g <= 10.0; g += 0.1) {
        const double B = units::gauss_to_tesla(g);
        const double exact = breit_rabi_frequency(rb, B);
        const double approx = rb.hyperfine_hz * (1.0 + 0.5 * B * B * x * x);
        EXPECT_LT(std::fabs(exact - approx) / exact, 1e-6) << g;
    }
}

TEST(BreitRabi, NegativeFieldRejected)
{
    const auto rb = rubidium87();
    EXPECT_THROW(breit_rabi_frequency(rb, -1e-4), InvalidArgument);
    EXPECT_THROW(resonance_sensitivity_kappa(rb, -1e-4), InvalidArgument);
}

TEST(Kappa, ZeroAtZeroField) { EXPECT_EQ(resonance_sensitivity_kappa(rubidium87(), 0.0), 0.0); }

TEST(Kappa, MatchesFiniteDifference)
{
    const auto rb = rubidium87();
    for (double g : {0.5, 1.0, 4.0, 10.0, 50.0, 160.0}) {
        const double B = units::gauss_to_tesla(g);
        const double h = 1e-5 * B;
        const double fd = two_pi * (clock_shift_hz(rb, B + h) - clock_shift_hz(rb, B - h)) / (2 * h);
        const double k = resonance_sensitivity_kappa(rb, B);
        EXPECT_LT(std::fabs(fd - k) / k, 1e-6) << g;
    }
}

TEST(Kappa, TwoMilligaussAtFourGaussIsAboutTenHertz)
{
    const auto rb = rubidium87();
    const double dw = resonance_sensitivity_kappa(rb, units::gauss_to_tesla(4)) * units::gauss_to_tesla(2e-3);
    EXPECT_NEAR(dw / two_pi, 10.0, 1.0);
}

TEST(Kappa, SevenMicrogaussAtFourGaussIsAboutThirtyMillihertz)
{
    const auto rb = rubidium87();
    const double dw = resonance_sensitivity_kappa(rb, units::gauss_to_tesla(4)) * units::gauss_to_tesla(7e-6);
    EXPECT_NEAR(dw / two_pi, 0.03, 0.003);
}

TEST(DetuningFluctuation, Quadrature)
{
    EXPECT_DOUBLE_EQ(detuning_fluctuation(0.0, 0.0, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(detuning_fluctuation(1.0, 3.0, 4.0), 5.0);
    EXPECT_THROW(detuning_fluctuation(1.0, -1.0, 0.0), InvalidArgument);
    const auto rb = rubidium87();
    FieldConfig f{units::gauss_to_tesla(4), units::gauss_to_tesla(2e-3), 0, 0};
    EXPECT_NEAR(detuning_fluctuation(rb, f) / two_pi, 10.0, 1.0);
}

TEST(ThomasFermi, ChemicalPotentialScaling)
{
    const auto rb = rubidium87();
    const auto trap = crossed_dipole_trap();
    const double mu1 = tf_chemical_potential(rb, trap, 1e6);
    const double mu2 = tf_chemical_potential(rb, trap, 2e6);
    EXPECT_NEAR(mu2 / mu1, std::pow(2.0, 0.4), 1e-12);
    const double hz = mu1 / constants::hbar / two_pi;
    EXPECT_GT(hz, 1000.0);
    EXPECT_LT(hz, 2000.0);
    auto weak = rb;
    weak.a11 = 1e-40;
    EXPECT_LT(tf_chemical_potential(weak, trap, 1e6), 1e-10 * mu1);
    EXPECT_THROW(tf_chemical_potential(rb, trap, 0.0), InvalidArgument);
}

TEST(TrapConfig, GeometricMean)
{
    const auto c = cylindrical_sim_trap();
    EXPECT_TRUE(c.is_cylindrical());
    EXPECT_NEAR(c.geometric_mean(), std::cbrt(c.omega_rho() * c.omega_rho() * c.omega_z), 1e-12);
    EXPECT_THROW(TrapConfig::cartesian(1, 0, 1).validate(), InvalidArgument);
}

// g11 = (U11/hbar) * integral of n^2 for the normalised TF profile, by quadrature.
TEST(TfCouplings, MatchOverlapIntegral)
{
    const auto rb = rubidium87();
    const auto trap = crossed_dipole_trap();
    const double N = 1e6;
    const double mu = tf_chemical_potential(rb, trap, N);
    const double u11 = 4 * constants::pi * constants::hbar * constants::hbar * rb.a11 / rb.mass;
    // radii in scaled coordinates: Rbar^3 = product of TF radii
    const double wbar = trap.geometric_mean();
    const double rbar = std::sqrt(2 * mu / (rb.mass * wbar * wbar));
    const double peak = mu / (u11 * N);
    const double norm = peak * 4 * constants::pi * rbar * rbar * rbar
                        * oracle::simpson([](double s) { return (1 - s * s) * s * s; }, 0, 1, 20000);
    EXPECT_NEAR(norm, 1.0, 1e-9);
    const double n2 = peak * peak * 4 * constants::pi * rbar * rbar * rbar
                      * oracle::simpson([](double s) { return (1 - s * s) * (1 - s * s) * s * s; }, 0, 1, 20000);
    const auto g = tf_couplings(rb, trap, N);
    EXPECT_NEAR(g.g11, u11 * n2 / constants::hbar, 1e-9 * g.g11);
}

TEST(TfCouplings, SymmetryAndScaling)
{
    auto rb = rubidium87();
    const auto trap = crossed_dipole_trap();
    auto eq = rb;
    eq.a12 = eq.a11;
    const auto ge = tf_couplings(eq, trap, 1e5);
    EXPECT_DOUBLE_EQ(ge.g12, ge.g11);
    const auto g1 = tf_couplings(rb, trap, 1e5);
    const auto g8 = tf_couplings(rb, trap, 8e5);
    EXPECT_NEAR(g8.g11 / g1.g11, std::pow(8.0, -0.6), 1e-12);
    EXPECT_NEAR(g8.g22 / g1.g22, std::pow(8.0, -0.6), 1e-12);
    EXPECT_GT(g1.g11, 0);
    EXPECT_GT(g1.g12, 0);
    EXPECT_GT(g1.g22, 0);
}

TEST(TfCouplings, AsymmetrySignFollowsScatteringLengths)
{
    const auto trap = crossed_dipole_trap();
    for (auto [b11, b12, b22] : {std::tuple{100.9, 98.9, 94.9}, std::tuple{100.0, 90.0, 95.0},
                                 std::tuple{50.0, 20.0, 60.0}, std::tuple{80.0, 85.0, 80.0}}) {
        const auto s = rubidium87().with_scattering_lengths_bohr(b11, b12, b22);
        const double sa = b11 - 2 * b12 + b22;
        const double sg = tf_couplings(s, trap, 1e6).asymmetry();
        EXPECT_EQ(std::signbit(sa), std::signbit(sg));
    }
}

TEST(TfCouplings, PaperDiffusionRateOrder)
{
    const auto g = tf_couplings(rubidium87(), crossed_dipole_trap(), 1e6);
    const double rate = std::fabs(g.asymmetry()) * 1e3 / 2.0;
    EXPECT_NEAR(rate, 0.050, 0.015);
}

TEST(Miscibility, Values)
{
    EXPECT_DOUBLE_EQ(miscibility_parameter(1, 1, 1), 1.0);
    const double mu = miscibility_parameter(100.9, 98.9, 94.9);
    EXPECT_NEAR(mu, 0.98, 0.005);
    EXPECT_TRUE(is_immiscible(mu));
    const double mu9 = miscibility_parameter(100.9, 0.9 * 98.9, 94.9);
    EXPECT_NEAR(mu9, 1.21, 0.005);
    EXPECT_FALSE(is_immiscible(mu9));
    EXPECT_THROW(miscibility_parameter(1, 0, 1), InvalidArgument);
}

TEST(Miscibility, ScaleInvariant)
{
    for (double c : {1e-3, 0.5, 7.0, 1e4})
        EXPECT_NEAR(miscibility_parameter(100.9 * c, 98.9 * c, 94.9 * c),
                    miscibility_parameter(100.9, 98.9, 94.9), 1e-14);
}
