#pragma once

// Physical constants of the 87Rb clock transition, magnetic sensitivity of the
// m_F = 0 -> m_F = 0 transition and Thomas-Fermi condensate properties.
//
// All frequencies are angular (rad/s) unless a name ends in _hz.

#include <cmath>

#include "ramsey/core.hpp"

namespace ramsey::atomphys {

struct AtomSpecies
{
    double mass;                 // kg
    double natural_linewidth;    // Gamma, rad/s
    double wavelength;           // m
    double saturation_intensity; // W/m^2
    double hyperfine_hz;         // f0, Hz
    double lande_gj;
    double lande_gi;
    double bohr_magneton;        // J/T
    double a11;                  // m
    double a12;                  // m
    double a22;                  // m

    void validate() const
    {
        require(mass > 0 && natural_linewidth > 0 && wavelength > 0 && saturation_intensity > 0,
                "species: mass, linewidth, wavelength and I_sat must be positive");
        require(hyperfine_hz > 0 && bohr_magneton > 0, "species: f0 and mu_B must be positive");
        require(a11 > 0 && a12 > 0 && a22 > 0, "species: scattering lengths must be positive");
    }

    /// Energy of one imaging photon, J.
    double photon_energy() const
    {
        return constants::planck * constants::speed_of_light / wavelength;
    }

    /// Resonant two-level absorption cross-section 3 lambda^2 / (2 pi).
    double resonant_cross_section() const
    {
        return 3.0 * wavelength * wavelength / constants::two_pi;
    }

    /// Scattering lengths given in Bohr radii.
    AtomSpecies with_scattering_lengths_bohr(double b11, double b12, double b22) const
    {
        AtomSpecies s = *this;
        s.a11 = units::bohr_to_m(b11);
        s.a12 = units::bohr_to_m(b12);
        s.a22 = units::bohr_to_m(b22);
        return s;
    }
};

/// Bundled 87Rb preset (clock states |F=1,m_F=0>, |F=2,m_F=0>).
inline AtomSpecies rubidium87()
{
    AtomSpecies s{};
    s.mass = 86.909180527 * constants::atomic_mass_unit;
    s.natural_linewidth = units::hz_to_angular(6.067e6);
    s.wavelength = 780.241209686 * 1e-9; // same rounding as a config value in nm
    s.saturation_intensity = 16.7; // 1.67 mW/cm^2
    s.hyperfine_hz = 6.834682610904e9;
    s.lande_gj = 2.00233113;
    s.lande_gi = -0.0009951414;
    s.bohr_magneton = constants::bohr_magneton;
    s.a11 = units::bohr_to_m(100.9);
    s.a12 = units::bohr_to_m(98.9);
    s.a22 = units::bohr_to_m(94.9);
    return s;
}

/// Harmonic trap. A cylindrical trap has omega_x == omega_y == omega_rho.
struct TrapConfig
{
    double omega_x = 0; // rad/s
    double omega_y = 0;
    double omega_z = 0;

    static TrapConfig cartesian(double wx, double wy, double wz) { return {wx, wy, wz}; }
    static TrapConfig cylindrical(double w_rho, double wz) { return {w_rho, w_rho, wz}; }

    bool is_cylindrical() const { return omega_x == omega_y; }
    double omega_rho() const { return omega_x; }

    void validate() const
    {
        require(omega_x > 0 && omega_y > 0 && omega_z > 0, "trap: all frequencies must be > 0");
    }

    double geometric_mean() const { return std::cbrt(omega_x * omega_y * omega_z); }
    double max_frequency() const { return std::fmax(omega_x, std::fmax(omega_y, omega_z)); }
};

/// Crossed dipole trap of the experiment, 2 pi x (50, 57, 28) Hz.
inline TrapConfig crossed_dipole_trap()
{
    return TrapConfig::cartesian(units::hz_to_angular(50), units::hz_to_angular(57),
                                 units::hz_to_angular(28));
}

/// Cylindrical surrogate used for the two-component simulations, 2 pi x {55, 30} Hz (rho, z).
inline TrapConfig cylindrical_sim_trap()
{
    return TrapConfig::cylindrical(units::hz_to_angular(55), units::hz_to_angular(30));
}

struct FieldConfig
{
    double bias_field = 0;       // T
    double field_noise = 0;      // T
    double oscillator_frequency = 0; // rad/s
    double oscillator_noise = 0; // rad/s

    void validate() const
    {
        require(bias_field >= 0, "field: B must be >= 0");
        require(field_noise >= 0 && oscillator_noise >= 0, "field: noise terms must be >= 0");
    }
};

/// Breit-Rabi field parameter x = mu_B |g_J - g_I| / (h f0), in 1/T.
inline double breit_rabi_x(const AtomSpecies& s)
{
    return s.bohr_magneton * std::fabs(s.lande_gj - s.lande_gi) / (constants::planck * s.hyperfine_hz);
}

/// Clock transition frequency f = f0 sqrt(1 + B^2 x^2), Hz.
inline double breit_rabi_frequency(const AtomSpecies& s, double field)
{
    require(field >= 0, "breit_rabi_frequency: negative magnetic field");
    const double bx = field * breit_rabi_x(s);
    return s.hyperfine_hz * std::sqrt(1.0 + bx * bx);
}

/// Quadratic Zeeman shift f - f0 computed without cancellation, Hz.
inline double clock_shift_hz(const AtomSpecies& s, double field)
{
    require(field >= 0, "clock_shift_hz: negative magnetic field");
    const double u = field * breit_rabi_x(s);
    const double u2 = u * u;
    return s.hyperfine_hz * u2 / (std::sqrt(1.0 + u2) + 1.0);
}

/// kappa(B) = d omega_res / dB, rad/s per T.
inline double resonance_sensitivity_kappa(const AtomSpecies& s, double field)
{
    require(field >= 0, "resonance_sensitivity_kappa: negative magnetic field");
    const double x = breit_rabi_x(s);
    const double bx = field * x;
    return constants::two_pi * s.hyperfine_hz * field * x * x / std::sqrt(1.0 + bx * bx);
}

/// Detuning fluctuation from field noise and oscillator noise added in quadrature, rad/s.
inline double detuning_fluctuation(double kappa, double field_noise, double oscillator_noise)
{
    require(kappa >= 0 && field_noise >= 0 && oscillator_noise >= 0,
            "detuning_fluctuation: inputs must be >= 0");
    return std::hypot(kappa * field_noise, oscillator_noise);
}

inline double detuning_fluctuation(const AtomSpecies& s, const FieldConfig& f)
{
    f.validate();
    return detuning_fluctuation(resonance_sensitivity_kappa(s, f.bias_field), f.field_noise,
                                f.oscillator_noise);
}

/// Harmonic oscillator length sqrt(hbar / (m omega_bar)).
inline double oscillator_length(const AtomSpecies& s, const TrapConfig& trap)
{
    return std::sqrt(constants::hbar / (s.mass * trap.geometric_mean()));
}

/// Thomas-Fermi chemical potential of a pure |1> condensate, J.
inline double tf_chemical_potential(const AtomSpecies& s, const TrapConfig& trap, double atom_number)
{
    require(atom_number >= 1, "tf_chemical_potential: N must be >= 1");
    trap.validate();
    const double wbar = trap.geometric_mean();
    const double aho = oscillator_length(s, trap);
    return 0.5 * constants::hbar * wbar * std::pow(15.0 * atom_number * s.a11 / aho, 0.4);
}

/// Thomas-Fermi radius along an axis with trap frequency omega, m.
inline double tf_radius(const AtomSpecies& s, double chemical_potential, double omega)
{
    return std::sqrt(2.0 * chemical_potential / (s.mass * omega * omega));
}

/// s-wave interaction constant U = 4 pi hbar^2 a / m, J m^3.
inline double interaction_constant(const AtomSpecies& s, double scattering_length)
{
    return 4.0 * constants::pi * constants::hbar * constants::hbar * scattering_length / s.mass;
}

/// Two-mode coupling constants, rad/s per atom.
struct Couplings
{
    double g11 = 0;
    double g12 = 0;
    double g22 = 0;

    /// g11 - 2 g12 + g22
    double asymmetry() const { return g11 - 2.0 * g12 + g22; }
};

/// Two-mode couplings from Thomas-Fermi mode functions; depend on the total N only.
inline Couplings tf_couplings(const AtomSpecies& s, const TrapConfig& trap, double atom_number)
{
    require(atom_number >= 1, "tf_couplings: N must be >= 1");
    trap.validate();
    const double wbar = trap.geometric_mean();
    const double u11 = interaction_constant(s, s.a11);
    const double base = std::pow(2.0, 0.2) / (7.0 * constants::hbar)
                        * std::pow(15.0 * u11 / constants::pi, 0.4)
                        * std::pow(s.mass * wbar * wbar / atom_number, 0.6);
    // U_ij / U_11 = a_ij / a_11
    return {base, base * s.a12 / s.a11, base * s.a22 / s.a11};
}

/// a11 a22 / a12^2; below one the mixture is immiscible.
inline double miscibility_parameter(double a11, double a12, double a22)
{
    require(a12 != 0.0, "miscibility_parameter: a12 must be nonzero");
    return a11 * a22 / (a12 * a12);
}

inline bool is_immiscible(double miscibility) { return miscibility < 1.0; }

} // namespace ramsey::atomphys
