#pragma once

// Two-mode mean-field model: relative-phase evolution, projection-noise phase
// diffusion with and without spin echo, differential loss and field-drift
// fringe envelopes.

#include <cmath>

#include "ramsey/atomphys.hpp"
#include "ramsey/core.hpp"

namespace ramsey::twomode {

struct TwoModeSystem
{
    double omega1 = 0;              // rad/s
    double omega2 = 0;              // rad/s
    atomphys::Couplings g;          // rad/s per atom
    double total_number = 1;        // N
    double number_imbalance = NAN;  // Delta N; NaN selects sqrt(N)/2
    double total_number_noise = 0;  // shot-to-shot Delta N_tot

    double imbalance() const
    {
        return std::isnan(number_imbalance) ? 0.5 * std::sqrt(total_number) : number_imbalance;
    }
    double n1() const { return 0.5 * total_number + imbalance(); }
    double n2() const { return 0.5 * total_number - imbalance(); }

    void validate() const
    {
        require(total_number >= 1, "two-mode: N must be >= 1");
        require(std::fabs(imbalance()) <= 0.5 * total_number, "two-mode: |Delta N| must be <= N/2");
        require(total_number_noise >= 0, "two-mode: Delta N_tot must be >= 0");
    }
};

/// System with Thomas-Fermi couplings and degenerate linear energies.
inline TwoModeSystem make_tf_system(const atomphys::AtomSpecies& s, const atomphys::TrapConfig& trap,
                                    double atom_number)
{
    TwoModeSystem sys;
    sys.g = atomphys::tf_couplings(s, trap, atom_number);
    sys.total_number = atom_number;
    return sys;
}

struct PhaseRate
{
    double deterministic = 0; // value at Delta N = 0 (density shift)
    double stochastic = 0;    // (g11 - 2 g12 + g22) Delta N
    double total = 0;         // full expression at N1, N2
};

/// d phi / dt = (w1 - w2) + (g11 - g12) N1 - (g22 - g12) N2.
inline PhaseRate relative_phase_rate(const TwoModeSystem& sys)
{
    sys.validate();
    const auto& g = sys.g;
    PhaseRate r;
    r.total = (sys.omega1 - sys.omega2) + (g.g11 - g.g12) * sys.n1() - (g.g22 - g.g12) * sys.n2();
    r.deterministic = (sys.omega1 - sys.omega2) + 0.5 * sys.total_number * (g.g11 - g.g22);
    r.stochastic = g.asymmetry() * sys.imbalance();
    return r;
}

/// Phase spread after T without echo; (g11 - 2 g12 + g22) T sqrt(N) / 2 at the default Delta N.
inline double phase_diffusion(const TwoModeSystem& sys, double interrogation)
{
    sys.validate();
    require(interrogation >= 0, "phase_diffusion: T must be >= 0");
    return sys.g.asymmetry() * sys.imbalance() * interrogation;
}

/// Extra spread from shot-to-shot total-number noise without echo, (g11 - g22) T Delta N_tot.
inline double total_number_phase_diffusion(const TwoModeSystem& sys, double interrogation,
                                           double total_number_noise)
{
    require(interrogation >= 0, "total_number_phase_diffusion: T must be >= 0");
    require(total_number_noise >= 0, "total_number_phase_diffusion: Delta N_tot must be >= 0");
    return (sys.g.g11 - sys.g.g22) * interrogation * total_number_noise;
}

/// Mode phases through pi/2 - dt - pi - dt, tracked step by step.
struct EchoPhaseTrack
{
    double phi1_t1 = 0, phi2_t1 = 0; // before the pi pulse
    double phi1_t2 = 0, phi2_t2 = 0; // directly after (c1 -> i c2, c2 -> i c1)
    double phi1_t3 = 0, phi2_t3 = 0; // end of the second arm

    double difference() const { return phi2_t3 - phi1_t3; }
};

inline EchoPhaseTrack track_echo_phases(const TwoModeSystem& sys, double half_time)
{
    sys.validate();
    require(half_time >= 0, "track_echo_phases: dt must be >= 0");
    const auto& g = sys.g;
    const double n = sys.total_number;
    const double dn = sys.imbalance();
    const double dt = half_time;
    EchoPhaseTrack p;
    p.phi1_t1 = (sys.omega1 + g.g11 * (n / 2 + dn) + g.g12 * (n / 2 - dn)) * dt;
    p.phi2_t1 = (sys.omega2 + g.g22 * (n / 2 - dn) + g.g12 * (n / 2 + dn)) * dt;
    p.phi1_t2 = p.phi2_t1 + constants::pi / 2;
    p.phi2_t2 = p.phi1_t1 + constants::pi / 2;
    // populations are swapped in the second arm
    p.phi1_t3 = p.phi1_t2 + (sys.omega1 + g.g11 * (n / 2 - dn) + g.g12 * (n / 2 + dn)) * dt;
    p.phi2_t3 = p.phi2_t2 + (sys.omega2 + g.g22 * (n / 2 + dn) + g.g12 * (n / 2 - dn)) * dt;
    return p;
}

struct EchoDiffusion
{
    double number_difference_term = 0; // 2 (g11 - 2 g12 + g22) Delta N dt
    double total_number_term = 0;       // coefficient of Delta N_tot, cancels identically
    double total() const { return number_difference_term + total_number_term; }
};

/// Phase spread of pi/2 - pi - pi/2 with total interrogation time total_T = 2 dt.
///
/// The phase difference is collected by channel. The total-number channel
/// enters the two arms as +(g11 - g22) and (g22 - g11), whose floating-point
/// sum is exactly zero.
inline EchoDiffusion spin_echo_phase_diffusion(const TwoModeSystem& sys, double total_time)
{
    sys.validate();
    require(total_time >= 0, "spin_echo_phase_diffusion: total_T must be >= 0");
    const double dt = 0.5 * total_time;
    const auto& g = sys.g;
    EchoDiffusion d;
    d.number_difference_term = 2.0 * g.asymmetry() * sys.imbalance() * dt;
    const double arm1 = (g.g11 - g.g22) * dt;
    const double arm2 = (g.g22 - g.g11) * dt;
    d.total_number_term = (arm1 + arm2) * 0.5 * sys.total_number_noise;
    return d;
}

/// (g11 - 2 g12 + g22) sqrt(N) / 2 from the closed Thomas-Fermi expression,
/// rad/s of spread per unit total interrogation time.
///
/// The closed form gives the spread per echo arm dt; with total_T = 2 dt the
/// rate per total_T is half of it.
inline double tf_phase_diffusion_rate(const atomphys::AtomSpecies& s, const atomphys::TrapConfig& trap,
                                      double atom_number)
{
    require(atom_number >= 1, "tf_phase_diffusion_rate: N must be >= 1");
    trap.validate();
    const double hbar = constants::hbar;
    const double wbar = trap.geometric_mean();
    const double rel = (s.a11 - 2.0 * s.a12 + s.a22) / s.a11;
    const double base = std::pow(15.0 * std::sqrt(s.mass) * hbar * hbar * wbar * wbar * wbar * s.a11, 0.4);
    const double per_arm = rel * 2.0 * base / (7.0 * hbar) / std::pow(atom_number, 0.1);
    return 0.5 * per_arm;
}

/// (a11 - 2 a12 + a22) / a11.
inline double relative_scattering_asymmetry(const atomphys::AtomSpecies& s)
{
    return (s.a11 - 2.0 * s.a12 + s.a22) / s.a11;
}

/// V = 2 sqrt(k1 k2) / (k1 + k2) for survival fractions k1, k2.
inline double differential_loss_visibility(double k1, double k2)
{
    require(k1 > 0 && k1 <= 1 && k2 > 0 && k2 <= 1,
            "differential_loss_visibility: survival fractions must lie in (0, 1]");
    return 2.0 * std::sqrt(k1 * k2) / (k1 + k2);
}

/// p(phi) = [1 + V cos(phi)] / 2 normalised to the surviving atoms.
inline double differential_loss_fringe(double k1, double k2, double phase)
{
    return 0.5 * (1.0 + differential_loss_visibility(k1, k2) * std::cos(phase));
}

/// p(T) = [1 + V0 exp(-T/tau) cos(nu T^2 / 4)] / 2 for a linear detuning drift nu (rad/s^2).
inline double drift_fringe_model(double drift_rate, double interrogation, double coherence_time,
                                 double visibility0)
{
    require(interrogation >= 0, "drift_fringe_model: T must be >= 0");
    require(coherence_time > 0, "drift_fringe_model: tau must be > 0");
    const double T = interrogation;
    return 0.5 * (1.0 + visibility0 * std::exp(-T / coherence_time) * std::cos(0.25 * drift_rate * T * T));
}

/// Mid-fringe linearisation dp = T dDelta / 2.
inline double detuning_noise_to_population(double interrogation, double detuning_noise)
{
    require(interrogation >= 0, "detuning_noise_to_population: T must be >= 0");
    return 0.5 * interrogation * detuning_noise;
}

} // namespace ramsey::twomode
