#pragma once

// Two-level pulse algebra on the Bloch sphere: pulse durations, Ramsey fringe
// expressions and closed-form propagation of power and detuning noise.
//
// Conventions: during a pulse the rotating-frame Hamiltonian is
// (Omega sigma_x + Delta sigma_z)/2, during free evolution Delta sigma_z / 2.
// The atoms start in |1>, P_z = 1 - 2p with p the population of |2>.

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/math/tools/minima.hpp>

#include "ramsey/core.hpp"

namespace ramsey::bloch {

struct PulseParams
{
    double rabi_frequency = 0; // Omega, rad/s
    double detuning = 0;       // Delta, rad/s
    double duration = 0;       // t, s

    double epsilon() const { return std::fabs(detuning) / rabi_frequency; }
    double generalized_rabi() const { return std::hypot(rabi_frequency, detuning); }

    void validate() const
    {
        require(rabi_frequency > 0, "pulse: Rabi frequency must be > 0");
        require(duration >= 0, "pulse: duration must be >= 0");
    }
};

struct RamseySequence
{
    PulseParams pulse;
    double interrogation_time = 0;       // T, s
    double evolution_detuning = NAN;     // Delta_1; NaN means "same as pulse detuning"
    bool spin_echo = false;

    double free_detuning() const
    {
        return std::isnan(evolution_detuning) ? pulse.detuning : evolution_detuning;
    }

    void validate() const
    {
        pulse.validate();
        require(interrogation_time >= 0, "ramsey: interrogation time must be >= 0");
    }
};

struct NoiseBudget
{
    double relative_power_noise = 0;     // dP/P
    double pulse_detuning_noise = 0;     // dDelta, rad/s
    double evolution_detuning_noise = 0; // dDelta_1, rad/s

    void validate() const
    {
        require(relative_power_noise >= 0 && pulse_detuning_noise >= 0 && evolution_detuning_noise >= 0,
                "noise: all noise terms must be >= 0");
    }
};

/// Duration of a pulse that takes the Bloch vector from the pole to the equator.
inline double pi_half_duration(double rabi, double detuning)
{
    require(rabi > 0, "pi_half_duration: Rabi frequency must be > 0");
    const double eps = std::fabs(detuning) / rabi;
    if (eps >= 1.0) throw InvalidArgument("pi_half_duration: |Delta|/Omega >= 1, no 50/50 beamsplitter possible");
    return std::acos(-eps * eps) / std::hypot(rabi, detuning);
}

/// Rabi formula p = (Omega/Omega_R)^2 sin^2(Omega_R t / 2).
inline double rabi_transition_probability(double rabi, double detuning, double duration)
{
    require(rabi > 0, "rabi_transition_probability: Rabi frequency must be > 0");
    require(duration >= 0, "rabi_transition_probability: duration must be >= 0");
    const double wr = std::hypot(rabi, detuning);
    const double s = std::sin(0.5 * wr * duration);
    return (rabi / wr) * (rabi / wr) * s * s;
}

/// Final P_z after pulse(t) - free(T) - pulse(t) with a common detuning.
///
/// The phase xi is evaluated as -atan2(num, den); this equals the two-branch
/// arctangent n pi - atan(num/den) modulo 2 pi and is finite at eps = 0 and at
/// sin(Omega_R t) = 0.
inline double ramsey_pz(double rabi, double detuning, double duration, double interrogation)
{
    require(rabi > 0, "ramsey_pz: Rabi frequency must be > 0");
    const double eps = std::fabs(detuning) / rabi;
    const double e2 = eps * eps;
    const double wr = std::hypot(rabi, detuning);
    const double c = std::cos(wr * duration);
    const double s = std::sin(wr * duration);
    const double alpha = (e2 + c) / (e2 + 1.0);
    const double xi = -std::atan2((1.0 + 2.0 * e2) * c + 1.0, 2.0 * eps * std::sqrt(1.0 + e2) * s);
    const double a2 = alpha * alpha;
    return a2 + (1.0 - a2) * std::sin(std::fabs(detuning) * interrogation + xi);
}

inline double population_from_pz(double pz) { return 0.5 * (1.0 - pz); }

/// Evolution time at which the fringe first crosses P_z = 0 (maximal slope).
inline double optimal_evolution_time(double rabi, double detuning)
{
    require(rabi > 0, "optimal_evolution_time: Rabi frequency must be > 0");
    if (detuning == 0.0) throw InvalidArgument("optimal_evolution_time: T0 undefined on resonance");
    const double eps = std::fabs(detuning) / rabi;
    require(eps < 1.0, "optimal_evolution_time: requires |Delta|/Omega < 1");
    return std::asin(1.0 - 2.0 * eps * eps) / std::fabs(detuning);
}

/// Power-noise coefficient f(eps) at t = t_pi/2, T = T0.
inline double noise_coefficient_power(double eps)
{
    const double e2 = eps * eps;
    const double v = eps * (std::acos(-e2) - std::sqrt(1.0 - e2 * e2)) / std::pow(1.0 + e2, 1.5);
    return v * v;
}

/// Detuning-noise coefficient g(eps) at t = t_pi/2, T = T0.
inline double noise_coefficient_detuning(double eps)
{
    const double e2 = eps * eps;
    const double v = std::asin(1.0 - 2.0 * e2) / eps
                     + 2.0 * (std::sqrt(1.0 - e2 * e2) + e2 * std::acos(-e2)) / std::pow(1.0 + e2, 1.5);
    return v * v;
}

/// Small-eps forms (pi/2 - 1)^2 eps^2 and (pi / (2 eps))^2.
inline double noise_coefficient_power_small_eps(double eps)
{
    const double k = constants::pi / 2.0 - 1.0;
    return k * k * eps * eps;
}

inline double noise_coefficient_detuning_small_eps(double eps)
{
    const double k = constants::pi / (2.0 * eps);
    return k * k;
}

struct NoiseVariance
{
    double power_term = 0;
    double detuning_term = 0;
    double total() const { return power_term + detuning_term; }
};

/// (dP_z)^2 = f(eps) (dP/P)^2 + g(eps) (dDelta/Omega)^2.
inline NoiseVariance ramsey_noise_variance(double eps, const NoiseBudget& noise, double rabi)
{
    noise.validate();
    require(rabi > 0, "ramsey_noise_variance: Rabi frequency must be > 0");
    if (eps == 0.0)
        throw InvalidArgument("ramsey_noise_variance: eps = 0, use resonant_noise_variance");
    require(eps > 0 && eps < 1, "ramsey_noise_variance: requires 0 < eps < 1");
    const double rp = noise.relative_power_noise;
    const double rd = noise.pulse_detuning_noise / rabi;
    return {noise_coefficient_power(eps) * rp * rp, noise_coefficient_detuning(eps) * rd * rd};
}

inline NoiseVariance ramsey_noise_variance_small_eps(double eps, const NoiseBudget& noise, double rabi)
{
    noise.validate();
    require(eps > 0, "ramsey_noise_variance_small_eps: requires eps > 0");
    const double rp = noise.relative_power_noise;
    const double rd = noise.pulse_detuning_noise / rabi;
    return {noise_coefficient_power_small_eps(eps) * rp * rp,
            noise_coefficient_detuning_small_eps(eps) * rd * rd};
}

struct OptimalDetuning
{
    double approx_detuning = 0;   // 1.66 sqrt(dDelta Omega P/dP), rad/s
    double approx_epsilon = 0;
    double exact_detuning = 0;    // argmin of the exact variance, rad/s
    double exact_epsilon = 0;
    double exact_variance = 0;
};

inline OptimalDetuning optimal_detuning(double detuning_noise, double rabi, double relative_power_noise)
{
    require(detuning_noise > 0 && rabi > 0 && relative_power_noise > 0,
            "optimal_detuning: all inputs must be > 0");
    OptimalDetuning out;
    const double ratio = detuning_noise / rabi / relative_power_noise;
    out.approx_epsilon = std::sqrt(ratio) / std::sqrt(1.0 - 2.0 / constants::pi);
    out.approx_detuning = 1.66 * std::sqrt(detuning_noise * rabi / relative_power_noise);

    const NoiseBudget noise{relative_power_noise, detuning_noise, 0.0};
    auto variance = [&](double eps) { return ramsey_noise_variance(eps, noise, rabi).total(); };
    // The variance is unimodal on (0, 1): f increases and g decreases monotonically.
    const auto [eps, v] = boost::math::tools::brent_find_minima(variance, 1e-9, 1.0 - 1e-9, 52);
    out.exact_epsilon = eps;
    out.exact_detuning = eps * rabi;
    out.exact_variance = v;
    return out;
}

/// Pulses on resonance, detuning Delta_1 during the free evolution; power noise
/// enters at second order.
inline NoiseVariance resonant_noise_variance(const NoiseBudget& noise, double rabi, double evolution_detuning)
{
    noise.validate();
    require(rabi > 0, "resonant_noise_variance: Rabi frequency must be > 0");
    require(evolution_detuning != 0.0, "resonant_noise_variance: Delta_1 must be nonzero");
    const double rp = noise.relative_power_noise;
    const double rd = noise.pulse_detuning_noise / rabi;
    const double r1 = noise.evolution_detuning_noise / evolution_detuning;
    const double q = constants::pi / 4.0;
    NoiseVariance v;
    v.power_term = q * q * q * q * rp * rp * rp * rp;
    v.detuning_term = 4.0 * rd * rd + constants::pi * constants::pi / 4.0 * r1 * r1;
    return v;
}

struct BeamsplitterSensitivity
{
    double first_order = 0;       // (2 - pi/2)(Delta/Omega) dDelta/Omega + (pi/4) dP/P
    double detuning_part = 0;     // first term alone
    double power_part = 0;        // second term alone
    double finite_difference = 0; // same linear combination with numerical derivatives
};

/// Fluctuation of P_z after one pulse of the resonant pi/2 duration pi/(2 Omega).
inline BeamsplitterSensitivity single_beamsplitter_sensitivity(double detuning, double rabi,
                                                               double detuning_noise,
                                                               double relative_power_noise)
{
    require(rabi > 0, "single_beamsplitter_sensitivity: Rabi frequency must be > 0");
    BeamsplitterSensitivity out;
    out.detuning_part = (2.0 - constants::pi / 2.0) * (detuning / rabi) * (detuning_noise / rabi);
    out.power_part = constants::pi / 4.0 * relative_power_noise;
    out.first_order = out.detuning_part + out.power_part;

    const double t = constants::pi / (2.0 * rabi);
    auto pz = [&](double w, double d) { return 1.0 - 2.0 * rabi_transition_probability(w, d, t); };
    const double hd = 1e-4 * rabi;
    const double dpz_dd = (pz(rabi, detuning + hd) - pz(rabi, detuning - hd)) / (2.0 * hd);
    const double hw = 1e-6 * rabi;
    // d/d ln P = (Omega/2) d/d Omega
    const double dpz_dlnp = 0.5 * rabi * (pz(rabi + hw, detuning) - pz(rabi - hw, detuning)) / (2.0 * hw);
    out.finite_difference = std::fabs(dpz_dd) * detuning_noise + std::fabs(dpz_dlnp) * relative_power_noise;
    return out;
}

/// Binomial projection noise on the measured population.
inline double projection_noise(double atom_number, double p)
{
    require(atom_number >= 1, "projection_noise: N must be >= 1");
    require(p >= 0 && p <= 1, "projection_noise: p must lie in [0, 1]");
    return std::sqrt(p * (1.0 - p) / atom_number);
}

/// p = (1 + cos(T Delta)) / 2 for ideal resonant pi/2 pulses.
inline double ideal_ramsey_probability(double detuning, double interrogation)
{
    require(interrogation >= 0, "ideal_ramsey_probability: T must be >= 0");
    return 0.5 * (1.0 + std::cos(interrogation * detuning));
}

/// |dp/dDelta| of the ideal fringe.
inline double ideal_ramsey_slope(double detuning, double interrogation)
{
    return 0.5 * interrogation * std::fabs(std::sin(interrogation * detuning));
}

/// Largest detuning fluctuation compatible with projection-noise-limited operation, rad/s.
inline double max_detuning_fluctuation(double interrogation, double atom_number)
{
    require(interrogation > 0, "max_detuning_fluctuation: T must be > 0");
    require(atom_number >= 1, "max_detuning_fluctuation: N must be >= 1");
    return 1.0 / (interrogation * std::sqrt(atom_number));
}

/// Fractional frequency stability implied by an angular fluctuation on a carrier in Hz.
inline double relative_frequency_stability(double detuning_noise, double carrier_hz)
{
    return detuning_noise / (constants::two_pi * carrier_hz);
}

/// Sample variance of P_z when Omega and Delta fluctuate with Gaussian statistics
/// while t = t_pi/2 and T = T0 stay at their calibrated values.
inline double ramsey_noise_monte_carlo(double eps, const NoiseBudget& noise, double rabi,
                                       std::size_t samples, std::uint64_t seed)
{
    noise.validate();
    require(eps > 0 && eps < 1, "ramsey_noise_monte_carlo: requires 0 < eps < 1");
    require(samples >= 2, "ramsey_noise_monte_carlo: need at least 2 samples");
    const double detuning = eps * rabi;
    const double t = pi_half_duration(rabi, detuning);
    const double T = optimal_evolution_time(rabi, detuning);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double mean = 0, m2 = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double power_scale = 1.0 + noise.relative_power_noise * gauss(rng);
        const double w = rabi * std::sqrt(std::fmax(power_scale, 0.0));
        const double d = detuning + noise.pulse_detuning_noise * gauss(rng);
        const double pz = ramsey_pz(w, d, t, T);
        const double delta = pz - mean;
        mean += delta / double(i + 1);
        m2 += delta * (pz - mean);
    }
    return m2 / double(samples - 1);
}

} // namespace ramsey::bloch
