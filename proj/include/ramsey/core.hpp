#pragma once

// Shared constants, unit conversions and error types.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ramsey {

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails (non-convergence, NaN, step-size violation).
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw InvalidArgument(message);
}

namespace constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double planck = 6.62607015e-34;         // J s
inline constexpr double bohr_magneton = 9.2740100783e-24; // J/T
inline constexpr double bohr_radius = 5.29177210903e-11; // m
inline constexpr double speed_of_light = 299792458.0;    // m/s
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg

} // namespace constants

namespace units {

inline constexpr double gauss = 1e-4; // T

inline constexpr double hz_to_angular(double hz) { return constants::two_pi * hz; }
inline constexpr double angular_to_hz(double w) { return w / constants::two_pi; }
inline constexpr double gauss_to_tesla(double g) { return g * gauss; }
inline constexpr double tesla_to_gauss(double t) { return t / gauss; }
inline constexpr double bohr_to_m(double a) { return a * constants::bohr_radius; }
inline constexpr double m_to_bohr(double a) { return a / constants::bohr_radius; }

} // namespace units

} // namespace ramsey
