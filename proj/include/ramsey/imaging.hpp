#pragma once

// Absorption imaging: atom number from a bright-field / shadow pair with
// saturation and detuning corrections, photon shot-noise propagation, per-pixel
// Poisson Monte Carlo and a grid search for the quietest imaging parameters.
//
// Naming: e_i is the incident (bright-field) count and e_f the transmitted
// (shadow) count, so that N_px = c0 (L ln(e_i/e_f) + (e_i - e_f)/e_sat) > 0.
// The camera looks along the weak trap axis z; image axes are u = x and v = y.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "ramsey/atomphys.hpp"
#include "ramsey/core.hpp"

namespace ramsey::imaging {

struct CameraConfig
{
    double quantum_efficiency = 0.17;
    double pixel_size = 6.45e-6;   // m, side of a square pixel
    double exposure_time = 100e-6; // s
    double full_well = 18000;      // electrons

    double pixel_area() const { return pixel_size * pixel_size; }

    void validate() const
    {
        require(quantum_efficiency > 0 && quantum_efficiency <= 1, "camera: quantum efficiency must lie in (0, 1]");
        require(pixel_size > 0, "camera: pixel size must be > 0");
        require(exposure_time > 0, "camera: exposure time must be > 0");
        require(full_well > 0, "camera: full-well limit must be > 0");
    }
};

struct ImagingConfig
{
    double magnification = 8;
    double intensity_ratio = 15; // I / I_sat at the atoms
    double detuning = 0;         // rad/s from the cycling transition
    atomphys::AtomSpecies species = atomphys::rubidium87();

    void validate() const
    {
        species.validate();
        require(magnification > 0, "imaging: magnification must be > 0");
        require(intensity_ratio > 0, "imaging: intensity ratio must be > 0");
        require(std::isfinite(detuning), "imaging: detuning must be finite");
    }

    /// L = (4 Delta^2 + Gamma^2) / Gamma^2.
    double line_factor() const
    {
        const double r = detuning / species.natural_linewidth;
        return 1.0 + 4.0 * r * r;
    }

    /// Pixel area mapped back to the object plane over the resonant cross-section.
    /// Equals 2 pi P^2 / (3 lambda^2 M^2) with P the pixel side.
    double c0(const CameraConfig& cam) const
    {
        return cam.pixel_area() / (magnification * magnification) / species.resonant_cross_section();
    }

    /// Electrons a pixel collects when the atoms see I_sat; the camera intensity is I / M^2.
    double e_sat(const CameraConfig& cam) const
    {
        return cam.quantum_efficiency * cam.pixel_area() * cam.exposure_time * species.saturation_intensity
               / (magnification * magnification * species.photon_energy());
    }

    double bright_counts(const CameraConfig& cam) const { return intensity_ratio * e_sat(cam); }
};

/// Thomas-Fermi column density in the image plane.
struct CloudModel
{
    double atom_number = 1e6;
    double state_fraction = 1.0; // fraction in the imaged state
    double radius_u = 0;         // m
    double radius_v = 0;         // m
    double center_u = 0;         // m
    double center_v = 0;         // m

    void validate() const
    {
        require(atom_number >= 1, "cloud: N must be >= 1");
        require(state_fraction >= 0 && state_fraction <= 1, "cloud: state fraction must lie in [0, 1]");
        require(radius_u > 0 && radius_v > 0, "cloud: radii must be > 0");
    }

    /// (5 N / 2 pi R_u R_v) (1 - u^2/R_u^2 - v^2/R_v^2)^{3/2} for N atoms.
    double column_density(double u, double v, double n) const
    {
        const double x = (u - center_u) / radius_u, y = (v - center_v) / radius_v;
        const double s = 1.0 - x * x - y * y;
        if (s <= 0) return 0;
        return 5.0 * n / (constants::two_pi * radius_u * radius_v) * s * std::sqrt(s);
    }
};

/// Castin-Dum scaling factors lambda_j(t) after switching a harmonic trap off.
inline std::array<double, 3> expansion_scaling(const atomphys::TrapConfig& trap, double time)
{
    trap.validate();
    require(time >= 0, "expansion_scaling: time must be >= 0");
    using State = std::array<double, 6>; // lambda_x..z, d/dt lambda_x..z
    const std::array<double, 3> w2{trap.omega_x * trap.omega_x, trap.omega_y * trap.omega_y,
                                   trap.omega_z * trap.omega_z};
    auto rhs = [&](const State& s, State& ds, double) {
        const double vol = s[0] * s[1] * s[2];
        for (int j = 0; j < 3; ++j) {
            ds[std::size_t(j)] = s[std::size_t(j) + 3];
            ds[std::size_t(j) + 3] = w2[std::size_t(j)] / (s[std::size_t(j)] * vol);
        }
    };
    State s{1, 1, 1, 0, 0, 0};
    if (time > 0) {
        namespace ode = boost::numeric::odeint;
        auto stepper = ode::make_controlled(1e-12, 1e-12, ode::runge_kutta_dopri5<State>());
        ode::integrate_adaptive(stepper, rhs, s, 0.0, time, 1e-3 / trap.max_frequency());
    }
    return {s[0], s[1], s[2]};
}

/// Condensate released from `trap` and imaged along z after `expansion_time`.
inline CloudModel expanded_cloud(const atomphys::AtomSpecies& s, const atomphys::TrapConfig& trap,
                                 double atom_number, double expansion_time, double state_fraction = 1.0)
{
    const double mu = atomphys::tf_chemical_potential(s, trap, atom_number);
    const auto lam = expansion_scaling(trap, expansion_time);
    CloudModel c;
    c.atom_number = atom_number;
    c.state_fraction = state_fraction;
    c.radius_u = lam[0] * atomphys::tf_radius(s, mu, trap.omega_x);
    c.radius_v = lam[1] * atomphys::tf_radius(s, mu, trap.omega_y);
    c.validate();
    return c;
}

/// Pixel array in the object plane, sized to the cloud's bounding box plus a margin.
struct PixelGrid
{
    int nu = 0;
    int nv = 0;
    double pitch = 0; // m, object-plane pixel side
    double u0 = 0;    // m, lower edge
    double v0 = 0;

    std::size_t size() const { return std::size_t(nu) * std::size_t(nv); }
    double u_center(int i) const { return u0 + (i + 0.5) * pitch; }
    double v_center(int j) const { return v0 + (j + 0.5) * pitch; }
};

inline PixelGrid roi_for(const CloudModel& cloud, const ImagingConfig& img, const CameraConfig& cam,
                         int margin = 2)
{
    cloud.validate();
    img.validate();
    cam.validate();
    PixelGrid g;
    g.pitch = cam.pixel_size / img.magnification;
    const int hu = int(std::ceil(cloud.radius_u / g.pitch)) + margin;
    const int hv = int(std::ceil(cloud.radius_v / g.pitch)) + margin;
    g.nu = 2 * hu;
    g.nv = 2 * hv;
    g.u0 = cloud.center_u - hu * g.pitch;
    g.v0 = cloud.center_v - hv * g.pitch;
    return g;
}

/// Atoms falling in each pixel for a cloud of n atoms: 4 x 4 midpoint
/// quadrature per pixel, rescaled so that the array sums to n.
inline std::vector<double> pixel_atom_numbers(const CloudModel& cloud, const PixelGrid& g, double n)
{
    constexpr int sub = 4;
    std::vector<double> a(g.size(), 0.0);
    const double h = g.pitch / sub;
    double total = 0;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            double acc = 0;
            for (int q = 0; q < sub; ++q)
                for (int p = 0; p < sub; ++p)
                    acc += cloud.column_density(g.u0 + i * g.pitch + (p + 0.5) * h,
                                                g.v0 + j * g.pitch + (q + 0.5) * h, n);
            a[std::size_t(j) * std::size_t(g.nu) + std::size_t(i)] = acc * h * h;
            total += acc * h * h;
        }
    if (total > 0)
        for (double& v : a) v *= n / total;
    return a;
}

struct ImagePair
{
    PixelGrid grid;
    std::vector<double> e_i; // bright field
    std::vector<double> e_f; // shadow
};

struct PixelAtoms
{
    std::vector<double> atoms;
    std::vector<std::uint8_t> valid;
    std::size_t masked = 0; // pixels with non-positive counts, left out of the total
    double total = 0;
};

inline double atoms_in_pixel(double e_i, double e_f, double c0, double line, double e_sat)
{
    return c0 * (line * std::log(e_i / e_f) + (e_i - e_f) / e_sat);
}

inline PixelAtoms atoms_per_pixel(const ImagePair& pair, const ImagingConfig& img, const CameraConfig& cam)
{
    require(pair.e_i.size() == pair.e_f.size() && pair.e_i.size() == pair.grid.size(),
            "atoms_per_pixel: image arrays are not congruent");
    const double c0 = img.c0(cam), line = img.line_factor(), esat = img.e_sat(cam);
    PixelAtoms out;
    out.atoms.assign(pair.e_i.size(), 0.0);
    out.valid.assign(pair.e_i.size(), 0);
    for (std::size_t k = 0; k < pair.e_i.size(); ++k) {
        if (!(pair.e_i[k] > 0) || !(pair.e_f[k] > 0)) {
            ++out.masked;
            continue;
        }
        out.valid[k] = 1;
        out.atoms[k] = atoms_in_pixel(pair.e_i[k], pair.e_f[k], c0, line, esat);
        out.total += out.atoms[k];
    }
    return out;
}

/// Solve N_px = c0 (L ln(e_i/e_f) + (e_i - e_f)/e_sat) for e_f. Newton in
/// y = ln e_f; the residual is concave and decreasing in y, so iterates from
/// y = ln e_i approach the root monotonically from above.
inline double shadow_counts(double atoms, double e_i, double c0, double line, double e_sat, std::size_t pixel = 0)
{
    if (atoms <= 0) return e_i;
    const double target = atoms / c0;
    const double ln_ei = std::log(e_i);
    double y = ln_ei;
    for (int it = 0; it < 200; ++it) {
        const double ef = std::exp(y);
        const double g = line * (ln_ei - y) + (e_i - ef) / e_sat - target;
        const double dg = -line - ef / e_sat;
        const double step = g / dg;
        y -= step;
        if (std::fabs(step) < 1e-13) return std::exp(y);
    }
    std::ostringstream os;
    os << "simulate_image_pair: shadow inversion did not converge at pixel " << pixel;
    throw NumericalError(os.str());
}

/// Mean images for a given atom number in the imaged state.
inline ImagePair mean_image_pair(const CloudModel& cloud, const ImagingConfig& img, const CameraConfig& cam,
                                 double imaged_atoms)
{
    ImagePair pair;
    pair.grid = roi_for(cloud, img, cam);
    const auto atoms = pixel_atom_numbers(cloud, pair.grid, imaged_atoms);
    const double c0 = img.c0(cam), line = img.line_factor(), esat = img.e_sat(cam);
    const double bright = img.bright_counts(cam);
    pair.e_i.assign(atoms.size(), bright);
    pair.e_f.resize(atoms.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) pair.e_f[k] = shadow_counts(atoms[k], bright, c0, line, esat, k);
    return pair;
}

namespace detail {

inline void poisson_sample(std::vector<double>& v, std::mt19937_64& rng)
{
    for (double& x : v) {
        std::poisson_distribution<long long> d(x);
        x = double(d(rng));
    }
}

/// Poisson draws around a fixed mean image; the per-pixel distributions are
/// built once and reused across runs.
class PoissonImage
{
public:
    explicit PoissonImage(const std::vector<double>& mean)
    {
        dist_.reserve(mean.size());
        for (double m : mean) dist_.emplace_back(m);
    }

    void sample(std::vector<double>& out, std::mt19937_64& rng)
    {
        out.resize(dist_.size());
        for (std::size_t k = 0; k < dist_.size(); ++k) out[k] = double(dist_[k](rng));
    }

private:
    std::vector<std::poisson_distribution<long long>> dist_;
};

} // namespace detail

/// Mean (noise_on = false) or Poisson-sampled image pair. With atomic_noise the
/// imaged number is drawn from Binomial(N, p) first; otherwise it is N p.
inline ImagePair simulate_image_pair(const CloudModel& cloud, const ImagingConfig& img, const CameraConfig& cam,
                                     std::uint64_t seed, bool noise_on, bool atomic_noise = false)
{
    std::mt19937_64 rng(seed);
    double n = cloud.atom_number * cloud.state_fraction;
    if (atomic_noise) {
        std::binomial_distribution<long long> b((long long)std::llround(cloud.atom_number), cloud.state_fraction);
        n = double(b(rng));
    }
    ImagePair pair = mean_image_pair(cloud, img, cam, n);
    if (noise_on) {
        detail::poisson_sample(pair.e_i, rng);
        detail::poisson_sample(pair.e_f, rng);
    }
    return pair;
}

struct DetectionNoise
{
    double printed = 0;  // e_i paired with L/e_f and e_f with L/e_i
    double standard = 0; // first-order propagation: e_i with L/e_i, e_f with L/e_f
};

inline DetectionNoise detection_noise_closed_form(const ImagePair& mean, const ImagingConfig& img,
                                                  const CameraConfig& cam)
{
    require(mean.e_i.size() == mean.e_f.size(), "detection_noise: image arrays are not congruent");
    const double c0 = img.c0(cam), line = img.line_factor(), inv_sat = 1.0 / img.e_sat(cam);
    double printed = 0, standard = 0;
    for (std::size_t k = 0; k < mean.e_i.size(); ++k) {
        const double ei = mean.e_i[k], ef = mean.e_f[k];
        require(ei > 0 && ef > 0, "detection_noise: mean counts must be > 0");
        const double ai = inv_sat + line / ei, af = inv_sat + line / ef;
        printed += ei * af * af + ef * ai * ai;
        standard += ei * ai * ai + ef * af * af;
    }
    return {c0 * std::sqrt(printed), c0 * std::sqrt(standard)};
}

inline DetectionNoise detection_noise(const CloudModel& cloud, const ImagingConfig& img, const CameraConfig& cam)
{
    return detection_noise_closed_form(mean_image_pair(cloud, img, cam, cloud.atom_number * cloud.state_fraction),
                                       img, cam);
}

/// sigma_a = sqrt(N p (1 - p)).
inline double projection_noise_atoms(double atom_number, double p)
{
    require(atom_number >= 1, "projection_noise_atoms: N must be >= 1");
    require(p >= 0 && p <= 1, "projection_noise_atoms: p must lie in [0, 1]");
    return std::sqrt(atom_number * p * (1 - p));
}

/// sqrt(sigma_a^2 + sigma_det^2).
inline double total_image_noise(double sigma_a, double sigma_det) { return std::hypot(sigma_a, sigma_det); }

/// Atom shot noise sqrt(N) of the whole cloud over the detection noise.
inline double shot_noise_ratio(double atom_number, double sigma_det)
{
    require(sigma_det > 0, "shot_noise_ratio: sigma_det must be > 0");
    return std::sqrt(atom_number) / sigma_det;
}

/// 10 log10 of shot_noise_ratio.
inline double squeezing_headroom_db(double atom_number, double sigma_det)
{
    return 10.0 * std::log10(shot_noise_ratio(atom_number, sigma_det));
}

/// Measured atom numbers over independent runs; run r uses seed base ^ r.
inline std::vector<double> monte_carlo_atom_numbers(const CloudModel& cloud, const ImagingConfig& img,
                                                    const CameraConfig& cam, int runs, std::uint64_t base_seed,
                                                    bool atomic_noise = false)
{
    require(runs >= 1, "monte_carlo_atom_numbers: runs must be >= 1");
    const ImagePair mean = mean_image_pair(cloud, img, cam, cloud.atom_number * cloud.state_fraction);
    detail::PoissonImage bright(mean.e_i), shadow(mean.e_f);
    ImagePair pair = mean;
    std::vector<double> out;
    out.reserve(std::size_t(runs));
    for (int r = 0; r < runs; ++r) {
        const std::uint64_t seed = base_seed ^ std::uint64_t(r);
        if (atomic_noise) {
            pair = simulate_image_pair(cloud, img, cam, seed, true, true);
        } else {
            std::mt19937_64 rng(seed);
            bright.sample(pair.e_i, rng);
            shadow.sample(pair.e_f, rng);
        }
        out.push_back(atoms_per_pixel(pair, img, cam).total);
    }
    return out;
}

/// Unbiased running standard deviation; entry k uses the first k + 2 samples.
inline std::vector<double> cumulative_std(const std::vector<double>& samples)
{
    require(samples.size() >= 2, "cumulative_std: need at least 2 samples");
    std::vector<double> out;
    out.reserve(samples.size() - 1);
    double mean = 0, m2 = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double d = samples[k] - mean;
        mean += d / double(k + 1);
        m2 += d * (samples[k] - mean);
        if (k >= 1) out.push_back(std::sqrt(std::fmax(m2, 0.0) / double(k)));
    }
    return out;
}

inline double sample_std(const std::vector<double>& samples) { return cumulative_std(samples).back(); }

/// Number of samples after which the running std stays within `rel` of its final value.
inline std::size_t plateau_samples(const std::vector<double>& running_std, double rel)
{
    require(!running_std.empty(), "plateau_samples: empty series");
    const double last = running_std.back();
    std::size_t k = running_std.size();
    while (k > 0 && std::fabs(running_std[k - 1] - last) <= rel * last) --k;
    return k + 2;
}

struct SearchSpace
{
    std::vector<double> intensity_ratios{1, 2, 5, 10, 15, 20, 25, 30};
    std::vector<double> magnifications{1, 2, 4, 6, 8, 10, 12};
    std::vector<double> exposure_times{25e-6, 50e-6, 100e-6}; // s
    std::vector<double> detunings{0};                          // rad/s
    double tie_tolerance = 0.005; // relative sigma_det window treated as a tie
};

struct SurfacePoint
{
    double intensity_ratio = 0;
    double magnification = 0;
    double exposure_time = 0;
    double detuning = 0;
    double bright_counts = 0;
    double sigma_det = 0; // NaN when infeasible
    bool feasible = false;
};

struct OptimizationResult
{
    ImagingConfig best;
    CameraConfig camera; // camera with the chosen exposure
    double sigma_det = 0;
    std::vector<SurfacePoint> surface;
};

/// Exhaustive search minimising the standard-pairing sigma_det subject to the
/// bright-field counts staying within the full well.
///
/// Without read noise sigma_det is nearly flat in M once the cloud is resolved,
/// so points within tie_tolerance of the minimum count as equal and the
/// smallest magnification (widest field of view) among them wins; the lowest
/// sigma_det breaks any remaining tie.
inline OptimizationResult optimize_parameters(const CloudModel& cloud, const CameraConfig& camera,
                                              const SearchSpace& space, const ImagingConfig& base = {})
{
    require(!space.intensity_ratios.empty() && !space.magnifications.empty() && !space.exposure_times.empty()
                && !space.detunings.empty(),
            "optimize_parameters: search space is empty");
    require(space.tie_tolerance >= 0, "optimize_parameters: tie tolerance must be >= 0");
    OptimizationResult res;
    double best = std::numeric_limits<double>::infinity();
    for (double s : space.intensity_ratios)
        for (double m : space.magnifications)
            for (double tau : space.exposure_times)
                for (double det : space.detunings) {
                    ImagingConfig img = base;
                    img.intensity_ratio = s;
                    img.magnification = m;
                    img.detuning = det;
                    CameraConfig cam = camera;
                    cam.exposure_time = tau;
                    SurfacePoint p{s, m, tau, det, img.bright_counts(cam), NAN, false};
                    p.feasible = p.bright_counts <= cam.full_well;
                    if (p.feasible) {
                        p.sigma_det = detection_noise(cloud, img, cam).standard;
                        best = std::fmin(best, p.sigma_det);
                    }
                    res.surface.push_back(p);
                }
    if (!std::isfinite(best))
        throw InvalidArgument("optimize_parameters: no configuration satisfies the full-well limit");

    const SurfacePoint* pick = nullptr;
    for (const auto& p : res.surface) {
        if (!p.feasible || p.sigma_det > best * (1 + space.tie_tolerance)) continue;
        if (!pick || p.magnification < pick->magnification
            || (p.magnification == pick->magnification && p.sigma_det < pick->sigma_det))
            pick = &p;
    }
    res.best = base;
    res.best.intensity_ratio = pick->intensity_ratio;
    res.best.magnification = pick->magnification;
    res.best.detuning = pick->detuning;
    res.camera = camera;
    res.camera.exposure_time = pick->exposure_time;
    res.sigma_det = pick->sigma_det;
    return res;
}

} // namespace ramsey::imaging
