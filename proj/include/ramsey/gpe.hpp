#pragma once

// Coupled two-component Gross-Pitaevskii solver on a cylindrical (rho, z) grid.
//
// Internally everything is in harmonic-oscillator units of the geometric-mean
// trap frequency: length a_ho, time 1/omega_bar, energy hbar omega_bar. Field
// amplitudes are stored in a_ho^(-3/2) and normalised so that
// sum_cells w |psi|^2 = N with w = 2 pi rho d_rho d_z.
//
// Real time: Strang splitting with exact pointwise potential+mean-field phase
// half-steps around a Crank-Nicolson kinetic step. The kinetic step applies the
// Cayley transform in rho and then in z; the two directions act on different
// indices, so the factorisation introduces no splitting error of its own.
// Imaginary time: the same splitting with decaying factors, renormalised each step.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "ramsey/analysis.hpp"
#include "ramsey/atomphys.hpp"
#include "ramsey/core.hpp"

namespace ramsey::gpe {

using cplx = std::complex<double>;

/// Grid resolution and extents. Extents are multiples of the Thomas-Fermi radii
/// (or of 6 oscillator widths when that is larger) unless given explicitly in metres.
struct GridSpec
{
    int n_rho = 128;
    int n_z = 256;
    double rho_extent = 1.5;
    double z_extent = 1.5;
    double rho_max = 0; // m; > 0 overrides rho_extent
    double z_max = 0;   // m; > 0 overrides z_extent
};

struct GpeConfig
{
    atomphys::AtomSpecies species = atomphys::rubidium87();
    atomphys::TrapConfig trap = atomphys::cylindrical_sim_trap();
    double atom_number = 1e6;
    double dt_real = 2e-6;          // s
    double dt_imag = 1e-6;          // s
    double convergence_tol = 1e-12; // relative energy change per imaginary-time step
    double a12_scale = 1.0;
    GridSpec grid;
    long max_imag_steps = 400000;

    void validate() const
    {
        species.validate();
        trap.validate();
        require(trap.is_cylindrical(), "gpe: trap must be cylindrical (omega_x == omega_y)");
        require(atom_number >= 1, "gpe: N must be >= 1");
        require(dt_real > 0 && dt_imag > 0, "gpe: time steps must be > 0");
        require(convergence_tol > 0, "gpe: convergence tolerance must be > 0");
        require(a12_scale > 0, "gpe: a12 scale must be > 0");
        require(grid.n_rho >= 8 && grid.n_z >= 8, "gpe: grid needs at least 8 points per direction");
        require(grid.rho_extent > 0 && grid.z_extent > 0, "gpe: grid extents must be > 0");
        require(max_imag_steps > 0, "gpe: imaginary-time step budget must be > 0");
    }
};

/// Oscillator-unit scales derived from a configuration.
struct Scales
{
    double omega_bar = 0;   // rad/s
    double a_ho = 0;        // m
    double lambda_rho = 0;  // omega_rho / omega_bar
    double lambda_z = 0;
    double beta11 = 0;      // 4 pi a_ij / a_ho
    double beta12 = 0;
    double beta22 = 0;
    double mu_tf = 0;       // Thomas-Fermi chemical potential, hbar omega_bar

    double time_unit() const { return 1.0 / omega_bar; }
    double energy_unit() const { return constants::hbar * omega_bar; }

    static Scales from(const GpeConfig& c)
    {
        Scales s;
        s.omega_bar = c.trap.geometric_mean();
        s.a_ho = atomphys::oscillator_length(c.species, c.trap);
        s.lambda_rho = c.trap.omega_rho() / s.omega_bar;
        s.lambda_z = c.trap.omega_z / s.omega_bar;
        s.beta11 = 4.0 * constants::pi * c.species.a11 / s.a_ho;
        s.beta12 = 4.0 * constants::pi * c.species.a12 * c.a12_scale / s.a_ho;
        s.beta22 = 4.0 * constants::pi * c.species.a22 / s.a_ho;
        s.mu_tf = 0.5 * std::pow(15.0 * c.atom_number * c.species.a11 / s.a_ho, 0.4);
        return s;
    }
};

/// Cell-centred grid: rho_j = (j + 1/2) d_rho, z_k = -z_max + (k + 1/2) d_z, index j * n_z + k.
/// Lengths are in oscillator units; a_ho converts to metres.
struct CylGrid
{
    int n_rho = 0;
    int n_z = 0;
    double d_rho = 0;
    double d_z = 0;
    double rho_max = 0;
    double z_max = 0;
    double a_ho = 1;
    std::vector<double> rho;
    std::vector<double> z;
    std::vector<double> weight; // per rho index: 2 pi rho_j d_rho d_z

    std::size_t size() const { return std::size_t(n_rho) * std::size_t(n_z); }
    std::size_t index(int j, int k) const { return std::size_t(j) * std::size_t(n_z) + std::size_t(k); }
    double rho_si(int j) const { return rho[std::size_t(j)] * a_ho; }
    double z_si(int k) const { return z[std::size_t(k)] * a_ho; }

    static CylGrid make(int n_rho, int n_z, double rho_max, double z_max, double a_ho)
    {
        require(n_rho >= 2 && n_z >= 2 && rho_max > 0 && z_max > 0, "grid: invalid dimensions");
        CylGrid g;
        g.n_rho = n_rho;
        g.n_z = n_z;
        g.rho_max = rho_max;
        g.z_max = z_max;
        g.a_ho = a_ho;
        g.d_rho = rho_max / n_rho;
        g.d_z = 2.0 * z_max / n_z;
        g.rho.resize(std::size_t(n_rho));
        g.weight.resize(std::size_t(n_rho));
        for (int j = 0; j < n_rho; ++j) {
            g.rho[std::size_t(j)] = (j + 0.5) * g.d_rho;
            g.weight[std::size_t(j)] = constants::two_pi * g.rho[std::size_t(j)] * g.d_rho * g.d_z;
        }
        g.z.resize(std::size_t(n_z));
        for (int k = 0; k < n_z; ++k) g.z[std::size_t(k)] = -z_max + (k + 0.5) * g.d_z;
        return g;
    }
};

inline CylGrid make_grid(const GpeConfig& c)
{
    const Scales s = Scales::from(c);
    const double r_tf_rho = std::sqrt(2.0 * s.mu_tf) / s.lambda_rho;
    const double r_tf_z = std::sqrt(2.0 * s.mu_tf) / s.lambda_z;
    const double rho_max = c.grid.rho_max > 0
                               ? c.grid.rho_max / s.a_ho
                               : std::fmax(c.grid.rho_extent * r_tf_rho, 6.0 / std::sqrt(s.lambda_rho));
    const double z_max = c.grid.z_max > 0 ? c.grid.z_max / s.a_ho
                                          : std::fmax(c.grid.z_extent * r_tf_z, 6.0 / std::sqrt(s.lambda_z));
    return CylGrid::make(c.grid.n_rho, c.grid.n_z, rho_max, z_max, s.a_ho);
}

struct GridDiagnostics
{
    double healing_length = 0;  // m, 1 / sqrt(8 pi n0 a11) at the TF peak density
    double d_rho = 0;           // m
    double d_z = 0;             // m
    double rho_max_over_tf = 0;
    double z_max_over_tf = 0;
    bool resolves_healing_length = false; // max(d_rho, d_z) <= healing_length / 2
    bool extents_cover_three_tf = false;
};

inline GridDiagnostics diagnose_grid(const GpeConfig& c, const CylGrid& g)
{
    const Scales s = Scales::from(c);
    GridDiagnostics d;
    d.healing_length = s.a_ho / std::sqrt(2.0 * s.mu_tf);
    d.d_rho = g.d_rho * s.a_ho;
    d.d_z = g.d_z * s.a_ho;
    d.rho_max_over_tf = g.rho_max / (std::sqrt(2.0 * s.mu_tf) / s.lambda_rho);
    d.z_max_over_tf = g.z_max / (std::sqrt(2.0 * s.mu_tf) / s.lambda_z);
    d.resolves_healing_length = std::fmax(d.d_rho, d.d_z) <= 0.5 * d.healing_length;
    const double three = 3.0 * (1 - 1e-12);
    d.extents_cover_three_tf = d.rho_max_over_tf >= three && d.z_max_over_tf >= three;
    return d;
}

/// Two-component state.
struct SpinorField
{
    CylGrid grid;
    std::vector<cplx> psi1;
    std::vector<cplx> psi2;
    double time = 0; // s since the first pulse

    double population1() const { return norm_of(psi1); }
    double population2() const { return norm_of(psi2); }
    double total_number() const { return population1() + population2(); }

    /// sum w psi1^* psi2
    cplx overlap() const
    {
        cplx acc = 0;
        for (int j = 0; j < grid.n_rho; ++j) {
            cplx row = 0;
            for (int k = 0; k < grid.n_z; ++k) {
                const std::size_t i = grid.index(j, k);
                row += std::conj(psi1[i]) * psi2[i];
            }
            acc += grid.weight[std::size_t(j)] * row;
        }
        return acc;
    }

    /// Density of component c (1 or 2) in m^-3.
    std::vector<double> density_si(int c) const
    {
        const auto& p = c == 1 ? psi1 : psi2;
        const double scale = 1.0 / (grid.a_ho * grid.a_ho * grid.a_ho);
        std::vector<double> n(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) n[i] = std::norm(p[i]) * scale;
        return n;
    }

    /// arg(psi2 psi1^*).
    std::vector<double> relative_phase() const
    {
        std::vector<double> ph(psi1.size());
        for (std::size_t i = 0; i < psi1.size(); ++i) ph[i] = std::arg(psi2[i] * std::conj(psi1[i]));
        return ph;
    }

private:
    double norm_of(const std::vector<cplx>& p) const
    {
        double acc = 0;
        for (int j = 0; j < grid.n_rho; ++j) {
            double row = 0;
            for (int k = 0; k < grid.n_z; ++k) row += std::norm(p[grid.index(j, k)]);
            acc += grid.weight[std::size_t(j)] * row;
        }
        return acc;
    }
};

/// psi2 -> e^{i phi} psi2, then psi1 -> (psi1 - i psi2)/sqrt2, psi2 -> (psi2 - i psi1)/sqrt2.
inline SpinorField apply_pi_half(SpinorField f, double phase = 0.0)
{
    const cplx rot = std::polar(1.0, phase);
    const double s = std::sqrt(0.5);
    const cplx mi(0, -1);
    for (std::size_t i = 0; i < f.psi1.size(); ++i) {
        const cplx a = f.psi1[i];
        const cplx b = rot * f.psi2[i];
        f.psi1[i] = s * (a + mi * b);
        f.psi2[i] = s * (b + mi * a);
    }
    return f;
}

/// psi1 -> -i psi2, psi2 -> -i psi1.
inline SpinorField apply_pi(SpinorField f)
{
    const cplx mi(0, -1);
    for (std::size_t i = 0; i < f.psi1.size(); ++i) {
        const cplx a = f.psi1[i];
        f.psi1[i] = mi * f.psi2[i];
        f.psi2[i] = mi * a;
    }
    return f;
}

/// V = 2 |sum w psi1^* psi2| / N.
inline double interference_visibility(const SpinorField& f)
{
    const double n = f.total_number();
    if (!(n > 0)) throw InvalidArgument("interference_visibility: field has zero norm");
    return std::fmin(1.0, 2.0 * std::abs(f.overlap()) / n);
}

namespace detail {

/// Thomas factorisation of a constant tridiagonal matrix (lower l_j, diag d_j, upper u_j).
template <class T>
struct Tridiag
{
    std::vector<T> lower;
    std::vector<T> cprime;
    std::vector<T> inv;

    void factor(const std::vector<T>& l, const std::vector<T>& d, const std::vector<T>& u)
    {
        const std::size_t n = d.size();
        lower = l;
        cprime.assign(n, T(0));
        inv.assign(n, T(0));
        T m = d[0];
        for (std::size_t j = 0; j < n; ++j) {
            if (j > 0) m = d[j] - l[j] * cprime[j - 1];
            if (std::abs(m) == 0.0) throw NumericalError("tridiagonal factorisation: zero pivot");
            inv[j] = T(1) / m;
            cprime[j] = j + 1 < n ? u[j] * inv[j] : T(0);
        }
    }
};

/// Discrete kinetic operator -1/2 Laplacian along one direction as three diagonals.
struct KineticStencil
{
    std::vector<double> lower, diag, upper;
};

// Radial part with zero flux at rho = 0 and psi = 0 one cell beyond rho_max.
inline KineticStencil radial_stencil(const CylGrid& g)
{
    KineticStencil s;
    const int n = g.n_rho;
    const double h2 = g.d_rho * g.d_rho;
    s.lower.resize(std::size_t(n));
    s.diag.assign(std::size_t(n), 1.0 / h2);
    s.upper.resize(std::size_t(n));
    for (int j = 0; j < n; ++j) {
        const double r = g.rho[std::size_t(j)];
        const double rm = j * g.d_rho;       // rho_{j-1/2}
        const double rp = (j + 1) * g.d_rho; // rho_{j+1/2}
        s.lower[std::size_t(j)] = j > 0 ? -rm / (2.0 * r * h2) : 0.0;
        s.upper[std::size_t(j)] = j + 1 < n ? -rp / (2.0 * r * h2) : 0.0;
    }
    return s;
}

inline KineticStencil axial_stencil(const CylGrid& g)
{
    KineticStencil s;
    const int n = g.n_z;
    const double h2 = g.d_z * g.d_z;
    s.lower.assign(std::size_t(n), -0.5 / h2);
    s.diag.assign(std::size_t(n), 1.0 / h2);
    s.upper.assign(std::size_t(n), -0.5 / h2);
    s.lower[0] = 0.0;
    s.upper[std::size_t(n - 1)] = 0.0;
    return s;
}

/// Factor I + c K for scalar c (complex for Cayley steps, real for imaginary time).
template <class T>
Tridiag<T> factor_shifted(const KineticStencil& k, T c)
{
    const std::size_t n = k.diag.size();
    std::vector<T> l(n), d(n), u(n);
    for (std::size_t j = 0; j < n; ++j) {
        l[j] = c * k.lower[j];
        d[j] = T(1) + c * k.diag[j];
        u[j] = c * k.upper[j];
    }
    Tridiag<T> t;
    t.factor(l, d, u);
    return t;
}

/// psi <- (I + c K_rho)^{-1} (I + b K_rho) psi, vectorised across z. b = 0 skips the explicit half.
template <class T>
void sweep_rho(std::vector<T>& psi, std::vector<T>& scratch, const CylGrid& g, const KineticStencil& ks,
               const Tridiag<T>& f, T b)
{
    const int nr = g.n_rho, nz = g.n_z;
    const bool explicit_part = b != T(0);
    for (int j = 0; j < nr; ++j) {
        T* out = scratch.data() + std::size_t(j) * nz;
        const T* c = psi.data() + std::size_t(j) * nz;
        if (explicit_part) {
            const T dj = T(1) + b * ks.diag[std::size_t(j)];
            const T lj = b * ks.lower[std::size_t(j)];
            const T uj = b * ks.upper[std::size_t(j)];
            const T* dn = j > 0 ? c - nz : nullptr;
            const T* up = j + 1 < nr ? c + nz : nullptr;
            for (int k = 0; k < nz; ++k) {
                T v = dj * c[k];
                if (dn) v += lj * dn[k];
                if (up) v += uj * up[k];
                out[k] = v;
            }
        } else {
            std::copy(c, c + nz, out);
        }
        // forward elimination
        const T inv = f.inv[std::size_t(j)];
        if (j == 0) {
            for (int k = 0; k < nz; ++k) out[k] *= inv;
        } else {
            const T lj = f.lower[std::size_t(j)];
            const T* prev = out - nz;
            for (int k = 0; k < nz; ++k) out[k] = (out[k] - lj * prev[k]) * inv;
        }
    }
    for (int j = nr - 2; j >= 0; --j) {
        const T cp = f.cprime[std::size_t(j)];
        T* row = scratch.data() + std::size_t(j) * nz;
        const T* next = row + nz;
        for (int k = 0; k < nz; ++k) row[k] -= cp * next[k];
    }
    psi.swap(scratch);
}

/// Same along z, one contiguous line per rho index.
template <class T>
void sweep_z(std::vector<T>& psi, std::vector<T>& line, const CylGrid& g, const KineticStencil& ks,
             const Tridiag<T>& f, T b)
{
    const int nr = g.n_rho, nz = g.n_z;
    const bool explicit_part = b != T(0);
    const T dd = T(1) + b * ks.diag[0];
    const T off = b * ks.lower[1];
    const T lo = f.lower[1];
    for (int j = 0; j < nr; ++j) {
        T* c = psi.data() + std::size_t(j) * nz;
        if (explicit_part) {
            line[0] = dd * c[0] + off * c[1];
            for (int k = 1; k + 1 < nz; ++k) line[std::size_t(k)] = dd * c[k] + off * (c[k - 1] + c[k + 1]);
            line[std::size_t(nz - 1)] = dd * c[nz - 1] + off * c[nz - 2];
        } else {
            std::copy(c, c + nz, line.begin());
        }
        c[0] = line[0] * f.inv[0];
        for (int k = 1; k < nz; ++k) c[k] = (line[std::size_t(k)] - lo * c[k - 1]) * f.inv[std::size_t(k)];
        for (int k = nz - 2; k >= 0; --k) c[k] -= f.cprime[std::size_t(k)] * c[k + 1];
    }
}

} // namespace detail

struct Energies
{
    double kinetic = 0;     // hbar omega_bar units, whole cloud
    double potential = 0;
    double interaction = 0;
    double total() const { return kinetic + potential + interaction; }
};

/// Owns the operator data for one configuration and grid; stepping is allocation free.
class Propagator
{
public:
    Propagator(const GpeConfig& config, const CylGrid& grid)
        : cfg_(config), grid_(grid), s_(Scales::from(config)),
          krho_(detail::radial_stencil(grid)), kz_(detail::axial_stencil(grid))
    {
        pot_.resize(grid.size());
        for (int j = 0; j < grid.n_rho; ++j)
            for (int k = 0; k < grid.n_z; ++k) {
                const double r = grid.rho[std::size_t(j)] * s_.lambda_rho;
                const double z = grid.z[std::size_t(k)] * s_.lambda_z;
                pot_[grid.index(j, k)] = 0.5 * (r * r + z * z);
            }
        scratch_c_.resize(grid.size());
        line_c_.resize(std::size_t(grid.n_z));
    }

    const Scales& scales() const { return s_; }
    const CylGrid& grid() const { return grid_; }
    const std::vector<double>& potential() const { return pot_; }

    /// Largest stable-accuracy real-time step, s: min(0.1 trap period, hbar / (2 mu)).
    double max_real_step() const
    {
        const double period = constants::two_pi / cfg_.trap.max_frequency();
        const double mu = std::fmax(s_.mu_tf, 0.5) * s_.energy_unit();
        return std::fmin(0.1 * period, constants::hbar / (2.0 * mu));
    }

    /// Advance by nsteps steps of dt (s), merging adjacent phase half-steps.
    void evolve_steps(SpinorField& f, long nsteps, double dt)
    {
        if (nsteps <= 0) return;
        if (dt > max_real_step() * (1 + 1e-12)) {
            std::ostringstream os;
            os << "evolve: dt = " << dt << " s exceeds the step bound " << max_real_step() << " s";
            throw NumericalError(os.str());
        }
        const double tau = dt / s_.time_unit();
        set_real_step(tau);
        const double n0 = f.total_number();
        phase_step(f, 0.5 * tau);
        for (long s = 0; s < nsteps; ++s) {
            kinetic_step(f.psi1);
            kinetic_step(f.psi2);
            phase_step(f, s + 1 < nsteps ? tau : 0.5 * tau);
            if ((s + 1) % 256 == 0 || s + 1 == nsteps) check_finite(f, n0, s + 1);
        }
        f.time += dt * double(nsteps);
    }

    Energies energies(const SpinorField& f) const
    {
        Energies e;
        e.kinetic = kinetic_energy(f.psi1) + kinetic_energy(f.psi2);
        double pot = 0, inter = 0;
        for (int j = 0; j < grid_.n_rho; ++j) {
            double rp = 0, ri = 0;
            for (int k = 0; k < grid_.n_z; ++k) {
                const std::size_t i = grid_.index(j, k);
                const double n1 = std::norm(f.psi1[i]), n2 = std::norm(f.psi2[i]);
                rp += pot_[i] * (n1 + n2);
                ri += 0.5 * s_.beta11 * n1 * n1 + s_.beta12 * n1 * n2 + 0.5 * s_.beta22 * n2 * n2;
            }
            pot += grid_.weight[std::size_t(j)] * rp;
            inter += grid_.weight[std::size_t(j)] * ri;
        }
        e.potential = pot;
        e.interaction = inter;
        return e;
    }

    /// Imaginary-time relaxation of a single real component; returns the energy trace
    /// (one entry per energy check). CN kinetic steps unless tau K_max > 20, where the
    /// CN factor of the stiffest mode approaches -1 and backward Euler is used instead.
    /// Backward Euler biases the fixed point at O(tau), so the last rung should be CN.
    struct RelaxResult
    {
        std::vector<double> energy_trace;
        long steps = 0;
        double residual = INFINITY;
        bool converged = false;
    };

    RelaxResult relax(std::vector<double>& psi, double dt, double tol, long budget, int check_every = 10)
    {
        const double tau = dt / s_.time_unit();
        const double kmax = 2.0 / (grid_.d_rho * grid_.d_rho) + 2.0 / (grid_.d_z * grid_.d_z);
        const bool cn = tau * kmax < 20.0;
        const double c = cn ? 0.5 * tau : tau;
        const double b = cn ? -0.5 * tau : 0.0;
        const auto frho = detail::factor_shifted<double>(krho_, c);
        const auto fz = detail::factor_shifted<double>(kz_, c);
        std::vector<double> scratch(grid_.size()), line(std::size_t(grid_.n_z));
        const double n_target = cfg_.atom_number;

        RelaxResult r;
        double e_prev = real_energy(psi);
        r.energy_trace.push_back(e_prev);
        while (r.steps < budget) {
            for (int s = 0; s < check_every; ++s) {
                decay_phase(psi, 0.5 * tau);
                detail::sweep_rho<double>(psi, scratch, grid_, krho_, frho, b);
                detail::sweep_z<double>(psi, line, grid_, kz_, fz, b);
                // the mean-field factor must see a density normalised to N, otherwise
                // the fixed point carries an O(tau) bias in the interaction strength
                normalize(psi, n_target);
                decay_phase(psi, 0.5 * tau);
                normalize(psi, n_target);
            }
            r.steps += check_every;
            const double e = real_energy(psi);
            if (!std::isfinite(e)) throw NumericalError("ground_state: energy became non-finite");
            r.energy_trace.push_back(e);
            r.residual = std::fabs(e - e_prev) / (std::fabs(e) * check_every);
            e_prev = e;
            if (r.residual < tol) {
                r.converged = true;
                break;
            }
        }
        return r;
    }

    double real_energy(const std::vector<double>& psi) const
    {
        double kin = 0, rest = 0;
        kin = kinetic_energy_real(psi);
        for (int j = 0; j < grid_.n_rho; ++j) {
            double row = 0;
            for (int k = 0; k < grid_.n_z; ++k) {
                const std::size_t i = grid_.index(j, k);
                const double n = psi[i] * psi[i];
                row += pot_[i] * n + 0.5 * s_.beta11 * n * n;
            }
            rest += grid_.weight[std::size_t(j)] * row;
        }
        return kin + rest;
    }

    double weighted_norm(const std::vector<double>& psi) const
    {
        double acc = 0;
        for (int j = 0; j < grid_.n_rho; ++j) {
            double row = 0;
            for (int k = 0; k < grid_.n_z; ++k) row += psi[grid_.index(j, k)] * psi[grid_.index(j, k)];
            acc += grid_.weight[std::size_t(j)] * row;
        }
        return acc;
    }

private:
    void set_real_step(double tau)
    {
        if (tau == tau_real_) return;
        tau_real_ = tau;
        const cplx c(0, 0.5 * tau);
        frho_ = detail::factor_shifted<cplx>(krho_, c);
        fz_ = detail::factor_shifted<cplx>(kz_, c);
    }

    void kinetic_step(std::vector<cplx>& psi)
    {
        const cplx b(0, -0.5 * tau_real_);
        detail::sweep_rho<cplx>(psi, scratch_c_, grid_, krho_, frho_, b);
        detail::sweep_z<cplx>(psi, line_c_, grid_, kz_, fz_, b);
    }

    void phase_step(SpinorField& f, double tau)
    {
        const std::size_t n = grid_.size();
        cplx* p1 = f.psi1.data();
        cplx* p2 = f.psi2.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double n1 = std::norm(p1[i]), n2 = std::norm(p2[i]);
            const double t1 = tau * (pot_[i] + s_.beta11 * n1 + s_.beta12 * n2);
            const double t2 = tau * (pot_[i] + s_.beta22 * n2 + s_.beta12 * n1);
            p1[i] *= cplx(std::cos(t1), -std::sin(t1));
            p2[i] *= cplx(std::cos(t2), -std::sin(t2));
        }
    }

    void decay_phase(std::vector<double>& psi, double tau) const
    {
        for (std::size_t i = 0; i < psi.size(); ++i)
            psi[i] *= std::exp(-tau * (pot_[i] + s_.beta11 * psi[i] * psi[i]));
    }

    void normalize(std::vector<double>& psi, double target) const
    {
        const double n = weighted_norm(psi);
        if (!(n > 0) || !std::isfinite(n)) throw NumericalError("ground_state: norm collapsed");
        const double s = std::sqrt(target / n);
        for (double& v : psi) v *= s;
    }

    // sum w psi^* K psi written as a sum of squared differences (exactly real).
    template <class T, class Abs2>
    double kinetic_sum(const std::vector<T>& psi, Abs2 abs2) const
    {
        const int nr = grid_.n_rho, nz = grid_.n_z;
        const double two_pi_dz = constants::two_pi * grid_.d_z;
        double acc = 0;
        // radial faces, including the Dirichlet face beyond rho_max
        for (int j = 0; j < nr; ++j) {
            const double rp = (j + 1) * grid_.d_rho;
            double row = 0;
            for (int k = 0; k < nz; ++k) {
                const T next = j + 1 < nr ? psi[grid_.index(j + 1, k)] : T(0);
                row += abs2(next - psi[grid_.index(j, k)]);
            }
            acc += two_pi_dz * rp * row / (2.0 * grid_.d_rho);
        }
        // axial faces with Dirichlet ghosts on both ends
        for (int j = 0; j < nr; ++j) {
            double row = 0;
            for (int k = -1; k < nz; ++k) {
                const T a = k >= 0 ? psi[grid_.index(j, k)] : T(0);
                const T b = k + 1 < nz ? psi[grid_.index(j, k + 1)] : T(0);
                row += abs2(b - a);
            }
            acc += grid_.weight[std::size_t(j)] * row / (2.0 * grid_.d_z * grid_.d_z);
        }
        return acc;
    }

    double kinetic_energy(const std::vector<cplx>& psi) const
    {
        return kinetic_sum(psi, [](cplx v) { return std::norm(v); });
    }
    double kinetic_energy_real(const std::vector<double>& psi) const
    {
        return kinetic_sum(psi, [](double v) { return v * v; });
    }

    void check_finite(const SpinorField& f, double n0, long step) const
    {
        const double n = f.total_number();
        if (!std::isfinite(n) || std::fabs(n - n0) > 1e-6 * n0) {
            std::ostringstream os;
            os << "evolve: field diverged at step " << step << " (t = " << f.time << " s, norm " << n
               << " vs " << n0 << ")";
            throw NumericalError(os.str());
        }
    }

    GpeConfig cfg_;
    CylGrid grid_;
    Scales s_;
    detail::KineticStencil krho_, kz_;
    std::vector<double> pot_;
    double tau_real_ = NAN;
    detail::Tridiag<cplx> frho_, fz_;
    std::vector<cplx> scratch_c_, line_c_;
};

struct GroundStateReport
{
    SpinorField field;
    std::vector<double> energy_trace; // total energy at each check, hbar omega_bar
    long steps = 0;
    double residual = 0;
    Energies energies;
    double chemical_potential = 0; // J
    GridDiagnostics diagnostics;
};

/// Imaginary-time ground state of a pure |1> condensate. The step ladder
/// 64, 16, 4, 1 x dt_imag relaxes coarse structure cheaply; intermediate rungs
/// stop at 1e-9, the last one at convergence_tol.
inline GroundStateReport ground_state_report(const GpeConfig& config)
{
    config.validate();
    const CylGrid grid = make_grid(config);
    Propagator prop(config, grid);
    const Scales& s = prop.scales();

    std::vector<double> psi(grid.size());
    const bool interacting = s.mu_tf > 2.0;
    for (int j = 0; j < grid.n_rho; ++j)
        for (int k = 0; k < grid.n_z; ++k) {
            const std::size_t i = grid.index(j, k);
            if (interacting) {
                psi[i] = std::sqrt(std::fmax(s.mu_tf - prop.potential()[i], 0.0) / s.beta11);
            } else {
                const double r = grid.rho[std::size_t(j)], z = grid.z[std::size_t(k)];
                psi[i] = std::exp(-0.5 * (s.lambda_rho * r * r + s.lambda_z * z * z));
            }
        }
    // seed the TF edge so every cell starts nonzero
    for (double& v : psi) v = std::fmax(v, 1e-6 * std::sqrt(config.atom_number));
    {
        const double n = prop.weighted_norm(psi);
        for (double& v : psi) v *= std::sqrt(config.atom_number / n);
    }

    GroundStateReport rep;
    long budget = config.max_imag_steps;
    const double ladder[] = {64.0, 16.0, 4.0, 1.0};
    for (std::size_t r = 0; r < 4; ++r) {
        const bool last = r == 3;
        const double tol = last ? config.convergence_tol : std::fmax(1e-9, config.convergence_tol);
        auto res = prop.relax(psi, ladder[r] * config.dt_imag, tol, budget);
        rep.steps += res.steps;
        budget -= res.steps;
        rep.energy_trace.insert(rep.energy_trace.end(), res.energy_trace.begin(), res.energy_trace.end());
        rep.residual = res.residual;
        if (!res.converged) {
            std::ostringstream os;
            os << "ground_state: no convergence within " << config.max_imag_steps
               << " imaginary-time steps (last relative energy change per step " << res.residual << ")";
            throw NumericalError(os.str());
        }
    }

    rep.field.grid = grid;
    rep.field.psi1.assign(psi.begin(), psi.end());
    rep.field.psi2.assign(grid.size(), cplx(0));
    rep.energies = prop.energies(rep.field);
    const auto& e = rep.energies;
    rep.chemical_potential = (e.kinetic + e.potential + 2.0 * e.interaction) / config.atom_number * s.energy_unit();
    rep.diagnostics = diagnose_grid(config, grid);
    return rep;
}

inline SpinorField ground_state(const GpeConfig& config) { return ground_state_report(config).field; }

/// Advance a field by `duration` seconds in steps no longer than dt_real.
inline SpinorField evolve(SpinorField field, double duration, const GpeConfig& config)
{
    require(duration >= 0, "evolve: duration must be >= 0");
    if (duration == 0) return field;
    Propagator prop(config, field.grid);
    const long n = std::max(1L, long(std::ceil(duration / config.dt_real - 1e-9)));
    prop.evolve_steps(field, n, duration / double(n));
    return field;
}

struct Snapshot
{
    double time = 0; // s since the first pulse
    std::vector<double> density1; // m^-3
    std::vector<double> density2;
    std::vector<double> relative_phase; // arg(psi2 psi1^*)
    double visibility = 0;
};

inline Snapshot take_snapshot(const SpinorField& f)
{
    return {f.time, f.density_si(1), f.density_si(2), f.relative_phase(), interference_visibility(f)};
}

struct RamseyResult
{
    double interrogation_time = 0;
    bool spin_echo = false;
    analysis::FringeDataset fringe; // phase of the final pulse, fraction in |2>
    analysis::FitResult fit;
    double visibility_fit = 0;
    double visibility_overlap = 0;
    std::vector<Snapshot> snapshots;
};

/// Scans the phase of the closing pi/2 pulse on a uniform grid over [0, 2 pi).
inline RamseyResult fringe_scan(const SpinorField& f, int phase_samples)
{
    require(phase_samples >= 8, "fringe_scan: need at least 8 phase samples");
    RamseyResult r;
    const double n = f.total_number();
    for (int i = 0; i < phase_samples; ++i) {
        const double phi = constants::two_pi * i / phase_samples;
        const auto out = apply_pi_half(f, phi);
        r.fringe.x.push_back(phi);
        r.fringe.y.push_back(out.population2() / n);
    }
    r.fit = analysis::fit_sinusoid_fixed_freq(r.fringe);
    r.visibility_fit = r.fit.value("visibility");
    r.visibility_overlap = interference_visibility(f);
    r.interrogation_time = f.time;
    return r;
}

/// pi/2 - T - pi/2 (or pi/2 - T/2 - pi - T/2 - pi/2) starting from a given ground state.
/// Snapshots are taken at the requested times (s, within [0, T]).
inline RamseyResult simulate_ramsey(const GpeConfig& config, const SpinorField& ground, double interrogation,
                                    bool spin_echo, int phase_samples = 32,
                                    std::vector<double> snapshot_times = {})
{
    require(interrogation >= 0, "simulate_ramsey: T must be >= 0");
    require(phase_samples >= 8, "simulate_ramsey: need at least 8 phase samples");
    SpinorField f = apply_pi_half(ground);
    f.time = 0;
    Propagator prop(config, f.grid);

    std::vector<double> marks(snapshot_times);
    if (spin_echo) marks.push_back(0.5 * interrogation);
    marks.push_back(interrogation);
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

    std::vector<Snapshot> snaps;
    bool echoed = false;
    for (double m : marks) {
        require(m >= 0 && m <= interrogation, "simulate_ramsey: snapshot time outside [0, T]");
        const double span = m - f.time;
        if (span > 0) {
            const long n = std::max(1L, long(std::ceil(span / config.dt_real - 1e-9)));
            prop.evolve_steps(f, n, span / double(n));
            f.time = m;
        }
        if (spin_echo && !echoed && m == 0.5 * interrogation) {
            f = apply_pi(f);
            echoed = true;
        }
        if (std::find(snapshot_times.begin(), snapshot_times.end(), m) != snapshot_times.end())
            snaps.push_back(take_snapshot(f));
    }
    RamseyResult r = fringe_scan(f, phase_samples);
    r.interrogation_time = interrogation;
    r.spin_echo = spin_echo;
    r.snapshots = std::move(snaps);
    return r;
}

inline RamseyResult simulate_ramsey(const GpeConfig& config, double interrogation, bool spin_echo,
                                    int phase_samples = 32)
{
    return simulate_ramsey(config, ground_state(config), interrogation, spin_echo, phase_samples);
}

struct VisibilityPoint
{
    double interrogation_time = 0;
    double visibility_fit = 0;
    double visibility_overlap = 0;
    double visibility = 0; // fit value times the optional decoherence envelope
};

struct CurveOptions
{
    int phase_samples = 32;
    double decoherence_time = 0; // s; > 0 multiplies V by exp(-T / tau)
    int jobs = 1;                // worker threads for independent echo runs
};

/// Visibility against T. Without echo one trajectory is sampled at every T;
/// with echo each T is an independent run. Results follow the order of T_list.
inline std::vector<VisibilityPoint> visibility_curve(const GpeConfig& config, const SpinorField& ground,
                                                     std::vector<double> t_list, bool spin_echo,
                                                     const CurveOptions& opt = {})
{
    require(!t_list.empty(), "visibility_curve: T list is empty");
    for (double t : t_list) require(t >= 0, "visibility_curve: T must be >= 0");
    std::vector<VisibilityPoint> out(t_list.size());
    auto finish = [&](std::size_t i, const RamseyResult& r) {
        VisibilityPoint p;
        p.interrogation_time = t_list[i];
        p.visibility_fit = r.visibility_fit;
        p.visibility_overlap = r.visibility_overlap;
        const double env = opt.decoherence_time > 0 ? std::exp(-t_list[i] / opt.decoherence_time) : 1.0;
        p.visibility = r.visibility_fit * env;
        out[i] = p;
    };

    if (!spin_echo) {
        std::vector<std::size_t> order(t_list.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return t_list[a] < t_list[b]; });
        SpinorField f = apply_pi_half(ground);
        f.time = 0;
        Propagator prop(config, f.grid);
        for (std::size_t i : order) {
            const double span = t_list[i] - f.time;
            if (span > 0) {
                const long n = std::max(1L, long(std::ceil(span / config.dt_real - 1e-9)));
                prop.evolve_steps(f, n, span / double(n));
                f.time = t_list[i];
            }
            finish(i, fringe_scan(f, opt.phase_samples));
        }
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < t_list.size(); i = next++) {
            try {
                finish(i, simulate_ramsey(config, ground, t_list[i], true, opt.phase_samples));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(opt.jobs, int(t_list.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

inline std::vector<VisibilityPoint> visibility_curve(const GpeConfig& config, std::vector<double> t_list,
                                                     bool spin_echo, const CurveOptions& opt = {})
{
    return visibility_curve(config, ground_state(config), std::move(t_list), spin_echo, opt);
}

} // namespace ramsey::gpe
