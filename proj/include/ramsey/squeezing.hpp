#pragma once

// One-axis twisting of a coherent spin state and the phase sensitivity of a
// measurement that reads out a rotated quadrature.
//
// State: |psi> = exp(-i mu Jz^2) |CSS along +x>, j = N/2. The measurement
// interferometer is modelled by its readout quadrature
// J_phi = cos(phi) Jz + sin(phi) Jy, orthogonal to the mean spin; a small
// signal rotation delta shifts <J_phi> by delta <Jx>, so
// Delta phi = sqrt(Var J_phi) / |<Jx>|.

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ramsey/atomphys.hpp"
#include "ramsey/core.hpp"

namespace ramsey::squeezing {

struct OatConfig
{
    double atom_number = 1e6;
    double chi = 0;       // rad/s
    double prep_time = 0; // s
    std::vector<double> phases; // readout quadrature angles, rad; empty selects 361 points on [0, 2 pi]

    double twist() const { return chi * prep_time; }

    void validate() const
    {
        require(atom_number >= 2, "squeezing: N must be >= 2");
        require(prep_time >= 0, "squeezing: preparation time must be >= 0");
        require(std::isfinite(chi), "squeezing: chi must be finite");
    }
};

/// chi = (g11 - 2 g12 + g22) / 2 with Thomas-Fermi couplings, rad/s.
/// Then chi sqrt(N) t equals the two-mode projection-noise phase spread.
inline double twisting_rate(const atomphys::AtomSpecies& s, const atomphys::TrapConfig& trap, double atom_number)
{
    return 0.5 * atomphys::tf_couplings(s, trap, atom_number).asymmetry();
}

struct SpinMoments
{
    double mean_x = 0;  // <Jx>; <Jy> = <Jz> = 0
    double var_x = 0;
    double var_y = 0;
    double var_z = 0;
    double cov_yz = 0;  // <{Jy, Jz}> / 2

    /// Variance of cos(phi) Jz + sin(phi) Jy.
    double quadrature_variance(double phi) const
    {
        const double c = std::cos(phi), s = std::sin(phi);
        return c * c * var_z + s * s * var_y + 2 * s * c * cov_yz;
    }

    double min_quadrature_variance() const
    {
        const double half = 0.5 * (var_y - var_z);
        return 0.5 * (var_y + var_z) - std::hypot(half, cov_yz);
    }

    /// Angle phi of the least-noisy quadrature in [0, pi).
    double min_quadrature_angle() const
    {
        double a = 0.5 * std::atan2(2 * cov_yz, var_z - var_y) + 0.5 * constants::pi;
        if (a >= constants::pi) a -= constants::pi;
        return a;
    }
};

namespace detail {

// cos(x)^n computed through log1p so that n ~ 1e6 and x ~ 1e-6 keep full precision.
inline double log_cos_pow(double x, double n)
{
    const double s = std::sin(0.5 * x);
    return n * std::log1p(-2.0 * s * s);
}

} // namespace detail

/// Closed-form moments after exp(-i mu Jz^2) on the coherent state along +x.
/// Valid while |cos| factors are positive, i.e. |mu| < pi/4 for the 2 mu terms.
inline SpinMoments oat_moments(double atom_number, double mu)
{
    require(atom_number >= 2, "oat_moments: N must be >= 2");
    const double n = atom_number, j = 0.5 * n;
    SpinMoments m;
    const double cos_mu = std::cos(mu), cos_2mu = std::cos(2 * mu);
    require(cos_mu > 0 && cos_2mu > 0, "oat_moments: |mu| must be below pi/4");
    const double pow_n1 = std::exp(detail::log_cos_pow(mu, n - 1));     // cos^{N-1} mu
    const double pow_n2 = std::exp(detail::log_cos_pow(mu, n - 2));     // cos^{N-2} mu
    const double one_minus = -std::expm1(detail::log_cos_pow(2 * mu, n - 2)); // 1 - cos^{N-2} 2mu
    const double one_plus = 2.0 - one_minus;

    m.mean_x = j * pow_n1;
    m.var_z = 0.5 * j;
    m.var_y = 0.5 * j + 0.5 * j * (j - 0.5) * one_minus;
    const double jx2 = 0.5 * j + 0.5 * j * (j - 0.5) * one_plus;
    m.var_x = jx2 - m.mean_x * m.mean_x;
    m.cov_yz = j * (j - 0.5) * std::sin(mu) * pow_n2;
    return m;
}

struct SensitivityCurve
{
    std::vector<double> phases;       // rad
    std::vector<double> normalized;   // Delta phi sqrt(N); +inf where <Jx> = 0
    double min_normalized = 0;        // over the sampled grid
    double min_phase = 0;
    double optimum_normalized = 0;    // over all quadratures
    double optimum_phase = 0;
};

/// sqrt(N) sqrt(Var J_phi) / |<Jx>| on the phase grid.
inline SensitivityCurve phase_sensitivity(const OatConfig& cfg)
{
    cfg.validate();
    const double n = cfg.atom_number;
    const SpinMoments m = oat_moments(n, cfg.twist());
    SensitivityCurve c;
    c.phases = cfg.phases;
    if (c.phases.empty())
        for (int i = 0; i <= 360; ++i) c.phases.push_back(constants::two_pi * i / 360.0);
    const double slope = std::fabs(m.mean_x);
    auto value = [&](double var) {
        return slope > 0 ? std::sqrt(n * std::fmax(var, 0.0)) / slope : std::numeric_limits<double>::infinity();
    };
    c.min_normalized = std::numeric_limits<double>::infinity();
    for (double phi : c.phases) {
        const double v = value(m.quadrature_variance(phi));
        c.normalized.push_back(v);
        if (v < c.min_normalized) {
            c.min_normalized = v;
            c.min_phase = phi;
        }
    }
    c.optimum_normalized = value(m.min_quadrature_variance());
    c.optimum_phase = m.min_quadrature_angle();
    return c;
}

/// Standard quantum limit 1/sqrt(N), rad.
inline double sql(double atom_number)
{
    require(atom_number >= 1, "sql: N must be >= 1");
    return 1.0 / std::sqrt(atom_number);
}

/// Exact state-vector evolution in the Dicke basis |j, m>, m = -j..j.
class DickeOracle
{
public:
    static constexpr int max_atoms = 200;

    explicit DickeOracle(int atom_number) : n_(atom_number)
    {
        require(atom_number >= 1 && atom_number <= max_atoms, "dicke_oracle: N must lie in [1, 200]");
        const int dim = n_ + 1;
        const double j = 0.5 * n_;
        jz_ = Eigen::MatrixXd::Zero(dim, dim);
        jx_ = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::MatrixXd jp = Eigen::MatrixXd::Zero(dim, dim); // J+ |m> = c |m+1>
        for (int k = 0; k < dim; ++k) {
            const double m = k - j;
            jz_(k, k) = m;
            if (k + 1 < dim) jp(k + 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
        }
        jx_ = 0.5 * (jp + jp.transpose());
        jy_ = Matrix((jp - Matrix(jp.transpose())) / std::complex<double>(0, 2));
        state_ = Vector::Zero(dim);
        state_(0) = 1; // all atoms in the lower state, m = -j
    }

    using Matrix = Eigen::MatrixXcd;
    using Vector = Eigen::VectorXcd;

    /// exp(-i theta (n . J)) for a real unit axis n.
    void rotate(double theta, double nx, double ny, double nz)
    {
        const Matrix gen = Matrix(nx * jx_.cast<std::complex<double>>()) + ny * jy_
                           + Matrix(nz * jz_.cast<std::complex<double>>());
        Eigen::SelfAdjointEigenSolver<Matrix> es(gen);
        const Eigen::VectorXcd phase =
            (es.eigenvalues().cast<std::complex<double>>() * std::complex<double>(0, -theta)).array().exp();
        state_ = es.eigenvectors() * phase.asDiagonal() * (es.eigenvectors().adjoint() * state_);
    }

    /// Coherent state along +x from all atoms in m = -j.
    void pi_half() { rotate(-0.5 * constants::pi, 0, 1, 0); }

    /// exp(-i mu Jz^2).
    void twist(double mu)
    {
        const double j = 0.5 * n_;
        for (int k = 0; k <= n_; ++k) {
            const double m = k - j;
            state_(k) *= std::polar(1.0, -mu * m * m);
        }
    }

    const Vector& state() const { return state_; }

    double expect(const Matrix& op) const { return (state_.adjoint() * op * state_)(0, 0).real(); }

    Matrix jx() const { return jx_.cast<std::complex<double>>(); }
    Matrix jy() const { return jy_; }
    Matrix jz() const { return jz_.cast<std::complex<double>>(); }

    SpinMoments moments() const
    {
        const Matrix x = jx(), y = jy(), z = jz();
        SpinMoments m;
        m.mean_x = expect(x);
        const double my = expect(y), mz = expect(z);
        m.var_x = expect(x * x) - m.mean_x * m.mean_x;
        m.var_y = expect(y * y) - my * my;
        m.var_z = expect(z * z) - mz * mz;
        m.cov_yz = 0.5 * expect(y * z + z * y) - my * mz;
        return m;
    }

    /// Probabilities of Jz = -j..j.
    std::vector<double> jz_distribution() const
    {
        std::vector<double> p(std::size_t(n_) + 1);
        for (int k = 0; k <= n_; ++k) p[std::size_t(k)] = std::norm(state_(k));
        return p;
    }

    /// Delta phi sqrt(N) for readout quadrature phi, from the state vector.
    double normalized_sensitivity(double phi) const
    {
        const Matrix q = std::cos(phi) * jz() + std::sin(phi) * jy();
        const double mq = expect(q);
        const double var = expect(q * q) - mq * mq;
        const double slope = std::fabs(expect(jx()));
        return slope > 0 ? std::sqrt(n_ * var) / slope : std::numeric_limits<double>::infinity();
    }

private:
    int n_;
    Eigen::MatrixXd jz_, jx_;
    Matrix jy_;
    Vector state_;
};

} // namespace ramsey::squeezing
