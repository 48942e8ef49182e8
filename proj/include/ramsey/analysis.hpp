#pragma once

// Least-squares fits for fringe data: fixed-frequency sinusoids, exponential
// visibility decay and the drift-modulated spin-echo envelope, plus simple
// scatter statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "ramsey/core.hpp"

namespace ramsey::analysis {

/// Abscissa, ordinate and optional one-sigma errors (empty = unweighted).
struct FringeDataset
{
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;

    std::size_t size() const { return x.size(); }
    bool weighted() const { return !sigma.empty(); }

    void validate(std::size_t min_points) const
    {
        require(x.size() == y.size(), "dataset: abscissa and ordinate lengths differ");
        require(sigma.empty() || sigma.size() == x.size(), "dataset: sigma length differs");
        require(x.size() >= min_points, "dataset: too few points (need " + std::to_string(min_points) + ")");
        for (double s : sigma) require(s > 0, "dataset: sigma must be > 0");
    }
};

struct FitResult
{
    std::vector<std::string> names;
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;
    double residual_norm = 0; // sqrt of the (weighted) sum of squared residuals
    int dof = 0;
    int iterations = 0;

    int index(const std::string& name) const
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return int(i);
        throw InvalidArgument("fit: unknown parameter '" + name + "'");
    }
    double value(const std::string& name) const { return params(index(name)); }
    double error(const std::string& name) const
    {
        const int i = index(name);
        return std::sqrt(std::fmax(covariance(i, i), 0.0));
    }
};

namespace detail {

inline Eigen::VectorXd weights(const FringeDataset& d)
{
    Eigen::VectorXd w = Eigen::VectorXd::Ones(Eigen::Index(d.size()));
    if (d.weighted())
        for (std::size_t i = 0; i < d.size(); ++i) w(Eigen::Index(i)) = 1.0 / d.sigma[i];
    return w;
}

/// Weighted linear least squares; returns coefficients and their covariance.
/// Without supplied sigmas the covariance is scaled by the residual variance.
inline void linear_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       bool weighted, Eigen::VectorXd& coef, Eigen::MatrixXd& cov, double& rss)
{
    const Eigen::MatrixXd aw = w.asDiagonal() * a;
    const Eigen::VectorXd yw = w.asDiagonal() * y;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw);
    if (qr.rank() < a.cols()) throw InvalidArgument("fit: design matrix is rank deficient");
    coef = qr.solve(yw);
    rss = (aw * coef - yw).squaredNorm();
    const Eigen::MatrixXd ata_inv = (aw.transpose() * aw).inverse();
    const Eigen::Index dof = a.rows() - a.cols();
    const double scale = weighted ? 1.0 : (dof > 0 ? rss / double(dof) : NAN);
    cov = scale * ata_inv;
}

} // namespace detail

/// p = c0 + b cos(phi) + c sin(phi) by linear least squares. Reports
/// offset, visibility = 2 sqrt(b^2 + c^2) and phase phi0 = atan2(c, b).
inline FitResult fit_sinusoid_fixed_freq(const FringeDataset& data)
{
    data.validate(4);
    const Eigen::Index n = Eigen::Index(data.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = std::cos(data.x[std::size_t(i)]);
        a(i, 2) = std::sin(data.x[std::size_t(i)]);
        y(i) = data.y[std::size_t(i)];
    }
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
    double rss = 0;
    detail::linear_lsq(a, y, detail::weights(data), data.weighted(), coef, cov, rss);

    const double b = coef(1), c = coef(2);
    const double amp = std::hypot(b, c);
    FitResult r;
    r.names = {"offset", "visibility", "phase"};
    r.params = Eigen::Vector3d(coef(0), 2.0 * amp, std::atan2(c, b));
    Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
    jac(0, 0) = 1.0;
    if (amp > 0) {
        jac(1, 1) = 2.0 * b / amp;
        jac(1, 2) = 2.0 * c / amp;
        jac(2, 1) = -c / (amp * amp);
        jac(2, 2) = b / (amp * amp);
        r.covariance = jac * cov * jac.transpose();
    } else {
        // amplitude at the origin: quote the radial spread of (b, c)
        r.covariance = Eigen::Matrix3d::Zero();
        r.covariance(0, 0) = cov(0, 0);
        r.covariance(1, 1) = 4.0 * (cov(1, 1) + cov(2, 2));
        r.covariance(2, 2) = INFINITY;
    }
    r.residual_norm = std::sqrt(rss);
    r.dof = int(n) - 3;
    return r;
}

/// V(T) = V0 exp(-T/tau) by weighted log-linear least squares. Per-point
/// sigma on V maps to sigma/V on ln V. With fix_amplitude, V0 = 1.
inline FitResult fit_exponential_decay(const FringeDataset& data, bool fix_amplitude = false)
{
    data.validate(fix_amplitude ? 2 : 3);
    const Eigen::Index n = Eigen::Index(data.size());
    const int k = fix_amplitude ? 1 : 2;
    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = data.y[std::size_t(i)];
        if (!(v > 0)) throw InvalidArgument("fit_exponential_decay: visibility must be > 0 at every point");
        if (fix_amplitude) {
            a(i, 0) = data.x[std::size_t(i)];
        } else {
            a(i, 0) = 1.0;
            a(i, 1) = data.x[std::size_t(i)];
        }
        y(i) = std::log(v);
        w(i) = data.weighted() ? v / data.sigma[std::size_t(i)] : 1.0;
    }
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
    double rss = 0;
    detail::linear_lsq(a, y, w, data.weighted(), coef, cov, rss);

    const double slope = coef(k - 1);
    if (!(slope < 0)) throw NumericalError("fit_exponential_decay: data show no decay (slope >= 0)");
    FitResult r;
    r.names = {"amplitude", "tau"};
    const double v0 = fix_amplitude ? 1.0 : std::exp(coef(0));
    const double tau = -1.0 / slope;
    r.params = Eigen::Vector2d(v0, tau);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, k);
    if (!fix_amplitude) jac(0, 0) = v0;
    jac(1, k - 1) = 1.0 / (slope * slope);
    r.covariance = jac * cov * jac.transpose();
    r.residual_norm = std::sqrt(rss);
    r.dof = int(n) - k;
    return r;
}

/// Model p(T) = [1 + V0 exp(-T/tau) cos(nu T^2 / 4)] / 2.
inline double drift_envelope_model(double nu, double tau, double v0, double T)
{
    return 0.5 * (1.0 + v0 * std::exp(-T / tau) * std::cos(0.25 * nu * T * T));
}

namespace detail {

// Residuals in the parameters (nu, gamma = 1/tau, V0).
struct DriftFunctor
{
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const FringeDataset* data;
    Eigen::VectorXd w;

    int inputs() const { return 3; }
    int values() const { return int(data->size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const
    {
        for (std::size_t i = 0; i < data->size(); ++i) {
            const double T = data->x[i];
            const double m = 0.5 * (1.0 + p(2) * std::exp(-p(1) * T) * std::cos(0.25 * p(0) * T * T));
            f(Eigen::Index(i)) = w(Eigen::Index(i)) * (m - data->y[i]);
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const
    {
        for (std::size_t i = 0; i < data->size(); ++i) {
            const double T = data->x[i];
            const double e = std::exp(-p(1) * T);
            const double ph = 0.25 * p(0) * T * T;
            const double c = std::cos(ph), s = std::sin(ph);
            const double wi = w(Eigen::Index(i));
            const auto r = Eigen::Index(i);
            j(r, 0) = wi * -0.5 * p(2) * e * s * 0.25 * T * T;
            j(r, 1) = wi * -0.5 * p(2) * T * e * c;
            j(r, 2) = wi * 0.5 * e * c;
        }
        return 0;
    }
};

} // namespace detail

/// Drift-envelope fit by Levenberg-Marquardt from a deterministic (nu, tau)
/// grid search. The model is even in nu; nu >= 0 is reported.
inline FitResult fit_drift_envelope(const FringeDataset& data, int max_iterations = 400)
{
    data.validate(6);
    const std::size_t n = data.size();
    double tmax = 0, dtmin = INFINITY;
    std::vector<double> xs = data.x;
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i < n; ++i) {
        tmax = std::fmax(tmax, xs[i]);
        if (i > 0 && xs[i] > xs[i - 1]) dtmin = std::fmin(dtmin, xs[i] - xs[i - 1]);
    }
    require(tmax > 0 && std::isfinite(dtmin), "fit_drift_envelope: need at least two distinct T > 0");

    const Eigen::VectorXd w = detail::weights(data);
    // largest nu whose phase advances by less than pi between neighbouring samples
    const double nu_max = 4.0 * constants::pi / (tmax * dtmin);
    const int n_nu = 2000, n_tau = 40;
    // separable tables: w_i exp(-T_i / tau) and cos(nu T_i^2 / 4)
    Eigen::MatrixXd env(n_tau, Eigen::Index(n)), osc(n_nu + 1, Eigen::Index(n));
    Eigen::VectorXd target(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = Eigen::Index(i);
        const double T = data.x[i];
        target(c) = w(c) * (2.0 * data.y[i] - 1.0);
        for (int b = 0; b < n_tau; ++b) {
            const double tau = dtmin * std::pow(100.0 * tmax / dtmin, double(b) / (n_tau - 1));
            env(b, c) = w(c) * std::exp(-T / tau);
        }
        for (int a = 0; a <= n_nu; ++a) osc(a, c) = std::cos(0.25 * (nu_max * a / n_nu) * T * T);
    }
    // rss(V0) in units of (2p - 1) is |t|^2 - 2 V0 t.h + V0^2 |h|^2, minimised at V0 = t.h / |h|^2
    double best = INFINITY;
    Eigen::Vector3d p0(0, 1.0 / tmax, 1.0);
    for (int a = 0; a <= n_nu; ++a)
        for (int b = 0; b < n_tau; ++b) {
            const Eigen::VectorXd h = env.row(b).cwiseProduct(osc.row(a)).transpose();
            const double shh = h.squaredNorm();
            if (shh <= 0) continue;
            const double syh = h.dot(target);
            const double rss = -syh * syh / shh;
            if (rss < best) {
                best = rss;
                const double tau = dtmin * std::pow(100.0 * tmax / dtmin, double(b) / (n_tau - 1));
                p0 = Eigen::Vector3d(nu_max * a / n_nu, 1.0 / tau, syh / shh);
            }
        }

    detail::DriftFunctor fn{&data, w};
    Eigen::VectorXd p = p0;
    Eigen::LevenbergMarquardt<detail::DriftFunctor> lm(fn);
    lm.parameters.maxfev = max_iterations;
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    const auto status = lm.minimize(p);
    using St = Eigen::LevenbergMarquardtSpace::Status;
    if (status == St::ImproperInputParameters || status == St::TooManyFunctionEvaluation) {
        std::ostringstream os;
        os << "fit_drift_envelope: no convergence after " << lm.nfev << " evaluations; best nu=" << p(0)
           << " gamma=" << p(1) << " V0=" << p(2);
        throw NumericalError(os.str());
    }
    if (!(p(1) > 0)) throw NumericalError("fit_drift_envelope: fitted decay rate is not positive");

    Eigen::VectorXd f(static_cast<Eigen::Index>(n));
    fn(p, f);
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 3);
    fn.df(p, jac);
    const double rss = f.squaredNorm();
    const int dof = int(n) - 3;
    Eigen::Matrix3d cov = (jac.transpose() * jac).inverse();
    if (!data.weighted()) cov *= dof > 0 ? rss / dof : NAN;

    // (nu, gamma, V0) -> (|nu|, tau, V0)
    Eigen::Matrix3d t = Eigen::Matrix3d::Zero();
    t(0, 0) = p(0) < 0 ? -1.0 : 1.0;
    t(1, 1) = -1.0 / (p(1) * p(1));
    t(2, 2) = 1.0;
    FitResult r;
    r.names = {"nu", "tau", "visibility0"};
    r.params = Eigen::Vector3d(std::fabs(p(0)), 1.0 / p(1), p(2));
    r.covariance = t * cov * t.transpose();
    r.residual_norm = std::sqrt(rss);
    r.dof = dof;
    r.iterations = int(lm.iter);
    return r;
}

struct BootstrapBand
{
    std::vector<std::string> names;
    std::vector<double> lower; // 15.87th percentile
    std::vector<double> upper; // 84.13th percentile
};

/// Residual-resampling bands for the drift-envelope fit.
inline BootstrapBand bootstrap_drift_envelope(const FringeDataset& data, const FitResult& fit, int resamples,
                                              std::uint64_t seed)
{
    require(resamples >= 10, "bootstrap: need at least 10 resamples");
    const double nu = fit.value("nu"), tau = fit.value("tau"), v0 = fit.value("visibility0");
    std::vector<double> model(data.size()), resid(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        model[i] = drift_envelope_model(nu, tau, v0, data.x[i]);
        resid[i] = data.y[i] - model[i];
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    std::vector<std::vector<double>> samples(3);
    FringeDataset d = data;
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < data.size(); ++i) d.y[i] = model[i] + resid[pick(rng)];
        try {
            const auto f = fit_drift_envelope(d);
            for (int k = 0; k < 3; ++k) samples[std::size_t(k)].push_back(f.params(k));
        } catch (const NumericalError&) {
            // resamples without a converged fit are dropped
        }
    }
    BootstrapBand band;
    band.names = fit.names;
    for (auto& s : samples) {
        require(!s.empty(), "bootstrap: no resample converged");
        std::sort(s.begin(), s.end());
        auto q = [&](double f) { return s[std::size_t(std::floor(f * double(s.size() - 1)))]; };
        band.lower.push_back(q(0.1587));
        band.upper.push_back(q(0.8413));
    }
    return band;
}

/// Range-of-data visibility estimator max(p) - min(p) for phase-randomised fringes.
inline double range_visibility(const std::vector<double>& p)
{
    require(!p.empty(), "range_visibility: no samples");
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    return *hi - *lo;
}

/// Sample standard deviation of p divided by the projection noise sqrt(pbar (1 - pbar) / N).
inline double allan_style_scatter(const std::vector<double>& p, double atom_number)
{
    require(p.size() >= 10, "allan_style_scatter: need at least 10 samples");
    require(atom_number >= 1, "allan_style_scatter: N must be >= 1");
    double mean = 0;
    for (double v : p) mean += v;
    mean /= double(p.size());
    double ss = 0;
    for (double v : p) ss += (v - mean) * (v - mean);
    if (std::all_of(p.begin(), p.end(), [&](double v) { return v == p.front(); })) return 0.0;
    const double sd = std::sqrt(ss / double(p.size() - 1));
    const double proj = std::sqrt(mean * (1.0 - mean) / atom_number);
    require(proj > 0, "allan_style_scatter: mean population is 0 or 1 with nonzero scatter");
    return sd / proj;
}

} // namespace ramsey::analysis
