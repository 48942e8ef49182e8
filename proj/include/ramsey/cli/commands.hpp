#pragma once

// Subcommand runners. Each validates its blocks, computes, writes
// <experiment>.<command>[.<part>].<ext> files and returns the JSON report,
// which embeds the fully-resolved configuration.

#include <chrono>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ramsey/analysis.hpp"
#include "ramsey/atomphys.hpp"
#include "ramsey/bloch.hpp"
#include "ramsey/cli/config.hpp"
#include "ramsey/cli/output.hpp"
#include "ramsey/gpe.hpp"
#include "ramsey/imaging.hpp"
#include "ramsey/squeezing.hpp"
#include "ramsey/twomode.hpp"

namespace ramsey::cli {

/// Collects output files for one run; formats not listed in run.formats are skipped.
class Emitter
{
public:
    explicit Emitter(const RunConfig& cfg)
        : cfg_(cfg), dir_(cfg.output_dir()), stem_(cfg.text("run.experiment") + "." + cfg.command())
    {
        require(!cfg.text("run.experiment").empty(), "config: run.experiment must not be empty");
        require(cfg.text("run.experiment").find('/') == std::string::npos,
                "config: run.experiment must not contain '/'");
    }

    std::filesystem::path path(const std::string& part, const std::string& ext) const
    {
        return dir_ / (stem_ + (part.empty() ? "" : "." + part) + "." + ext);
    }

    void csv(const std::string& part, const Table& t) { put("csv", part, t.csv()); }

    void svg(const std::string& part, const std::vector<double>& x, const std::vector<double>& y, const PlotSpec& p)
    {
        if (cfg_.wants("svg")) put("svg", part, svg_plot(x, y, p));
    }

    void pgm(const std::string& part, const std::vector<double>& v, int w, int h)
    {
        if (cfg_.wants("pgm")) put("pgm", part, cli::pgm(v, w, h));
    }

    /// Adds the config and file list, writes the report and returns it.
    Json finish(Json results)
    {
        Json report = Json::object();
        report["command"] = cfg_.command();
        report["config"] = cfg_.to_json();
        report["results"] = std::move(results);
        if (cfg_.wants("json")) files_.push_back(path("", "json").filename().string());
        report["files"] = files_;
        if (cfg_.wants("json")) write_text(path("", "json"), report.dump(2) + "\n");
        return report;
    }

private:
    void put(const std::string& ext, const std::string& part, const std::string& text)
    {
        if (ext == "csv" && !cfg_.wants("csv")) return;
        const auto p = path(part, ext);
        write_text(p, text);
        files_.push_back(p.filename().string());
    }

    const RunConfig& cfg_;
    std::filesystem::path dir_;
    std::string stem_;
    std::vector<std::string> files_;
};

namespace detail {

inline atomphys::AtomSpecies species_from(const RunConfig& c)
{
    auto s = atomphys::rubidium87().with_scattering_lengths_bohr(c.number("species.a11"), c.number("species.a12"),
                                                                  c.number("species.a22"));
    s.mass = c.number("species.mass_amu") * constants::atomic_mass_unit;
    s.natural_linewidth = units::hz_to_angular(c.number("species.linewidth_mhz") * 1e6);
    s.wavelength = c.number("species.wavelength_nm") * 1e-9;
    s.saturation_intensity = c.number("species.isat");
    s.hyperfine_hz = c.number("species.hyperfine_hz");
    s.lande_gj = c.number("species.gj");
    s.lande_gi = c.number("species.gi");
    s.validate();
    return s;
}

inline atomphys::TrapConfig trap_from(const RunConfig& c)
{
    const auto t = atomphys::TrapConfig::cartesian(units::hz_to_angular(c.number("trap.fx")),
                                                   units::hz_to_angular(c.number("trap.fy")),
                                                   units::hz_to_angular(c.number("trap.fz")));
    t.validate();
    return t;
}

inline double atoms_from(const RunConfig& c)
{
    const double n = c.number("atoms.N");
    require(n >= 1, "config: atoms.N must be >= 1");
    return n;
}

inline std::uint64_t seed_from(const RunConfig& c)
{
    const long s = c.integer("run.seed");
    require(s >= 0, "config: run.seed must be >= 0");
    return std::uint64_t(s);
}

/// Seconds to microseconds without the 1e-6 round-off tail.
inline double micro(double seconds) { return std::round(seconds * 1e15) / 1e9; }

inline Json fit_json(const analysis::FitResult& f)
{
    Json params = Json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i)
        params[f.names[i]] = {{"value", num(f.params(Eigen::Index(i)))}, {"error", num(f.error(f.names[i]))}};
    Json cov = Json::array();
    for (Eigen::Index i = 0; i < f.covariance.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < f.covariance.cols(); ++j) row.push_back(num(f.covariance(i, j)));
        cov.push_back(row);
    }
    return {{"parameters", params}, {"covariance", cov}, {"residual_norm", num(f.residual_norm)},
            {"dof", f.dof}, {"iterations", f.iterations}};
}

} // namespace detail

inline Json run_noise_budget(const RunConfig& c)
{
    using namespace bloch;
    const double rabi = units::hz_to_angular(c.number("pulse.rabi_hz"));
    require(rabi > 0, "config: pulse.rabi_hz must be > 0");
    const NoiseBudget noise{c.number("noise.power"), units::hz_to_angular(c.number("noise.detuning_hz")),
                            units::hz_to_angular(c.number("noise.evolution_detuning_hz"))};
    noise.validate();
    const double delta1 = units::hz_to_angular(c.number("pulse.evolution_detuning_hz"));
    require(delta1 != 0, "config: pulse.evolution_detuning_hz must be nonzero");
    const double off = units::hz_to_angular(c.number("pulse.offresonance_hz"));
    const auto species = detail::species_from(c);
    atomphys::FieldConfig field;
    field.bias_field = units::gauss_to_tesla(c.number("field.bias_gauss"));
    field.field_noise = units::gauss_to_tesla(c.number("field.noise_gauss"));
    field.oscillator_noise = units::hz_to_angular(c.number("field.oscillator_noise_hz"));
    field.validate();
    const double T = c.number("field.interrogation");
    require(T > 0, "config: field.interrogation must be > 0");
    const double n = detail::atoms_from(c);
    const long eps_points = c.integer("budget.eps_points");
    require(eps_points >= 2, "config: budget.eps_points must be >= 2");
    const auto kappa_fields = c.list("field.kappa_fields_gauss");
    for (double b : kappa_fields) require(b >= 0, "config: field.kappa_fields_gauss entries must be >= 0");

    Emitter out(c);
    Json r = Json::object();

    auto decomposition = [&](double eps) {
        const auto v = ramsey_noise_variance(eps, noise, rabi);
        return Json{{"epsilon", eps},
                    {"f", noise_coefficient_power(eps)},
                    {"g", noise_coefficient_detuning(eps)},
                    {"power_term", v.power_term},
                    {"detuning_term", v.detuning_term},
                    {"sigma_pz", std::sqrt(v.total())}};
    };
    if (noise.relative_power_noise > 0 && noise.pulse_detuning_noise > 0) {
        const auto od = optimal_detuning(noise.pulse_detuning_noise, rabi, noise.relative_power_noise);
        r["optimal_detuning"] = {{"approx_epsilon", od.approx_epsilon},
                                 {"approx_detuning_hz", units::angular_to_hz(od.approx_detuning)},
                                 {"approx_within_validity", od.approx_epsilon < 0.32},
                                 {"exact_epsilon", od.exact_epsilon},
                                 {"exact_detuning_hz", units::angular_to_hz(od.exact_detuning)},
                                 {"at_exact", decomposition(od.exact_epsilon)}};
    } else {
        r["optimal_detuning"] = nullptr;
    }

    const auto res = resonant_noise_variance(noise, rabi, delta1);
    r["resonant"] = {{"power_term", res.power_term},
                     {"detuning_term", res.detuning_term},
                     {"sigma_pz", std::sqrt(res.total())}};

    const double t = constants::pi / (2.0 * rabi);
    const double dp_res = std::fabs(rabi_transition_probability(rabi, noise.pulse_detuning_noise, t) -
                                    rabi_transition_probability(rabi, 0.0, t));
    const auto bs_off = single_beamsplitter_sensitivity(off, rabi, noise.pulse_detuning_noise, 0.0);
    const auto bs_pow = single_beamsplitter_sensitivity(0.0, rabi, 0.0, noise.relative_power_noise);
    const double power_only = std::sqrt(
        resonant_noise_variance(NoiseBudget{noise.relative_power_noise, 0, 0}, rabi, delta1).total());
    r["beamsplitter"] = {{"resonant_detuning_dp", dp_res},
                         {"offresonant_detuning_dpz", bs_off.detuning_part},
                         {"offresonant_detuning_dpz_numeric", bs_off.finite_difference},
                         {"resonant_power_dpz", bs_pow.power_part},
                         {"interferometer_power_sigma_pz", power_only}};

    const double kappa = atomphys::resonance_sensitivity_kappa(species, field.bias_field);
    const double dw = atomphys::detuning_fluctuation(species, field);
    r["field"] = {{"kappa_hz_per_gauss", units::angular_to_hz(kappa * units::gauss)},
                  {"clock_shift_hz", atomphys::clock_shift_hz(species, field.bias_field)},
                  {"detuning_noise_hz", units::angular_to_hz(dw)}};
    const double dmax = max_detuning_fluctuation(T, n);
    r["projection_limit"] = {{"interrogation_s", T},
                             {"atom_number", n},
                             {"max_detuning_fluctuation_hz", units::angular_to_hz(dmax)},
                             {"relative_frequency_stability", relative_frequency_stability(dmax, species.hyperfine_hz)}};

    Table kt({"B_gauss", "kappa_hz_per_gauss", "clock_shift_hz", "detuning_noise_hz"});
    for (double b : kappa_fields) {
        const double k = atomphys::resonance_sensitivity_kappa(species, units::gauss_to_tesla(b));
        kt.add({b, units::angular_to_hz(k * units::gauss), atomphys::clock_shift_hz(species, units::gauss_to_tesla(b)),
                units::angular_to_hz(k * field.field_noise)});
    }
    out.csv("kappa", kt);

    if (c.boolean("budget.sweep")) {
        Table sw({"epsilon", "f", "g", "f_small", "g_small", "power_term", "detuning_term", "sigma_pz"});
        for (long k = 1; k <= eps_points; ++k) {
            const double eps = 0.9 * double(k) / double(eps_points);
            const auto v = ramsey_noise_variance(eps, noise, rabi);
            sw.add({eps, noise_coefficient_power(eps), noise_coefficient_detuning(eps),
                    noise_coefficient_power_small_eps(eps), noise_coefficient_detuning_small_eps(eps), v.power_term,
                    v.detuning_term, std::sqrt(v.total())});
        }
        out.csv("sweep", sw);
        out.svg("sweep", sw.column("epsilon"), sw.column("sigma_pz"),
                {"P_z noise versus epsilon", "epsilon = |Delta| / Omega", "sigma P_z", true});
    }
    return out.finish(r);
}

inline gpe::GpeConfig gpe_config_from(const RunConfig& c)
{
    gpe::GpeConfig g;
    g.species = detail::species_from(c);
    g.trap = atomphys::TrapConfig::cylindrical(units::hz_to_angular(c.number("gpe.f_rho")),
                                               units::hz_to_angular(c.number("gpe.f_z")));
    g.atom_number = detail::atoms_from(c);
    g.dt_real = c.number("gpe.dt_real");
    g.dt_imag = c.number("gpe.dt_imag");
    g.convergence_tol = c.number("gpe.tol");
    g.a12_scale = c.number("gpe.a12_scale");
    g.grid.n_rho = int(c.integer("gpe.n_rho"));
    g.grid.n_z = int(c.integer("gpe.n_z"));
    g.grid.rho_extent = c.number("gpe.rho_extent");
    g.grid.z_extent = c.number("gpe.z_extent");
    g.validate();
    return g;
}

inline Json run_gpe_visibility(const RunConfig& c)
{
    const auto cfg = gpe_config_from(c);
    const auto t_list = c.list("gpe.t_list");
    require(!t_list.empty(), "config: gpe.t_list is empty");
    for (double t : t_list) require(t >= 0, "config: gpe.t_list entries must be >= 0");
    gpe::CurveOptions opt;
    opt.phase_samples = int(c.integer("gpe.phase_samples"));
    opt.decoherence_time = c.number("gpe.decoherence_time");
    opt.jobs = int(c.integer("gpe.jobs"));
    require(opt.phase_samples >= 8, "config: gpe.phase_samples must be >= 8");
    require(opt.decoherence_time >= 0, "config: gpe.decoherence_time must be >= 0");
    require(opt.jobs >= 1, "config: gpe.jobs must be >= 1");
    const bool echo = c.boolean("gpe.echo");
    const auto snaps = c.list("gpe.snapshot_times");
    const double t_last = *std::max_element(t_list.begin(), t_list.end());
    for (double s : snaps) require(s >= 0 && s <= t_last, "config: gpe.snapshot_times must lie in [0, max T]");

    const auto start = std::chrono::steady_clock::now();
    Emitter out(c);
    const auto gs = gpe::ground_state_report(cfg);
    const auto pts = gpe::visibility_curve(cfg, gs.field, t_list, echo, opt);

    Table t({"T_s", "visibility", "visibility_fit", "visibility_overlap"});
    Json points = Json::array();
    for (const auto& p : pts) {
        t.add({p.interrogation_time, p.visibility, p.visibility_fit, p.visibility_overlap});
        points.push_back({{"T_s", p.interrogation_time},
                          {"visibility", p.visibility},
                          {"visibility_fit", p.visibility_fit},
                          {"visibility_overlap", p.visibility_overlap}});
    }
    out.csv("", t);
    std::vector<double> t_ms;
    for (double x : t.column("T_s")) t_ms.push_back(1e3 * x);
    out.svg("", t_ms, t.column("visibility"),
            {echo ? "Fringe visibility with spin echo" : "Fringe visibility", "T (ms)", "visibility", false});

    Json snap_json = Json::array();
    if (!snaps.empty()) {
        const auto run = gpe::simulate_ramsey(cfg, gs.field, t_last, echo, opt.phase_samples, snaps);
        const auto& g = gs.field.grid;
        for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
            const auto& sn = run.snapshots[s];
            Table d({"rho_m", "z_m", "density1", "density2", "relative_phase"});
            for (int j = 0; j < g.n_rho; ++j)
                for (int k = 0; k < g.n_z; ++k) {
                    const auto i = g.index(j, k);
                    d.add({g.rho_si(j), g.z_si(k), sn.density1[i], sn.density2[i], sn.relative_phase[i]});
                }
            out.csv("snapshot" + std::to_string(s), d);
            snap_json.push_back({{"time_s", sn.time}, {"visibility_overlap", sn.visibility}});
        }
    }

    const auto& dg = gs.diagnostics;
    Json r = {{"spin_echo", echo},
              {"points", points},
              {"ground_state",
               {{"imaginary_steps", gs.steps},
                {"final_relative_energy_change", gs.residual},
                {"chemical_potential_hz", gs.chemical_potential / constants::planck},
                {"tf_chemical_potential_hz",
                 atomphys::tf_chemical_potential(cfg.species, cfg.trap, cfg.atom_number) / constants::planck}}},
              {"grid",
               {{"n_rho", gs.field.grid.n_rho},
                {"n_z", gs.field.grid.n_z},
                {"d_rho_m", dg.d_rho},
                {"d_z_m", dg.d_z},
                {"healing_length_m", dg.healing_length},
                {"rho_max_over_tf", dg.rho_max_over_tf},
                {"z_max_over_tf", dg.z_max_over_tf},
                {"resolves_healing_length", dg.resolves_healing_length},
                {"extents_cover_three_tf", dg.extents_cover_three_tf}}},
              {"snapshots", snap_json}};
    if (c.boolean("run.timing"))
        r["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out.finish(r);
}

namespace detail {

struct ImagingSetup
{
    imaging::CloudModel cloud;
    imaging::ImagingConfig img;
    imaging::CameraConfig cam;
};

inline ImagingSetup imaging_from(const RunConfig& c)
{
    ImagingSetup s;
    const auto species = species_from(c);
    const double tof = 1e-3 * c.number("imaging.tof_ms");
    require(tof >= 0, "config: imaging.tof_ms must be >= 0");
    s.cloud = imaging::expanded_cloud(species, trap_from(c), atoms_from(c), tof, c.number("imaging.state_fraction"));
    s.cloud.validate();
    s.img.magnification = c.number("imaging.magnification");
    s.img.intensity_ratio = c.number("imaging.intensity");
    s.img.detuning = units::hz_to_angular(1e6 * c.number("imaging.detuning_mhz"));
    s.img.species = species;
    s.img.validate();
    s.cam.quantum_efficiency = c.number("imaging.quantum_efficiency");
    s.cam.pixel_size = 1e-6 * c.number("imaging.pixel_um");
    s.cam.exposure_time = 1e-6 * c.number("imaging.exposure_us");
    s.cam.full_well = c.number("imaging.full_well");
    s.cam.validate();
    return s;
}

} // namespace detail

inline Json run_imaging_sim(const RunConfig& c)
{
    const auto s = detail::imaging_from(c);
    const long runs = c.integer("imaging.runs");
    require(runs >= 2, "config: imaging.runs must be >= 2");
    const double plateau_tol = c.number("imaging.plateau_tol");
    require(plateau_tol > 0, "config: imaging.plateau_tol must be > 0");
    const bool noise = c.boolean("imaging.noise"), atomic = c.boolean("imaging.atomic_noise");
    const std::uint64_t seed = detail::seed_from(c);

    Emitter out(c);
    std::vector<double> atoms;
    if (noise) {
        atoms = imaging::monte_carlo_atom_numbers(s.cloud, s.img, s.cam, int(runs), seed, atomic);
    } else {
        for (long r = 0; r < runs; ++r) {
            const auto pair = imaging::simulate_image_pair(s.cloud, s.img, s.cam, seed ^ std::uint64_t(r), false, atomic);
            atoms.push_back(imaging::atoms_per_pixel(pair, s.img, s.cam).total);
        }
    }
    const auto running = imaging::cumulative_std(atoms);
    Table t({"run", "atoms", "cumulative_std"});
    for (std::size_t r = 0; r < atoms.size(); ++r) t.add({double(r + 1), atoms[r], r == 0 ? NAN : running[r - 1]});
    out.csv("", t);
    std::vector<double> k, v;
    for (std::size_t r = 1; r < atoms.size(); ++r) {
        k.push_back(double(r + 1));
        v.push_back(running[r - 1]);
    }
    out.svg("", k, v, {"Cumulative standard deviation of the atom number", "runs", "std (atoms)", false});

    const auto mean = imaging::mean_image_pair(s.cloud, s.img, s.cam, s.cloud.atom_number * s.cloud.state_fraction);
    const auto dn = imaging::detection_noise_closed_form(mean, s.img, s.cam);
    const double imaged = s.cloud.atom_number * s.cloud.state_fraction;
    const double mc = running.back();
    if (c.wants("pgm")) {
        const auto pair = imaging::simulate_image_pair(s.cloud, s.img, s.cam, seed, noise, atomic);
        out.pgm("bright", pair.e_i, pair.grid.nu, pair.grid.nv);
        out.pgm("shadow", pair.e_f, pair.grid.nu, pair.grid.nv);
    }
    double mean_atoms = 0;
    for (double a : atoms) mean_atoms += a;
    mean_atoms /= double(atoms.size());
    const double sigma_a = imaging::projection_noise_atoms(s.cloud.atom_number, 0.5);
    Json r = {{"cloud",
               {{"radius_u_m", s.cloud.radius_u},
                {"radius_v_m", s.cloud.radius_v},
                {"roi_pixels", {mean.grid.nu, mean.grid.nv}},
                {"imaged_atoms", imaged}}},
              {"camera",
               {{"e_sat", s.img.e_sat(s.cam)},
                {"bright_counts", s.img.bright_counts(s.cam)},
                {"within_full_well", s.img.bright_counts(s.cam) <= s.cam.full_well},
                {"c0", s.img.c0(s.cam)},
                {"line_factor", s.img.line_factor()}}},
              {"sigma_det_printed", dn.printed},
              {"sigma_det_standard", dn.standard},
              {"monte_carlo",
               {{"runs", runs},
                {"photon_noise", noise},
                {"atomic_noise", atomic},
                {"mean_atoms", mean_atoms},
                {"std_atoms", mc},
                {"std_over_standard", dn.standard > 0 ? mc / dn.standard : NAN},
                {"plateau_runs", imaging::plateau_samples(running, plateau_tol)}}},
              {"projection_noise_atoms", sigma_a},
              {"projection_over_detection", num(dn.standard > 0 ? sigma_a / dn.standard : NAN)},
              {"shot_noise_ratio", num(dn.standard > 0 ? imaging::shot_noise_ratio(imaged, dn.standard) : NAN)},
              {"squeezing_headroom_db",
               num(dn.standard > 0 ? imaging::squeezing_headroom_db(imaged, dn.standard) : NAN)}};
    return out.finish(r);
}

inline Json run_imaging_optimize(const RunConfig& c)
{
    const auto s = detail::imaging_from(c);
    imaging::SearchSpace space;
    space.intensity_ratios = c.list("search.intensity");
    space.magnifications = c.list("search.magnification");
    space.exposure_times.clear();
    for (double us : c.list("search.exposure_us")) space.exposure_times.push_back(1e-6 * us);
    space.detunings.clear();
    for (double mhz : c.list("search.detuning_mhz")) space.detunings.push_back(units::hz_to_angular(1e6 * mhz));
    space.tie_tolerance = c.number("search.tie_tolerance");
    require(space.tie_tolerance >= 0, "config: search.tie_tolerance must be >= 0");

    Emitter out(c);
    const auto res = imaging::optimize_parameters(s.cloud, s.cam, space, s.img);
    Table t({"intensity_ratio", "magnification", "exposure_us", "detuning_mhz", "bright_counts", "sigma_det",
             "feasible"});
    std::vector<double> sx, sy;
    for (const auto& p : res.surface) {
        t.add({p.intensity_ratio, p.magnification, detail::micro(p.exposure_time), p.detuning / constants::two_pi / 1e6,
               p.bright_counts, p.sigma_det, p.feasible ? 1.0 : 0.0});
        if (p.feasible && p.magnification == res.best.magnification && p.exposure_time == res.camera.exposure_time &&
            p.detuning == res.best.detuning) {
            sx.push_back(p.intensity_ratio);
            sy.push_back(p.sigma_det);
        }
    }
    out.csv("surface", t);
    out.svg("", sx, sy, {"Detection noise at the chosen magnification and exposure", "I / I_sat",
                         "sigma_det (atoms)", false});
    const double imaged = s.cloud.atom_number * s.cloud.state_fraction;
    const double sigma_a = imaging::projection_noise_atoms(s.cloud.atom_number, 0.5);
    Json r = {{"best",
               {{"intensity_ratio", res.best.intensity_ratio},
                {"magnification", res.best.magnification},
                {"exposure_us", detail::micro(res.camera.exposure_time)},
                {"detuning_mhz", res.best.detuning / constants::two_pi / 1e6},
                {"bright_counts", res.best.bright_counts(res.camera)}}},
              {"sigma_det", res.sigma_det},
              {"projection_noise_atoms", sigma_a},
              {"projection_over_detection", sigma_a / res.sigma_det},
              {"shot_noise_ratio", imaging::shot_noise_ratio(imaged, res.sigma_det)},
              {"squeezing_headroom_db", imaging::squeezing_headroom_db(imaged, res.sigma_det)},
              {"evaluated_points", res.surface.size()}};
    return out.finish(r);
}

inline Json run_squeeze_sensitivity(const RunConfig& c)
{
    const double n = detail::atoms_from(c);
    squeezing::OatConfig oat;
    oat.atom_number = n;
    const std::string chi = c.text("squeezing.chi");
    oat.chi = chi == "auto" ? squeezing::twisting_rate(detail::species_from(c), detail::trap_from(c), n)
                            : ramsey::cli::detail::parse_number("squeezing.chi", chi);
    // stands in for a Feshbach-tuned interaction strength
    oat.chi *= c.number("squeezing.chi_scale");
    oat.prep_time = c.number("squeezing.prep_time");
    const long points = c.integer("squeezing.phase_points");
    require(points >= 2, "config: squeezing.phase_points must be >= 2");
    for (long i = 0; i < points; ++i) oat.phases.push_back(constants::two_pi * double(i) / double(points - 1));
    oat.validate();

    Emitter out(c);
    const auto curve = squeezing::phase_sensitivity(oat);
    const double sql = squeezing::sql(n);
    Table t({"phi", "normalized_sensitivity", "delta_phi", "sql"});
    for (std::size_t i = 0; i < curve.phases.size(); ++i)
        t.add({curve.phases[i], curve.normalized[i], curve.normalized[i] * sql, sql});
    out.csv("", t);
    out.svg("", t.column("phi"), t.column("delta_phi"),
            {"Phase sensitivity versus readout phase", "phi (rad)", "delta phi (rad)", true});
    Json r = {{"chi_rad_per_s", oat.chi},
              {"chi_scale", c.number("squeezing.chi_scale")},
              {"twist", oat.twist()},
              {"sql", sql},
              {"min_normalized", num(curve.min_normalized)},
              {"min_phase", curve.min_phase},
              {"min_delta_phi", num(curve.min_normalized * sql)},
              {"optimum_normalized", num(curve.optimum_normalized)},
              {"optimum_phase", curve.optimum_phase},
              {"enhancement", num(1.0 / curve.min_normalized)}};
    return out.finish(r);
}

inline Json run_two_mode(const RunConfig& c)
{
    const auto species = detail::species_from(c);
    const auto trap = detail::trap_from(c);
    const double n = detail::atoms_from(c);
    auto sys = twomode::make_tf_system(species, trap, n);
    sys.total_number_noise = c.number("twomode.number_noise");
    sys.validate();
    const double T = c.number("twomode.T"), t_max = c.number("twomode.t_max");
    const long points = c.integer("twomode.points");
    require(T >= 0 && t_max > 0, "config: twomode.T must be >= 0 and twomode.t_max > 0");
    require(points >= 2, "config: twomode.points must be >= 2");
    const double k1 = c.number("twomode.loss_k1"), k2 = c.number("twomode.loss_k2");

    Emitter out(c);
    const double closed = twomode::tf_phase_diffusion_rate(species, trap, n);
    const double route = sys.g.asymmetry() * std::sqrt(n) / 2;
    Table t({"T_s", "spread_no_echo_rad", "spread_echo_rad", "total_number_no_echo_rad", "total_number_echo_rad"});
    for (long i = 0; i < points; ++i) {
        const double tt = t_max * double(i) / double(points - 1);
        const auto e = twomode::spin_echo_phase_diffusion(sys, tt);
        t.add({tt, std::fabs(twomode::phase_diffusion(sys, tt)), std::fabs(e.number_difference_term),
               twomode::total_number_phase_diffusion(sys, tt, sys.total_number_noise), e.total_number_term});
    }
    out.csv("", t);
    out.svg("", t.column("T_s"), t.column("spread_no_echo_rad"),
            {"Projection-noise phase spread without echo", "T (s)", "phase spread (rad)", false});
    const auto echo = twomode::spin_echo_phase_diffusion(sys, T);
    const double mis = atomphys::miscibility_parameter(species.a11, species.a12, species.a22);
    Json r = {{"couplings_rad_per_s", {{"g11", sys.g.g11}, {"g12", sys.g.g12}, {"g22", sys.g.g22}}},
              {"asymmetry_rad_per_s", sys.g.asymmetry()},
              {"relative_scattering_asymmetry", twomode::relative_scattering_asymmetry(species)},
              {"phase_diffusion_rate_mrad_per_s", 1e3 * std::fabs(closed)},
              {"coupling_route_mrad_per_s", 1e3 * std::fabs(route)},
              {"routes_relative_difference", std::fabs(closed - route) / std::fabs(route)},
              {"at_T",
               {{"T_s", T},
                {"spread_no_echo_rad", std::fabs(twomode::phase_diffusion(sys, T))},
                {"spread_echo_rad", std::fabs(echo.number_difference_term)},
                {"total_number_no_echo_rad", twomode::total_number_phase_diffusion(sys, T, sys.total_number_noise)},
                {"total_number_echo_rad", echo.total_number_term}}},
              {"miscibility", {{"parameter", mis}, {"immiscible", atomphys::is_immiscible(mis)}}},
              {"differential_loss", {{"k1", k1}, {"k2", k2}, {"visibility", twomode::differential_loss_visibility(k1, k2)}}}};
    return out.finish(r);
}

/// Resolves a relative data path against the working directory, then the search roots.
inline std::filesystem::path resolve_data(const std::string& name, const std::vector<std::filesystem::path>& roots)
{
    const std::filesystem::path p(name);
    if (p.is_absolute() || std::filesystem::exists(p)) return p;
    for (const auto& r : roots)
        if (std::filesystem::exists(r / p)) return r / p;
    throw InvalidArgument("config: fit.data '" + name + "' not found");
}

inline Json run_fit(const RunConfig& c, const std::vector<std::filesystem::path>& roots = {})
{
    const std::string model = c.text("fit.model");
    require(model == "sinusoid" || model == "exponential" || model == "drift",
            "config: fit.model must be sinusoid, exponential or drift");
    const auto path = resolve_data(c.text("fit.data"), roots);
    const auto [header, rows] = read_csv(path);
    auto column = [&, &header = header](const std::string& key, std::size_t fallback, bool optional) -> long {
        const std::string name = c.text(key);
        if (name.empty()) return fallback < header.size() ? long(fallback) : -1;
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (optional) return -1;
            throw InvalidArgument("config: " + key + " '" + name + "' is not a column of " + path.string());
        }
        return long(it - header.begin());
    };
    const long xc = column("fit.x_column", 0, false), yc = column("fit.y_column", 1, false);
    const long sc = column("fit.sigma_column", 2, true);
    require(xc >= 0 && yc >= 0, "config: data needs at least two columns");
    const long boot = c.integer("fit.bootstrap"), curve_points = c.integer("fit.curve_points");
    require(boot >= 0, "config: fit.bootstrap must be >= 0");
    require(curve_points >= 2, "config: fit.curve_points must be >= 2");

    analysis::FringeDataset d;
    for (const auto& row : rows) {
        d.x.push_back(row[std::size_t(xc)]);
        d.y.push_back(row[std::size_t(yc)]);
        if (sc >= 0) d.sigma.push_back(row[std::size_t(sc)]);
    }

    Emitter out(c);
    analysis::FitResult f;
    std::function<double(double)> curve;
    if (model == "sinusoid") {
        f = analysis::fit_sinusoid_fixed_freq(d);
        const double o = f.value("offset"), v = f.value("visibility"), ph = f.value("phase");
        curve = [=](double x) { return o + 0.5 * v * std::cos(x - ph); };
    } else if (model == "exponential") {
        f = analysis::fit_exponential_decay(d);
        const double a = f.value("amplitude"), tau = f.value("tau");
        curve = [=](double x) { return a * std::exp(-x / tau); };
    } else {
        f = analysis::fit_drift_envelope(d);
        const double nu = f.value("nu"), tau = f.value("tau"), v0 = f.value("visibility0");
        curve = [=](double x) { return analysis::drift_envelope_model(nu, tau, v0, x); };
    }

    Table t({"x", "y", "model", "residual"});
    for (std::size_t i = 0; i < d.size(); ++i) t.add({d.x[i], d.y[i], curve(d.x[i]), d.y[i] - curve(d.x[i])});
    out.csv("", t);
    const auto [lo, hi] = std::minmax_element(d.x.begin(), d.x.end());
    Table m({"x", "model"});
    for (long i = 0; i < curve_points; ++i) {
        const double x = *lo + (*hi - *lo) * double(i) / double(curve_points - 1);
        m.add({x, curve(x)});
    }
    out.csv("curve", m);
    out.svg("", m.column("x"), m.column("model"), {"Fitted " + model + " model", header[std::size_t(xc)],
                                                   header[std::size_t(yc)], false});

    Json r = {{"model", model}, {"data", path.filename().string()}, {"points", d.size()}, {"weighted", d.weighted()}};
    r["fit"] = detail::fit_json(f);
    if (model == "drift" && boot > 0) {
        const auto band = analysis::bootstrap_drift_envelope(d, f, int(boot), detail::seed_from(c));
        Json b = Json::object();
        for (std::size_t i = 0; i < band.names.size(); ++i) b[band.names[i]] = {band.lower[i], band.upper[i]};
        r["bootstrap_68"] = b;
    }
    return out.finish(r);
}

inline Json run_synth_data(const RunConfig& c)
{
    const std::string model = c.text("synth.model");
    require(model == "sinusoid" || model == "exponential" || model == "drift",
            "config: synth.model must be sinusoid, exponential or drift");
    const long n = c.integer("synth.points");
    require(n >= 2, "config: synth.points must be >= 2");
    const double x0 = c.number("synth.x_min"), x1 = c.number("synth.x_max"), sigma = c.number("synth.noise");
    require(x1 > x0, "config: synth.x_max must exceed synth.x_min");
    require(sigma >= 0, "config: synth.noise must be >= 0");
    const double nu = c.number("synth.nu"), tau = c.number("synth.tau"), v0 = c.number("synth.visibility");
    const double phase = c.number("synth.phase");
    require(tau > 0, "config: synth.tau must be > 0");

    Emitter out(c);
    std::mt19937_64 rng(detail::seed_from(c));
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::string xn = model == "sinusoid" ? "phi" : "T", yn = model == "exponential" ? "V" : "p";
    const bool with_sigma = sigma > 0;
    Table t(with_sigma ? std::vector<std::string>{xn, yn, "sigma"} : std::vector<std::string>{xn, yn});
    for (long i = 0; i < n; ++i) {
        const double x = x0 + (x1 - x0) * double(i) / double(n - 1);
        double y = 0;
        if (model == "drift") y = twomode::drift_fringe_model(nu, x, tau, v0);
        else if (model == "exponential") y = v0 * std::exp(-x / tau);
        else y = 0.5 * (1.0 + v0 * std::cos(x - phase));
        // draw unconditionally so the stream does not depend on sigma
        const double e = noise(rng);
        if (with_sigma) t.add({x, y + sigma * e, sigma});
        else t.add({x, y});
    }
    out.csv("", t);
    out.svg("", t.column(xn), t.column(yn), {"Synthetic " + model + " data", xn, yn, false});
    Json truth = Json::object();
    if (model == "drift") truth = {{"nu", nu}, {"tau", tau}, {"visibility0", v0}};
    else if (model == "exponential") truth = {{"amplitude", v0}, {"tau", tau}};
    else truth = {{"offset", 0.5}, {"visibility", v0}, {"phase", phase}};
    return out.finish({{"model", model}, {"points", n}, {"noise", sigma}, {"truth", truth}});
}

inline Json run_command(const RunConfig& c, const std::vector<std::filesystem::path>& data_roots = {})
{
    const auto& cmd = c.command();
    if (cmd == "noise-budget") return run_noise_budget(c);
    if (cmd == "gpe-visibility") return run_gpe_visibility(c);
    if (cmd == "imaging-sim") return run_imaging_sim(c);
    if (cmd == "imaging-optimize") return run_imaging_optimize(c);
    if (cmd == "squeeze-sensitivity") return run_squeeze_sensitivity(c);
    if (cmd == "two-mode") return run_two_mode(c);
    if (cmd == "fit") return run_fit(c, data_roots);
    if (cmd == "synth-data") return run_synth_data(c);
    throw InvalidArgument("unknown command '" + cmd + "'");
}

} // namespace ramsey::cli
