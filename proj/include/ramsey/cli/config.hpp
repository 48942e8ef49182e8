#pragma once

// Run configuration: a flat, sectioned key = value namespace with defaults,
// loaded from INI-style text or from the "config" object of an earlier JSON
// report, then overridden per key on the command line.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "ramsey/core.hpp"

namespace ramsey::cli {

enum class Kind { Number, Integer, Boolean, Text, List };

struct KeySpec
{
    std::string key;   // section.name
    std::string value; // default
    std::string alias; // optional short flag without dashes
    Kind kind;
    std::string help;

    std::string section() const { return key.substr(0, key.find('.')); }
};

inline const std::vector<KeySpec>& schema()
{
    using K = Kind;
    static const std::vector<KeySpec> keys = {
        {"run.experiment", "ramsey", "experiment", K::Text, "experiment name, prefix of every output file"},
        {"run.seed", "42", "seed", K::Integer, "base seed for every random stream"},
        {"run.output_dir", "", "out", K::Text, "output directory (default: $RAMSEY_LAB_OUTPUT or .)"},
        {"run.formats", "csv,json,svg", "formats", K::Text, "comma list of csv, json, svg, pgm"},
        {"run.timing", "false", "timing", K::Boolean, "record wall-clock seconds in the JSON report"},

        {"species.mass_amu", "86.909180527", "", K::Number, "atomic mass, u"},
        {"species.linewidth_mhz", "6.067", "", K::Number, "natural linewidth Gamma / 2 pi, MHz"},
        {"species.wavelength_nm", "780.241209686", "", K::Number, "imaging transition wavelength, nm"},
        {"species.isat", "16.7", "", K::Number, "saturation intensity, W/m^2"},
        {"species.hyperfine_hz", "6834682610.904", "", K::Number, "clock transition frequency, Hz"},
        {"species.gj", "2.00233113", "", K::Number, "electron Lande factor g_J"},
        {"species.gi", "-0.0009951414", "", K::Number, "nuclear Lande factor g_I"},
        {"species.a11", "100.9", "", K::Number, "a11 in Bohr radii"},
        {"species.a12", "98.9", "", K::Number, "a12 in Bohr radii"},
        {"species.a22", "94.9", "", K::Number, "a22 in Bohr radii"},

        {"trap.fx", "50", "", K::Number, "trap frequency along x, Hz"},
        {"trap.fy", "57", "", K::Number, "trap frequency along y, Hz"},
        {"trap.fz", "28", "", K::Number, "trap frequency along z, Hz"},

        {"atoms.N", "1e6", "N", K::Number, "total atom number"},

        {"pulse.rabi_hz", "833", "rabi", K::Number, "Rabi frequency Omega / 2 pi, Hz"},
        {"pulse.evolution_detuning_hz", "100", "", K::Number, "free-evolution detuning Delta_1 / 2 pi, Hz"},
        {"pulse.offresonance_hz", "100", "", K::Number, "detuning for the off-resonant beamsplitter check, Hz"},

        {"noise.power", "0.005", "", K::Number, "relative power noise dP/P"},
        {"noise.detuning_hz", "10", "", K::Number, "pulse detuning noise / 2 pi, Hz"},
        {"noise.evolution_detuning_hz", "0", "", K::Number, "free-evolution detuning noise / 2 pi, Hz"},

        {"field.bias_gauss", "4", "", K::Number, "bias field, G"},
        {"field.noise_gauss", "0.002", "", K::Number, "field noise, G"},
        {"field.oscillator_noise_hz", "0", "", K::Number, "local-oscillator noise / 2 pi, Hz"},
        {"field.interrogation", "0.005", "", K::Number, "interrogation time T for the detuning bound, s"},
        {"field.kappa_fields_gauss", "0.5,1,2,3,4,5,6,8,10", "", K::List, "fields of the kappa table, G"},

        {"budget.sweep", "false", "sweep", K::Boolean, "write the f, g decomposition over an epsilon grid"},
        {"budget.eps_points", "50", "", K::Integer, "epsilon grid points on (0, 0.9]"},

        {"gpe.f_rho", "55", "", K::Number, "radial trap frequency, Hz"},
        {"gpe.f_z", "30", "", K::Number, "axial trap frequency, Hz"},
        {"gpe.n_rho", "128", "", K::Integer, "radial grid points"},
        {"gpe.n_z", "256", "", K::Integer, "axial grid points"},
        {"gpe.rho_extent", "1.5", "", K::Number, "radial box over the Thomas-Fermi radius"},
        {"gpe.z_extent", "1.5", "", K::Number, "axial half-box over the Thomas-Fermi radius"},
        {"gpe.dt_real", "2e-6", "", K::Number, "real-time step, s"},
        {"gpe.dt_imag", "1e-6", "", K::Number, "imaginary-time step, s"},
        {"gpe.tol", "1e-12", "", K::Number, "ground-state relative energy tolerance"},
        {"gpe.a12_scale", "1", "a12-scale", K::Number, "multiplier on a12"},
        {"gpe.echo", "false", "echo", K::Boolean, "insert a pi pulse at T/2"},
        {"gpe.t_list", "0,0.005,0.01,0.02,0.03,0.04", "T", K::List, "interrogation times, s"},
        {"gpe.phase_samples", "32", "", K::Integer, "closing-pulse phases per fringe scan"},
        {"gpe.decoherence_time", "0", "", K::Number, "optional exp(-T/tau) envelope, s (0 = off)"},
        {"gpe.jobs", "1", "jobs", K::Integer, "worker threads for echo runs"},
        {"gpe.snapshot_times", "", "", K::List, "times of density snapshots in the run at the last T, s"},

        {"imaging.magnification", "8", "M", K::Number, "magnification"},
        {"imaging.intensity", "15", "s", K::Number, "probe intensity over I_sat"},
        {"imaging.detuning_mhz", "0", "", K::Number, "probe detuning / 2 pi, MHz"},
        {"imaging.exposure_us", "100", "", K::Number, "exposure time, us"},
        {"imaging.quantum_efficiency", "0.17", "", K::Number, "camera quantum efficiency"},
        {"imaging.pixel_um", "6.45", "", K::Number, "camera pixel side, um"},
        {"imaging.full_well", "18000", "", K::Number, "full-well limit, electrons"},
        {"imaging.tof_ms", "30", "", K::Number, "time of flight before imaging, ms"},
        {"imaging.state_fraction", "1", "", K::Number, "fraction of atoms in the imaged state"},
        {"imaging.runs", "30", "runs", K::Integer, "Monte Carlo image pairs"},
        {"imaging.noise", "true", "noise", K::Boolean, "photon shot noise on/off"},
        {"imaging.atomic_noise", "false", "", K::Boolean, "binomial atom projection noise"},
        {"imaging.plateau_tol", "0.1", "", K::Number, "relative band for the plateau of the running std"},

        {"search.intensity", "1,2,5,10,15,20,25,30", "", K::List, "intensity grid, I/I_sat"},
        {"search.magnification", "1,2,4,6,8,10,12", "", K::List, "magnification grid"},
        {"search.exposure_us", "25,50,100", "", K::List, "exposure grid, us"},
        {"search.detuning_mhz", "0", "", K::List, "detuning grid, MHz"},
        {"search.tie_tolerance", "0.005", "", K::Number, "relative sigma_det window treated as a tie"},

        {"squeezing.chi", "auto", "chi", K::Text, "twisting rate, rad/s, or auto for the trap couplings"},
        {"squeezing.chi_scale", "1", "chi-scale", K::Number, "multiplier on chi, e.g. for a tuned a12"},
        {"squeezing.prep_time", "0.02", "prep-time", K::Number, "twisting time, s"},
        {"squeezing.phase_points", "361", "", K::Integer, "readout phases on [0, 2 pi]"},

        {"twomode.T", "0.02", "", K::Number, "interrogation time for the reported spreads, s"},
        {"twomode.t_max", "0.2", "", K::Number, "end of the spread-versus-T table, s"},
        {"twomode.points", "41", "", K::Integer, "rows of the spread-versus-T table"},
        {"twomode.number_noise", "0", "", K::Number, "shot-to-shot total-number noise"},
        {"twomode.loss_k1", "1", "", K::Number, "survival fraction of state 1"},
        {"twomode.loss_k2", "0.5", "", K::Number, "survival fraction of state 2"},

        {"fit.model", "drift", "model", K::Text, "sinusoid, exponential or drift"},
        {"fit.data", "data/drift_synthetic.csv", "data", K::Text, "CSV file with a header row"},
        {"fit.x_column", "", "", K::Text, "abscissa column name; empty = first column"},
        {"fit.y_column", "", "", K::Text, "ordinate column name; empty = second column"},
        {"fit.sigma_column", "", "", K::Text, "uncertainty column name; empty = third column if present"},
        {"fit.bootstrap", "0", "", K::Integer, "residual resamples for drift bands (0 = off)"},
        {"fit.curve_points", "200", "", K::Integer, "points of the model curve"},

        {"synth.model", "drift", "", K::Text, "sinusoid, exponential or drift"},
        {"synth.points", "40", "", K::Integer, "samples"},
        {"synth.x_min", "0.05", "", K::Number, "first abscissa"},
        {"synth.x_max", "2", "", K::Number, "last abscissa"},
        {"synth.noise", "0.02", "", K::Number, "Gaussian noise on the ordinate"},
        {"synth.nu", "18.84955592153876", "", K::Number, "drift rate, rad/s^2"},
        {"synth.tau", "1", "", K::Number, "decay time"},
        {"synth.visibility", "0.9", "", K::Number, "initial visibility"},
        {"synth.phase", "0", "", K::Number, "sinusoid phase offset, rad"},
    };
    return keys;
}

/// Sections each subcommand reads.
inline std::vector<std::string> sections_for(const std::string& command)
{
    static const std::map<std::string, std::vector<std::string>> table = {
        {"noise-budget", {"run", "species", "atoms", "pulse", "noise", "field", "budget"}},
        {"gpe-visibility", {"run", "species", "atoms", "gpe"}},
        {"imaging-sim", {"run", "species", "trap", "atoms", "imaging"}},
        {"imaging-optimize", {"run", "species", "trap", "atoms", "imaging", "search"}},
        {"squeeze-sensitivity", {"run", "species", "trap", "atoms", "squeezing"}},
        {"two-mode", {"run", "species", "trap", "atoms", "twomode"}},
        {"fit", {"run", "fit"}},
        {"synth-data", {"run", "synth"}},
    };
    const auto it = table.find(command);
    require(it != table.end(), "config: unknown command '" + command + "'");
    return it->second;
}

inline const KeySpec* find_key(const std::string& key)
{
    for (const auto& k : schema())
        if (k.key == key) return &k;
    return nullptr;
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double x = NAN;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || trim(v.substr(used)) != "" || !std::isfinite(x))
        throw InvalidArgument("config: " + key + " expects a number, got '" + v + "'");
    return x;
}

} // namespace detail

/// Resolved key -> value strings for one subcommand.
class RunConfig
{
public:
    RunConfig() = default;

    explicit RunConfig(const std::string& command) : command_(command), sections_(sections_for(command))
    {
        for (const auto& k : schema())
            if (uses(k.section())) values_[k.key] = k.value;
    }

    const std::string& command() const { return command_; }
    const std::map<std::string, std::string>& values() const { return values_; }

    bool uses(const std::string& section) const
    {
        for (const auto& s : sections_)
            if (s == section) return true;
        return false;
    }

    /// Keys from other subcommands' sections are ignored so one file can hold
    /// every block; misspelled keys are errors.
    void set(const std::string& key, const std::string& value)
    {
        const KeySpec* k = find_key(key);
        if (!k) throw InvalidArgument("config: unknown key '" + key + "'");
        if (!uses(k->section())) return;
        values_[key] = detail::trim(value);
        check(*k);
    }

    const std::string& raw(const std::string& key) const
    {
        const auto it = values_.find(key);
        require(it != values_.end(), "config: key '" + key + "' is not available to " + command_);
        return it->second;
    }

    double number(const std::string& key) const { return detail::parse_number(key, raw(key)); }

    long integer(const std::string& key) const
    {
        const double x = number(key);
        if (x != std::floor(x) || std::fabs(x) > 9e15)
            throw InvalidArgument("config: " + key + " expects an integer, got '" + raw(key) + "'");
        return long(x);
    }

    bool boolean(const std::string& key) const
    {
        const std::string& v = raw(key);
        if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "off" || v == "no" || v == "0") return false;
        throw InvalidArgument("config: " + key + " expects true/false or on/off, got '" + v + "'");
    }

    std::string text(const std::string& key) const { return raw(key); }

    std::vector<double> list(const std::string& key) const
    {
        std::vector<double> out;
        std::stringstream ss(raw(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (!item.empty()) out.push_back(detail::parse_number(key, item));
        }
        return out;
    }

    /// Output directory: run.output_dir, else $RAMSEY_LAB_OUTPUT, else the working directory.
    std::filesystem::path output_dir() const
    {
        std::string d = text("run.output_dir");
        if (d.empty())
            if (const char* env = std::getenv("RAMSEY_LAB_OUTPUT")) d = env;
        return d.empty() ? std::filesystem::path(".") : std::filesystem::path(d);
    }

    bool wants(const std::string& format) const
    {
        std::stringstream ss(text("run.formats"));
        std::string item;
        while (std::getline(ss, item, ','))
            if (detail::trim(item) == format) return true;
        return false;
    }

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    void check(const KeySpec& k) const
    {
        switch (k.kind) {
        case Kind::Number: number(k.key); break;
        case Kind::Integer: integer(k.key); break;
        case Kind::Boolean: boolean(k.key); break;
        case Kind::List: list(k.key); break;
        case Kind::Text: break;
        }
    }

    std::string command_;
    std::vector<std::string> sections_;
    std::map<std::string, std::string> values_;
};

/// Applies a config file: INI sections, or a JSON report's "config" object.
inline void load_file(RunConfig& cfg, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("config: cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("config: " + path.string() + ": " + e.what());
        }
        const auto& c = j.contains("config") ? j.at("config") : j;
        for (const auto& [k, v] : c.items())
            cfg.set(k, v.is_string() ? v.get<std::string>() : v.dump());
        return;
    }
    boost::property_tree::ptree tree;
    try {
        std::stringstream ss(text);
        boost::property_tree::ini_parser::read_ini(ss, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InvalidArgument("config: " + path.string() + ": " + e.message() + " at line " +
                              std::to_string(e.line()));
    }
    for (const auto& [section, node] : tree) {
        if (node.empty()) {
            throw InvalidArgument("config: key '" + section + "' outside a [section]");
        }
        for (const auto& [name, leaf] : node) cfg.set(section + "." + name, leaf.data());
    }
}

} // namespace ramsey::cli
