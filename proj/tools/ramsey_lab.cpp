// ramsey-lab: command-line driver for the Ramsey interferometer models.
//
// Every config key can be given in files (--config, INI sections or an
// earlier JSON report; repeatable, later files win) and overridden with
// --section.key value; frequently used keys also have a short alias.
// Exit codes: 0 ok, 2 config error, 3 numerical failure.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ramsey/cli/commands.hpp"

namespace {

struct Command
{
    const char* name;
    const char* about;
};

const Command commands[] = {
    {"noise-budget", "beamsplitter power/detuning noise, optimal detuning and magnetic sensitivity"},
    {"gpe-visibility", "coupled Gross-Pitaevskii Ramsey visibility versus interrogation time"},
    {"imaging-sim", "Monte Carlo absorption images and the detection-noise budget"},
    {"imaging-optimize", "search intensity, magnification and exposure for the lowest detection noise"},
    {"squeeze-sensitivity", "one-axis-twisting phase sensitivity versus readout phase"},
    {"two-mode", "two-mode couplings, phase diffusion, miscibility and differential loss"},
    {"fit", "sinusoid, exponential or drift-envelope fit to a CSV dataset"},
    {"synth-data", "seeded synthetic datasets for the fitters"},
};

struct Parsed
{
    CLI::App* app = nullptr;
    std::vector<std::string> config_paths;
    bool paper_defaults = false;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::map<std::string, std::string> values;
};

} // namespace

int main(int argc, char** argv)
{
    using namespace ramsey;
    CLI::App app{"ramsey-lab: noise and dynamics of a trapped-condensate Ramsey interferometer"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "print help for every subcommand");

    std::map<std::string, Parsed> subs;
    for (const auto& cmd : commands) {
        Parsed& p = subs[cmd.name];
        p.app = app.add_subcommand(cmd.name, cmd.about);
        p.app->add_option("-c,--config", p.config_paths, "INI config file or an earlier JSON report; repeatable, later files win");
        if (std::string(cmd.name) == "two-mode")
            p.app->add_flag("--paper-defaults", p.paper_defaults, "ignore --config and use the built-in defaults");
        cli::RunConfig defaults(cmd.name);
        for (const auto& k : cli::schema()) {
            if (!defaults.uses(k.section())) continue;
            std::string names = "--" + k.key;
            if (!k.alias.empty()) names += ",--" + k.alias;
            const std::string help = k.help + " (default: " + (k.value.empty() ? "unset" : k.value) + ")";
            CLI::Option* o = p.app->add_option(names, p.values[k.key], help);
            if (k.kind == cli::Kind::Boolean) o->expected(0, 1)->default_str("true");
            p.options.emplace_back(k.key, o);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (auto& [name, p] : subs) {
        if (!p.app->parsed()) continue;
        try {
            cli::RunConfig cfg(name);
            if (!p.paper_defaults)
                for (const auto& path : p.config_paths) cli::load_file(cfg, path);
            for (const auto& [key, opt] : p.options)
                if (opt->count() > 0) cfg.set(key, p.values[key]);
            const auto report = cli::run_command(cfg, {RAMSEY_LAB_SOURCE_DIR});
            std::cout << report["results"].dump(2) << "\n";
            for (const auto& f : report["files"]) std::cerr << "wrote " << (cfg.output_dir() / f.get<std::string>()).string() << "\n";
        } catch (const InvalidArgument& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        } catch (const NumericalError& e) {
            std::cerr << "numerical error: " << e.what() << "\n";
            return 3;
        } catch (const std::filesystem::filesystem_error& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }
    return 0;
}
