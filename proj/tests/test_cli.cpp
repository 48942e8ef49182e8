#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "ramsey/cli/commands.hpp"

using namespace ramsey;
using namespace ramsey::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ramsey_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

// Small settings so every subcommand finishes in well under a second.
RunConfig quick(const std::string& command, const fs::path& dir)
{
    RunConfig c(command);
    c.set("run.output_dir", dir.string());
    c.set("run.formats", "csv,json,svg,pgm");
    if (command == "gpe-visibility") {
        c.set("gpe.n_rho", "16");
        c.set("gpe.n_z", "32");
        c.set("gpe.t_list", "0,0.001");
        c.set("gpe.phase_samples", "8");
        c.set("gpe.snapshot_times", "0.0005");
    }
    if (command == "imaging-sim") c.set("imaging.runs", "20");
    if (command == "imaging-optimize") {
        c.set("search.intensity", "1,15");
        c.set("search.magnification", "2,8");
        c.set("search.exposure_us", "100");
    }
    if (command == "noise-budget") c.set("budget.sweep", "true");
    if (command == "fit") c.set("fit.bootstrap", "50");
    return c;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_binary(const std::string& args)
{
    const std::string cmd = std::string(RAMSEY_LAB_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* const all_commands[] = {"noise-budget", "gpe-visibility", "imaging-sim", "imaging-optimize",
                                    "squeeze-sensitivity", "two-mode", "fit", "synth-data"};

} // namespace

TEST(Schema, DefaultsParseForEveryCommand)
{
    for (const char* cmd : all_commands) {
        RunConfig c(cmd);
        for (const auto& [k, v] : c.values()) EXPECT_NO_THROW(c.set(k, v)) << cmd << " " << k;
    }
    for (const auto& k : schema()) EXPECT_EQ(find_key(k.key), &k);
    EXPECT_THROW(RunConfig("bogus"), InvalidArgument);
}

TEST(RunConfig, TypedAccess)
{
    RunConfig c("gpe-visibility");
    c.set("gpe.t_list", " 0.01, 0.02 ,");
    EXPECT_EQ(c.list("gpe.t_list"), (std::vector<double>{0.01, 0.02}));
    c.set("gpe.echo", "on");
    EXPECT_TRUE(c.boolean("gpe.echo"));
    c.set("gpe.n_rho", "64");
    EXPECT_EQ(c.integer("gpe.n_rho"), 64);
    c.set("atoms.N", "2.5e5");
    EXPECT_EQ(c.number("atoms.N"), 2.5e5);
}

TEST(RunConfig, RejectsBadValuesAndUnknownKeys)
{
    RunConfig c("gpe-visibility");
    EXPECT_THROW(c.set("gpe.n_rho", "1.5"), InvalidArgument);
    EXPECT_THROW(c.set("gpe.echo", "maybe"), InvalidArgument);
    EXPECT_THROW(c.set("atoms.N", "1e6x"), InvalidArgument);
    EXPECT_THROW(c.set("atoms.N", "inf"), InvalidArgument);
    EXPECT_THROW(c.set("gpe.t_list", "0.01,abc"), InvalidArgument);
    EXPECT_THROW(c.set("gpe.nrho", "64"), InvalidArgument);
    // a valid key of another subcommand is ignored
    EXPECT_NO_THROW(c.set("imaging.runs", "not even a number"));
    EXPECT_THROW(c.raw("imaging.runs"), InvalidArgument);
}

TEST(RunConfig, RunnerValidation)
{
    const auto dir = scratch("validation");
    auto c = quick("noise-budget", dir);
    c.set("atoms.N", "-5");
    EXPECT_THROW(run_command(c), InvalidArgument);
    auto f = quick("fit", dir);
    f.set("fit.model", "cubic");
    EXPECT_THROW(run_command(f), InvalidArgument);
    auto g = quick("fit", dir);
    g.set("fit.data", (dir / "missing.csv").string());
    EXPECT_THROW(run_command(g), InvalidArgument);
    auto e = quick("two-mode", dir);
    e.set("run.experiment", "a/b");
    EXPECT_THROW(run_command(e), InvalidArgument);
}

TEST(RunConfig, OutputDirectoryFallsBackToEnvironment)
{
    RunConfig c("two-mode");
    ::setenv("RAMSEY_LAB_OUTPUT", "/tmp/somewhere", 1);
    EXPECT_EQ(c.output_dir(), fs::path("/tmp/somewhere"));
    ::unsetenv("RAMSEY_LAB_OUTPUT");
    EXPECT_EQ(c.output_dir(), fs::path("."));
    c.set("run.output_dir", "out");
    EXPECT_EQ(c.output_dir(), fs::path("out"));
}

TEST(ConfigFile, IniSectionsApply)
{
    const auto dir = scratch("ini");
    write(dir / "a.ini", "; comment\n[atoms]\nN = 5e5\n\n[imaging]\nruns = 7\n[gpe]\nn_rho = 32\n");
    RunConfig c("imaging-sim");
    load_file(c, dir / "a.ini");
    EXPECT_EQ(c.number("atoms.N"), 5e5);
    EXPECT_EQ(c.integer("imaging.runs"), 7);

    write(dir / "b.ini", "[atoms]\nNN = 5\n");
    EXPECT_THROW(load_file(c, dir / "b.ini"), InvalidArgument);
    write(dir / "c.ini", "N = 5\n");
    EXPECT_THROW(load_file(c, dir / "c.ini"), InvalidArgument);
    write(dir / "d.ini", "[atoms\nN = 5\n");
    EXPECT_THROW(load_file(c, dir / "d.ini"), InvalidArgument);
    EXPECT_THROW(load_file(c, dir / "none.ini"), InvalidArgument);
}

TEST(ConfigFile, JsonReportRoundTrip)
{
    const auto dir = scratch("roundtrip");
    auto c = quick("squeeze-sensitivity", dir);
    c.set("atoms.N", "3e5");
    c.set("squeezing.prep_time", "0.01");
    const auto first = run_command(c);

    RunConfig again("squeeze-sensitivity");
    load_file(again, dir / "ramsey.squeeze-sensitivity.json");
    EXPECT_EQ(again.values(), c.values());
    EXPECT_EQ(run_command(again)["results"], first["results"]);

    write(dir / "bad.json", "{\"config\": {\"atoms.N\": ");
    EXPECT_THROW(load_file(again, dir / "bad.json"), InvalidArgument);
}

TEST(ConfigFile, BundledConfigsLoad)
{
    RunConfig preset("two-mode");
    load_file(preset, fs::path(RAMSEY_LAB_SOURCE_DIR) / "configs/rb87.ini");
    EXPECT_EQ(preset.values(), RunConfig("two-mode").values());
    for (const char* cmd : all_commands)
        for (const auto& e : fs::directory_iterator(fs::path(RAMSEY_LAB_SOURCE_DIR) / "configs")) {
            RunConfig c(cmd);
            EXPECT_NO_THROW(load_file(c, e.path())) << cmd << " " << e.path();
        }
}

TEST(ConfigFile, LaterFilesWin)
{
    const auto dir = scratch("layers");
    const auto out = " --out " + dir.string() + " --formats json";
    write(dir / "a.ini", "[atoms]\nN = 2e5\n[twomode]\nloss_k2 = 0.4\n");
    write(dir / "b.ini", "[atoms]\nN = 3e5\n");
    ASSERT_EQ(run_binary("two-mode -c " + (dir / "a.ini").string() + " -c " + (dir / "b.ini").string() + out), 0);
    std::ifstream in(dir / "ramsey.two-mode.json");
    const auto j = Json::parse(in);
    EXPECT_EQ(j["config"]["atoms.N"], "3e5");
    EXPECT_EQ(j["config"]["twomode.loss_k2"], "0.4");
}

TEST(Commands, SpeciesAndChiScale)
{
    const auto dir = scratch("species");
    auto a = quick("squeeze-sensitivity", dir);
    auto b = quick("squeeze-sensitivity", dir);
    b.set("squeezing.chi_scale", "2");
    const double chi = run_command(a)["results"]["chi_rad_per_s"].get<double>();
    EXPECT_DOUBLE_EQ(run_command(b)["results"]["chi_rad_per_s"].get<double>(), 2 * chi);

    auto heavy = quick("two-mode", dir);
    heavy.set("species.mass_amu", "133.905");
    auto light = quick("two-mode", dir);
    EXPECT_NE(run_command(heavy)["results"], run_command(light)["results"]);
    heavy.set("species.mass_amu", "-1");
    EXPECT_THROW(run_command(heavy), InvalidArgument);
}

TEST(Reproducibility, EveryCommandIsByteIdentical)
{
    const auto data = scratch("data");
    run_command(quick("synth-data", data));
    for (const char* cmd : all_commands) {
        const auto dir = scratch(std::string("repro_") + cmd);
        auto c = quick(cmd, dir);
        if (std::string(cmd) == "fit") c.set("fit.data", (data / "ramsey.synth-data.csv").string());
        const auto r1 = run_command(c);
        const auto a = snapshot(dir);
        const auto r2 = run_command(c);
        const auto b = snapshot(dir);
        EXPECT_FALSE(a.empty()) << cmd;
        EXPECT_EQ(a, b) << cmd;
        EXPECT_EQ(r1.dump(), r2.dump()) << cmd;
        for (const auto& f : r1["files"]) EXPECT_TRUE(a.count(f.get<std::string>())) << cmd << " " << f;
    }
}

TEST(Reproducibility, SeedChangesSampledOutput)
{
    const auto d1 = scratch("seed1"), d2 = scratch("seed2");
    auto a = quick("imaging-sim", d1);
    auto b = quick("imaging-sim", d2);
    b.set("run.seed", "43");
    EXPECT_NE(run_command(a)["results"]["monte_carlo"], run_command(b)["results"]["monte_carlo"]);
}

TEST(Outputs, FormatsSelectFiles)
{
    const auto dir = scratch("formats");
    auto c = quick("two-mode", dir);
    c.set("run.formats", "csv");
    const auto r = run_command(c);
    for (const auto& f : r["files"]) EXPECT_EQ(fs::path(f.get<std::string>()).extension(), ".csv");
    EXPECT_FALSE(fs::exists(dir / "ramsey.two-mode.json"));
}

TEST(Outputs, CsvRoundTrip)
{
    const auto dir = scratch("csv");
    Table t({"a", "b"});
    t.add({1.0, 0.1});
    t.add({-2.5e-9, 1.0 / 3});
    write_text(dir / "t.csv", t.csv());
    const auto [header, rows] = read_csv(dir / "t.csv");
    EXPECT_EQ(header, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], -2.5e-9);
    EXPECT_NEAR(rows[1][1], 1.0 / 3, 1e-12);
    EXPECT_THROW(t.add({1.0}), InvalidArgument);

    write(dir / "bad.csv", "a,b\n1,2\n3\n");
    EXPECT_THROW(read_csv(dir / "bad.csv"), InvalidArgument);
    write(dir / "text.csv", "a,b\n1,x\n");
    EXPECT_THROW(read_csv(dir / "text.csv"), InvalidArgument);
    EXPECT_EQ(fmt(NAN), "nan");
    EXPECT_TRUE(num(INFINITY).is_null());
}

TEST(Outputs, PgmHeader)
{
    const auto s = pgm({0, 1.6, 300, -4}, 2, 2);
    EXPECT_EQ(s, "P2\n2 2\n300\n0 2\n300 0\n");
}

TEST(Binary, ExitCodes)
{
    const auto dir = scratch("binary");
    const std::string out = " --out " + dir.string();
    EXPECT_EQ(run_binary("--help"), 0);
    EXPECT_EQ(run_binary("two-mode --paper-defaults" + out), 0);
    EXPECT_EQ(run_binary(""), 2);
    EXPECT_EQ(run_binary("two-mode --no-such-flag 1" + out), 2);
    EXPECT_EQ(run_binary("two-mode --N -3" + out), 2);
    EXPECT_EQ(run_binary("fit --data " + (dir / "missing.csv").string() + out), 2);
    EXPECT_EQ(run_binary("two-mode -c " + (dir / "missing.ini").string() + out), 2);
    EXPECT_TRUE(fs::exists(dir / "ramsey.two-mode.json"));
}

TEST(Binary, BundledDatasetFits)
{
    const auto dir = scratch("bundled");
    EXPECT_EQ(run_binary("fit --out " + dir.string()), 0);
    std::ifstream in(dir / "ramsey.fit.json");
    const auto j = Json::parse(in);
    const auto& p = j["results"]["fit"]["parameters"];
    EXPECT_NEAR(p["tau"]["value"].get<double>(), 1.0, 3 * p["tau"]["error"].get<double>());
    EXPECT_NEAR(p["visibility0"]["value"].get<double>(), 0.9, 3 * p["visibility0"]["error"].get<double>());
}
