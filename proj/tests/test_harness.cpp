#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "homolab/experiment.hpp"
#include "homolab/io.hpp"
#include "homolab/rate.hpp"
#include "oracles.hpp"

using namespace homolab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "homolab_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const char* bin = std::getenv("HOMOLAB_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd =
        std::string(bin) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    REQUIRE(st != -1);
    return WEXITSTATUS(st);
}

ExperimentConfig small_green_config(const fs::path& dir) {
    ExperimentConfig cfg;
    cfg.kind = "green";
    cfg.field.seed = 5;
    cfg.field.dimension = 2;
    cfg.field.topology = Topology::torus;
    cfg.field.period = 9;
    cfg.h = 0.5;
    cfg.rtol = 1e-3;
    cfg.times = {1.0, 2.0, 4.0, 8.0};
    cfg.source = {4.5, 4.5};
    cfg.out_dir = dir.string();
    return cfg;
}

}  // namespace

TEST_CASE("rate fit recovers exact power laws") {
    RateTable t = fit_rate({1.0, 2.0, 4.0, 8.0},
                           {1.0, 0.5, 0.25, 0.125}, 0, 4);
    CHECK(t.exponent == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.r2 == doctest::Approx(1.0));
    RateTable c = fit_rate({1.0, 2.0, 4.0}, {0.7, 0.7, 0.7}, 0, 3);
    CHECK(c.exponent == doctest::Approx(0.0));
    CHECK(c.r2 == doctest::Approx(1.0));
    CHECK_THROWS_AS(fit_rate({1.0, 2.0}, {1.0, 1.0}, 0, 2), ValidationError);
    CHECK_THROWS_AS(fit_rate({2.0, 1.0, 4.0}, {1.0, 1.0, 1.0}, 0, 3),
                    ValidationError);
    CHECK_THROWS_AS(fit_rate({1.0, 2.0, 4.0}, {1.0, 0.0, 1.0}, 0, 3),
                    ValidationError);
    RateTable tail = fit_rate_tail({1.0, 2.0, 4.0, 8.0, 16.0, 32.0},
                                   {9.0, 5.0, 1.0, 0.5, 0.25, 0.125});
    CHECK(tail.window_begin == 3);
    CHECK(tail.exponent == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("experiment config round-trips through canonical json") {
    ExperimentConfig cfg;
    cfg.kind = "clt";
    cfg.field.seed = 42;
    cfg.field.topology = Topology::torus;
    cfg.field.period = 27;
    cfg.field.law = FieldLaw::laminar;
    cfg.field.law_a = 1.0;
    cfg.field.law_b = 2.0;
    cfg.h = 0.125;
    cfg.times = {1.0, 2.0, 4.0};
    cfg.seeds = {1, 2, 3};
    cfg.out_dir = "somewhere";
    const std::string j1 = config_to_json(cfg);
    ExperimentConfig back = config_from_json(j1);
    const std::string j2 = config_to_json(back);
    CHECK(j1 == j2);
    CHECK(back.kind == "clt");
    CHECK(back.field.period == 27);
    CHECK(back.seeds.size() == 3);
    CHECK(config_hash(cfg) == config_hash(back));
    back.h = 0.25;
    CHECK(config_hash(cfg) != config_hash(back));
}

TEST_CASE("config parsing lists every offending key") {
    ExperimentConfig good;
    good.kind = "green";
    good.times = {1.0};
    std::string base = config_to_json(good);
    // inject two unknown keys
    std::string text = base;
    text.insert(text.rfind('}'), ",\"bogus_knob\":1,\"typo_field\":2");
    try {
        config_from_json(text);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bogus_knob") != std::string::npos);
        CHECK(msg.find("typo_field") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json("{\"kind\":\"nope\"}"), ValidationError);
    CHECK_THROWS_AS(config_from_json("not json at all"), ValidationError);
}

TEST_CASE("field descriptor binary round-trip preserves every field") {
    fs::path dir = fresh_dir("descriptor");
    FieldSpec s;
    s.seed = 77;
    s.dimension = 2;
    s.topology = Topology::torus;
    s.period = 27;
    s.params.lambda = 1.25;
    s.params.Lambda_ = 2.5;
    s.params.alpha0 = 0.75;
    s.params.K0 = 9.0;
    s.params.cross_margin = 0.3;
    s.rho = 0.2;
    s.law = FieldLaw::laminar;
    s.law_a = 1.0;
    s.law_b = 2.0;
    s.cell_size = 1.0;
    s.offset = {3, -4};
    const std::string p = (dir / "f.field").string();
    write_field_descriptor(p, s);
    CHECK(fs::exists(p + ".json"));
    FieldSpec r = read_field_descriptor(p);
    CHECK(r.seed == s.seed);
    CHECK(r.dimension == s.dimension);
    CHECK(r.topology == s.topology);
    CHECK(r.period == s.period);
    CHECK(r.params.lambda == s.params.lambda);
    CHECK(r.params.Lambda_ == s.params.Lambda_);
    CHECK(r.params.alpha0 == s.params.alpha0);
    CHECK(r.params.K0 == s.params.K0);
    CHECK(r.params.cross_margin == s.params.cross_margin);
    CHECK(r.rho == s.rho);
    CHECK(r.law == s.law);
    CHECK(r.law_a == s.law_a);
    CHECK(r.law_b == s.law_b);
    CHECK(r.cell_size == s.cell_size);
    CHECK(r.offset == s.offset);
    CHECK(field_descriptor_hash(r) == field_descriptor_hash(s));

    // truncation is an I/O error, not a crash
    std::string raw = read_text(p);
    write_text((dir / "cut.field").string(), raw.substr(0, 10));
    CHECK_THROWS_AS(read_field_descriptor((dir / "cut.field").string()),
                    IoError);
    CHECK_THROWS_AS(read_field_descriptor((dir / "missing.field").string()),
                    IoError);
}

TEST_CASE("grid functions round-trip bit-exactly with their sidecar") {
    fs::path dir = fresh_dir("gridfn");
    Grid g = Grid::torus_grid(2, 5, 2);
    GridFunction f(g);
    for (std::size_t k = 0; k < f.v.size(); ++k)
        f.v[k] = 1.0 / 3.0 + static_cast<double>(k) * 1e-7;
    const std::string p = (dir / "m.bin").string();
    write_grid_function(p, f, 2.5, 0xabcdef);
    StoredGridFunction r = read_grid_function(p);
    CHECK(r.f.v == f.v);
    CHECK(r.time == 2.5);
    CHECK(r.field_hash == 0xabcdef);
    CHECK(same_layout(r.f.grid, g));
}

TEST_CASE("csv output carries 17 significant digits") {
    fs::path dir = fresh_dir("csv");
    const std::string p = (dir / "t.csv").string();
    write_csv(p, {"a", "b"}, {{1.0 / 3.0, 2.0 / 7.0}});
    const std::string text = read_text(p);
    CHECK(text.find("a,b\n") == 0);
    const double back = std::strtod(text.c_str() + text.find('\n') + 1,
                                    nullptr);
    CHECK(back == 1.0 / 3.0);
    CHECK(format_g17(0.1) == "0.10000000000000001");
    CHECK_THROWS_AS(write_csv(p, {"a"}, {{1.0, 2.0}}), ValidationError);
}

TEST_CASE("green experiment writes a coherent manifest and reruns identically") {
    fs::path dir = fresh_dir("green_run");
    ExperimentConfig cfg = small_green_config(dir);
    Manifest m1 = run_experiment(cfg);
    CHECK(m1.kind == "green");
    CHECK(m1.code_version == kCodeVersion);
    CHECK(m1.config_hash == config_hash(cfg));
    CHECK(!m1.files.empty());
    for (const auto& f : m1.files)
        CHECK(fs::exists(dir / f.path));
    bool has_mass = false, has_envelope = false, has_config = false;
    for (const auto& f : m1.files) {
        has_mass |= f.path == "mass.csv";
        has_envelope |= f.path == "envelope.json";
        has_config |= f.path == "config.json";
    }
    CHECK(has_mass);
    CHECK(has_envelope);
    CHECK(has_config);

    Manifest m2 = run_experiment(cfg);
    REQUIRE(m1.files.size() == m2.files.size());
    for (std::size_t k = 0; k < m1.files.size(); ++k) {
        CHECK(m1.files[k].path == m2.files[k].path);
        CHECK(m1.files[k].hash == m2.files[k].hash);
        CHECK(m1.files[k].bytes == m2.files[k].bytes);
    }

    Manifest r = read_manifest((dir / "manifest.json").string());
    CHECK(r.kind == m2.kind);
    CHECK(r.config_hash == m2.config_hash);
    CHECK(r.files.size() == m2.files.size());
    CHECK_THROWS_AS(read_manifest((dir / "nope.json").string()), IoError);
}

TEST_CASE("a seed ladder fans out into tagged per-seed outputs") {
    fs::path dir = fresh_dir("seed_ladder");
    ExperimentConfig cfg = small_green_config(dir);
    cfg.times = {1.0, 2.0};
    cfg.seeds = {11, 12};
    Manifest m = run_experiment(cfg);
    bool s11 = false, s12 = false;
    for (const auto& f : m.files) {
        s11 |= f.path.rfind("s11_", 0) == 0;
        s12 |= f.path.rfind("s12_", 0) == 0;
    }
    CHECK(s11);
    CHECK(s12);
}

TEST_CASE("invalid configs are rejected before any output is written") {
    fs::path dir = fresh_dir("invalid_cfg");
    ExperimentConfig cfg = small_green_config(dir / "sub");
    cfg.h = 0.3;  // does not divide the unit cell
    CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
    cfg = small_green_config(dir / "sub2");
    cfg.kind = "unheard-of";
    CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
    CHECK(!fs::exists(dir / "sub2" / "manifest.json"));
}

TEST_CASE("report aggregation tolerates missing inputs and copies data") {
    fs::path gdir = fresh_dir("report_green");
    ExperimentConfig cfg = small_green_config(gdir);
    run_experiment(cfg);

    fs::path rdir = fresh_dir("report_out");
    emit_report({(gdir / "manifest.json").string(),
                 (rdir / "not_there.json").string()},
                rdir.string());
    CHECK(fs::exists(rdir / "report.json"));
    const std::string rep = read_text((rdir / "report.json").string());
    CHECK(rep.find("not_there.json") != std::string::npos);
    // the green section carries the copied mass table and a plot script
    bool copied_csv = false, plot_script = false;
    for (const auto& e : fs::directory_iterator(rdir)) {
        const std::string name = e.path().filename().string();
        if (name.find("mass.csv") != std::string::npos) copied_csv = true;
        if (name.rfind("plots_", 0) == 0 && name.find(".gp") != std::string::npos)
            plot_script = true;
    }
    CHECK(copied_csv);
    CHECK(plot_script);

    fs::path empty_dir = fresh_dir("report_empty");
    emit_report({}, empty_dir.string());
    CHECK(fs::exists(empty_dir / "report.json"));
}

TEST_CASE("cli round trip: generate, run, and exit codes") {
    fs::path dir = fresh_dir("cli");
    const std::string field_path = (dir / "med.field").string();
    CHECK(run_cli("gen-field --seed 3 --topology torus --period 9 --out " +
                  field_path) == 0);
    CHECK(fs::exists(field_path));
    FieldSpec s = read_field_descriptor(field_path);
    CHECK(s.seed == 3);
    CHECK(s.topology == Topology::torus);

    // validation failures exit 2
    CHECK(run_cli("gen-field --seed 1 --topology torus --period 1 --out " +
                  (dir / "bad.field").string()) == 2);
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
    CHECK(run_cli("green --field " + field_path +
                  " --h 0.3 --times 1 2 --out-dir " +
                  (dir / "g_bad").string()) == 2);

    // missing inputs exit 4
    CHECK(run_cli("green --field " + (dir / "absent.field").string() +
                  " --times 1 2 --out-dir " + (dir / "g_io").string()) == 4);

    // a real run exits 0 and leaves a manifest
    CHECK(run_cli("green --field " + field_path +
                  " --h 0.5 --times 1 2 --rtol 1e-3 --source 4.5 4.5"
                  " --out-dir " +
                  (dir / "g_ok").string()) == 0);
    CHECK(fs::exists(dir / "g_ok" / "manifest.json"));
    Manifest m = read_manifest((dir / "g_ok" / "manifest.json").string());
    CHECK(m.kind == "green");

    // report over the run
    CHECK(run_cli("report " + (dir / "g_ok" / "manifest.json").string() +
                  " --out-dir " + (dir / "rep").string()) == 0);
    CHECK(fs::exists(dir / "rep" / "report.json"));

    // the solve subcommand writes snapshots
    CHECK(run_cli("solve --field " + field_path +
                  " --grid torus --h 0.5 --snapshot-times 0.5 1"
                  " --center 4.5 4.5 --out-dir " +
                  (dir / "slv").string()) == 0);
    CHECK(fs::exists(dir / "slv" / "snapshot_0.bin"));
    CHECK(fs::exists(dir / "slv" / "mass.csv"));
}
