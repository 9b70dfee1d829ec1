#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "homolab/field.hpp"

namespace homolab {

inline constexpr const char* kCodeVersion = "homolab 0.1.0";

// One experiment = one output directory. Unused knobs are ignored by the
// dispatched kind; the config round-trips losslessly through JSON.
struct ExperimentConfig {
    std::string kind;  // green | invariant-measure | homogenize | clt |
                       // cd-error | sde | report
    FieldSpec field;
    double h = 0.25;
    double dt = 0.0;     // 0 = CFL-limited default
    double rtol = 1e-4;  // green-route mass convergence
    std::string method = "delta-corrector";  // homogenize / measure method
    std::array<double, 2> source{0.0, 0.0};
    std::vector<double> times;     // green / clt snapshot times
    std::vector<double> ladder;    // deltas, eps, horizons, or cube sides
    std::vector<double> eta_grid;  // sde deviation grid
    double R = 1.0;                // clt data scale
    double M = 1.0;                // clt amplitude
    double alpha = 0.5;            // flatness exponent
    double t0 = 4.0;               // envelope fit window start
    long paths = 1000;             // sde ensemble size
    double xi = 0.5;               // concentration exponent
    std::vector<std::uint64_t> seeds;  // optional seed ladder
    std::vector<std::string> inputs;   // report: manifest paths
    std::string out_dir = "out";
};

std::string config_to_json(const ExperimentConfig& cfg);  // canonical form
ExperimentConfig config_from_json(const std::string& text);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct ManifestFile {
    std::string path;  // relative to out_dir
    std::uint64_t hash = 0;
    std::uint64_t bytes = 0;
};

struct Manifest {
    std::string kind;
    std::uint64_t config_hash = 0;
    std::string code_version;
    double wall_time_s = 0.0;
    std::string out_dir;
    std::vector<ManifestFile> files;
};

// dispatches on cfg.kind, writes every output plus out_dir/manifest.json;
// a seed ladder produces one tagged result set per seed
Manifest run_experiment(const ExperimentConfig& cfg);

Manifest read_manifest(const std::string& path);

// summary JSON keyed by result tag, copied CSVs, and one plot script per
// experiment; unreadable inputs are listed, the report stays valid
void emit_report(const std::vector<std::string>& manifest_paths,
                 const std::string& out_dir);

}  // namespace homolab
