#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "homolab/error.hpp"
#include "homolab/experiment.hpp"
#include "homolab/field.hpp"
#include "homolab/green.hpp"
#include "homolab/io.hpp"
#include "homolab/operator.hpp"
#include "homolab/parallel.hpp"

namespace {

using namespace homolab;

// defaults shared by gen-field and the radial shortcut
struct FieldFlags {
    std::uint64_t seed = 1;
    int dim = 2;
    std::string topology = "free_space";
    long period = 0;
    std::string law = "uniform";
    double law_a = 0.0, law_b = 0.0, law_c = 0.0;
    double lambda = 1.0, Lambda = 2.0, alpha0 = 1.0, K0 = 16.0;
    double cross_margin = 0.2, rho = 0.25, cell_size = 0.5;
};

FieldSpec to_spec(const FieldFlags& f) {
    FieldSpec s;
    s.seed = f.seed;
    s.dimension = f.dim;
    s.topology = topology_from_label(f.topology);
    s.period = f.period;
    s.law = law_from_label(f.law);
    s.law_a = f.law_a;
    s.law_b = f.law_b;
    s.law_c = f.law_c;
    s.params.lambda = f.lambda;
    s.params.Lambda_ = f.Lambda;
    s.params.alpha0 = f.alpha0;
    s.params.K0 = f.K0;
    s.params.cross_margin = f.cross_margin;
    s.rho = f.rho;
    s.cell_size = f.cell_size;
    return s;
}

void add_field_flags(CLI::App* cmd, FieldFlags& f) {
    cmd->add_option("--seed", f.seed, "field seed");
    cmd->add_option("--dim", f.dim, "dimension (1 or 2)");
    cmd->add_option("--topology", f.topology, "free_space | torus");
    cmd->add_option("--period", f.period, "torus side in unit cells");
    cmd->add_option("--law", f.law,
                    "uniform | two_point | laminar | constant");
    cmd->add_option("--law-a", f.law_a, "law parameter a");
    cmd->add_option("--law-b", f.law_b, "law parameter b");
    cmd->add_option("--law-c", f.law_c, "law parameter c");
    cmd->add_option("--lambda", f.lambda, "lower eigenvalue bound");
    cmd->add_option("--Lambda", f.Lambda, "upper eigenvalue bound");
    cmd->add_option("--alpha0", f.alpha0, "smoothness exponent");
    cmd->add_option("--K0", f.K0, "smoothness budget");
    cmd->add_option("--rho", f.rho, "blend transition width");
    cmd->add_option("--cell-size", f.cell_size, "iid draw spacing");
}

}  // namespace

int main(int argc, char** argv) {
    apply_worker_cap();

    ExperimentConfig cfg;
    // pre-scan so explicit flags can override file values afterwards
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string a = argv[i];
            std::string v;
            if (a == "--config" && i + 1 < argc)
                v = argv[i + 1];
            else if (a.rfind("--config=", 0) == 0)
                v = a.substr(9);
            if (!v.empty()) {
                cfg = config_from_json(read_text(v));
                break;
            }
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    }

    CLI::App app{"nondivergence-form homogenization laboratory"};
    // --h is the mesh-size flag on several subcommands, so help keeps only
    // its long spelling everywhere
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);
    auto add_sub = [&](const char* name, const char* desc) {
        CLI::App* c = app.add_subcommand(name, desc);
        c->set_help_flag("--help", "print help");
        return c;
    };
    std::string config_path;  // consumed by the pre-scan

    // gen-field
    auto* gen = add_sub("gen-field", "write a field descriptor");
    FieldFlags gen_flags;
    std::string gen_out;
    add_field_flags(gen, gen_flags);
    gen->add_option("--out", gen_out, "descriptor path")->required();

    // solve
    auto* slv = add_sub(
        "solve", "Cauchy-Dirichlet run with Gaussian initial data");
    std::string slv_field, slv_grid = "torus", slv_scheme = "explicit";
    std::string slv_out = "out";
    double slv_h = 0.25, slv_dt = 0.0, slv_tfinal = 1.0, slv_R = 1.0;
    std::vector<double> slv_times, slv_lo{-1.0, -1.0}, slv_hi{1.0, 1.0},
        slv_center{0.0, 0.0};
    slv->add_option("--field", slv_field, "field descriptor")->required();
    slv->add_option("--grid", slv_grid, "torus | box");
    slv->add_option("--h", slv_h, "mesh size");
    slv->add_option("--lo", slv_lo, "box lower corner")->expected(2);
    slv->add_option("--hi", slv_hi, "box upper corner")->expected(2);
    slv->add_option("--scheme", slv_scheme, "explicit | implicit");
    slv->add_option("--t-final", slv_tfinal, "final time");
    slv->add_option("--snapshot-times", slv_times, "recorded times");
    slv->add_option("--dt", slv_dt, "time step (0 = CFL default)");
    slv->add_option("--center", slv_center, "initial bump center")
        ->expected(2);
    slv->add_option("--R", slv_R, "initial bump scale");
    slv->add_option("--out-dir", slv_out, "output directory");

    // experiment kinds share the config + field-descriptor plumbing
    struct ExpFlags {
        CLI::App* cmd = nullptr;
        std::string field_path;
        std::vector<double> source;
        CLI::Option *o_field = nullptr, *o_source = nullptr;
    };
    auto add_exp = [&](const char* name, const char* desc) {
        ExpFlags ef;
        ef.cmd = add_sub(name, desc);
        ef.cmd->add_option("--config", config_path, "config JSON file");
        ef.o_field =
            ef.cmd->add_option("--field", ef.field_path, "field descriptor");
        ef.o_source = ef.cmd->add_option("--source", ef.source,
                                         "source / data center")
                          ->expected(2);
        ef.cmd->add_option("--h", cfg.h, "mesh size");
        ef.cmd->add_option("--dt", cfg.dt, "time step (0 = CFL default)");
        ef.cmd->add_option("--seeds", cfg.seeds, "seed ladder");
        ef.cmd->add_option("--out-dir", cfg.out_dir, "output directory");
        return ef;
    };

    ExpFlags green = add_exp("green", "parabolic kernel snapshots and mass");
    green.cmd->add_option("--times", cfg.times, "snapshot times");
    green.cmd->add_option("--rtol", cfg.rtol, "mass convergence tolerance");
    green.cmd->add_option("--t0", cfg.t0, "envelope fit window start");

    ExpFlags invm = add_exp("invariant-measure", "stationary density m");
    invm.cmd->add_option("--method", cfg.method,
                         "green | adjoint | both | radial");
    bool radial_flag = false;
    invm.cmd->add_flag("--radial", radial_flag, "radial annulus check");
    invm.cmd->add_option("--rtol", cfg.rtol, "mass convergence tolerance");
    double invm_lambda = 1.0, invm_Lambda = 2.0;
    auto* o_il = invm.cmd->add_option("--lambda", invm_lambda,
                                      "radial lower eigenvalue");
    auto* o_iL = invm.cmd->add_option("--Lambda", invm_Lambda,
                                      "radial upper eigenvalue");

    ExpFlags hom = add_exp("homogenize", "effective coefficient estimate");
    hom.cmd->add_option("--method", cfg.method,
                        "delta-corrector | measure-average");
    hom.cmd->add_option("--ladder", cfg.ladder, "delta or cube-side ladder");

    ExpFlags clt = add_exp("clt", "local CLT rate experiment");
    clt.cmd->add_option("--R", cfg.R, "initial data scale");
    clt.cmd->add_option("--M", cfg.M, "initial data amplitude");
    clt.cmd->add_option("--times", cfg.times, "dyadic time ladder");
    clt.cmd->add_option("--alpha", cfg.alpha, "flatness exponent");
    clt.cmd->add_option("--eps-ladder", cfg.ladder, "flatness eps ladder");

    ExpFlags cde = add_exp("cd-error", "homogenization error rate");
    cde.cmd->add_option("--ladder", cfg.ladder, "eps ladder");

    ExpFlags sde = add_exp("sde", "environmental-process ergodicity");
    sde.cmd->add_option("--paths", cfg.paths, "ensemble size");
    sde.cmd->add_option("--T-ladder", cfg.ladder, "horizon ladder");
    sde.cmd->add_option("--eta-grid", cfg.eta_grid, "deviation grid");
    sde.cmd->add_option("--xi", cfg.xi, "concentration exponent");

    auto* rep = add_sub("report", "aggregate manifests");
    rep->add_option("--config", config_path, "config JSON file");
    rep->add_option("inputs", cfg.inputs, "manifest files");
    rep->add_option("--out-dir", cfg.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const FieldSpec spec = to_spec(gen_flags);
            CoefficientField probe(spec);  // validates before anything persists
            write_field_descriptor(gen_out, spec);
            std::printf("wrote %s (hash %llx)\n", gen_out.c_str(),
                        static_cast<unsigned long long>(
                            field_descriptor_hash(spec)));
            return 0;
        }
        if (slv->parsed()) {
            const FieldSpec spec = read_field_descriptor(slv_field);
            CoefficientField field(spec);
            Grid g;
            if (slv_grid == "torus") {
                const long npu = std::lround(1.0 / slv_h);
                if (npu < 1 || std::fabs(npu * slv_h - 1.0) > 1e-9)
                    throw ValidationError("mesh size must divide the unit cell");
                g = Grid::torus_grid(spec.dimension, spec.period, npu);
            } else if (slv_grid == "box") {
                g = Grid::box(spec.dimension, {slv_lo[0], slv_lo[1]},
                              {slv_hi[0], slv_hi[1]}, slv_h);
            } else {
                throw ValidationError("grid must be torus or box");
            }
            const GridOperator op = assemble_generator(field, g);
            GridFunction u0(g, 0.0);
            for (long j = 0; j < (g.dim == 2 ? g.n[1] : 1); ++j)
                for (long i = 0; i < g.n[0]; ++i) {
                    double dx = g.x(i) - slv_center[0];
                    double dy = g.dim == 2 ? g.y(j) - slv_center[1] : 0.0;
                    if (g.torus) {
                        dx = std::remainder(dx, g.period);
                        dy = g.dim == 2 ? std::remainder(dy, g.period) : 0.0;
                    }
                    u0.at(i, j) =
                        std::exp(-(dx * dx + dy * dy) / (slv_R * slv_R));
                }
            if (slv_times.empty()) slv_times = {slv_tfinal};
            const Scheme sch = slv_scheme == "implicit" ? Scheme::implicit_euler
                             : slv_scheme == "explicit"
                                 ? Scheme::explicit_euler
                                 : throw ValidationError(
                                       "scheme must be explicit or implicit");
            const auto run =
                solve_cauchy_dirichlet(op, u0, BoundaryFn{}, slv_times, sch,
                                       slv_dt);
            std::error_code ec;
            std::filesystem::create_directories(slv_out, ec);
            if (ec)
                throw IoError("cannot create '" + slv_out + "': " +
                              ec.message());
            const std::uint64_t fh = field_descriptor_hash(spec);
            const double hd = g.dim == 2 ? g.h * g.h : g.h;
            std::vector<std::vector<double>> rows;
            for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
                const auto& [t, u] = run.snapshots[k];
                write_grid_function(
                    slv_out + "/snapshot_" + std::to_string(k) + ".bin", u, t,
                    fh);
                rows.push_back({t, hd * pairwise_sum(u.v)});
            }
            write_csv(slv_out + "/mass.csv", {"t", "mass"}, rows);
            std::printf("wrote %zu snapshots to %s (dt %.17g, %ld steps)\n",
                        run.snapshots.size(), slv_out.c_str(), run.dt,
                        run.steps);
            return 0;
        }

        // experiment kinds
        for (ExpFlags* ef :
             {&green, &invm, &hom, &clt, &cde, &sde}) {
            if (!ef->cmd->parsed()) continue;
            cfg.kind = ef->cmd->get_name();
            if (ef->o_field->count() > 0)
                cfg.field = read_field_descriptor(ef->field_path);
            if (ef->o_source->count() > 0)
                cfg.source = {ef->source[0], ef->source[1]};
            if (ef->cmd == invm.cmd) {
                if (radial_flag) cfg.method = "radial";
                if (o_il->count() > 0) cfg.field.params.lambda = invm_lambda;
                if (o_iL->count() > 0) cfg.field.params.Lambda_ = invm_Lambda;
            }
            const Manifest man = run_experiment(cfg);
            std::printf("%s: %zu files, %.3f s -> %s/manifest.json\n",
                        man.kind.c_str(), man.files.size(), man.wall_time_s,
                        man.out_dir.c_str());
            return 0;
        }
        if (rep->parsed()) {
            cfg.kind = "report";
            const Manifest man = run_experiment(cfg);
            std::printf("report: %zu files -> %s/manifest.json\n",
                        man.files.size(), man.out_dir.c_str());
            return 0;
        }
        return 0;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
