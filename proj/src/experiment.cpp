#include "homolab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "homolab/adjoint.hpp"
#include "homolab/clt.hpp"
#include "homolab/error.hpp"
#include "homolab/green.hpp"
#include "homolab/homogenize.hpp"
#include "homolab/io.hpp"
#include "homolab/operator.hpp"
#include "homolab/rng.hpp"
#include "homolab/sde.hpp"

namespace homolab {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kKinds = {
    "green", "invariant-measure", "homogenize", "clt",
    "cd-error", "sde", "report"};

// writes into one directory and records (path, hash, bytes) for the manifest
class OutputSet {
  public:
    explicit OutputSet(std::string dir) : dir_(std::move(dir)) {}

    std::string full(const std::string& rel) const { return dir_ + "/" + rel; }

    void note(const std::string& rel) {
        const std::string content = read_text(full(rel));
        files_.push_back({rel, fnv1a(content), content.size()});
    }

    void text(const std::string& rel, const std::string& content) {
        write_text(full(rel), content);
        note(rel);
    }

    void csv(const std::string& rel, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& rows) {
        write_csv(full(rel), header, rows);
        note(rel);
    }

    void grid(const std::string& rel, const GridFunction& f, double t,
              std::uint64_t field_hash) {
        write_grid_function(full(rel), f, t, field_hash);
        note(rel);
        note(rel + ".json");
    }

    std::vector<ManifestFile> files() const {
        auto f = files_;
        std::sort(f.begin(), f.end(),
                  [](const ManifestFile& a, const ManifestFile& b) {
                      return a.path < b.path;
                  });
        return f;
    }

  private:
    std::string dir_;
    std::vector<ManifestFile> files_;
};

json field_to_json(const FieldSpec& s) {
    return json{{"seed", s.seed},
                {"dimension", s.dimension},
                {"topology", topology_label(s.topology)},
                {"period", s.period},
                {"params",
                 {{"lambda", s.params.lambda},
                  {"Lambda", s.params.Lambda_},
                  {"alpha0", s.params.alpha0},
                  {"K0", s.params.K0},
                  {"cross_margin", s.params.cross_margin}}},
                {"rho", s.rho},
                {"law", law_label(s.law)},
                {"law_a", s.law_a},
                {"law_b", s.law_b},
                {"law_c", s.law_c},
                {"cell_size", s.cell_size},
                {"offset", {s.offset[0], s.offset[1]}}};
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& scope,
                    std::vector<std::string>& bad) {
    for (const auto& item : j.items())
        if (std::find(allowed.begin(), allowed.end(), item.key()) ==
            allowed.end())
            bad.push_back(scope + item.key());
}

FieldSpec field_from_json(const json& j, std::vector<std::string>& bad) {
    FieldSpec s;
    reject_unknown(j,
                   {"seed", "dimension", "topology", "period", "params", "rho",
                    "law", "law_a", "law_b", "law_c", "cell_size", "offset"},
                   "field.", bad);
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dimension")) s.dimension = j["dimension"].get<int>();
    if (j.contains("topology"))
        s.topology = topology_from_label(j["topology"].get<std::string>());
    if (j.contains("period")) s.period = j["period"].get<long>();
    if (j.contains("params")) {
        const json& p = j["params"];
        reject_unknown(p, {"lambda", "Lambda", "alpha0", "K0", "cross_margin"},
                       "field.params.", bad);
        if (p.contains("lambda")) s.params.lambda = p["lambda"].get<double>();
        if (p.contains("Lambda")) s.params.Lambda_ = p["Lambda"].get<double>();
        if (p.contains("alpha0")) s.params.alpha0 = p["alpha0"].get<double>();
        if (p.contains("K0")) s.params.K0 = p["K0"].get<double>();
        if (p.contains("cross_margin"))
            s.params.cross_margin = p["cross_margin"].get<double>();
    }
    if (j.contains("rho")) s.rho = j["rho"].get<double>();
    if (j.contains("law")) s.law = law_from_label(j["law"].get<std::string>());
    if (j.contains("law_a")) s.law_a = j["law_a"].get<double>();
    if (j.contains("law_b")) s.law_b = j["law_b"].get<double>();
    if (j.contains("law_c")) s.law_c = j["law_c"].get<double>();
    if (j.contains("cell_size")) s.cell_size = j["cell_size"].get<double>();
    if (j.contains("offset")) {
        s.offset[0] = j["offset"].at(0).get<long>();
        s.offset[1] = j["offset"].at(1).get<long>();
    }
    return s;
}

void validate_config(const ExperimentConfig& c) {
    std::vector<std::string> bad;
    if (std::find(kKinds.begin(), kKinds.end(), c.kind) == kKinds.end())
        bad.push_back("kind");
    if (!(c.h > 0.0)) bad.push_back("h");
    if (c.dt < 0.0) bad.push_back("dt");
    if (!(c.rtol > 0.0)) bad.push_back("rtol");
    if (!(c.R >= 1.0)) bad.push_back("R");
    if (!(c.M > 0.0)) bad.push_back("M");
    if (!(c.alpha > 0.0 && c.alpha <= 1.0)) bad.push_back("alpha");
    if (!(c.t0 > 0.0)) bad.push_back("t0");
    if (c.paths < 1) bad.push_back("paths");
    if (!(c.xi > 0.0 && c.xi < 1.0)) bad.push_back("xi");
    if (c.out_dir.empty()) bad.push_back("out_dir");
    if (!bad.empty()) {
        std::string msg = "invalid config keys:";
        for (const auto& k : bad) msg += " " + k;
        throw ValidationError(msg);
    }
}

long nodes_per_unit(double h) {
    const long npu = std::lround(1.0 / h);
    if (npu < 1 || std::fabs(static_cast<double>(npu) * h - 1.0) > 1e-9)
        throw ValidationError("mesh size must divide the unit cell");
    return npu;
}

Grid make_domain(const ExperimentConfig& cfg, const CoefficientField& field) {
    if (field.spec().topology == Topology::torus)
        return Grid::torus_grid(field.dimension(), field.spec().period,
                                nodes_per_unit(cfg.h));
    const double T = cfg.times.empty() ? 1.0 : cfg.times.back();
    const double L =
        std::ceil(std::sqrt(4.0 * field.params().Lambda_ * T * 18.5)) + 1.0;
    return Grid::box(field.dimension(),
                     {cfg.source[0] - L, cfg.source[1] - L},
                     {cfg.source[0] + L, cfg.source[1] + L}, cfg.h);
}

void require_torus(const CoefficientField& field, const std::string& kind) {
    if (field.spec().topology != Topology::torus)
        throw ValidationError("experiment '" + kind + "' needs a torus field");
}

json mat_to_json(const Mat2& m) {
    return json{{"a11", m.a11}, {"a22", m.a22}, {"a12", m.a12}};
}

void run_green(const ExperimentConfig& cfg, const CoefficientField& field,
               const std::string& pre, OutputSet& out, json& summary) {
    if (cfg.times.empty())
        throw ValidationError("green experiment needs snapshot times");
    const Grid g = make_domain(cfg, field);
    const GridOperator op = assemble_generator(field, g);
    const auto snaps = green_evolve(op, cfg.source, cfg.times, cfg.dt);
    const std::uint64_t fh = field_descriptor_hash(field.spec());

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const double tail =
            k == 0 ? 0.0
                   : std::fabs(snaps[k].mass - snaps[k - 1].mass) /
                         std::max(std::fabs(snaps[k].mass), 1e-300);
        rows.push_back({snaps[k].t, snaps[k].mass, tail});
        std::ostringstream name;
        name << pre << "snapshot_" << k << ".bin";
        out.grid(name.str(), snaps[k].P, snaps[k].t, fh);
    }
    out.csv(pre + "mass.csv", {"t", "mass", "tail"}, rows);
    summary["mass_first"] = snaps.front().mass;
    summary["mass_last"] = snaps.back().mass;

    if (g.torus && snaps.back().t >= cfg.t0) {
        const auto mv = invariant_density_at(op, cfg.source, cfg.rtol);
        const auto env = nash_aronson_fit(snaps, mv.m_y, cfg.t0);
        json e{{"c", env.c},
               {"C", env.C},
               {"checked", env.checked},
               {"violations", env.violations},
               {"fit_t_min", env.fit_t_min},
               {"fit_t_max", env.fit_t_max},
               {"m_y", mv.m_y}};
        out.text(pre + "envelope.json", e.dump(2) + "\n");
        summary["envelope"] = e;
    }
}

void run_invariant_measure(const ExperimentConfig& cfg,
                           const CoefficientField& field,
                           const std::string& pre, OutputSet& out,
                           json& summary) {
    const std::string& m = cfg.method;
    if (m == "radial") {
        const auto rep = radial_example_check(field.params().lambda,
                                              field.params().Lambda_, 0.2, 0.8,
                                              cfg.h);
        json r{{"gamma", rep.gamma},
               {"h", rep.h},
               {"rel_linf", rep.rel_linf},
               {"unknowns", rep.unknowns},
               {"solver_iters", rep.solver_iters}};
        out.text(pre + "radial.json", r.dump(2) + "\n");
        summary["radial"] = r;
        return;
    }
    if (m != "adjoint" && m != "green" && m != "both")
        throw ValidationError(
            "invariant-measure method must be adjoint, green, both, or "
            "radial");
    require_torus(field, cfg.kind);
    const long period = field.spec().period;
    const long npu = nodes_per_unit(cfg.h);
    const std::uint64_t fh = field_descriptor_hash(field.spec());

    InvariantDensity inv;
    if (m == "adjoint" || m == "both") {
        inv = stationary_measure_torus(field, period, cfg.h);
        out.grid(pre + "m.bin", inv.m, 0.0, fh);
        summary["residual"] = inv.residual;
        summary["measure_method"] = inv.method;
    }
    if (m == "green" || m == "both") {
        const Grid g = Grid::torus_grid(field.dimension(), period, npu);
        const GridOperator op = assemble_generator(field, g);
        constexpr int kProbes = 20;
        std::vector<std::vector<double>> rows;
        double max_rel = 0.0;
        for (int k = 0; k < kProbes; ++k) {
            const long i = static_cast<long>(
                u01(counter_hash(field.spec().seed, 0x6970u,
                                 static_cast<std::uint64_t>(k), 0)) *
                static_cast<double>(g.n[0]));
            const long j =
                field.dimension() == 2
                    ? static_cast<long>(u01(counter_hash(
                                            field.spec().seed, 0x6970u,
                                            static_cast<std::uint64_t>(k), 1)) *
                                        static_cast<double>(g.n[1]))
                    : 0;
            const auto mv =
                invariant_density_at(op, {g.x(i), g.y(j)}, cfg.rtol);
            std::vector<double> row{g.x(i), g.y(j), mv.m_y, mv.t_star};
            if (m == "both") {
                const double ma = inv.m.at(i, j);
                const double rel = std::fabs(mv.m_y - ma) /
                                   std::max(std::fabs(ma), 1e-300);
                row.push_back(ma);
                row.push_back(rel);
                max_rel = std::max(max_rel, rel);
            }
            rows.push_back(row);
        }
        if (m == "both") {
            out.csv(pre + "comparison.csv",
                    {"x", "y", "m_green", "t_star", "m_adjoint", "rel_diff"},
                    rows);
            summary["max_rel_diff"] = max_rel;
        } else {
            out.csv(pre + "m_green.csv", {"x", "y", "m_green", "t_star"},
                    rows);
        }
    }
}

void run_homogenize(const ExperimentConfig& cfg, const CoefficientField& field,
                    const std::string& pre, OutputSet& out, json& summary) {
    require_torus(field, cfg.kind);
    const Grid g = Grid::torus_grid(field.dimension(), field.spec().period,
                                    nodes_per_unit(cfg.h));
    const auto hm = estimate_abar(field, g, cfg.method, cfg.ladder);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < hm.ladder_scale.size(); ++k)
        rows.push_back({hm.ladder_scale[k], hm.ladder_abar[k].a11,
                        hm.ladder_abar[k].a22, hm.ladder_abar[k].a12});
    out.csv(pre + "ladder.csv", {"scale", "a11", "a22", "a12"}, rows);
    json r{{"abar", mat_to_json(hm.abar)},
           {"method", hm.method},
           {"spread", hm.spread},
           {"low_confidence", hm.low_confidence}};
    out.text(pre + "homogenize.json", r.dump(2) + "\n");
    summary["homogenize"] = r;
}

void run_cd_error(const ExperimentConfig& cfg, const CoefficientField& field,
                  const std::string& pre, OutputSet& out, json& summary) {
    require_torus(field, cfg.kind);
    const Grid g = Grid::torus_grid(field.dimension(), field.spec().period,
                                    nodes_per_unit(cfg.h));
    const auto hm = estimate_abar(field, g, "measure-average");
    const std::vector<double> eps =
        cfg.ladder.empty() ? std::vector<double>{1.0 / 3, 1.0 / 9, 1.0 / 27}
                           : cfg.ladder;
    const int d = field.dimension();
    BoundaryFn data = [d](double, double x, double y) {
        return d == 2 ? 0.5 * x * x + 0.3 * y * y + 0.2 * x * y + 0.1 * x
                      : 0.5 * x * x + 0.1 * x;
    };
    const auto rt = cd_error_experiment(field, data, hm.abar, eps);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < rt.scale.size(); ++k)
        rows.push_back({rt.scale[k], rt.value[k]});
    out.csv(pre + "cd_error.csv", {"inv_eps", "error"}, rows);
    json r{{"exponent", rt.exponent},
           {"r2", rt.r2},
           {"abar", mat_to_json(hm.abar)}};
    out.text(pre + "cd_error.json", r.dump(2) + "\n");
    summary["cd_error"] = r;
}

void run_clt(const ExperimentConfig& cfg, const CoefficientField& field,
             const std::string& pre, OutputSet& out, json& summary) {
    require_torus(field, cfg.kind);
    if (cfg.times.empty())
        throw ValidationError("clt experiment needs a dyadic time ladder");
    const long period = field.spec().period;
    const Grid g =
        Grid::torus_grid(field.dimension(), period, nodes_per_unit(cfg.h));
    const GridOperator op = assemble_generator(field, g);
    const auto hm = estimate_abar(field, g, "measure-average",
                                  {static_cast<double>(period)});
    CltConfig cc;
    cc.R = cfg.R;
    cc.M = cfg.M;
    cc.center = cfg.source;
    cc.times = cfg.times;
    const auto run = run_local_clt(op, hm.abar, cc);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < run.t.size(); ++k)
        rows.push_back({run.t[k], run.c_t[k], run.error[k]});
    out.csv(pre + "clt.csv", {"t", "c_t", "error"}, rows);
    json r{{"gamma_fit", run.gamma_fit},
           {"r2", run.r2},
           {"abar", mat_to_json(hm.abar)},
           {"c_last", run.c_t.back()}};

    if (!cfg.ladder.empty()) {
        const auto inv = stationary_measure_torus(field, period,
                                                  cfg.h);
        const Grid mg = inv.m.grid;
        auto f_eps = [&](double eps, double x, double y) {
            double u = std::fmod(x / eps, mg.period);
            if (u < 0) u += mg.period;
            double v = std::fmod(y / eps, mg.period);
            if (v < 0) v += mg.period;
            const long i = std::lround(u / mg.h) % mg.n[0];
            const long j = mg.dim == 2 ? std::lround(v / mg.h) % mg.n[1] : 0;
            return inv.m.at(i, j) - 1.0;
        };
        const auto ladder = weak_norm_decay(f_eps, 0.0, cfg.ladder, cfg.alpha,
                                            4, field.dimension());
        std::vector<std::vector<double>> frows;
        for (std::size_t k = 0; k < ladder.eps.size(); ++k)
            frows.push_back({1.0 / ladder.eps[k], ladder.value[k]});
        out.csv(pre + "flatness.csv", {"inv_eps", "flatness"}, frows);
        r["flatness_exponent"] = ladder.rate.exponent;
        r["flatness_r2"] = ladder.rate.r2;
    }
    out.text(pre + "clt.json", r.dump(2) + "\n");
    summary["clt"] = r;
}

void run_sde(const ExperimentConfig& cfg, const CoefficientField& field,
             const std::string& pre, OutputSet& out, json& summary) {
    require_torus(field, cfg.kind);
    const Grid g = Grid::torus_grid(field.dimension(), field.spec().period,
                                    nodes_per_unit(cfg.h));
    const auto hm = estimate_abar(field, g, "measure-average");
    const std::vector<double> T =
        cfg.ladder.empty() ? std::vector<double>{100.0, 400.0, 1600.0}
                           : cfg.ladder;
    const std::vector<double> eta =
        cfg.eta_grid.empty() ? std::vector<double>{0.02, 0.05, 0.1, 0.2}
                             : cfg.eta_grid;
    const double dt = cfg.dt > 0.0 ? cfg.dt : 0.01;
    const auto rep =
        ergodicity_experiment(field, cfg.paths, T, eta, hm.abar, dt, cfg.xi);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < rep.T.size(); ++i)
        for (std::size_t e = 0; e < rep.eta.size(); ++e)
            rows.push_back({rep.T[i], rep.eta[e], rep.tails[i][e]});
    out.csv(pre + "tails.csv", {"T", "eta", "tail"}, rows);

    std::vector<std::vector<double>> mrows;
    for (std::size_t i = 0; i < rep.T.size(); ++i)
        mrows.push_back({rep.T[i], rep.median_dev[i], rep.mean_endpoint[i][0],
                         rep.se_endpoint[i][0], rep.mean_endpoint[i][1],
                         rep.se_endpoint[i][1]});
    out.csv(pre + "medians.csv",
            {"T", "median_dev", "mean_x", "se_x", "mean_y", "se_y"}, mrows);

    json er{{"abar", mat_to_json(hm.abar)},
            {"xi", rep.xi},
            {"slope", rep.slope},
            {"intercept", rep.intercept},
            {"n_fit", rep.n_fit},
            {"n_paths", rep.n_paths},
            {"medians_decreasing", rep.medians_decreasing},
            {"tails_eta_monotone", rep.tails_eta_monotone},
            {"tails_T_monotone", rep.tails_T_monotone},
            {"low_n_paths", rep.low_n_paths}};
    out.text(pre + "ergodicity.json", er.dump(2) + "\n");
    summary["ergodicity"] = er;

    const auto ip =
        invariance_principle_check(field, cfg.paths, T.back(), hm.abar, dt);
    json cv{{"cov", mat_to_json(ip.cov)},
            {"target", mat_to_json(ip.target)},
            {"se", mat_to_json(ip.se)},
            {"z", mat_to_json(ip.z)},
            {"ks_stat", ip.ks_stat},
            {"T", ip.T},
            {"n_paths", ip.n_paths}};
    out.text(pre + "covariance.json", cv.dump(2) + "\n");
    summary["covariance"] = cv;
}

std::string run_tag(const ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.seeds.empty() ? std::string("run")
                             : "s" + std::to_string(seed);
}

// ---- report --------------------------------------------------------------

std::vector<std::string> tags_for(const Manifest& m) {
    auto has_file = [&](const std::string& suffix) {
        for (const auto& f : m.files)
            if (f.path.size() >= suffix.size() &&
                f.path.compare(f.path.size() - suffix.size(), suffix.size(),
                               suffix) == 0)
                return true;
        return false;
    };
    std::vector<std::string> tags;
    if (m.kind == "green") {
        tags.push_back("t.GF");
        if (has_file("envelope.json")) tags.push_back("c.NA");
    } else if (m.kind == "invariant-measure") {
        tags.push_back(has_file("radial.json") ? "appendix-radial" : "t.GF");
    } else if (m.kind == "homogenize" || m.kind == "cd-error") {
        tags.push_back("t.algrate");
    } else if (m.kind == "clt") {
        tags.push_back("t.realthm");
        if (has_file("flatness.csv")) tags.push_back("t.mto1");
    } else if (m.kind == "sde") {
        tags.push_back("t.environmental");
    }
    return tags;
}

std::string plot_block(const std::string& csv, const std::string& png,
                       const std::string& what, bool loglog) {
    std::ostringstream s;
    s << "set output '" << png << "'\n";
    if (loglog) s << "set logscale xy\n";
    s << "plot '" << csv << "' " << what << "\n";
    if (loglog) s << "unset logscale xy\n";
    return s.str();
}

std::string plot_script_for(const std::string& runname,
                            const std::vector<std::string>& copied) {
    std::ostringstream s;
    s << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set terminal pngcairo size 900,600\n";
    auto copied_has = [&](const std::string& suffix, std::string& name) {
        for (const auto& c : copied)
            if (c.size() >= suffix.size() &&
                c.compare(c.size() - suffix.size(), suffix.size(), suffix) ==
                    0) {
                name = c;
                return true;
            }
        return false;
    };
    std::string f;
    if (copied_has("mass.csv", f))
        s << plot_block(f, runname + "_mass.png", "using 1:2 with linespoints",
                        false);
    if (copied_has("clt.csv", f))
        s << plot_block(f, runname + "_clt.png", "using 1:3 with linespoints",
                        true);
    if (copied_has("flatness.csv", f))
        s << plot_block(f, runname + "_flatness.png",
                        "using 1:2 with linespoints", true);
    if (copied_has("cd_error.csv", f))
        s << plot_block(f, runname + "_cd_error.png",
                        "using 1:2 with linespoints", true);
    if (copied_has("ladder.csv", f))
        s << plot_block(f, runname + "_ladder.png",
                        "using 1:2 with linespoints title 'a11', '' using 1:3 "
                        "with linespoints title 'a22', '' using 1:4 with "
                        "linespoints title 'a12'",
                        false);
    if (copied_has("tails.csv", f))
        s << plot_block(f, runname + "_tails.png", "using 2:3 with points",
                        false);
    if (copied_has("medians.csv", f))
        s << plot_block(f, runname + "_medians.png",
                        "using 1:2 with linespoints", true);
    if (copied_has("comparison.csv", f))
        s << plot_block(f, runname + "_comparison.png",
                        "using 3:5 with points, x with lines title 'equal'",
                        false);
    return s.str();
}

std::vector<std::string> emit_report_impl(
    const std::vector<std::string>& manifest_paths,
    const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());

    std::vector<std::string> written;
    json rep;
    rep["sections"] = json::object();
    rep["missing"] = json::array();

    for (std::size_t k = 0; k < manifest_paths.size(); ++k) {
        const std::string& mp = manifest_paths[k];
        Manifest m;
        try {
            m = read_manifest(mp);
        } catch (const std::exception&) {
            rep["missing"].push_back(mp);
            continue;
        }
        const fs::path run_dir = fs::path(mp).parent_path();
        std::string runname = run_dir.filename().string();
        if (runname.empty()) runname = "run" + std::to_string(k);

        json entry{{"manifest", mp},
                   {"kind", m.kind},
                   {"out_dir", m.out_dir},
                   {"code_version", m.code_version},
                   {"wall_time_s", m.wall_time_s}};
        json files = json::array();
        std::vector<std::string> copied;
        for (const auto& mf : m.files) {
            files.push_back(mf.path);
            const fs::path src = run_dir / mf.path;
            if (!fs::exists(src)) {
                rep["missing"].push_back(src.string());
                continue;
            }
            if (mf.path == "summary.json") {
                try {
                    entry["summary"] = json::parse(read_text(src.string()));
                } catch (const std::exception&) {
                    rep["missing"].push_back(src.string());
                }
            }
            if (mf.path.size() > 4 &&
                mf.path.compare(mf.path.size() - 4, 4, ".csv") == 0) {
                const std::string dst = runname + "_" + mf.path;
                write_text(out_dir + "/" + dst, read_text(src.string()));
                written.push_back(dst);
                copied.push_back(dst);
            }
        }
        entry["files"] = files;
        const std::string script = plot_script_for(runname, copied);
        if (!script.empty()) {
            const std::string gp = "plots_" + runname + ".gp";
            write_text(out_dir + "/" + gp, script);
            written.push_back(gp);
        }
        for (const auto& tag : tags_for(m)) {
            if (!rep["sections"].contains(tag))
                rep["sections"][tag] = json::array();
            rep["sections"][tag].push_back(entry);
        }
    }
    write_text(out_dir + "/report.json", rep.dump(2) + "\n");
    written.push_back("report.json");
    return written;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
    json j{{"kind", c.kind},
           {"field", field_to_json(c.field)},
           {"h", c.h},
           {"dt", c.dt},
           {"rtol", c.rtol},
           {"method", c.method},
           {"source", {c.source[0], c.source[1]}},
           {"times", c.times},
           {"ladder", c.ladder},
           {"eta_grid", c.eta_grid},
           {"R", c.R},
           {"M", c.M},
           {"alpha", c.alpha},
           {"t0", c.t0},
           {"paths", c.paths},
           {"xi", c.xi},
           {"seeds", c.seeds},
           {"inputs", c.inputs},
           {"out_dir", c.out_dir}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") +
                              e.what());
    }
    std::vector<std::string> bad;
    reject_unknown(j,
                   {"kind", "field", "h", "dt", "rtol", "method", "source",
                    "times", "ladder", "eta_grid", "R", "M", "alpha", "t0",
                    "paths", "xi", "seeds", "inputs", "out_dir"},
                   "", bad);
    ExperimentConfig c;
    try {
        if (j.contains("kind")) c.kind = j["kind"].get<std::string>();
        if (j.contains("field")) c.field = field_from_json(j["field"], bad);
        if (j.contains("h")) c.h = j["h"].get<double>();
        if (j.contains("dt")) c.dt = j["dt"].get<double>();
        if (j.contains("rtol")) c.rtol = j["rtol"].get<double>();
        if (j.contains("method")) c.method = j["method"].get<std::string>();
        if (j.contains("source")) {
            c.source[0] = j["source"].at(0).get<double>();
            c.source[1] = j["source"].at(1).get<double>();
        }
        if (j.contains("times"))
            c.times = j["times"].get<std::vector<double>>();
        if (j.contains("ladder"))
            c.ladder = j["ladder"].get<std::vector<double>>();
        if (j.contains("eta_grid"))
            c.eta_grid = j["eta_grid"].get<std::vector<double>>();
        if (j.contains("R")) c.R = j["R"].get<double>();
        if (j.contains("M")) c.M = j["M"].get<double>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("t0")) c.t0 = j["t0"].get<double>();
        if (j.contains("paths")) c.paths = j["paths"].get<long>();
        if (j.contains("xi")) c.xi = j["xi"].get<double>();
        if (j.contains("seeds"))
            c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("inputs"))
            c.inputs = j["inputs"].get<std::vector<std::string>>();
        if (j.contains("out_dir"))
            c.out_dir = j["out_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed config value: ") +
                              e.what());
    }
    if (!bad.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : bad) msg += " " + k;
        throw ValidationError(msg);
    }
    validate_config(c);
    return c;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a(config_to_json(cfg));
}

Manifest run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec)
        throw IoError("cannot create '" + cfg.out_dir + "': " + ec.message());

    const auto t_begin = std::chrono::steady_clock::now();
    OutputSet out(cfg.out_dir);
    out.text("config.json", config_to_json(cfg));
    json summary{{"kind", cfg.kind}, {"runs", json::object()}};

    if (cfg.kind == "report") {
        for (const auto& rel : emit_report_impl(cfg.inputs, cfg.out_dir))
            out.note(rel);
    } else {
        std::vector<std::uint64_t> seeds =
            cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.field.seed}
                              : cfg.seeds;
        for (std::uint64_t seed : seeds) {
            ExperimentConfig run_cfg = cfg;
            run_cfg.field.seed = seed;
            const std::string tag = run_tag(cfg, seed);
            const std::string pre = cfg.seeds.empty() ? "" : tag + "_";
            CoefficientField field(run_cfg.field);
            json& s = summary["runs"][tag];
            s = json::object();
            s["seed"] = seed;
            if (cfg.kind == "green")
                run_green(run_cfg, field, pre, out, s);
            else if (cfg.kind == "invariant-measure")
                run_invariant_measure(run_cfg, field, pre, out, s);
            else if (cfg.kind == "homogenize")
                run_homogenize(run_cfg, field, pre, out, s);
            else if (cfg.kind == "cd-error")
                run_cd_error(run_cfg, field, pre, out, s);
            else if (cfg.kind == "clt")
                run_clt(run_cfg, field, pre, out, s);
            else if (cfg.kind == "sde")
                run_sde(run_cfg, field, pre, out, s);
        }
    }
    out.text("summary.json", summary.dump(2) + "\n");

    Manifest man;
    man.kind = cfg.kind;
    man.config_hash = config_hash(cfg);
    man.code_version = kCodeVersion;
    man.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_begin)
            .count();
    man.out_dir = cfg.out_dir;
    man.files = out.files();

    json mj{{"kind", man.kind},
            {"config_hash", man.config_hash},
            {"code_version", man.code_version},
            {"wall_time_s", man.wall_time_s},
            {"out_dir", man.out_dir}};
    mj["files"] = json::array();
    for (const auto& f : man.files)
        mj["files"].push_back(
            {{"path", f.path}, {"hash", f.hash}, {"bytes", f.bytes}});
    write_text(cfg.out_dir + "/manifest.json", mj.dump(2) + "\n");
    return man;
}

Manifest read_manifest(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw IoError("bad manifest '" + path + "': " + e.what());
    }
    Manifest m;
    try {
        m.kind = j.at("kind").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::uint64_t>();
        m.code_version = j.at("code_version").get<std::string>();
        m.wall_time_s = j.at("wall_time_s").get<double>();
        m.out_dir = j.at("out_dir").get<std::string>();
        for (const auto& f : j.at("files"))
            m.files.push_back({f.at("path").get<std::string>(),
                               f.at("hash").get<std::uint64_t>(),
                               f.at("bytes").get<std::uint64_t>()});
    } catch (const json::exception& e) {
        throw IoError("bad manifest '" + path + "': " + e.what());
    }
    return m;
}

void emit_report(const std::vector<std::string>& manifest_paths,
                 const std::string& out_dir) {
    emit_report_impl(manifest_paths, out_dir);
}

}  // namespace homolab
