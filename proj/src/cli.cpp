#include "nonholo/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nonholo/connection.hpp"
#include "nonholo/errors.hpp"
#include "nonholo/scenefile.hpp"
#include "nonholo/verify.hpp"

namespace nonholo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void apply_weight_overrides(WeightSpec& w, double eps0, int robust_budget) {
    if (auto* r = std::get_if<WeightSpec::Robust>(&w.spec)) {
        if (eps0 > 0) r->eps0 = eps0;
        if (robust_budget > 0) r->sample_budget = robust_budget;
    }
}

Vec3 parse_point(const std::string& s) {
    Vec3 p;
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> p.x1 >> c1 >> p.x2 >> c2 >> p.x3) || c1 != ',' || c2 != ',')
        throw SchemaError("point must be 'x1,x2,x3'");
    return p;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

void print_diagnostics(const DiagnosticsReport& rep) {
    for (const auto& c : rep.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  measured=" << c.measured
                  << " tol=" << c.tolerance;
        if (!c.pass)
            std::cout << "  witness=(" << c.witness.x1 << "," << c.witness.x2 << ","
                      << c.witness.x3 << ")";
        if (!c.note.empty()) std::cout << "  " << c.note;
        std::cout << "\n";
    }
}

struct OutDir {
    fs::path dir;
    RunManifest manifest;

    explicit OutDir(const std::string& path, const std::string& digest,
                    const std::string& config_hash) {
        dir = path;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (!fs::is_directory(dir)) throw SchemaError("output directory not writable: " + path);
        // probe writability
        std::ofstream probe(dir / ".write_probe");
        if (!probe) throw SchemaError("output directory not writable: " + path);
        probe.close();
        fs::remove(dir / ".write_probe", ec);
        manifest.scene_digest = digest;
        manifest.config_hash = config_hash;
    }

    bool resumable(bool resume) const {
        if (!resume) return false;
        try {
            RunManifest existing = RunManifest::read(dir);
            if (existing.config_hash != manifest.config_hash ||
                existing.scene_digest != manifest.scene_digest)
                return false;
            for (const auto& f : existing.outputs)
                if (!fs::exists(dir / f)) return false;
            return true;
        } catch (const Error&) {
            return false;
        }
    }
};

int cmd_check(const std::string& scene_path) {
    LoadedScene ls = load_scene(scene_path);
    DiagnosticsReport rep = check_assumptions(ls.scene);
    print_diagnostics(rep);
    return rep.all_pass() ? 0 : 1;
}

int cmd_trace(const std::string& scene_path, const std::string& out) {
    LoadedScene ls = load_scene(scene_path);
    const PathPolyline& path = ls.scene.path;
    std::cout << "nodes=" << path.nodes.size() << " length=" << path.total_length
              << " orientation=" << ls.scene.loop.orientation_sign << "\n";
    if (!out.empty()) {
        OutDir od(out, ls.digest, fnv1a_digest("trace:" + ls.digest));
        std::ofstream f(od.dir / "path.csv");
        f << "arclen,x1,x2,x3\n";
        for (size_t i = 0; i < path.nodes.size(); ++i)
            f << format_g17(path.cumlen[i]) << ',' << format_g17(path.nodes[i].x1) << ','
              << format_g17(path.nodes[i].x2) << ',' << format_g17(path.nodes[i].x3) << '\n';
        od.manifest.outputs = {"path.csv"};
        od.manifest.write(od.dir);
    }
    return 0;
}

int cmd_simulate(const std::string& scene_path, const std::string& out,
                 const std::vector<std::string>& starts, int random_starts, double budget,
                 std::uint64_t seed, bool force, bool resume, double eps0, int robust_budget) {
    LoadedScene ls = load_scene(scene_path);
    if (seed) ls.scene.numerics.rng_seed = seed;
    if (budget > 0) ls.scene.numerics.max_time = budget;
    apply_weight_overrides(ls.weights, eps0, robust_budget);

    DiagnosticsReport diag = check_assumptions(ls.scene);
    if (!diag.all_pass()) {
        if (!force) {
            std::cerr << "scene fails assumption checks (use --force to simulate anyway)\n";
            print_diagnostics(diag);
            return 1;
        }
        // the projected angle needs the horizontal structure these checks guard
        std::cerr << "forced: checks fail, theta_hat sampling disabled\n";
        ls.scene.numerics.theta_cadence = 0;
    }

    std::vector<Vec3> pts;
    for (const auto& s : starts) pts.push_back(parse_point(s));
    if (random_starts > 0) {
        TubeSampler sampler(ls.scene, ls.scene.numerics.rng_seed);
        for (int i = 0; i < random_starts; ++i) pts.push_back(sampler.next());
    }
    if (pts.empty()) throw SchemaError("no starts given (use --start or --random)");

    std::ostringstream cfg_id;
    cfg_id << "simulate:" << ls.digest << ":" << ls.scene.numerics.rng_seed << ":"
           << ls.scene.numerics.max_time << ":" << pts.size();
    OutDir od(out, ls.digest, fnv1a_digest(cfg_id.str()));
    if (od.resumable(resume)) {
        std::cout << "resume: outputs up to date\n";
        return 0;
    }

    GuidingField gf = make_guiding_field(ls.scene, ls.weights);
    IntegratorConfig icfg = integrator_config(ls.scene);
    int rc = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        Trajectory tr;
        try {
            tr = simulate_one(ls.scene, gf, pts[i], icfg);
        } catch (const StepCollapse& e) {
            std::cerr << "numeric failure on trajectory " << i << ": " << e.what() << "\n";
            return 3;
        }
        std::string name = "traj_" + std::to_string(i) + ".csv";
        write_trajectory_csv(od.dir / name, tr);
        od.manifest.outputs.push_back(name);
        std::cout << name << ": termination=" << termination_name(tr.termination)
                  << " samples=" << tr.samples.size() << " final_H=" << tr.samples.back().H
                  << "\n";
        if (tr.termination == Termination::Singular) rc = 3;
    }
    od.manifest.write(od.dir);
    return rc;
}

int cmd_project(const std::string& scene_path, const std::string& point,
                const std::string& out) {
    LoadedScene ls = load_scene(scene_path);
    Vec3 p = parse_point(point);
    Vec3 q = parallel_project(ls.scene, p);
    double th = theta_on_path(ls.scene.path, q);
    std::cout << "Theta = (" << format_g17(q.x1) << ", " << format_g17(q.x2) << ", "
              << format_g17(q.x3) << ")  theta=" << format_g17(th) << "\n";
    if (!out.empty()) {
        OutDir od(out, ls.digest, fnv1a_digest("project:" + point));
        double f0 = ls.scene.loop.f.eval(p), g0 = ls.scene.loop.g.eval(p);
        Lift lift = lift_path(
            ls.scene,
            [f0, g0](double t) -> std::array<double, 2> { return {(1 - t) * f0, (1 - t) * g0}; },
            0.0, 1.0, p);
        std::ofstream fcsv(od.dir / "lift.csv");
        fcsv << "t,x1,x2,x3,base_err,beta_residual\n";
        for (const auto& lp : lift.points)
            fcsv << format_g17(lp.t) << ',' << format_g17(lp.p.x1) << ',' << format_g17(lp.p.x2)
                 << ',' << format_g17(lp.p.x3) << ',' << format_g17(lp.base_err) << ','
                 << format_g17(lp.beta_resid) << '\n';
        od.manifest.outputs = {"lift.csv"};
        od.manifest.write(od.dir);
    }
    return 0;
}

int cmd_lift(const std::string& scene_path, const std::string& start,
             const std::string& target, const std::string& out) {
    LoadedScene ls = load_scene(scene_path);
    Vec3 p = parse_point(start);
    auto tv = parse_list(target);
    if (tv.size() != 2) throw SchemaError("--target must be 'f,g'");
    double f0 = ls.scene.loop.f.eval(p), g0 = ls.scene.loop.g.eval(p);
    double f1 = tv[0], g1 = tv[1];
    Lift lift = lift_path(
        ls.scene,
        [=](double t) -> std::array<double, 2> {
            return {(1 - t) * f0 + t * f1, (1 - t) * g0 + t * g1};
        },
        0.0, 1.0, p);
    std::cout << "end = (" << format_g17(lift.end.x1) << ", " << format_g17(lift.end.x2) << ", "
              << format_g17(lift.end.x3) << ")\n";
    if (!out.empty()) {
        OutDir od(out, ls.digest, fnv1a_digest("lift:" + start + ":" + target));
        std::ofstream fcsv(od.dir / "lift.csv");
        fcsv << "t,x1,x2,x3,base_err,beta_residual\n";
        for (const auto& lp : lift.points)
            fcsv << format_g17(lp.t) << ',' << format_g17(lp.p.x1) << ',' << format_g17(lp.p.x2)
                 << ',' << format_g17(lp.p.x3) << ',' << format_g17(lp.base_err) << ','
                 << format_g17(lp.beta_resid) << '\n';
        od.manifest.outputs = {"lift.csv"};
        od.manifest.write(od.dir);
    }
    return 0;
}

int cmd_verify(const std::string& scene_path, const std::string& out, std::uint64_t seed,
               double eps0, int robust_budget) {
    LoadedScene ls = load_scene(scene_path);
    if (seed) ls.scene.numerics.rng_seed = seed;
    apply_weight_overrides(ls.weights, eps0, robust_budget);
    GuidingField gf = make_guiding_field(ls.scene, ls.weights);
    VerifyConfig vcfg;
    vcfg.rng_seed = ls.scene.numerics.rng_seed;
    VerificationReport rep = run_suite(ls.scene, gf, vcfg);
    for (const auto& c : rep.checks) {
        std::cout << (!c.applicable ? "SKIP " : c.pass ? "PASS " : "FAIL ") << c.check << "\n";
    }
    if (!out.empty()) {
        std::ofstream f(out);
        f << rep.to_json().dump(2) << "\n";
    }
    return rep.all_pass() ? 0 : 1;
}

int cmd_sweep(const std::string& scene_path, const std::string& scales_arg,
              const std::string& out, std::uint64_t seed) {
    LoadedScene ls = load_scene(scene_path);
    if (seed) ls.scene.numerics.rng_seed = seed;
    std::vector<double> scales = parse_list(scales_arg);
    if (scales.empty()) throw SchemaError("--b-scale list is empty");

    DiagnosticsReport diag = check_assumptions(ls.scene);
    if (!diag.all_pass()) {
        std::cerr << "scene fails assumption checks\n";
        return 1;
    }

    std::ostringstream cfg_id;
    cfg_id << "sweep:" << ls.digest << ":" << scales_arg << ":" << ls.scene.numerics.rng_seed;
    OutDir od(out, ls.digest, fnv1a_digest(cfg_id.str()));

    TubeSampler sampler(ls.scene, ls.scene.numerics.rng_seed);
    Vec3 start = sampler.next_at(std::min(0.16, 0.64 * ls.scene.delta2()));

    std::ofstream summary(od.dir / "sweep.csv");
    summary << "b_scale,time_to_H_1e-6,total_delta_theta,min_step,final_H,termination\n";
    od.manifest.outputs.push_back("sweep.csv");

    IntegratorConfig icfg = integrator_config(ls.scene);
    for (size_t i = 0; i < scales.size(); ++i) {
        double k = scales[i];
        const Scene& sc = ls.scene;
        GuidingField gf(
            sc, [&sc](const Vec3& p) { return sc.constraint.lambda(p); },
            [&sc, k](const Vec3& p) { return k * lyapunov_H(sc.loop, p); },
            "default scaled b x " + std::to_string(k));
        Trajectory tr = simulate_one(sc, gf, start, icfg);

        double t_conv = -1;
        double min_step = 1e300;
        for (size_t s = 1; s < tr.samples.size(); ++s) {
            min_step = std::min(min_step, tr.samples[s].s - tr.samples[s - 1].s);
            if (t_conv < 0 && tr.samples[s].H < 1e-6) t_conv = tr.samples[s].s;
        }
        double dtheta = 0;
        {
            double th0 = 0, th1 = 0;
            bool have0 = false;
            for (const auto& s : tr.samples) {
                if (!std::isnan(s.theta_hat)) {
                    if (!have0) {
                        th0 = s.theta_hat;
                        have0 = true;
                    }
                    th1 = s.theta_hat;
                }
            }
            dtheta = th1 - th0;
        }
        summary << format_g17(k) << ','
                << (t_conv < 0 ? "not-reached" : format_g17(t_conv)) << ','
                << format_g17(dtheta) << ',' << format_g17(min_step) << ','
                << format_g17(tr.samples.back().H) << ','
                << (k == 0 ? "no convergence" : termination_name(tr.termination)) << "\n";

        std::string name = "sweep_traj_" + std::to_string(i) + ".csv";
        write_trajectory_csv(od.dir / name, tr);
        od.manifest.outputs.push_back(name);
    }

    // plot script: trajectory projections, data + script only
    {
        std::ofstream gp(od.dir / "plot.gp");
        gp << "set datafile separator ','\n"
           << "set terminal pngcairo size 900,700\n"
           << "set output 'sweep.png'\n"
           << "set xlabel 'x1'\nset ylabel 'x2'\n"
           << "plot ";
        for (size_t i = 0; i < scales.size(); ++i) {
            gp << "'sweep_traj_" << i << ".csv' using 2:3 every ::1 with lines title 'b x "
               << scales[i] << "'";
            if (i + 1 < scales.size()) gp << ", \\\n     ";
        }
        gp << "\n";
        od.manifest.outputs.push_back("plot.gp");
    }
    od.manifest.write(od.dir);
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"guiding vector fields for closed-curve following under a Pfaffian constraint"};
    app.require_subcommand(1);

    std::string scene_path, out_dir, point, start, target, scales;
    std::vector<std::string> starts;
    int random_starts = 0;
    double budget = -1;
    std::uint64_t seed = 0;
    bool force = false, resume = false;
    double eps0 = -1;
    int robust_budget = -1;

    auto add_scene = [&](CLI::App* cmd) {
        cmd->add_option("--scene", scene_path, "scene file (JSON)")->required();
        cmd->add_option("--seed", seed, "override the scene RNG seed");
        cmd->add_option("--eps0", eps0, "robust-weight margin override");
        cmd->add_option("--robust-budget", robust_budget, "robust-weight sample budget override");
    };

    CLI::App* c_check = app.add_subcommand("check", "run the assumption diagnostics");
    add_scene(c_check);

    CLI::App* c_trace = app.add_subcommand("trace", "trace the path polyline");
    add_scene(c_trace);
    c_trace->add_option("--out", out_dir, "output directory");

    CLI::App* c_sim = app.add_subcommand("simulate", "integrate guiding-field trajectories");
    add_scene(c_sim);
    c_sim->add_option("--out", out_dir, "output directory")->required();
    c_sim->add_option("--start", starts, "start point 'x1,x2,x3' (repeatable)");
    c_sim->add_option("--random", random_starts, "number of random tube starts");
    c_sim->add_option("--budget", budget, "time budget override");
    c_sim->add_flag("--force", force, "simulate even if checks fail");
    c_sim->add_flag("--resume", resume, "skip when outputs are up to date");

    CLI::App* c_proj = app.add_subcommand("project", "parallel-project a point onto the path");
    add_scene(c_proj);
    c_proj->add_option("--point", point, "point 'x1,x2,x3'")->required();
    c_proj->add_option("--out", out_dir, "output directory for the lift CSV");

    CLI::App* c_lift = app.add_subcommand("lift", "horizontal lift toward a base target");
    add_scene(c_lift);
    c_lift->add_option("--start", start, "start point 'x1,x2,x3'")->required();
    c_lift->add_option("--target", target, "base target 'f,g'")->required();
    c_lift->add_option("--out", out_dir, "output directory for the lift CSV");

    CLI::App* c_verify = app.add_subcommand("verify", "run the verification suite");
    add_scene(c_verify);
    c_verify->add_option("--out", out_dir, "report JSON path");

    CLI::App* c_sweep = app.add_subcommand("sweep", "explore convergence-weight scalings");
    add_scene(c_sweep);
    c_sweep->add_option("--b-scale", scales, "comma-separated scale list")->required();
    c_sweep->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_check->parsed()) return cmd_check(scene_path);
        if (c_trace->parsed()) return cmd_trace(scene_path, out_dir);
        if (c_sim->parsed())
            return cmd_simulate(scene_path, out_dir, starts, random_starts, budget, seed, force,
                                resume, eps0, robust_budget);
        if (c_proj->parsed()) return cmd_project(scene_path, point, out_dir);
        if (c_lift->parsed()) return cmd_lift(scene_path, start, target, out_dir);
        if (c_verify->parsed()) return cmd_verify(scene_path, out_dir, seed, eps0, robust_budget);
        if (c_sweep->parsed()) return cmd_sweep(scene_path, scales, out_dir, seed);
    } catch (const SchemaError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const SyntaxError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const StepCollapse& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
    return 2;
}

} // namespace nonholo
