#include "nonholo/scenefile.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "nonholo/errors.hpp"

namespace nonholo {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    if (!obj.is_object()) throw SchemaError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SchemaError("unknown key '" + it.key() + "' in " + where);
    }
}

double get_num(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number()) throw SchemaError("'" + key + "' must be a number");
    return obj.at(key).get<double>();
}

Expr parse_expr_field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_string())
        throw SchemaError(where + " needs the string field '" + key + "'");
    try {
        return Expr::parse(obj.at(key).get<std::string>());
    } catch (const Error& e) {
        throw SchemaError(where + "." + key + ": " + e.what());
    }
}

Vec3 parse_vec(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw SchemaError(where + " must be [x1, x2, x3]");
    for (const auto& c : v)
        if (!c.is_number()) throw SchemaError(where + " components must be numbers");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

} // namespace

std::string fnv1a_digest(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LoadedScene load_scene_json(const json& j) {
    reject_unknown(j, {"constraint", "path", "weights", "chart", "numerics"}, "scene");

    if (!j.contains("constraint") || !j.contains("path"))
        throw SchemaError("scene needs 'constraint' and 'path'");

    const json& jc = j.at("constraint");
    reject_unknown(jc, {"beta", "normalize"}, "constraint");
    if (!jc.contains("beta") || !jc.at("beta").is_array() || jc.at("beta").size() != 3)
        throw SchemaError("constraint.beta must be an array of three expressions");
    OneForm beta;
    try {
        beta = OneForm::parse(jc.at("beta")[0].get<std::string>(),
                              jc.at("beta")[1].get<std::string>(),
                              jc.at("beta")[2].get<std::string>());
    } catch (const Error& e) {
        throw SchemaError(std::string("constraint.beta: ") + e.what());
    }
    bool normalize = jc.value("normalize", false);

    const json& jp = j.at("path");
    reject_unknown(jp, {"f", "g", "seed", "delta"}, "path");
    LoadedScene out;
    out.scene.constraint = PfaffianConstraint::make(beta, normalize);
    out.scene.loop.f = parse_expr_field(jp, "f", "path");
    out.scene.loop.g = parse_expr_field(jp, "g", "path");
    if (!jp.contains("seed")) throw SchemaError("path.seed missing");
    out.scene.loop.seed = parse_vec(jp.at("seed"), "path.seed");
    out.scene.loop.tube_radius = get_num(jp, "delta", 0.1);
    if (out.scene.loop.tube_radius <= 0) throw SchemaError("path.delta must be positive");

    if (j.contains("weights")) {
        const json& jw = j.at("weights");
        reject_unknown(jw, {"mode", "a", "b", "eps0", "budget"}, "weights");
        std::string mode = jw.value("mode", "default");
        if (mode == "default") {
            out.weights = WeightSpec::make_default();
        } else if (mode == "custom") {
            out.weights = WeightSpec::custom(parse_expr_field(jw, "a", "weights"),
                                             parse_expr_field(jw, "b", "weights"));
        } else if (mode == "robust") {
            double eps0 = get_num(jw, "eps0", 1e-2);
            int budget = static_cast<int>(get_num(jw, "budget", 2000));
            out.weights = WeightSpec::robust(parse_expr_field(jw, "b", "weights"), eps0, budget);
        } else {
            throw SchemaError("weights.mode must be default | custom | robust");
        }
    }

    if (j.contains("chart")) {
        const json& jch = j.at("chart");
        reject_unknown(jch, {"fiber_angle"}, "chart");
        if (jch.contains("fiber_angle"))
            out.scene.fiber_angle = parse_expr_field(jch, "fiber_angle", "chart");
    }

    Numerics& num = out.scene.numerics;
    if (j.contains("numerics")) {
        const json& jn = j.at("numerics");
        reject_unknown(jn, {"integrator", "tolerances", "budgets", "rng_seed"}, "numerics");
        if (jn.contains("integrator")) {
            const json& ji = jn.at("integrator");
            reject_unknown(ji, {"method", "step", "abs_tol", "rel_tol"}, "numerics.integrator");
            std::string m = ji.value("method", "rk45");
            if (m != "rk45" && m != "rk4")
                throw SchemaError("numerics.integrator.method must be rk45 | rk4");
            num.abs_tol = get_num(ji, "abs_tol", num.abs_tol);
            num.rel_tol = get_num(ji, "rel_tol", num.rel_tol);
        }
        if (jn.contains("tolerances")) {
            const json& jt = jn.at("tolerances");
            reject_unknown(jt, {"eps_conv"}, "numerics.tolerances");
            num.eps_conv = get_num(jt, "eps_conv", num.eps_conv);
        }
        if (jn.contains("budgets")) {
            const json& jb = jn.at("budgets");
            reject_unknown(jb, {"max_time", "max_steps", "sample_budget", "theta_cadence",
                                "trace_step"},
                           "numerics.budgets");
            num.max_time = get_num(jb, "max_time", num.max_time);
            num.max_steps = static_cast<int>(get_num(jb, "max_steps", num.max_steps));
            num.sample_budget =
                static_cast<int>(get_num(jb, "sample_budget", num.sample_budget));
            num.theta_cadence =
                static_cast<int>(get_num(jb, "theta_cadence", num.theta_cadence));
            num.step = get_num(jb, "trace_step", num.step);
        }
        if (jn.contains("rng_seed")) {
            if (!jn.at("rng_seed").is_number_unsigned())
                throw SchemaError("numerics.rng_seed must be a non-negative integer");
            num.rng_seed = jn.at("rng_seed").get<std::uint64_t>();
        }
    }

    out.scene.path = trace_path(out.scene.loop, out.scene.constraint, num.step);
    out.raw = j;
    out.digest = fnv1a_digest(j.dump());
    return out;
}

LoadedScene load_scene(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw SchemaError("cannot open scene file " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("scene file is not valid JSON: ") + e.what());
    }
    return load_scene_json(j);
}

IntegratorConfig integrator_config(const Scene& scene) {
    IntegratorConfig cfg;
    cfg.abs_tol = scene.numerics.abs_tol;
    cfg.rel_tol = scene.numerics.rel_tol;
    cfg.max_time = scene.numerics.max_time;
    cfg.max_steps = scene.numerics.max_steps;
    cfg.theta_cadence = scene.numerics.theta_cadence;
    return cfg;
}

json RunManifest::to_json() const {
    return {{"tool_version", tool_version},
            {"scene_digest", scene_digest},
            {"config_hash", config_hash},
            {"outputs", outputs}};
}

void RunManifest::write(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "manifest.json");
    out << to_json().dump(2) << "\n";
}

RunManifest RunManifest::read(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw SchemaError("no manifest in " + dir.string());
    json j;
    in >> j;
    RunManifest m;
    m.tool_version = j.at("tool_version");
    m.scene_digest = j.at("scene_digest");
    m.config_hash = j.at("config_hash");
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& traj) {
    std::ofstream out(file);
    if (!out) throw SchemaError("cannot write " + file.string());
    out << "s,x1,x2,x3,H,theta_hat,phi_base,beta_residual\n";
    for (const Sample& s : traj.samples) {
        out << format_g17(s.s) << ',' << format_g17(s.p.x1) << ',' << format_g17(s.p.x2) << ','
            << format_g17(s.p.x3) << ',' << format_g17(s.H) << ',' << format_g17(s.theta_hat)
            << ',' << format_g17(s.phi_base) << ',' << format_g17(s.beta_residual) << '\n';
    }
    out << "# termination," << termination_name(traj.termination)
        << (traj.event_name.empty() ? "" : ("," + traj.event_name)) << "\n";
}

} // namespace nonholo
