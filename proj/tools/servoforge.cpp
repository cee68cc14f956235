// servoforge: design robust tracking controllers, simulate the resulting
// closed loops under saturation, and audit loop gains against the Bode
// sensitivity integral constraints.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "servoforge/design_im.hpp"
#include "servoforge/design_mf.hpp"
#include "servoforge/design_xest.hpp"
#include "servoforge/errors.hpp"
#include "servoforge/sensitivity.hpp"
#include "servoforge/sim.hpp"

namespace {

using namespace servoforge;
using nlohmann::json;

// exit codes are a stable contract:
//   0 ok, 1 audit residual above tolerance, 2 usage/io, 3 design infeasible,
//   4 simulation divergence, 5 closed-loop instability
constexpr int kExitOk = 0;
constexpr int kExitTolerance = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitInstability = 5;

struct CliFailure {
    int code;
    std::string kind;
    std::string message;
};

[[noreturn]] void fail(int code, const std::string& kind, const std::string& message) {
    throw CliFailure{code, kind, message};
}

int exit_code_for(const Error& e) {
    const std::string& k = e.kind();
    if (k == "io" || k == "usage") return kExitUsage;
    if (k == "divergence") return kExitDivergence;
    if (k == "instability") return kExitInstability;
    return kExitInfeasible;
}

std::string cli_kind_for(const Error& e) {
    const std::string& k = e.kind();
    if (k == "io" || k == "usage" || k == "divergence" || k == "instability") return k;
    return "infeasible";
}

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(kExitUsage, "io", "cannot open \"" + path + "\"");
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        fail(kExitUsage, "io", "cannot parse \"" + path + "\": " + e.what());
    }
    return j;
}

void save_json(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) fail(kExitUsage, "io", "cannot open \"" + path + "\" for writing");
    f << j.dump(2) << "\n";
}

Complex parse_complex(const std::string& text) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t.empty()) fail(kExitUsage, "usage", "empty complex literal");

    // forms: "a", "bi", "a+bi", "a-bi"
    auto parse_num = [&](const std::string& s) {
        if (s.empty() || s == "+") return 1.0;
        if (s == "-") return -1.0;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            fail(kExitUsage, "usage", "cannot parse number in complex literal \"" + text + "\"");
        }
        if (used != s.size())
            fail(kExitUsage, "usage", "trailing characters in complex literal \"" + text + "\"");
        return v;
    };

    if (t.back() == 'i' || t.back() == 'j') {
        std::string body = t.substr(0, t.size() - 1);
        // split at the last +/- that is not an exponent sign
        std::size_t split = std::string::npos;
        for (std::size_t k = body.size(); k-- > 1;) {
            if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
                split = k;
                break;
            }
        }
        if (split == std::string::npos) return {0.0, parse_num(body)};
        return {parse_num(body.substr(0, split)), parse_num(body.substr(split))};
    }
    return {parse_num(t), 0.0};
}

std::vector<Complex> parse_pole_list(const std::string& text) {
    std::vector<Complex> poles;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        poles.push_back(parse_complex(item));
    }
    if (poles.empty()) fail(kExitUsage, "usage", "empty pole list");
    if (!conjugate_closed(poles, 1e-9))
        fail(kExitUsage, "usage", "pole list is not closed under conjugation: \"" + text + "\"");
    return poles;
}

std::vector<double> parse_coeff_list(const std::string& text) {
    std::vector<double> coeffs;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        try {
            coeffs.push_back(std::stod(item));
        } catch (const std::exception&) {
            fail(kExitUsage, "usage", "cannot parse coefficient \"" + item + "\"");
        }
    }
    if (coeffs.empty()) fail(kExitUsage, "usage", "empty coefficient list");
    return coeffs;
}

void apply_perturbations(StateSpace& plant, const std::vector<std::string>& specs) {
    for (const std::string& spec : specs) {
        // matrix:row,col:value with zero-based indices, e.g. f:1,1:-1.1
        std::vector<std::string> parts;
        std::string item;
        std::stringstream ss(spec);
        while (std::getline(ss, item, ':')) parts.push_back(item);
        if (parts.size() != 3) fail(kExitUsage, "usage", "bad --perturb \"" + spec + "\"");
        Matrix* target = nullptr;
        if (parts[0] == "f") target = &plant.f;
        else if (parts[0] == "g") target = &plant.g;
        else if (parts[0] == "h") target = &plant.h;
        else if (parts[0] == "j") target = &plant.j;
        else fail(kExitUsage, "usage", "unknown matrix \"" + parts[0] + "\" in --perturb");
        std::size_t comma = parts[1].find(',');
        if (comma == std::string::npos) fail(kExitUsage, "usage", "bad indices in --perturb \"" + spec + "\"");
        try {
            std::size_t row = std::stoul(parts[1].substr(0, comma));
            std::size_t col = std::stoul(parts[1].substr(comma + 1));
            if (row >= target->rows() || col >= target->cols())
                fail(kExitUsage, "usage", "--perturb index out of range in \"" + spec + "\"");
            (*target)(row, col) = std::stod(parts[2]);
        } catch (const CliFailure&) {
            throw;
        } catch (const std::exception&) {
            fail(kExitUsage, "usage", "cannot parse --perturb \"" + spec + "\"");
        }
    }
}

json pole_check(const std::vector<Complex>& requested, const std::vector<Complex>& achieved) {
    double worst = 0.0;
    for (const Complex& want : requested) {
        double best = std::numeric_limits<double>::infinity();
        for (const Complex& got : achieved) best = std::min(best, std::abs(got - want));
        worst = std::max(worst, best);
    }
    json j;
    j["max_residual"] = worst;
    j["ok"] = worst < 1e-6;
    return j;
}

json complex_list_json(const std::vector<Complex>& v) {
    json out = json::array();
    for (const Complex& c : v) out.push_back({c.real(), c.imag()});
    return out;
}

// ---------------------------------------------------------------------------

struct DesignArgs {
    std::string method;
    std::string plant_file;
    std::string d_coeffs;
    std::string model_file;
    std::string control_poles;
    std::string estimator_poles;
    std::string out_file = "controller.json";
};

int run_design(const DesignArgs& args) {
    StateSpace plant = state_space_from_json(load_json(args.plant_file));
    std::vector<Complex> control = parse_pole_list(args.control_poles);

    SignalModel model = [&]() {
        if (!args.model_file.empty()) {
            json m = load_json(args.model_file);
            for (const char* key : {"a", "b", "c"})
                if (!m.contains(key)) fail(kExitUsage, "io", std::string("model file missing \"") + key + "\"");
            Matrix a = matrix_from_json(m["a"], "a");
            auto bv = m["b"].get<std::vector<double>>();
            auto cv = m["c"].get<std::vector<double>>();
            Matrix b(bv.size(), 1), c(1, cv.size());
            for (std::size_t i = 0; i < bv.size(); ++i) b(i, 0) = bv[i];
            for (std::size_t i = 0; i < cv.size(); ++i) c(0, i) = cv[i];
            return SignalModel::from_matrices(a, b, c);
        }
        if (args.d_coeffs.empty())
            fail(kExitUsage, "usage", "design needs --d or --model-file to define the signal class");
        return SignalModel::from_polynomial(Polynomial(parse_coeff_list(args.d_coeffs)).monic());
    }();

    json out, verify;
    if (args.method == "im") {
        std::vector<Complex> est = parse_pole_list(args.estimator_poles);
        ImController ctrl = design_im(plant, model, control, est);
        StateSpace comp = build_composite(plant, ctrl.d);
        verify["control_poles"] =
            pole_check(control, eigenvalues(comp.f - comp.g * hstack(ctrl.k_z, ctrl.k_eta)));
        verify["estimator_poles"] = pole_check(est, eigenvalues(plant.f - ctrl.l_x * plant.h));
        out = ctrl.to_json();
    } else if (args.method == "xest") {
        std::vector<Complex> est = parse_pole_list(args.estimator_poles);
        XestController ctrl = design_xest(plant, model, control, est);
        verify["control_poles"] = pole_check(control, eigenvalues(plant.f - plant.g * ctrl.k_zx));
        StateSpace ext = build_extended(plant, model);
        verify["estimator_poles"] =
            pole_check(est, eigenvalues(ext.f - vstack(ctrl.l_zx, ctrl.l_nx) * ext.h));
        out = ctrl.to_json();
    } else if (args.method == "mf") {
        if (!args.estimator_poles.empty())
            fail(kExitUsage, "usage", "model following has no estimator; drop --estimator-poles");
        MfController ctrl = design_mf(plant, model, control);
        verify["control_poles"] = pole_check(control, eigenvalues(plant.f - plant.g * ctrl.k));
        verify["matching_residual"] =
            (plant.f * ctrl.m - ctrl.m * model.a + plant.g * ctrl.n_ff).frobenius_norm();
        out = ctrl.to_json();
    } else {
        fail(kExitUsage, "usage", "unknown design method \"" + args.method + "\"");
    }

    save_json(out, args.out_file);
    json summary;
    summary["method"] = args.method;
    summary["controller"] = args.out_file;
    summary["verification"] = verify;
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string plant_file;
    std::string controller_file;
    std::string ref_spec = "zero";
    std::string dist_spec = "zero";
    double sat = 1.0;
    double t_end = 25.0;
    double dt = 1e-3;
    double window = 0.2;
    std::string out_csv = "trace.csv";
    std::vector<std::string> perturb;
};

int run_simulate(const SimulateArgs& args) {
    if (args.t_end <= 0.0) fail(kExitUsage, "usage", "horizon must be positive");
    if (args.dt <= 0.0 || args.t_end < args.dt) fail(kExitUsage, "usage", "bad step size");
    if (args.sat <= 0.0) fail(kExitUsage, "usage", "saturation limit must be positive");

    StateSpace plant = state_space_from_json(load_json(args.plant_file));
    apply_perturbations(plant, args.perturb);

    json cj = load_json(args.controller_file);
    const std::string method = cj.value("method", "");

    ClosedLoop loop;
    if (method == "im") {
        loop = realize_closed_loop_im(plant, ImController::from_json(cj, plant), args.sat);
    } else if (method == "xest") {
        loop = realize_closed_loop_xest(plant, XestController::from_json(cj, plant), args.sat);
    } else if (method == "mf") {
        loop = realize_closed_loop_mf(plant, MfController::from_json(cj, plant), args.sat);
    } else {
        fail(kExitUsage, "io", "controller file has no recognizable \"method\" tag");
    }

    SignalSpec ref, dist;
    try {
        ref = SignalSpec::parse(args.ref_spec);
        dist = SignalSpec::parse(args.dist_spec);
    } catch (const DomainError& e) {
        fail(kExitUsage, "usage", e.what());
    }
    // an enabled disturbance with no explicit start switches on mid-horizon
    const auto colons = static_cast<std::size_t>(std::count(args.dist_spec.begin(), args.dist_spec.end(), ':'));
    if (dist.kind == SignalKind::Step && colons < 2) dist.start_time = args.t_end / 2.0;
    if (dist.kind == SignalKind::Sine && colons < 3) dist.start_time = args.t_end / 2.0;

    SimTrace trace = simulate(loop, ref, dist, args.t_end, args.dt);
    write_csv(trace, args.out_csv);

    json summary;
    summary["trace"] = args.out_csv;
    summary["samples"] = trace.samples();
    summary["steady_state_error"] = steady_state_error(trace, args.window);
    summary["window_fraction"] = args.window;
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
    std::string loop_file;
    std::string which = "both";
    double tol = 1e-2;
    bool tol_set = false;
};

int run_audit(const AuditArgs& args) {
    double tol = args.tol;
    if (!args.tol_set) {
        if (const char* env = std::getenv("SERVO_FORGE_TOL")) {
            try {
                tol = std::stod(env);
            } catch (const std::exception&) {
                fail(kExitUsage, "usage", "cannot parse SERVO_FORGE_TOL");
            }
        }
    }

    LoopGain loop = loop_gain_from_json(load_json(args.loop_file));

    json out;
    bool ok = true;
    auto gate = [&](const ExtReal& residual) {
        if (residual.inf || residual.value > tol) ok = false;
    };

    if (args.which.rfind("nmp:", 0) == 0) {
        Complex z0 = parse_complex(args.which.substr(4));
        WeightedNmpResult r = weighted_nmp_integral(loop, z0);
        out["integral"] = "weighted_nmp";
        out["z0"] = {z0.real(), z0.imag()};
        out["numeric"] = r.numeric;
        out["closed_form"] = r.closed_form;
        out["residual"] = std::abs(r.numeric - r.closed_form);
        gate(ExtReal::finite(std::abs(r.numeric - r.closed_form)));
    } else if (args.which == "sensitivity" || args.which == "complementary" || args.which == "both") {
        AuditResult r = audit(loop);
        if (args.which != "complementary") gate(r.sensitivity.residual);
        if (args.which != "sensitivity") gate(r.complementary.residual);
        if (args.which == "sensitivity") out = to_json(r.sensitivity);
        else if (args.which == "complementary") out = to_json(r.complementary);
        else out = to_json(r);
    } else {
        fail(kExitUsage, "usage", "--which must be sensitivity, complementary, both or nmp:<z0>");
    }

    out["tolerance"] = tol;
    out["within_tolerance"] = ok;
    std::cout << out.dump(2) << "\n";
    return ok ? kExitOk : kExitTolerance;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"control design workbench: tracking/regulation synthesis, simulation, "
                 "and sensitivity-integral audits"};
    app.require_subcommand(1);

    DesignArgs dargs;
    CLI::App* design = app.add_subcommand("design", "synthesize a controller");
    design->add_option("method", dargs.method, "design method: im, xest or mf")->required();
    design->add_option("--plant", dargs.plant_file, "plant JSON file")->required();
    design->add_option("--d", dargs.d_coeffs, "signal-class polynomial, ascending coefficients");
    design->add_option("--model-file", dargs.model_file, "explicit generator model JSON (a, b, c)");
    design->add_option("--control-poles", dargs.control_poles, "comma-separated pole list")->required();
    design->add_option("--estimator-poles", dargs.estimator_poles, "comma-separated pole list");
    design->add_option("--out", dargs.out_file, "output controller JSON path");

    SimulateArgs sargs;
    CLI::App* sim = app.add_subcommand("simulate", "simulate a designed closed loop");
    sim->add_option("--plant", sargs.plant_file, "plant JSON file")->required();
    sim->add_option("--controller", sargs.controller_file, "controller JSON file")->required();
    sim->add_option("--ref", sargs.ref_spec, "reference, kind:amplitude[:frequency][:start]");
    sim->add_option("--dist", sargs.dist_spec, "disturbance, same syntax");
    sim->add_option("--sat", sargs.sat, "control saturation limit");
    sim->add_option("--tend", sargs.t_end, "simulation horizon [s]");
    sim->add_option("--dt", sargs.dt, "fixed integration step [s]");
    sim->add_option("--window", sargs.window, "trailing window fraction for the error summary");
    sim->add_option("--out", sargs.out_csv, "output CSV path");
    sim->add_option("--perturb", sargs.perturb, "entry override matrix:row,col:value (repeatable)");

    AuditArgs aargs;
    CLI::App* aud = app.add_subcommand("audit", "audit a loop gain against the integral constraints");
    aud->add_option("--loop", aargs.loop_file, "loop-gain JSON (state space or num/den)")->required();
    aud->add_option("--which", aargs.which, "sensitivity, complementary, both or nmp:<z0>");
    aud->add_option("--tol", aargs.tol, "residual tolerance gate")->each([&](const std::string&) {
        aargs.tol_set = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (design->parsed()) return run_design(dargs);
        if (sim->parsed()) return run_simulate(sargs);
        return run_audit(aargs);
    } catch (const CliFailure& f) {
        nlohmann::json err;
        err["error"] = {{"kind", f.kind}, {"message", f.message}};
        std::cerr << err.dump() << "\n";
        return f.code;
    } catch (const Error& e) {
        nlohmann::json err;
        err["error"] = {{"kind", cli_kind_for(e)}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = {{"kind", "internal"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return kExitInfeasible;
    }
}
