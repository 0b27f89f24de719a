// qlqg: run one experiment described by a JSON manifest.
//
//   qlqg --manifest run.json [--seed N] [--out DIR] [--quiet]
//
// Exit status: 0 success, 2 validation failure, 3 numerical error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qlqg/control.hpp"
#include "qlqg/filtering.hpp"
#include "qlqg/io.hpp"
#include "qlqg/model.hpp"
#include "qlqg/oracle/suite.hpp"
#include "qlqg/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qlqg;

namespace {

struct Manifest {
    std::string mode;
    fs::path base;  // directory of the manifest; relative paths resolve against it
    json doc;

    bool has(const char* key) const { return doc.contains(key); }
    fs::path path(const char* key) const {
        fs::path p = doc.at(key).get<std::string>();
        return p.is_absolute() ? p : base / p;
    }
    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        if (!doc.at(key).is_number()) throw ValidationError(std::string("manifest field '") + key + "' must be a number");
        return doc.at(key).get<double>();
    }
    std::int64_t integer(const char* key, std::int64_t fallback) const {
        if (!has(key)) return fallback;
        if (!doc.at(key).is_number_integer()) throw ValidationError(std::string("manifest field '") + key + "' must be an integer");
        return doc.at(key).get<std::int64_t>();
    }
};

/// Discrete problem assembled from either a discrete model file or a continuous model plus dt.
struct Problem {
    OscillatorModel model;
    MeasurementModel meas;
    std::optional<CostModel> cost;
    std::optional<ContinuousModel> continuous;
    GaussianState init = default_initial_state();
    double sigma_correction = 0.0;
};

Manifest load_manifest(const std::string& file) {
    Manifest m;
    m.doc = io::read_json_file(file);
    if (!m.doc.is_object()) throw ValidationError("manifest must be a JSON object");
    if (!m.doc.contains("mode") || !m.doc.at("mode").is_string()) throw ValidationError("manifest needs a string 'mode'");
    m.mode = m.doc.at("mode").get<std::string>();
    static const std::vector<std::string> modes{"filter", "control", "simulate", "oracle-check", "continuum"};
    if (std::find(modes.begin(), modes.end(), m.mode) == modes.end())
        throw ValidationError("unknown mode '" + m.mode + "'");
    m.base = fs::absolute(fs::path(file)).parent_path();
    return m;
}

ContinuousModel load_continuous(const Manifest& mf) {
    if (mf.has("continuous_model")) return io::continuous_from_json(io::read_json_file(mf.path("continuous_model")));
    return default_continuous_model();
}

Problem load_problem(const Manifest& mf) {
    Problem p;
    if (mf.has("model")) {
        std::tie(p.model, p.meas) = io::model_from_json(io::read_json_file(mf.path("model")));
    } else {
        const auto c = load_continuous(mf);
        const double dt = mf.number("dt", 0.01);
        const auto d = matched_line_preset(c, dt);
        p.model = d.model;
        p.meas = d.meas;
        p.cost = d.cost;
        p.continuous = c;
        p.sigma_correction = d.sigma_correction;
    }
    if (mf.has("cost")) p.cost = io::cost_from_json(io::read_json_file(mf.path("cost")));
    if (mf.has("init")) p.init = io::state_from_json(mf.doc.at("init"));

    const auto rep = validate_model(p.model, p.meas);
    if (!rep.admissible) throw ValidationError(rep.reason);
    return p;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Context {
    Manifest mf;
    fs::path out;
    std::uint64_t seed = 0;
    bool quiet = false;

    void note(const std::string& s) const {
        if (!quiet) std::cout << s << '\n';
    }
};

int run_filter(const Context& cx) {
    const auto p = load_problem(cx.mf);
    std::vector<cplx> etas, us;
    if (cx.mf.has("record")) {
        std::ifstream in(cx.mf.path("record"));
        if (!in) throw ValidationError("cannot open record file");
        std::tie(etas, us) = io::read_record_csv(in);
    } else {
        // synthesize a record: closed loop if a cost is known, otherwise open loop with u = 0
        const int K = static_cast<int>(cx.mf.integer("K", p.cost ? p.cost->horizon_K : 100));
        if (K < 1) throw ValidationError("K must be positive");
        if (p.cost) {
            auto cost = *p.cost;
            cost.horizon_K = K;
            const auto t = closed_loop(p.model, p.meas, cost, p.init, cx.seed);
            etas = t.etas;
            us = t.controls;
        } else {
            Rng rng(cx.seed);
            FilterState cur{0, p.init, {}, 0.0};
            for (int k = 0; k < K; ++k) {
                const cplx eta = sample_eta(cur.state, {}, p.model, p.meas, rng);
                etas.push_back(eta);
                us.emplace_back();
                cur = step(cur, {}, eta, p.model, p.meas);
            }
        }
    }
    const auto fr = run(p.model, p.meas, p.init, us, etas);
    std::ostringstream csv;
    io::write_filter_csv(csv, fr);
    write_file(cx.out / "filter_run.csv", csv.str());
    cx.note("filter: " + std::to_string(fr.horizon()) + " steps -> " + (cx.out / "filter_run.csv").string());
    return 0;
}

json control_summary(const Problem& p, const LqgSolution& sol) {
    json j{{"alpha_opt", sol.control.alpha_opt},
           {"K", sol.control.horizon()},
           {"Omega_0", sol.control.Omega.front()},
           {"d_0", sol.control.d.front()},
           {"Sigma_K", sol.profile.back().Sigma},
           {"z0_re", p.init.z.real()},
           {"z0_im", p.init.z.imag()},
           {"Sigma0", p.init.Sigma},
           {"sigma_correction", p.sigma_correction}};
    return j;
}

int run_control(const Context& cx) {
    const auto p = load_problem(cx.mf);
    if (!p.cost) throw ValidationError("control mode needs a cost file or a continuous model");
    const auto sol = solve(p.model, p.meas, *p.cost, p.init);
    std::ostringstream csv;
    io::write_control_csv(csv, sol.control);
    write_file(cx.out / "control_solution.csv", csv.str());
    write_file(cx.out / "control_summary.json", dump(control_summary(p, sol)));
    cx.note("control: alpha_opt = " + io::fmt(sol.control.alpha_opt));
    return 0;
}

int run_simulate(const Context& cx) {
    const auto p = load_problem(cx.mf);
    if (!p.cost) throw ValidationError("simulate mode needs a cost file or a continuous model");
    const auto n = cx.mf.integer("n", 100000);
    const auto threads = static_cast<unsigned>(cx.mf.integer("threads", 0));
    const auto dumps = cx.mf.integer("trajectory_dumps", 3);
    if (n < 2) throw ValidationError("n must be >= 2");
    if (dumps < 0) throw ValidationError("trajectory_dumps must be >= 0");

    const auto sol = solve(p.model, p.meas, *p.cost, p.init);
    const auto costs = monte_carlo_costs(p.model, p.meas, *p.cost, p.init, sol.control.lambda, n, cx.seed, threads);
    const auto summary = summarize(costs, sol.control.alpha_opt);
    json js = io::to_json(summary);
    js["seed"] = cx.seed;
    js["K"] = p.cost->horizon_K;
    write_file(cx.out / "mc_summary.json", dump(js));

    std::vector<double> abs_z;
    for (std::int64_t i = 0; i < std::min<std::int64_t>(dumps, n); ++i) {
        const auto t = closed_loop(p.model, p.meas, *p.cost, p.init, sol.control.lambda, stream_seed(cx.seed, i));
        std::ostringstream csv;
        io::write_filter_csv(csv, t.posterior);
        char name[64];
        std::snprintf(name, sizeof name, "trajectory_%03lld.csv", static_cast<long long>(i));
        write_file(cx.out / name, csv.str());
        if (i == 0)
            for (const auto& s : t.posterior.states) abs_z.push_back(std::abs(s.state.z));
    }

    std::vector<double> sig, om;
    for (const auto& s : sol.profile) sig.push_back(s.Sigma);
    om = sol.control.Omega;
    write_file(cx.out / "plot_sigma.svg", io::svg_line_plot("Posterior variance", "Sigma_k", {{"Sigma_k", sig}}));
    write_file(cx.out / "plot_omega.svg", io::svg_line_plot("Future-loss weight", "Omega_k", {{"Omega_k", om}}));
    if (!abs_z.empty())
        write_file(cx.out / "plot_abs_z.svg",
                   io::svg_line_plot("Posterior mean modulus (trajectory 0)", "|z_k|", {{"|z_k|", abs_z}}));

    cx.note("simulate: mean_cost = " + io::fmt(summary.mean_cost) + " +- " + io::fmt(summary.stderr_cost) +
            ", alpha_opt = " + io::fmt(summary.alpha_opt_ref));
    return 0;
}

int run_oracle(const Context& cx) {
    oracle::SuiteOptions o;
    o.seed = cx.seed;
    o.scenarios = static_cast<int>(cx.mf.integer("scenarios", o.scenarios));
    o.steps = static_cast<int>(cx.mf.integer("steps", o.steps));
    o.resolution = static_cast<int>(cx.mf.integer("resolution", o.resolution));
    o.fock_dim = static_cast<int>(cx.mf.integer("fock_dim", o.fock_dim));
    if (o.scenarios < 0 || o.steps < 1 || o.resolution < 16) throw ValidationError("bad oracle suite parameters");

    json rep = oracle::run_suite(o);
    if (cx.mf.has("model") || cx.mf.has("continuous_model")) {
        const auto p = load_problem(cx.mf);
        const auto b = oracle::second_moment_bound_check(p.model.units.hbar * p.meas.mu, 1.0, p.model.epsilon,
                                                         p.model.units);
        rep["model_read_out_bound"] = {{"pass", b.pass}, {"bound", b.bound}, {"slack", b.slack}};
        rep["pass"] = rep["pass"].get<bool>() && b.pass;
    }
    write_file(cx.out / "oracle_report.json", dump(rep));
    const bool pass = rep["pass"].get<bool>();
    cx.note(std::string("oracle-check: ") + (pass ? "all checks below thresholds" : "FAILED, see oracle_report.json"));
    if (!pass) throw NumericalError("oracle residuals above documented thresholds");
    return 0;
}

int run_continuum(const Context& cx) {
    const auto c = load_continuous(cx.mf);
    GaussianState init = default_initial_state();
    if (cx.mf.has("init")) init = io::state_from_json(cx.mf.doc.at("init"));
    std::vector<double> dts{0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625};
    if (cx.mf.has("dt_list")) dts = cx.mf.doc.at("dt_list").get<std::vector<double>>();
    const int sub = static_cast<int>(cx.mf.integer("ref_substeps", 8));
    for (double dt : dts) {
        const auto d = matched_line_preset(c, dt);
        const auto rep = validate_model(d.model, d.meas);
        if (!rep.admissible) throw ValidationError(rep.reason);
    }
    const auto rows = continuum_study(c, init, dts, sub);
    std::ostringstream csv;
    io::write_continuum_csv(csv, rows);
    write_file(cx.out / "continuum.csv", csv.str());
    cx.note("continuum: " + std::to_string(rows.size()) + " rows -> " + (cx.out / "continuum.csv").string());
    return 0;
}

int fail(const fs::path& out, int code, const std::string& kind, const std::string& msg) {
    json j{{"error", kind}, {"message", msg}, {"exit_code", code}};
    std::cerr << j.dump() << '\n';
    std::error_code ec;
    if (!out.empty() && fs::is_directory(out, ec)) {
        std::ofstream f(out / "error.json", std::ios::binary);
        f << dump(j);
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum LQG filtering, control and verification for a one-mode open oscillator"};
    std::string manifest_path, out_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("--manifest", manifest_path, "JSON run manifest")->required();
    app.add_option("--seed", seed, "base seed (overrides the manifest)");
    app.add_option("--out", out_dir, "output directory (overrides the manifest)");
    app.add_flag("--quiet", quiet, "suppress progress output");
    CLI11_PARSE(app, argc, argv);

    fs::path out;
    try {
        Context cx{load_manifest(manifest_path), {}, 0, quiet};
        if (!out_dir.empty())
            out = out_dir;
        else if (cx.mf.has("out"))
            out = cx.mf.path("out");
        else
            out = "qlqg_out";
        fs::create_directories(out);
        cx.out = out;
        if (seed) {
            cx.seed = *seed;
        } else if (cx.mf.has("seed")) {
            if (!cx.mf.doc.at("seed").is_number_unsigned()) throw ValidationError("seed must be a nonnegative integer");
            cx.seed = cx.mf.doc.at("seed").get<std::uint64_t>();
        }

        if (cx.mf.mode == "filter") return run_filter(cx);
        if (cx.mf.mode == "control") return run_control(cx);
        if (cx.mf.mode == "simulate") return run_simulate(cx);
        if (cx.mf.mode == "oracle-check") return run_oracle(cx);
        return run_continuum(cx);
    } catch (const ValidationError& e) {
        return fail(out, 2, "validation", e.what());
    } catch (const json::exception& e) {
        return fail(out, 2, "validation", e.what());
    } catch (const SingularInnovation& e) {
        return fail(out, 3, "singular_innovation", e.what());
    } catch (const GridUnderresolved& e) {
        return fail(out, 3, "grid_underresolved", e.what());
    } catch (const ZeroEvidence& e) {
        return fail(out, 3, "zero_evidence", e.what());
    } catch (const TruncationDominated& e) {
        return fail(out, 3, "truncation_dominated", e.what());
    } catch (const NumericalError& e) {
        return fail(out, 3, "numerical", e.what());
    } catch (const std::exception& e) {
        return fail(out, 3, "internal", e.what());
    }
}
