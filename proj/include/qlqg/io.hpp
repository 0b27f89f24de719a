#pragma once

// File formats: flat JSON model/cost documents, CSV exports with 17
// significant digits, and timestamp-free SVG line plots.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qlqg/control.hpp"
#include "qlqg/filtering.hpp"
#include "qlqg/model.hpp"
#include "qlqg/simulator.hpp"

namespace qlqg::io {

using nlohmann::json;

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline double get(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    if (!j.at(key).is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline double get_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? get(j, key) : fallback;
}

inline cplx get_c(const json& j, const std::string& stem) {
    return {get(j, (stem + "_re").c_str()), get(j, (stem + "_im").c_str())};
}

inline void put_c(json& j, const std::string& stem, cplx v) {
    j[stem + "_re"] = v.real();
    j[stem + "_im"] = v.imag();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

/// Discrete model document: phi_re, phi_im, beta_re, beta_im, gamma_re, gamma_im, delta_re,
/// delta_im, epsilon, sigma, upsilon_re, upsilon_im, nu, mu, hbar.
inline std::pair<OscillatorModel, MeasurementModel> model_from_json(const json& j) {
    using namespace detail;
    OscillatorModel m;
    m.phi = get_c(j, "phi");
    m.beta = get_c(j, "beta");
    m.gamma = get_c(j, "gamma");
    m.delta = get_c(j, "delta");
    m.epsilon = get(j, "epsilon");
    m.sigma = get(j, "sigma");
    m.upsilon = get_c(j, "upsilon");
    m.nu = get(j, "nu");
    m.units.hbar = get(j, "hbar");
    MeasurementModel meas{get(j, "mu")};
    return {m, meas};
}

inline json to_json(const OscillatorModel& m, const MeasurementModel& meas) {
    json j;
    detail::put_c(j, "phi", m.phi);
    detail::put_c(j, "beta", m.beta);
    detail::put_c(j, "gamma", m.gamma);
    detail::put_c(j, "delta", m.delta);
    j["epsilon"] = m.epsilon;
    j["sigma"] = m.sigma;
    detail::put_c(j, "upsilon", m.upsilon);
    j["nu"] = m.nu;
    j["mu"] = meas.mu;
    j["hbar"] = m.units.hbar;
    return j;
}

/// Continuous model document: alpha_re, alpha_im, beta_rate_re, beta_rate_im, gamma_rate_re,
/// gamma_rate_im, delta_rate_re, delta_rate_im, epsilon_rate, sigma_rate, upsilon_rate_re,
/// upsilon_rate_im, nu_rate, tau, theta, omega, hbar; optional Omega_final (default 1).
inline ContinuousModel continuous_from_json(const json& j) {
    using namespace detail;
    ContinuousModel c;
    c.alpha = get_c(j, "alpha");
    c.beta_rate = get_c(j, "beta_rate");
    c.gamma_rate = get_c(j, "gamma_rate");
    c.delta_rate = get_c(j, "delta_rate");
    c.epsilon_rate = get(j, "epsilon_rate");
    c.sigma_rate = get(j, "sigma_rate");
    c.upsilon_rate = get_c(j, "upsilon_rate");
    c.nu_rate = get(j, "nu_rate");
    c.tau = get(j, "tau");
    c.theta = get(j, "theta");
    c.omega = get(j, "omega");
    c.Omega_final = get_or(j, "Omega_final", 1.0);
    c.units.hbar = get(j, "hbar");
    check(c);
    return c;
}

inline json to_json(const ContinuousModel& c) {
    json j;
    detail::put_c(j, "alpha", c.alpha);
    detail::put_c(j, "beta_rate", c.beta_rate);
    detail::put_c(j, "gamma_rate", c.gamma_rate);
    detail::put_c(j, "delta_rate", c.delta_rate);
    j["epsilon_rate"] = c.epsilon_rate;
    j["sigma_rate"] = c.sigma_rate;
    detail::put_c(j, "upsilon_rate", c.upsilon_rate);
    j["nu_rate"] = c.nu_rate;
    j["tau"] = c.tau;
    j["theta"] = c.theta;
    j["omega"] = c.omega;
    j["Omega_final"] = c.Omega_final;
    j["hbar"] = c.units.hbar;
    return j;
}

/// Cost document: Omega_final, omega, vartheta_re, vartheta_im, vartheta1, K.
inline CostModel cost_from_json(const json& j) {
    using namespace detail;
    CostModel c;
    c.Omega_final = get(j, "Omega_final");
    c.omega = get(j, "omega");
    c.vartheta = get_c(j, "vartheta");
    c.vartheta1 = get(j, "vartheta1");
    const double K = get(j, "K");
    if (K != std::floor(K) || K < 1) throw ValidationError("K must be a positive integer");
    c.horizon_K = static_cast<int>(K);
    check(c);
    return c;
}

inline json to_json(const CostModel& c) {
    json j;
    j["Omega_final"] = c.Omega_final;
    j["omega"] = c.omega;
    detail::put_c(j, "vartheta", c.vartheta);
    j["vartheta1"] = c.vartheta1;
    j["K"] = c.horizon_K;
    return j;
}

/// Initial state: z_re, z_im, Sigma.
inline GaussianState state_from_json(const json& j) {
    GaussianState s{detail::get_c(j, "z"), detail::get(j, "Sigma")};
    check(s);
    return s;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("cannot parse '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV

/// Row k: posterior (z_k, Sigma_k), gain and innovation variance of the step that produced it,
/// eta_k (0 at k = 0) and the control u_k applied next (0 at k = K).
inline void write_filter_csv(std::ostream& os, const FilterRun& run) {
    os << "k,z_re,z_im,Sigma,kappa_re,kappa_im,Psi,eta_re,eta_im,u_re,u_im\n";
    const int K = run.horizon();
    for (int k = 0; k <= K; ++k) {
        const auto& s = run.states[k];
        const cplx eta = k > 0 ? run.etas[k - 1] : cplx{};
        const cplx u = k < K ? run.controls[k] : cplx{};
        os << k << ',' << fmt(s.state.z.real()) << ',' << fmt(s.state.z.imag()) << ',' << fmt(s.state.Sigma) << ','
           << fmt(s.kappa.real()) << ',' << fmt(s.kappa.imag()) << ',' << fmt(s.Psi) << ',' << fmt(eta.real()) << ','
           << fmt(eta.imag()) << ',' << fmt(u.real()) << ',' << fmt(u.imag()) << '\n';
    }
}

/// lambda and Upsilon are reported as 0 on the terminal row k = K.
inline void write_control_csv(std::ostream& os, const ControlSolution& s) {
    os << "k,Omega,lambda_re,lambda_im,Upsilon,Gamma,d\n";
    const int K = s.horizon();
    for (int k = 0; k <= K; ++k) {
        const cplx lam = k < K ? s.lambda[k] : cplx{};
        const double ups = k < K ? s.Upsilon[k] : 0.0;
        os << k << ',' << fmt(s.Omega[k]) << ',' << fmt(lam.real()) << ',' << fmt(lam.imag()) << ',' << fmt(ups)
           << ',' << fmt(s.Gamma[k]) << ',' << fmt(s.d[k]) << '\n';
    }
}

inline void write_continuum_csv(std::ostream& os, const std::vector<ContinuumRow>& rows) {
    os << "dt,sigma_error,omega_error,alpha_error,alpha_dt,alpha_ode,sigma_ratio,omega_ratio,alpha_ratio\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << fmt(r.dt) << ',' << fmt(r.sigma_error) << ',' << fmt(r.omega_error) << ',' << fmt(r.alpha_error) << ','
           << fmt(r.alpha_dt) << ',' << fmt(r.alpha_ode);
        if (i == 0) {
            os << ",,,\n";
        } else {
            const auto& p = rows[i - 1];
            os << ',' << fmt(p.sigma_error / r.sigma_error) << ',' << fmt(p.omega_error / r.omega_error) << ','
               << fmt(p.alpha_error / r.alpha_error) << '\n';
        }
    }
}

/// Measurement record: header eta_re,eta_im,u_re,u_im then one row per step.
inline std::pair<std::vector<cplx>, std::vector<cplx>> read_record_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty record file");
    std::vector<cplx> etas, us;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError("bad number in record: '" + cell + "'");
            }
        }
        if (v.size() != 4) throw ValidationError("record rows need 4 columns: eta_re,eta_im,u_re,u_im");
        etas.emplace_back(v[0], v[1]);
        us.emplace_back(v[2], v[3]);
    }
    return {etas, us};
}

inline json to_json(const McSummary& s) {
    return json{{"n", s.n},
                {"mean_cost", s.mean_cost},
                {"stderr", s.stderr_cost},
                {"alpha_opt_ref", s.alpha_opt_ref},
                {"z_score", s.stderr_cost > 0.0 ? (s.mean_cost - s.alpha_opt_ref) / s.stderr_cost : 0.0}};
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
    std::string label;
    std::vector<double> y;
};

/// Line plot of series against k = 0, 1, ...; deterministic output (no timestamps, fixed precision).
inline std::string svg_line_plot(const std::string& title, const std::string& ylabel, const std::vector<Series>& series) {
    const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    double ymin = 0.0, ymax = 0.0;
    std::size_t n = 0;
    bool first = true;
    for (const auto& s : series)
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            ymin = first ? v : std::min(ymin, v);
            ymax = first ? v : std::max(ymax, v);
            first = false;
        }
    for (const auto& s : series) n = std::max(n, s.y.size());
    if (ymax == ymin) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    const double xmax = n > 1 ? static_cast<double>(n - 1) : 1.0;
    auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
    auto py = [&](double y) { return H - B - (H - T - B) * (y - ymin) / (ymax - ymin); };
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    auto g = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", v);
        return std::string(buf);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x=\"" << L - 6 << "\" y=\"" << f(py(yv) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           << "font-size=\"11\">" << g(yv) << "</text>\n";
        const double xv = xmax * i / 4.0;
        os << "<text x=\"" << f(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" "
           << "font-family=\"sans-serif\" font-size=\"11\">" << g(xv) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"12\">k</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"12\" transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[s % 5] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].y.size(); ++i) {
            if (!std::isfinite(series[s].y[i])) continue;
            os << f(px(static_cast<double>(i))) << ',' << f(py(series[s].y[i])) << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (s + 1) << "\" text-anchor=\"end\" fill=\""
           << colors[s % 5] << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace qlqg::io
