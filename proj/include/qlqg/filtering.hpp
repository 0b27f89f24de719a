#pragma once

// Complex Kalman filter for the Glauber-Gaussian posterior of the discrete
// oscillator, and its continuous-time Kalman-Bucy limit.

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "qlqg/errors.hpp"
#include "qlqg/model.hpp"

namespace qlqg {

struct Gain {
    cplx kappa{0.0, 0.0};
    double Psi = 0.0;  // innovation variance in units of hbar
};

/// Gain for the step that consumes Sigma_prev:
/// Psi = |gamma|^2 Sigma_prev + nu + mu, kappa = (phi conj(gamma) Sigma_prev - upsilon) / Psi.
inline Gain gain(double Sigma_prev, const OscillatorModel& m, const MeasurementModel& meas) {
    const double Psi = std::norm(m.gamma) * Sigma_prev + m.nu + meas.mu;
    if (!(Psi > 0.0)) throw SingularInnovation("innovation variance Psi <= 0: no usable output channel");
    return {(m.phi * std::conj(m.gamma) * Sigma_prev - m.upsilon) / Psi, Psi};
}

/// Posterior after step k. At k = 0 no innovation has been seen and kappa = Psi = 0.
struct FilterState {
    int k = 0;
    GaussianState state;
    cplx kappa{0.0, 0.0};
    double Psi = 0.0;
};

inline FilterState step(const FilterState& prev, cplx u, cplx eta, const OscillatorModel& m,
                        const MeasurementModel& meas) {
    const auto g = gain(prev.state.Sigma, m, meas);
    const cplx z = prev.state.z;
    FilterState next;
    next.k = prev.k + 1;
    next.kappa = g.kappa;
    next.Psi = g.Psi;
    next.state.z = m.phi * z + m.beta * u + g.kappa * (eta - m.gamma * z - m.delta * u);
    next.state.Sigma = std::norm(m.phi) * prev.state.Sigma + m.sigma - std::norm(g.kappa) * g.Psi;
    return next;
}

struct FilterRun {
    std::vector<FilterState> states;  // k = 0..K
    std::vector<cplx> controls;       // u_0..u_{K-1}
    std::vector<cplx> etas;           // eta_1..eta_K (stored at index k-1)
    std::vector<cplx> one_shot;       // x_hat_1..x_hat_K, the estimate read as a single measurement
    OscillatorModel model;
    MeasurementModel meas;

    int horizon() const { return static_cast<int>(states.size()) - 1; }
};

/// x_hat_k = phi z_{k-1} + beta u_{k-1} + kappa_k (eta_k - gamma z_{k-1}); it differs
/// from z_k only by the known offset kappa_k delta u_{k-1}.
inline cplx one_shot_estimate(cplx z_prev, cplx u, cplx eta, cplx kappa, const OscillatorModel& m) {
    return m.phi * z_prev + m.beta * u + kappa * (eta - m.gamma * z_prev);
}

inline FilterRun run(const OscillatorModel& m, const MeasurementModel& meas, const GaussianState& init,
                     std::span<const cplx> controls, std::span<const cplx> etas) {
    if (controls.size() != etas.size()) throw ValidationError("controls and etas must have equal length");
    FilterRun r;
    r.model = m;
    r.meas = meas;
    r.controls.assign(controls.begin(), controls.end());
    r.etas.assign(etas.begin(), etas.end());
    r.states.reserve(etas.size() + 1);
    r.one_shot.reserve(etas.size());
    r.states.push_back({0, init, {}, 0.0});
    for (std::size_t i = 0; i < etas.size(); ++i) {
        const auto& prev = r.states.back();
        auto next = step(prev, controls[i], etas[i], m, meas);
        r.one_shot.push_back(one_shot_estimate(prev.state.z, controls[i], etas[i], next.kappa, m));
        r.states.push_back(next);
    }
    return r;
}

struct VarianceStep {
    double Sigma = 0.0;
    cplx kappa{0.0, 0.0};
    double Psi = 0.0;
};

/// Data-free forward Riccati sweep, entries k = 0..K (entry 0 carries Sigma0 only).
inline std::vector<VarianceStep> variance_profile(const OscillatorModel& m, const MeasurementModel& meas,
                                                  double Sigma0, int K) {
    std::vector<VarianceStep> out;
    out.reserve(static_cast<std::size_t>(K) + 1);
    out.push_back({Sigma0, {}, 0.0});
    for (int k = 1; k <= K; ++k) {
        const double prev = out.back().Sigma;
        const auto g = gain(prev, m, meas);
        out.push_back({std::norm(m.phi) * prev + m.sigma - std::norm(g.kappa) * g.Psi, g.kappa, g.Psi});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Continuous time

/// Right-hand side of the variance Riccati ODE
/// dSigma/dt = sigma - (alpha + conj alpha) Sigma - |kappa|^2 nu1, kappa = (conj(gamma) Sigma - upsilon) / nu1.
inline double variance_rate(double Sigma, const ContinuousModel& c, double nu1) {
    const cplx kappa = (std::conj(c.gamma_rate) * Sigma - c.upsilon_rate) / nu1;
    return c.sigma_rate - c.damping() * Sigma - std::norm(kappa) * nu1;
}

/// Matched-line closed form (sigma - gamma Sigma)(mu + gamma Sigma) / (mu + sigma).
inline double matched_line_variance_rate(double Sigma, double gamma, double sigma, double mu) {
    return (sigma - gamma * Sigma) * (mu + gamma * Sigma) / (mu + sigma);
}

struct ContinuousFilterPoint {
    double t = 0.0;
    GaussianState state;
    cplx kappa{0.0, 0.0};
};

/// Innovation record on a uniform grid: d_eta[n] is eta over (t_n, t_{n+1}], u[n] the control held there.
struct ContinuousRecord {
    std::vector<cplx> d_eta;
    std::vector<cplx> u;
};

inline double rk4_step(double y, double h, auto&& f) {
    const double k1 = f(y);
    const double k2 = f(y + 0.5 * h * k1);
    const double k3 = f(y + 0.5 * h * k2);
    const double k4 = f(y + h * k3);
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Sigma(t_n) on n = 0..steps by RK4 with step dt.
inline std::vector<double> continuous_variance(const ContinuousModel& c, double mu_rate, double Sigma0,
                                               double dt, int steps) {
    const double nu1 = c.nu_rate + mu_rate;
    if (!(nu1 > 0.0)) throw SingularInnovation("nu + mu must be > 0 in continuous time");
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(Sigma0);
    auto f = [&](double s) { return variance_rate(s, c, nu1); };
    for (int n = 0; n < steps; ++n) out.push_back(rk4_step(out.back(), dt, f));
    return out;
}

/// Kalman-Bucy filter: dz + alpha z dt = beta u dt + kappa (eta(dt) - (gamma z + delta u) dt).
/// The mean is stepped by explicit Euler against the recorded increments; Sigma by RK4.
inline std::vector<ContinuousFilterPoint> continuous_filter(const ContinuousModel& c, double mu_rate,
                                                            const GaussianState& init,
                                                            const ContinuousRecord& record, double dt) {
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (record.u.size() != record.d_eta.size()) throw ValidationError("record controls/increments mismatch");
    const double nu1 = c.nu_rate + mu_rate;
    if (!(nu1 > 0.0)) throw SingularInnovation("nu + mu must be > 0 in continuous time");

    const int steps = static_cast<int>(record.d_eta.size());
    const auto sigma = continuous_variance(c, mu_rate, init.Sigma, dt, steps);
    auto kappa_at = [&](double s) { return (std::conj(c.gamma_rate) * s - c.upsilon_rate) / nu1; };

    std::vector<ContinuousFilterPoint> path;
    path.reserve(static_cast<std::size_t>(steps) + 1);
    path.push_back({0.0, {init.z, sigma[0]}, kappa_at(sigma[0])});
    for (int n = 0; n < steps; ++n) {
        const cplx z = path.back().state.z;
        const cplx kappa = path.back().kappa;
        const cplx u = record.u[n];
        const cplx dz = -c.alpha * z * dt + c.beta_rate * u * dt +
                        kappa * (record.d_eta[n] - (c.gamma_rate * z + c.delta_rate * u) * dt);
        const double s = sigma[n + 1];
        path.push_back({(n + 1) * dt, {z + dz, s}, kappa_at(s)});
    }
    return path;
}

}  // namespace qlqg
