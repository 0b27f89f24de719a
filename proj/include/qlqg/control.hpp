#pragma once

// Backward dynamic programming for the quadratic loss: control Riccati
// recursion, feedback gains, the auxiliary value-function arrays and the
// minimal loss of the optimal (linear feedback + coherent measurement) strategy.

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "qlqg/filtering.hpp"
#include "qlqg/model.hpp"

namespace qlqg {

struct ControlSolution {
    std::vector<double> Omega;   // k = 0..K
    std::vector<cplx> lambda;    // k = 0..K-1; u_k = -lambda_k z_k
    std::vector<double> Upsilon; // k = 0..K-1
    std::vector<double> Gamma;   // k = 0..K, Gamma_K = 0
    std::vector<double> d;       // k = 0..K, d_K = 0
    double alpha_opt = std::numeric_limits<double>::quiet_NaN();

    int horizon() const { return static_cast<int>(Omega.size()) - 1; }
};

/// Per-step increment of the constant term of the value function:
/// hbar (Omega_k sigma + Gamma_k (sigma + 2 Re(kappa_k conj(upsilon)) + nu1 |kappa_k|^2)).
inline double value_increment(double Omega_k, double Gamma_k, cplx kappa_k, const OscillatorModel& m,
                              const MeasurementModel& meas) {
    const double nu1 = m.nu + meas.mu;
    const double inner = m.sigma + 2.0 * std::real(kappa_k * std::conj(m.upsilon)) + nu1 * std::norm(kappa_k);
    return m.units.hbar * (Omega_k * m.sigma + Gamma_k * inner);
}

/// Backward sweep from Omega_K = Omega_final. Gains lambda_k consume Omega_{k+1};
/// Gamma and d need the filter gains kappa_k from `profile` (size K + 1).
inline ControlSolution riccati_backward(const OscillatorModel& m, const CostModel& cost,
                                        const MeasurementModel& meas,
                                        std::span<const VarianceStep> profile) {
    check(cost);
    const int K = cost.horizon_K;
    if (static_cast<int>(profile.size()) != K + 1)
        throw ValidationError("variance profile length must be K + 1");

    ControlSolution s;
    s.Omega.assign(K + 1, 0.0);
    s.lambda.assign(K, cplx{});
    s.Upsilon.assign(K, 0.0);
    s.Gamma.assign(K + 1, 0.0);
    s.d.assign(K + 1, 0.0);

    s.Omega[K] = cost.Omega_final;
    for (int k = K - 1; k >= 0; --k) {
        const double next = s.Omega[k + 1];
        const double ups = std::norm(m.beta) * next + cost.vartheta1;
        const cplx lam = (m.phi * std::conj(m.beta) * next - cost.vartheta) / ups;
        s.Upsilon[k] = ups;
        s.lambda[k] = lam;
        s.Omega[k] = std::norm(m.phi) * next + cost.omega - std::norm(lam) * ups;
    }

    for (int k = K - 1; k >= 0; --k) {
        const cplx kappa_next = profile[k + 1].kappa;
        s.Gamma[k] = std::norm(s.lambda[k]) * s.Upsilon[k] +
                     std::norm(m.phi - kappa_next * m.gamma) * s.Gamma[k + 1];
    }

    // Explicit tail sums, so that d_{k-1} - d_k can be checked against the increment.
    std::vector<double> inc(K + 1, 0.0);
    for (int i = 1; i <= K; ++i) inc[i] = value_increment(s.Omega[i], s.Gamma[i], profile[i].kappa, m, meas);
    for (int k = 0; k <= K; ++k) {
        double acc = 0.0;
        for (int i = k + 1; i <= K; ++i) acc += inc[i];
        s.d[k] = acc;
    }
    return s;
}

/// alpha = Omega_0 |z0|^2 + hbar (Omega_0 Sigma0
///         + sum_{k=1..K} (Omega_k sigma + conj(lambda_{k-1}) (phi conj(beta) Omega_k - vartheta) Sigma_{k-1})).
inline double minimal_loss(const ControlSolution& sol, std::span<const VarianceStep> profile, cplx z0,
                           double Sigma0, const OscillatorModel& m, const CostModel& cost) {
    const int K = sol.horizon();
    if (static_cast<int>(profile.size()) != K + 1 || static_cast<int>(sol.lambda.size()) != K)
        throw ValidationError("control solution and variance profile lengths disagree");
    double tail = sol.Omega[0] * Sigma0;
    for (int k = 1; k <= K; ++k) {
        const cplx Lambda = m.phi * std::conj(m.beta) * sol.Omega[k] - cost.vartheta;
        tail += sol.Omega[k] * m.sigma + std::real(std::conj(sol.lambda[k - 1]) * Lambda) * profile[k - 1].Sigma;
    }
    return sol.Omega[0] * std::norm(z0) + m.units.hbar * tail;
}

inline cplx feedback(cplx z, cplx lambda_k) { return -lambda_k * z; }

/// Filter profile, backward sweep and minimal loss in one call.
struct LqgSolution {
    std::vector<VarianceStep> profile;
    ControlSolution control;
};

inline LqgSolution solve(const OscillatorModel& m, const MeasurementModel& meas, const CostModel& cost,
                         const GaussianState& init) {
    LqgSolution out;
    out.profile = variance_profile(m, meas, init.Sigma, cost.horizon_K);
    out.control = riccati_backward(m, cost, meas, out.profile);
    out.control.alpha_opt = minimal_loss(out.control, out.profile, init.z, init.Sigma, m, cost);
    return out;
}

// ---------------------------------------------------------------------------
// Continuous time

inline cplx continuous_gain(double Omega, const ContinuousModel& c) {
    return (std::conj(c.beta_rate) * Omega - c.vartheta()) / c.vartheta1();
}

/// dOmega/dt from -dOmega/dt + (alpha + conj alpha) Omega = omega - |lambda|^2 vartheta1.
inline double omega_rate(double Omega, const ContinuousModel& c) {
    return c.damping() * Omega - c.omega + std::norm(continuous_gain(Omega, c)) * c.vartheta1();
}

/// Matched-line closed form of dOmega/dt: -(omega - gamma Omega)(theta + gamma Omega) / (theta + omega).
inline double matched_line_omega_rate(double Omega, double gamma, double omega, double theta) {
    return -(omega - gamma * Omega) * (theta + gamma * Omega) / (theta + omega);
}

struct ContinuousControlPoint {
    double t = 0.0;
    double Omega = 0.0;
    cplx lambda{0.0, 0.0};
};

/// Backward RK4 integration from Omega(tau) = Omega_final, on t_n = n dt, n = 0..round(tau/dt).
inline std::vector<ContinuousControlPoint> continuous_riccati(const ContinuousModel& c, double dt) {
    check(c);
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (!(c.vartheta1() > 0.0)) throw ValidationError("vartheta1 = omega + theta must be > 0");
    const int steps = std::max(1, static_cast<int>(std::lround(c.tau / dt)));
    std::vector<ContinuousControlPoint> path(steps + 1);
    double Omega = c.Omega_final;
    auto f = [&](double o) { return omega_rate(o, c); };
    for (int n = steps; n >= 0; --n) {
        path[n] = {n * dt, Omega, continuous_gain(Omega, c)};
        if (n > 0) Omega = rk4_step(Omega, -dt, f);
    }
    return path;
}

/// Composite Simpson (trapezoid on a trailing odd interval) of samples on a uniform grid.
inline double integrate_uniform(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    if (n < 2) return 0.0;
    const std::size_t intervals = n - 1;
    if (intervals == 1) return 0.5 * h * (f[0] + f[1]);
    // Simpson pairs, closed by a 3/8 rule over the last three intervals when the count is odd
    const std::size_t pairs_end = intervals % 2 == 0 ? intervals : intervals - 3;
    double acc = 0.0;
    for (std::size_t i = 0; i + 2 <= pairs_end; i += 2) acc += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
    if (pairs_end != intervals)
        acc += 3.0 * h / 8.0 * (f[n - 4] + 3.0 * f[n - 3] + 3.0 * f[n - 2] + f[n - 1]);
    return acc;
}

/// Continuous minimal loss
/// Omega(0) |z|^2 + hbar (Omega(0) Sigma + int_0^tau (Omega sigma + |conj(beta) Omega - vartheta|^2 Sigma / vartheta1) dt),
/// with Sigma(t) from the coherent-measurement Kalman-Bucy variance and Omega(t) from continuous_riccati.
inline double continuous_minimal_loss(const ContinuousModel& c, const GaussianState& init, double dt) {
    const auto ctrl = continuous_riccati(c, dt);
    const int steps = static_cast<int>(ctrl.size()) - 1;
    const auto sigma = continuous_variance(c, std::max(0.0, c.epsilon_rate), init.Sigma, dt, steps);
    std::vector<double> integrand(ctrl.size());
    for (std::size_t n = 0; n < ctrl.size(); ++n) {
        const double Om = ctrl[n].Omega;
        const cplx Lambda = std::conj(c.beta_rate) * Om - c.vartheta();
        integrand[n] = Om * c.sigma_rate + std::norm(Lambda) * sigma[n] / c.vartheta1();
    }
    return ctrl[0].Omega * std::norm(init.z) +
           c.units.hbar * (ctrl[0].Omega * init.Sigma + integrate_uniform(integrand, dt));
}

}  // namespace qlqg
