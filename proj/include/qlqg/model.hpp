#pragma once

// Parameters of the one-mode open oscillator, its measurement channel and
// quadratic cost, in both the discrete-step and the continuous-rate form.
//
// Conventions:
//   - Variances are dimensionless: the physical variance of a Glauber-Gaussian
//     with parameter Sigma is hbar * Sigma.
//   - Boltzmann's constant is 1; temperatures are given in energy units.
//   - All Gaussians are circular, <(x-z)(x-z)> = 0, so one real variance suffices.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "qlqg/errors.hpp"

namespace qlqg {

using cplx = std::complex<double>;

struct Units {
    double hbar = 1.0;
};

/// One-step dynamics x_k = phi x_{k-1} + beta u_{k-1} + v_k,
/// output y_k = gamma x_{k-1} + delta u_{k-1} + w_k.
/// Noise covariances: E v v* = sigma, E v w* = -upsilon, E w w* = nu (times hbar).
struct OscillatorModel {
    cplx phi{1.0, 0.0};
    cplx beta{0.0, 0.0};
    cplx gamma{0.0, 0.0};
    cplx delta{0.0, 0.0};
    double epsilon = 0.0;  // [y, y*] = epsilon * hbar
    double sigma = 0.0;
    cplx upsilon{0.0, 0.0};
    double nu = 0.0;
    Units units{};
};

/// Indirect measurement: y is read through added Gaussian noise of variance hbar * mu.
struct MeasurementModel {
    double mu = 0.0;

    /// Heterodyne (coherent) measurement: the smallest noise compatible with the channel.
    static MeasurementModel coherent(double epsilon) { return {std::max(0.0, epsilon)}; }
};

/// Quadratic loss omega |x|^2 - 2 Re(vartheta conj(u) x) + vartheta1 |u|^2 per step,
/// Omega_final |x_K|^2 at the horizon.
struct CostModel {
    double Omega_final = 0.0;
    double omega = 0.0;
    cplx vartheta{0.0, 0.0};
    double vartheta1 = 1.0;
    int horizon_K = 1;
};

/// Continuous-time rates: dx + alpha x dt = beta u dt + v(dt), y(dt) = gamma x dt + delta u dt + w(dt).
/// The cost runs at rate omega |x|^2 - 2 Re(vartheta conj(u) x) + vartheta1 |u|^2 with
/// the matched-line choice vartheta = omega, vartheta1 = omega + theta.
struct ContinuousModel {
    cplx alpha{0.0, 0.0};
    cplx beta_rate{0.0, 0.0};
    cplx gamma_rate{0.0, 0.0};
    cplx delta_rate{0.0, 0.0};
    double epsilon_rate = 0.0;
    double sigma_rate = 0.0;
    cplx upsilon_rate{0.0, 0.0};
    double nu_rate = 0.0;
    double theta = 0.0;
    double omega = 0.0;
    double Omega_final = 1.0;
    double tau = 1.0;
    Units units{};

    cplx vartheta() const { return {omega, 0.0}; }
    double vartheta1() const { return omega + theta; }
    double damping() const { return 2.0 * alpha.real(); }  // alpha + conj(alpha)
};

struct GaussianState {
    cplx z{0.0, 0.0};
    double Sigma = 0.0;
};

inline void check(const Units& u) {
    if (!(u.hbar > 0.0)) throw ValidationError("hbar must be positive");
}

inline void check(const CostModel& c) {
    if (!(c.Omega_final >= 0.0)) throw ValidationError("Omega_final must be >= 0");
    if (!(c.omega >= 0.0)) throw ValidationError("omega must be >= 0");
    if (!(c.vartheta1 > 0.0)) throw ValidationError("vartheta1 must be > 0");
    if (c.horizon_K < 1) throw ValidationError("horizon K must be >= 1");
}

inline void check(const ContinuousModel& c) {
    check(c.units);
    if (!(c.tau > 0.0)) throw ValidationError("tau must be > 0");
    if (!(c.theta >= 0.0) || !(c.omega >= 0.0)) throw ValidationError("theta, omega must be >= 0");
    if (!(c.Omega_final >= 0.0)) throw ValidationError("Omega_final must be >= 0");
}

inline void check(const GaussianState& s) {
    if (!(s.Sigma >= 0.0)) throw ValidationError("posterior variance Sigma must be >= 0");
}

// ---------------------------------------------------------------------------
// Admissibility

struct AdmissibilityReport {
    bool admissible = false;
    double min_eigenvalue = 0.0;  // of [[sigma,-ups],[-conj ups,nu]] - commutator matrix
    double mu_slack = 0.0;        // mu - max(0, epsilon)
    double tolerance = 1e-12;
    std::string reason;
};

/// Smallest eigenvalue of the Hermitian matrix [[a, b], [conj(b), c]].
inline double min_eigenvalue_2x2(double a, cplx b, double c) {
    const double mean = 0.5 * (a + c);
    const double half_gap = std::hypot(0.5 * (a - c), std::abs(b));
    return mean - half_gap;
}

/// Entries (a, b, c) of the Heisenberg constraint matrix
/// [[sigma, -ups], [-conj ups, nu]] - [[|phi|^2 - 1, phi conj(gamma)], [gamma conj(phi), |gamma|^2 - eps]].
struct ConstraintMatrix {
    double a;
    cplx b;
    double c;
};

inline ConstraintMatrix constraint_matrix(const OscillatorModel& m) {
    return {m.sigma - (std::norm(m.phi) - 1.0),
            -m.upsilon - m.phi * std::conj(m.gamma),
            m.nu - (std::norm(m.gamma) - m.epsilon)};
}

inline AdmissibilityReport validate_model(const OscillatorModel& m, const MeasurementModel& meas,
                                          double tolerance = 1e-12) {
    AdmissibilityReport r;
    r.tolerance = tolerance;
    const auto cm = constraint_matrix(m);
    r.min_eigenvalue = min_eigenvalue_2x2(cm.a, cm.b, cm.c);
    r.mu_slack = meas.mu - std::max(0.0, m.epsilon);
    const bool finite = std::isfinite(r.min_eigenvalue) && std::isfinite(r.mu_slack);
    const bool psd = finite && r.min_eigenvalue >= -tolerance;
    const bool meas_ok = finite && r.mu_slack >= -tolerance;
    const bool hbar_ok = m.units.hbar > 0.0;
    r.admissible = psd && meas_ok && hbar_ok;
    if (!finite) {
        r.reason = "non-finite model parameters";
    } else if (!hbar_ok) {
        r.reason = "hbar must be positive";
    } else if (!psd) {
        r.reason = "Heisenberg constraint violated: noise covariance does not dominate the "
                   "commutator matrix, min eigenvalue " + std::to_string(r.min_eigenvalue);
    } else if (!meas_ok) {
        r.reason = "measurement second-moment bound violated: mu < max(0, epsilon)";
    }
    return r;
}

/// Throws ValidationError carrying the report's reason unless the model is admissible.
inline void require_admissible(const OscillatorModel& m, const MeasurementModel& meas) {
    const auto r = validate_model(m, meas);
    if (!r.admissible) throw ValidationError(r.reason);
}

// ---------------------------------------------------------------------------
// Presets

struct ThermalPreset {
    ContinuousModel model;
    GaussianState init;
    double occupation = 0.0;  // (exp(hbar Omega / T) - 1)^-1
    bool saturated = false;   // occupation hit the cap
    bool init_physical = true;
};

/// Matched-line oscillator in equilibrium with a bath at temperature T (energy units).
///
/// Rates follow the matched-line tie-in beta = gamma = epsilon = alpha + conj(alpha),
/// delta = -gamma, nu = upsilon = sigma = gamma * n. The initial variance is the
/// equilibrium occupation n. For T < 0 (active medium) n < 0 is not a valid
/// variance; the initial state is then the stationary Sigma = 0 and
/// init_physical is false.
inline ThermalPreset thermal_preset(double Omega_osc, double T, double gamma_line, Units units = {},
                                    double occupation_cap = 1e12) {
    check(units);
    if (T == 0.0 || !std::isfinite(Omega_osc)) throw ValidationError("thermal preset needs T != 0");
    if (gamma_line == 0.0) throw ValidationError("thermal preset needs gamma != 0");

    ThermalPreset p;
    const double x = units.hbar * Omega_osc / T;
    double n = std::isinf(T) ? std::numeric_limits<double>::infinity() : 1.0 / std::expm1(x);
    if (!std::isfinite(n) || std::abs(n) > occupation_cap) {
        n = std::copysign(occupation_cap, std::isfinite(n) ? n : 1.0);
        p.saturated = true;
    }
    p.occupation = n;

    auto& c = p.model;
    c.alpha = {0.5 * gamma_line, 0.0};
    c.beta_rate = gamma_line;
    c.gamma_rate = gamma_line;
    c.delta_rate = -gamma_line;
    c.epsilon_rate = gamma_line;
    c.sigma_rate = gamma_line * n;
    c.upsilon_rate = c.sigma_rate;
    c.nu_rate = c.sigma_rate;
    c.units = units;

    if (n >= 0.0) {
        p.init = {cplx{0.0, 0.0}, n};
    } else {
        p.init = {cplx{0.0, 0.0}, 0.0};
        p.init_physical = false;
    }
    return p;
}

struct DiscretizedModel {
    OscillatorModel model;
    MeasurementModel meas;
    CostModel cost;
    double sigma_correction = 0.0;  // added to sigma to restore the discrete Heisenberg bound
};

/// Smallest nonnegative s such that sigma + s makes the constraint matrix PSD.
/// Returns 0 when already admissible or when no sigma shift can help (c <= 0).
inline double admissibility_sigma_shift(const OscillatorModel& m) {
    const auto cm = constraint_matrix(m);
    if (cm.c <= 0.0) return 0.0;
    const double need = std::norm(cm.b) / cm.c - cm.a;
    return need > 0.0 ? need : 0.0;
}

/// First-order discretization on a step dt: phi = 1 - alpha dt and every other rate
/// scaled by dt; mu = max(0, epsilon). Cost rates scale the same way and the
/// horizon is round(tau / dt).
///
/// The scaled matched line violates the discrete Heisenberg bound at O(dt^2)
/// (it sits exactly on the continuous boundary), so the minimal O(dt^2) state-noise
/// shift is added to sigma and reported in sigma_correction.
inline DiscretizedModel matched_line_preset(const ContinuousModel& c, double dt) {
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    DiscretizedModel d;
    auto& m = d.model;
    m.phi = 1.0 - c.alpha * dt;
    m.beta = c.beta_rate * dt;
    m.gamma = c.gamma_rate * dt;
    m.delta = c.delta_rate * dt;
    m.epsilon = c.epsilon_rate * dt;
    m.sigma = c.sigma_rate * dt;
    m.upsilon = c.upsilon_rate * dt;
    m.nu = c.nu_rate * dt;
    m.units = c.units;
    d.meas = MeasurementModel::coherent(m.epsilon);

    d.sigma_correction = admissibility_sigma_shift(m);
    m.sigma += d.sigma_correction;

    d.cost.Omega_final = c.Omega_final;
    d.cost.omega = c.omega * dt;
    d.cost.vartheta = c.vartheta() * dt;
    d.cost.vartheta1 = c.vartheta1() * dt;
    d.cost.horizon_K = std::max(1, static_cast<int>(std::lround(c.tau / dt)));
    return d;
}

/// The default end-to-end scenario: matched line with gamma = 1, alpha = 0.5,
/// sigma = 0.2, epsilon = 1, theta = 1, omega = 0.5, tau = 1, hbar = 1.
inline ContinuousModel default_continuous_model() {
    ContinuousModel c;
    c.alpha = {0.5, 0.0};
    c.beta_rate = 1.0;
    c.gamma_rate = 1.0;
    c.delta_rate = -1.0;
    c.epsilon_rate = 1.0;
    c.sigma_rate = 0.2;
    c.upsilon_rate = 0.2;
    c.nu_rate = 0.2;
    c.theta = 1.0;
    c.omega = 0.5;
    c.Omega_final = 1.0;
    c.tau = 1.0;
    c.units = {1.0};
    return c;
}

inline GaussianState default_initial_state() { return {cplx{1.0, 0.0}, 0.3}; }

}  // namespace qlqg
