#pragma once

// Closed-loop Monte Carlo for the optimal strategy. Measurement records are
// drawn from the innovation law of the filter; the cost of a record is the
// posterior expectation of the normal-ordered quadratic loss along it, which
// is an unbiased estimator of the criterion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "qlqg/control.hpp"
#include "qlqg/filtering.hpp"
#include "qlqg/model.hpp"

namespace qlqg {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of trajectory `index` under `base_seed`: splitmix64(base_seed ^ splitmix64(index)).
/// Streams depend only on (base_seed, index), never on scheduling.
inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t index) {
    return splitmix64(base_seed ^ splitmix64(index));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// eta ~ circular complex Gaussian with mean gamma z + delta u and variance hbar Psi,
/// Psi computed from the variance of `prev`.
inline cplx sample_eta(const GaussianState& prev, cplx u, const OscillatorModel& m,
                       const MeasurementModel& meas, Rng& rng) {
    const auto g = gain(prev.Sigma, m, meas);
    const double s = std::sqrt(0.5 * m.units.hbar * g.Psi);
    const double re = rng.normal();
    const double im = rng.normal();
    return m.gamma * prev.z + m.delta * u + cplx{s * re, s * im};
}

/// Posterior expectation of omega :|x|^2: - 2 Re(vartheta conj(u) x) + vartheta1 |u|^2.
inline double step_cost(const GaussianState& s, cplx u, const CostModel& cost, const Units& units) {
    return cost.omega * (std::norm(s.z) + units.hbar * s.Sigma) -
           2.0 * std::real(cost.vartheta * std::conj(u) * s.z) + cost.vartheta1 * std::norm(u);
}

inline double terminal_cost(const GaussianState& s, const CostModel& cost, const Units& units) {
    return cost.Omega_final * (std::norm(s.z) + units.hbar * s.Sigma);
}

struct Trajectory {
    std::vector<cplx> etas;
    std::vector<cplx> controls;
    FilterRun posterior;
    double realized_cost = 0.0;
};

/// Runs u_k = -lambda_k z_k for k = 0..K-1 with lambda taken from `lambda` (size K).
inline Trajectory closed_loop(const OscillatorModel& m, const MeasurementModel& meas, const CostModel& cost,
                              const GaussianState& init, std::span<const cplx> lambda, std::uint64_t seed) {
    const int K = cost.horizon_K;
    if (static_cast<int>(lambda.size()) != K) throw ValidationError("gain sequence must have length K");
    require_admissible(m, meas);
    Rng rng(seed);
    Trajectory t;
    t.etas.reserve(K);
    t.controls.reserve(K);

    FilterState cur{0, init, {}, 0.0};
    std::vector<FilterState> states{cur};
    std::vector<cplx> one_shot;
    states.reserve(K + 1);
    one_shot.reserve(K);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
        const cplx u = feedback(cur.state.z, lambda[k]);
        total += step_cost(cur.state, u, cost, m.units);
        const cplx eta = sample_eta(cur.state, u, m, meas, rng);
        auto next = step(cur, u, eta, m, meas);
        one_shot.push_back(one_shot_estimate(cur.state.z, u, eta, next.kappa, m));
        t.controls.push_back(u);
        t.etas.push_back(eta);
        states.push_back(next);
        cur = next;
    }
    total += terminal_cost(cur.state, cost, m.units);

    t.realized_cost = total;
    t.posterior.states = std::move(states);
    t.posterior.controls = t.controls;
    t.posterior.etas = t.etas;
    t.posterior.one_shot = std::move(one_shot);
    t.posterior.model = m;
    t.posterior.meas = meas;
    return t;
}

inline Trajectory closed_loop(const OscillatorModel& m, const MeasurementModel& meas, const CostModel& cost,
                              const GaussianState& init, std::uint64_t seed) {
    const auto sol = solve(m, meas, cost, init);
    return closed_loop(m, meas, cost, init, sol.control.lambda, seed);
}

/// Cost of a record without keeping the trajectory; same stream as closed_loop.
inline double closed_loop_cost(const OscillatorModel& m, const MeasurementModel& meas, const CostModel& cost,
                               const GaussianState& init, std::span<const cplx> lambda, std::uint64_t seed) {
    Rng rng(seed);
    FilterState cur{0, init, {}, 0.0};
    double total = 0.0;
    for (int k = 0; k < cost.horizon_K; ++k) {
        const cplx u = feedback(cur.state.z, lambda[k]);
        total += step_cost(cur.state, u, cost, m.units);
        const cplx eta = sample_eta(cur.state, u, m, meas, rng);
        cur = step(cur, u, eta, m, meas);
    }
    return total + terminal_cost(cur.state, cost, m.units);
}

struct McSummary {
    std::int64_t n = 0;
    double mean_cost = 0.0;
    double stderr_cost = 0.0;
    double alpha_opt_ref = 0.0;
};

/// Costs of trajectories 0..n-1, trajectory i seeded by stream_seed(base_seed, i).
/// Work is split over `threads` workers (0 = hardware concurrency); the output is
/// indexed by trajectory and does not depend on the thread count.
inline std::vector<double> monte_carlo_costs(const OscillatorModel& m, const MeasurementModel& meas,
                                             const CostModel& cost, const GaussianState& init,
                                             std::span<const cplx> lambda, std::int64_t n,
                                             std::uint64_t base_seed, unsigned threads = 0) {
    if (n < 1) throw ValidationError("trajectory count must be positive");
    if (static_cast<int>(lambda.size()) != cost.horizon_K) throw ValidationError("gain sequence must have length K");
    require_admissible(m, meas);
    std::vector<double> costs(static_cast<std::size_t>(n));
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::int64_t>(threads, n));

    auto work = [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i)
            costs[i] = closed_loop_cost(m, meas, cost, init, lambda, stream_seed(base_seed, i));
    };
    if (threads <= 1) {
        work(0, n);
        return costs;
    }
    {
        std::vector<std::jthread> pool;
        const std::int64_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::int64_t b = t * chunk;
            const std::int64_t e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }
    return costs;
}

inline McSummary summarize(std::span<const double> costs, double alpha_opt_ref) {
    McSummary s;
    s.n = static_cast<std::int64_t>(costs.size());
    s.alpha_opt_ref = alpha_opt_ref;
    double mean = 0.0;
    for (double c : costs) mean += c;
    mean /= static_cast<double>(costs.size());
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    s.mean_cost = mean;
    s.stderr_cost = costs.size() > 1 ? std::sqrt(ss / static_cast<double>(costs.size() - 1) /
                                                 static_cast<double>(costs.size()))
                                     : 0.0;
    return s;
}

/// Optimal-strategy Monte Carlo; `gain_scale` multiplies every lambda_k (1 = optimal).
inline McSummary monte_carlo(const OscillatorModel& m, const MeasurementModel& meas, const CostModel& cost,
                             const GaussianState& init, std::int64_t n, std::uint64_t base_seed,
                             unsigned threads = 0, double gain_scale = 1.0) {
    if (n < 2) throw ValidationError("monte_carlo needs n >= 2");
    const auto sol = solve(m, meas, cost, init);
    std::vector<cplx> lambda = sol.control.lambda;
    for (auto& l : lambda) l *= gain_scale;
    const auto costs = monte_carlo_costs(m, meas, cost, init, lambda, n, base_seed, threads);
    return summarize(costs, sol.control.alpha_opt);
}

// ---------------------------------------------------------------------------
// Continuum study

struct ContinuumRow {
    double dt = 0.0;
    double sigma_error = 0.0;  // max_k |Sigma_k - Sigma(t_k)|
    double omega_error = 0.0;  // max_k |Omega_k - Omega(t_k)|
    double alpha_error = 0.0;  // |alpha_dt - alpha_ode|
    double alpha_dt = 0.0;
    double alpha_ode = 0.0;
};

/// Compares the matched discretization at each dt against RK4 solutions of the
/// continuous Riccati equations on a reference grid of step min(dt) / ref_substeps.
/// Every dt must be an integer multiple of the reference step and divide tau.
inline std::vector<ContinuumRow> continuum_study(const ContinuousModel& c, const GaussianState& init,
                                                 std::span<const double> dt_list, int ref_substeps = 8) {
    check(c);
    if (dt_list.empty()) throw ValidationError("dt list must be nonempty");
    for (std::size_t i = 1; i < dt_list.size(); ++i)
        if (!(dt_list[i] < dt_list[i - 1])) throw ValidationError("dt list must be decreasing");

    const double h = dt_list.back() / ref_substeps;
    const int ref_steps = static_cast<int>(std::lround(c.tau / h));
    const double mu_rate = std::max(0.0, c.epsilon_rate);
    const auto sigma_ref = continuous_variance(c, mu_rate, init.Sigma, h, ref_steps);
    const auto omega_ref = continuous_riccati(c, h);
    const double alpha_ref = continuous_minimal_loss(c, init, h);

    std::vector<ContinuumRow> rows;
    for (double dt : dt_list) {
        const int stride = static_cast<int>(std::lround(dt / h));
        if (std::abs(stride * h - dt) > 1e-9 * dt) throw ValidationError("dt is not a multiple of the reference step");
        const auto d = matched_line_preset(c, dt);
        if (d.cost.horizon_K * stride != ref_steps) throw ValidationError("dt must divide tau");
        const auto sol = solve(d.model, d.meas, d.cost, init);

        ContinuumRow row;
        row.dt = dt;
        for (int k = 0; k <= d.cost.horizon_K; ++k) {
            row.sigma_error = std::max(row.sigma_error, std::abs(sol.profile[k].Sigma - sigma_ref[k * stride]));
            row.omega_error = std::max(row.omega_error, std::abs(sol.control.Omega[k] - omega_ref[k * stride].Omega));
        }
        row.alpha_dt = sol.control.alpha_opt;
        row.alpha_ode = alpha_ref;
        row.alpha_error = std::abs(row.alpha_dt - alpha_ref);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qlqg
