#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qlqg/scenarios.hpp"
#include "qlqg/simulator.hpp"
#include "reference.hpp"

using namespace qlqg;
using Catch::Approx;

namespace {

OscillatorModel generic_model() {
    OscillatorModel m;
    m.phi = {0.9, 0.1};
    m.beta = 0.5;
    m.gamma = {0.8, 0.2};
    m.epsilon = 0.5;
    m.sigma = 1.0;
    m.upsilon = 0.1;
    m.nu = 1.0;
    return m;
}

CostModel generic_cost(int K) {
    CostModel c;
    c.Omega_final = 1.0;
    c.omega = 1.0;
    c.vartheta1 = 1.0;
    c.horizon_K = K;
    return c;
}

}  // namespace

TEST_CASE("generic test model is admissible") {
    CHECK(validate_model(generic_model(), MeasurementModel{0.5}).admissible);
}

TEST_CASE("step cost") {
    CostModel c;
    c.omega = 2.0;
    c.vartheta = {0.3, 0.1};
    c.vartheta1 = 1.5;
    const Units u{0.5};
    CHECK(step_cost({{0.0, 0.0}, 0.8}, {}, c, u) == Approx(2.0 * 0.5 * 0.8));
    c.vartheta = 0.0;
    CHECK(step_cost({{1.0, 2.0}, 0.0}, {0.5, -1.0}, c, u) == Approx(2.0 * 5.0 + 1.5 * 1.25));
    CHECK(terminal_cost({{1.0, 1.0}, 0.4}, CostModel{3.0, 0.0, {}, 1.0, 1}, u) == Approx(3.0 * (2.0 + 0.2)));
}

TEST_CASE("sample_eta moments") {
    const auto m = generic_model();
    const MeasurementModel meas{0.5};
    const GaussianState prev{{0.4, -0.3}, 0.7};
    const cplx u{0.2, 0.1};
    const double Psi = gain(prev.Sigma, m, meas).Psi;
    const cplx mean = m.gamma * prev.z + m.delta * u;
    Rng rng(2024);
    const int n = 100000;
    cplx acc{};
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const cplx e = sample_eta(prev, u, m, meas, rng) - mean;
        acc += e;
        sq += std::norm(e);
    }
    CHECK(std::abs(acc / static_cast<double>(n)) < 3.0 * std::sqrt(m.units.hbar * Psi / n));
    CHECK(sq / n == Approx(m.units.hbar * Psi).epsilon(0.02));
}

TEST_CASE("sample_eta in the vanishing-noise limit") {
    OscillatorModel m;
    m.gamma = {1.0, -1.0};
    m.delta = 0.5;
    m.nu = 1e-30;
    Rng rng(1);
    const GaussianState prev{{2.0, 1.0}, 0.0};
    const cplx eta = sample_eta(prev, {1.0, 0.0}, m, {}, rng);
    CHECK(std::abs(eta - (m.gamma * prev.z + m.delta * 1.0)) < 1e-14);
}

TEST_CASE("identical seeds give identical trajectories") {
    const auto m = generic_model();
    const auto c = generic_cost(30);
    const GaussianState init{{1.0, -0.5}, 0.5};
    const auto a = closed_loop(m, {0.5}, c, init, 99);
    const auto b = closed_loop(m, {0.5}, c, init, 99);
    REQUIRE(a.etas.size() == 30);
    for (int k = 0; k < 30; ++k) {
        CHECK(a.etas[k] == b.etas[k]);
        CHECK(a.controls[k] == b.controls[k]);
    }
    CHECK(a.realized_cost == b.realized_cost);
    const auto sol = solve(m, {0.5}, c, init);
    CHECK(closed_loop_cost(m, {0.5}, c, init, sol.control.lambda, 99) == a.realized_cost);
    const auto other = closed_loop(m, {0.5}, c, init, 100);
    CHECK(other.etas[0] != a.etas[0]);
}

TEST_CASE("closed loop applies u = -lambda z and refuses inadmissible models") {
    const auto m = generic_model();
    const auto c = generic_cost(10);
    const GaussianState init{{1.0, 0.0}, 0.2};
    const auto sol = solve(m, {0.5}, c, init);
    const auto t = closed_loop(m, {0.5}, c, init, 5);
    for (int k = 0; k < 10; ++k) CHECK(t.controls[k] == -sol.control.lambda[k] * t.posterior.states[k].state.z);
    CHECK_THROWS_AS(closed_loop(m, {0.1}, c, init, 5), ValidationError);
    CHECK_THROWS_AS(monte_carlo(m, {0.1}, c, init, 10, 1), ValidationError);
}

TEST_CASE("no feedback and no information: open-loop cost in closed form") {
    OscillatorModel m;
    m.phi = {0.9, 0.2};
    m.beta = 1.0;
    m.sigma = 0.5;
    m.nu = 1.0;
    const MeasurementModel meas{0.0};
    REQUIRE(validate_model(m, meas).admissible);
    const auto c = generic_cost(12);
    const GaussianState init{{1.0, 1.0}, 0.3};
    std::vector<cplx> zero(12);
    double expect = 0.0;
    cplx z = init.z;
    double S = init.Sigma;
    for (int k = 0; k < 12; ++k) {
        expect += c.omega * (std::norm(z) + S);
        z *= m.phi;
        S = std::norm(m.phi) * S + m.sigma;
    }
    expect += c.Omega_final * (std::norm(z) + S);
    for (std::uint64_t seed : {1u, 2u, 3u})
        CHECK(closed_loop_cost(m, meas, c, init, zero, seed) == Approx(expect).epsilon(1e-13));
}

TEST_CASE("summary statistics") {
    const std::vector<double> same{2.5, 2.5};
    const auto s = summarize(same, 2.5);
    CHECK(s.mean_cost == 2.5);
    CHECK(s.stderr_cost == 0.0);
    CHECK(s.n == 2);
}

TEST_CASE("standard error shrinks like 1/sqrt(n)") {
    const auto m = generic_model();
    const auto c = generic_cost(10);
    const GaussianState init{{1.0, 0.0}, 0.5};
    double ratio_sum = 0.0;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
        const auto a = monte_carlo(m, {0.5}, c, init, 4000, 1000 + rep);
        const auto b = monte_carlo(m, {0.5}, c, init, 8000, 2000 + rep);
        ratio_sum += a.stderr_cost / b.stderr_cost;
    }
    CHECK(ratio_sum / 5.0 == Approx(std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("Monte Carlo mean matches the minimal loss on a generic model") {
    const auto m = generic_model();
    const auto c = generic_cost(10);
    const GaussianState init{{1.0, -0.5}, 0.5};
    const auto s = monte_carlo(m, {0.5}, c, init, 100000, 12345);
    INFO("mean " << s.mean_cost << " alpha " << s.alpha_opt_ref << " stderr " << s.stderr_cost);
    CHECK(std::abs(s.mean_cost - s.alpha_opt_ref) < 3.0 * s.stderr_cost);
    CHECK(s.alpha_opt_ref == Approx(ref::policy_cost(m, {0.5}, c, init, solve(m, {0.5}, c, init).control.lambda)));
}

TEST_CASE("results do not depend on the thread count") {
    const auto m = generic_model();
    const auto c = generic_cost(20);
    const GaussianState init{{1.0, 0.0}, 0.2};
    const auto sol = solve(m, {0.5}, c, init);
    const auto one = monte_carlo_costs(m, {0.5}, c, init, sol.control.lambda, 5001, 7, 1);
    for (unsigned t : {2u, 3u, 8u, 0u}) CHECK(monte_carlo_costs(m, {0.5}, c, init, sol.control.lambda, 5001, 7, t) == one);
}

TEST_CASE("innovations are white") {
    const auto m = generic_model();
    const MeasurementModel meas{0.5};
    const int K = 20000;
    const auto c = generic_cost(K);
    const GaussianState init{{1.0, 0.0}, 0.5};
    const auto t = closed_loop(m, meas, c, init, 31337);
    std::vector<double> x;  // real and imaginary parts, each of unit variance
    for (int k = 1; k <= K; ++k) {
        const auto& prev = t.posterior.states[k - 1].state;
        const cplx e = (t.etas[k - 1] - m.gamma * prev.z - m.delta * t.controls[k - 1]) /
                       std::sqrt(0.5 * m.units.hbar * t.posterior.states[k].Psi);
        x.push_back(e.real());
        x.push_back(e.imag());
    }
    const double n = static_cast<double>(x.size());
    double mean = 0.0, var = 0.0, lag = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    // lag-1 correlation between successive complex innovations, per component
    for (std::size_t i = 2; i < x.size(); ++i) lag += (x[i] - mean) * (x[i - 2] - mean);
    lag /= (n - 2) * var;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(lag) < 3.0 / std::sqrt(n));
}

TEST_CASE("continuum study") {
    SECTION("conserved variance is reproduced exactly") {
        ContinuousModel c;
        c.nu_rate = 1.0;
        c.beta_rate = 1.0;
        c.omega = 0.5;
        c.theta = 1.0;
        const std::vector<double> dts{0.02, 0.01, 0.005};
        const auto rows = continuum_study(c, {{1.0, 0.0}, 0.4}, dts);
        for (const auto& r : rows) CHECK(r.sigma_error == 0.0);
    }
    SECTION("first-order convergence and the continuous minimal loss") {
        const std::vector<double> dts{0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625};
        const auto rows = continuum_study(default_continuous_model(), default_initial_state(), dts);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i - 1].sigma_error / rows[i].sigma_error == Approx(2.0).margin(0.5));
            CHECK(rows[i - 1].omega_error / rows[i].omega_error == Approx(2.0).margin(0.5));
            CHECK(rows[i - 1].alpha_error / rows[i].alpha_error == Approx(2.0).margin(0.5));
        }
        CHECK(rows.back().alpha_error / rows.back().alpha_ode < 1e-3);
    }
    SECTION("bad dt lists are rejected") {
        const std::vector<double> up{0.01, 0.02};
        CHECK_THROWS_AS(continuum_study(default_continuous_model(), default_initial_state(), up), ValidationError);
        const std::vector<double> odd{0.3};
        CHECK_THROWS_AS(continuum_study(default_continuous_model(), default_initial_state(), odd), ValidationError);
        CHECK_THROWS_AS(continuum_study(default_continuous_model(), default_initial_state(), std::vector<double>{}),
                        ValidationError);
    }
}
