#pragma once

// Randomized admissible scenarios used by the oracle suite and the tests.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "qlqg/filtering.hpp"
#include "qlqg/model.hpp"
#include "qlqg/simulator.hpp"

namespace qlqg {

struct Scenario {
    OscillatorModel model;
    MeasurementModel meas;
    GaussianState init;
    std::vector<cplx> controls;
    std::vector<cplx> etas;
};

/// Draws an admissible model whose transition kernel is a proper density with
/// conditional state-noise variance >= 0.15 (so the phase-grid oracle resolves it),
/// then samples a `steps`-long record from the model's own innovation law.
inline Scenario random_scenario(std::uint64_t seed, int steps = 3) {
    std::mt19937_64 eng(splitmix64(seed));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto phase = [&] { return std::polar(1.0, 2.0 * std::numbers::pi * U(eng)); };

    Scenario s;
    auto& m = s.model;
    m.units.hbar = 0.5 + U(eng);
    m.phi = (0.6 + 0.5 * U(eng)) * phase();
    m.beta = (0.2 + 0.8 * U(eng)) * phase();
    m.gamma = (0.3 + 0.9 * U(eng)) * phase();
    m.delta = 0.5 * U(eng) * phase();
    m.epsilon = -0.5 + 1.5 * U(eng);
    m.nu = std::max(0.3, std::norm(m.gamma) - m.epsilon + 0.1) + 0.5 * U(eng);
    s.meas.mu = std::max(0.0, m.epsilon) + 0.3 * U(eng);
    const double nu1 = m.nu + s.meas.mu;
    m.upsilon = 0.6 * std::sqrt(nu1) * U(eng) * phase();
    // smallest sigma meeting both the Heisenberg bound and the oracle's kernel width
    m.sigma = 0.0;
    const double heis = admissibility_sigma_shift(m);
    const double classical = std::norm(m.upsilon) / nu1 + 0.15;
    m.sigma = std::max(heis, classical) + 0.3 * U(eng);

    s.init.z = 1.0 * U(eng) * phase();
    s.init.Sigma = U(eng) < 0.2 ? 0.0 : 0.2 + 0.8 * U(eng);

    Rng rng(stream_seed(seed, 0xC0FFEE));
    FilterState cur{0, s.init, {}, 0.0};
    for (int k = 0; k < steps; ++k) {
        const cplx u = 0.3 * U(eng) * phase();
        const cplx eta = sample_eta(cur.state, u, m, s.meas, rng);
        s.controls.push_back(u);
        s.etas.push_back(eta);
        cur = step(cur, u, eta, m, s.meas);
    }
    return s;
}

}  // namespace qlqg
