#pragma once

// Brute-force Bayes filter on a discretized Glauber phase plane.
//
// Densities are taken with respect to d xi = dRe xi dIm xi / (pi hbar). A prior is
// pushed through the Gaussian transition kernel of the oscillator (state noise,
// output noise and added measurement noise) and conditioned on the observed eta
// by direct evaluation of the Bayes ratio. Nothing here uses the Kalman gain.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qlqg/errors.hpp"
#include "qlqg/model.hpp"

namespace qlqg::oracle {

/// Square cell-centred grid of density values over the complex plane.
/// values[iy * resolution + ix] sits at x = Re, y = Im of point(ix, iy).
struct PhaseGrid {
    int resolution = 0;
    cplx center{0.0, 0.0};
    double half_width = 1.0;
    double hbar = 1.0;
    std::vector<double> values;

    double cell() const { return 2.0 * half_width / resolution; }
    double coord(double c0, int i) const { return c0 - half_width + (i + 0.5) * cell(); }
    cplx point(int ix, int iy) const { return {coord(center.real(), ix), coord(center.imag(), iy)}; }
    /// Measure of one cell under d xi.
    double cell_measure() const { return cell() * cell() / (std::numbers::pi * hbar); }

    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * cell_measure();
    }

    void normalize() {
        const double m = mass();
        if (!(m > 0.0)) throw ZeroEvidence("grid has no mass to normalize");
        for (auto& v : values) v /= m;
    }

    static PhaseGrid make(cplx center, double half_width, int resolution, double hbar) {
        if (resolution < 2) throw ValidationError("grid resolution must be >= 2");
        if (!(half_width > 0.0)) throw ValidationError("grid half-width must be > 0");
        PhaseGrid g;
        g.resolution = resolution;
        g.center = center;
        g.half_width = half_width;
        g.hbar = hbar;
        g.values.assign(static_cast<std::size_t>(resolution) * resolution, 0.0);
        return g;
    }
};

/// Circular Glauber-Gaussian density (1/Sigma) exp(-|xi - z|^2 / (hbar Sigma)).
inline double gaussian_density(cplx xi, cplx z, double Sigma, double hbar) {
    return std::exp(-std::norm(xi - z) / (hbar * Sigma)) / Sigma;
}

inline PhaseGrid sample_gaussian(const GaussianState& s, double hbar, double half_width, int resolution) {
    if (!(s.Sigma > 0.0)) throw ValidationError("cannot sample a zero-variance Gaussian on a grid");
    auto g = PhaseGrid::make(s.z, half_width, resolution, hbar);
    for (int iy = 0; iy < resolution; ++iy)
        for (int ix = 0; ix < resolution; ++ix)
            g.values[iy * resolution + ix] = gaussian_density(g.point(ix, iy), s.z, s.Sigma, hbar);
    return g;
}

struct GridMoments {
    cplx mean{0.0, 0.0};
    double variance = 0.0;  // E|xi - mean|^2 / hbar
};

inline GridMoments grid_moments(const PhaseGrid& g) {
    const double w = g.cell_measure();
    double mass = 0.0;
    cplx first{0.0, 0.0};
    for (int iy = 0; iy < g.resolution; ++iy)
        for (int ix = 0; ix < g.resolution; ++ix) {
            const double p = g.values[iy * g.resolution + ix] * w;
            mass += p;
            first += p * g.point(ix, iy);
        }
    GridMoments out;
    out.mean = first / mass;
    double second = 0.0;
    for (int iy = 0; iy < g.resolution; ++iy)
        for (int ix = 0; ix < g.resolution; ++ix)
            second += g.values[iy * g.resolution + ix] * w * std::norm(g.point(ix, iy) - out.mean);
    out.variance = second / mass / g.hbar;
    return out;
}

/// A distribution as point masses: either the cells of a grid or a single delta.
struct WeightedPoints {
    std::vector<cplx> points;
    std::vector<double> weights;  // probabilities, summing to 1
    double spacing = 0.0;         // grid cell size, 0 for a delta

    static WeightedPoints delta(cplx at) { return {{at}, {1.0}, 0.0}; }

    static WeightedPoints from_grid(const PhaseGrid& g, double prune = 0.0) {
        WeightedPoints wp;
        wp.spacing = g.cell();
        const double w = g.cell_measure();
        double peak = 0.0;
        for (double v : g.values) peak = std::max(peak, v);
        double total = 0.0;
        for (int iy = 0; iy < g.resolution; ++iy)
            for (int ix = 0; ix < g.resolution; ++ix) {
                const double v = g.values[iy * g.resolution + ix];
                if (v <= prune * peak || v <= 0.0) continue;
                wp.points.push_back(g.point(ix, iy));
                wp.weights.push_back(v * w);
                total += v * w;
            }
        for (auto& x : wp.weights) x /= total;
        return wp;
    }

    cplx mean() const {
        cplx m{0.0, 0.0};
        for (std::size_t j = 0; j < points.size(); ++j) m += weights[j] * points[j];
        return m;
    }

    double variance(double hbar) const {
        const cplx m = mean();
        double s = 0.0;
        for (std::size_t j = 0; j < points.size(); ++j) s += weights[j] * std::norm(points[j] - m);
        return s / hbar;
    }
};

struct GridOptions {
    int resolution = 256;
    double width_sigmas = 6.0;  // half-width = width_sigmas * sqrt(hbar (Sigma + sigma + 1))
    double prune = 1e-18;       // drop prior points below this fraction of the peak weight
    int block = 2048;           // prior points per GEMM block
};

/// Joint density g(xi, eta) of the next state and the measured output, kept in
/// factorized form over the prior points:
///   g(xi, eta) = sum_j p_j q1(xi - phi xi_j - beta u, eta - gamma xi_j - delta u),
/// where q1 is the circular Gaussian of (v, w + added noise) with covariance
/// [[sigma, -upsilon], [-conj(upsilon), nu + mu]] (times hbar).
class JointDensity {
public:
    JointDensity(WeightedPoints prior, const OscillatorModel& m, const MeasurementModel& meas, cplx u,
                 GridOptions opts)
        : prior_(std::move(prior)), m_(m), u_(u), opts_(opts) {
        nu1_ = m.nu + meas.mu;
        if (!(nu1_ > 0.0)) throw SingularInnovation("output noise nu + mu must be > 0 for the grid oracle");
        cond_var_ = m.sigma - std::norm(m.upsilon) / nu1_;
        cond_shift_ = -m.upsilon / nu1_;

        const double prior_var = prior_.variance(m.units.hbar);
        state_mean_ = m.phi * prior_.mean() + m.beta * u;
        output_mean_ = m.gamma * prior_.mean() + m.delta * u;
        half_width_ = opts.width_sigmas * std::sqrt(m.units.hbar * (prior_var + m.sigma + 1.0));

        if (prior_.spacing > 0.0 && std::norm(m.gamma) > 0.0 &&
            m.units.hbar * nu1_ / std::norm(m.gamma) < 4.0 * prior_.spacing * prior_.spacing)
            throw GridUnderresolved("likelihood narrower than the prior grid resolves");
    }

    const OscillatorModel& model() const { return m_; }
    cplx state_mean() const { return state_mean_; }
    cplx output_mean() const { return output_mean_; }
    double half_width() const { return half_width_; }
    double conditional_variance() const { return cond_var_; }

    /// Marginal density r(eta) w.r.t. d eta.
    double evidence(cplx eta) const {
        const double hbar = m_.units.hbar;
        double r = 0.0;
        for (std::size_t j = 0; j < prior_.points.size(); ++j) {
            const cplx b = eta - m_.gamma * prior_.points[j] - m_.delta * u_;
            r += prior_.weights[j] * std::exp(-std::norm(b) / (hbar * nu1_)) / nu1_;
        }
        return r;
    }

    /// g(xi, eta) from the unfactored bivariate Gaussian kernel.
    double density(cplx xi, cplx eta) const {
        const double hbar = m_.units.hbar;
        const double det = m_.sigma * nu1_ - std::norm(m_.upsilon);
        if (!(det > 0.0)) throw ValidationError("transition kernel is degenerate");
        // C = [[sigma, c12], [conj c12, nu1]] with c12 = -upsilon; C^-1 = [[nu1, -c12], [-conj c12, sigma]] / det
        const cplx c12 = -m_.upsilon;
        double g = 0.0;
        for (std::size_t j = 0; j < prior_.points.size(); ++j) {
            const cplx a = xi - m_.phi * prior_.points[j] - m_.beta * u_;
            const cplx b = eta - m_.gamma * prior_.points[j] - m_.delta * u_;
            const double quad = (nu1_ * std::norm(a) + m_.sigma * std::norm(b) -
                                 2.0 * std::real(std::conj(a) * c12 * b)) / det;
            g += prior_.weights[j] * std::exp(-quad / hbar) / det;
        }
        return g;
    }

    /// Unnormalized slice g(., eta) on the output window.
    PhaseGrid slice(cplx eta) const {
        const double hbar = m_.units.hbar;
        const int R = opts_.resolution;
        auto out = PhaseGrid::make(state_mean_, half_width_, R, hbar);
        if (!(hbar * cond_var_ >= 4.0 * out.cell() * out.cell()))
            throw GridUnderresolved("conditional state-noise variance below 4 grid-cell areas");

        // Likelihood-weighted prior points and their conditional means.
        std::vector<double> w;
        std::vector<cplx> centres;
        w.reserve(prior_.points.size());
        centres.reserve(prior_.points.size());
        double peak = 0.0;
        for (std::size_t j = 0; j < prior_.points.size(); ++j) {
            const cplx b = eta - m_.gamma * prior_.points[j] - m_.delta * u_;
            const double lw = prior_.weights[j] * std::exp(-std::norm(b) / (hbar * nu1_)) / nu1_;
            w.push_back(lw);
            centres.push_back(m_.phi * prior_.points[j] + m_.beta * u_ + cond_shift_ * b);
            peak = std::max(peak, lw);
        }
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < w.size(); ++j)
            if (w[j] > opts_.prune * peak && w[j] > 0.0) keep.push_back(j);

        Eigen::VectorXd xs(R), ys(R);
        for (int i = 0; i < R; ++i) {
            xs[i] = out.coord(out.center.real(), i);
            ys[i] = out.coord(out.center.imag(), i);
        }
        const double inv = 1.0 / (hbar * cond_var_);
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(R, R);
        const int B = std::max(1, opts_.block);
        for (std::size_t start = 0; start < keep.size(); start += B) {
            const int n = static_cast<int>(std::min<std::size_t>(B, keep.size() - start));
            Eigen::MatrixXd kx(R, n), ky(R, n);
            for (int c = 0; c < n; ++c) {
                const std::size_t j = keep[start + c];
                const double scale = w[j] / cond_var_;
                for (int i = 0; i < R; ++i) {
                    const double dx = xs[i] - centres[j].real();
                    const double dy = ys[i] - centres[j].imag();
                    kx(i, c) = scale * std::exp(-dx * dx * inv);
                    ky(i, c) = std::exp(-dy * dy * inv);
                }
            }
            acc.noalias() += kx * ky.transpose();
        }
        // acc(ix, iy) in column-major order is values[iy * R + ix].
        std::copy(acc.data(), acc.data() + static_cast<std::ptrdiff_t>(R) * R, out.values.begin());
        return out;
    }

    /// Moments of g(., eta) / r(eta) read directly off the mixture of conditional
    /// Gaussians, one per prior point. Needs no output grid, so it also covers a
    /// degenerate (zero conditional variance) transition.
    GridMoments mixture_moments(cplx eta) const {
        const double hbar = m_.units.hbar;
        double total = 0.0;
        cplx first{0.0, 0.0};
        std::vector<double> w(prior_.points.size());
        std::vector<cplx> c(prior_.points.size());
        for (std::size_t j = 0; j < prior_.points.size(); ++j) {
            const cplx b = eta - m_.gamma * prior_.points[j] - m_.delta * u_;
            w[j] = prior_.weights[j] * std::exp(-std::norm(b) / (hbar * nu1_));
            c[j] = m_.phi * prior_.points[j] + m_.beta * u_ + cond_shift_ * b;
            total += w[j];
            first += w[j] * c[j];
        }
        if (!(total > 0.0)) throw ZeroEvidence("observed eta has vanishing evidence under the prediction");
        GridMoments out;
        out.mean = first / total;
        double second = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) second += w[j] * std::norm(c[j] - out.mean);
        out.variance = second / total / hbar + cond_var_;
        return out;
    }

    /// r(eta) sampled on a grid around the predicted output mean.
    PhaseGrid eta_marginal(int resolution, double half_width) const {
        auto g = PhaseGrid::make(output_mean_, half_width, resolution, m_.units.hbar);
        for (int iy = 0; iy < resolution; ++iy)
            for (int ix = 0; ix < resolution; ++ix) g.values[iy * resolution + ix] = evidence(g.point(ix, iy));
        return g;
    }

private:
    WeightedPoints prior_;
    OscillatorModel m_;
    cplx u_;
    GridOptions opts_;
    double nu1_ = 0.0;
    double cond_var_ = 0.0;
    cplx cond_shift_{0.0, 0.0};
    cplx state_mean_{0.0, 0.0};
    cplx output_mean_{0.0, 0.0};
    double half_width_ = 0.0;
};

inline JointDensity grid_predict(const WeightedPoints& prior, const OscillatorModel& m,
                                 const MeasurementModel& meas, cplx u, GridOptions opts = {}) {
    return JointDensity(prior, m, meas, u, opts);
}

inline JointDensity grid_predict(const PhaseGrid& prior, const OscillatorModel& m, const MeasurementModel& meas,
                                 cplx u, GridOptions opts = {}) {
    return JointDensity(WeightedPoints::from_grid(prior, opts.prune), m, meas, u, opts);
}

/// Posterior p(xi | eta) = g(xi, eta) / r(eta), renormalized on the grid.
inline PhaseGrid grid_condition(const JointDensity& joint, cplx eta) {
    const double r = joint.evidence(eta);
    if (!(r >= 1e-300)) throw ZeroEvidence("observed eta has vanishing evidence under the prediction");
    auto g = joint.slice(eta);
    for (auto& v : g.values) v /= r;
    g.normalize();
    return g;
}

/// Chained grid filter over a record; returns posterior moments for k = 0..K.
inline std::vector<GridMoments> grid_filter(const OscillatorModel& m, const MeasurementModel& meas,
                                            const GaussianState& init, const std::vector<cplx>& controls,
                                            const std::vector<cplx>& etas, GridOptions opts = {}) {
    if (controls.size() != etas.size()) throw ValidationError("controls and etas must have equal length");
    std::vector<GridMoments> out{{init.z, init.Sigma}};
    WeightedPoints prior;
    if (init.Sigma > 0.0) {
        const double hw = opts.width_sigmas * std::sqrt(m.units.hbar * (init.Sigma + m.sigma + 1.0));
        prior = WeightedPoints::from_grid(sample_gaussian(init, m.units.hbar, hw, opts.resolution), opts.prune);
    } else {
        prior = WeightedPoints::delta(init.z);
    }
    for (std::size_t k = 0; k < etas.size(); ++k) {
        const auto joint = grid_predict(prior, m, meas, controls[k], opts);
        const auto post = grid_condition(joint, etas[k]);
        out.push_back(grid_moments(post));
        prior = WeightedPoints::from_grid(post, opts.prune);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Antinormal -> normal symbol

/// Normal symbol p0(xi) = int exp(-|xi - xi'|^2 / hbar) p(xi') d xi' of a grid density,
/// on the same grid (separable Gaussian kernel applied along both axes).
inline PhaseGrid normal_symbol(const PhaseGrid& antinormal) {
    const int R = antinormal.resolution;
    Eigen::MatrixXd k(R, R);
    for (int a = 0; a < R; ++a)
        for (int b = 0; b < R; ++b) {
            const double d = (a - b) * antinormal.cell();
            k(a, b) = std::exp(-d * d / antinormal.hbar);
        }
    Eigen::Map<const Eigen::MatrixXd> p(antinormal.values.data(), R, R);
    Eigen::MatrixXd q = k * p * k.transpose() * antinormal.cell_measure();
    PhaseGrid out = antinormal;
    std::copy(q.data(), q.data() + static_cast<std::ptrdiff_t>(R) * R, out.values.begin());
    return out;
}

/// Max deviation between the numerically convolved normal symbol of a Gaussian with
/// variance Sigma and the closed form Gaussian of variance Sigma + 1. Sigma = 0 is a
/// point mass, whose normal symbol is exp(-|xi|^2 / hbar).
inline double convolution_check(double Sigma, int samples, double hbar = 1.0) {
    if (!(Sigma >= 0.0)) throw ValidationError("Sigma must be >= 0");
    const double hw = 8.0 * std::sqrt(hbar * (Sigma + 1.0));
    auto expected = [&](cplx xi) { return gaussian_density(xi, {0.0, 0.0}, Sigma + 1.0, hbar); };
    PhaseGrid normal;
    if (Sigma == 0.0) {
        normal = PhaseGrid::make({0.0, 0.0}, hw, samples, hbar);
        for (int iy = 0; iy < samples; ++iy)
            for (int ix = 0; ix < samples; ++ix)
                normal.values[iy * samples + ix] = std::exp(-std::norm(normal.point(ix, iy)) / hbar);
    } else {
        normal = normal_symbol(sample_gaussian({{0.0, 0.0}, Sigma}, hbar, hw, samples));
    }
    double worst = 0.0;
    for (int iy = 0; iy < samples; ++iy)
        for (int ix = 0; ix < samples; ++ix)
            worst = std::max(worst, std::abs(normal.values[iy * samples + ix] - expected(normal.point(ix, iy))));
    return worst;
}

// ---------------------------------------------------------------------------
// Measurement noise bound

struct MomentBoundReport {
    bool pass = false;
    double bound = 0.0;  // max(epsilon |kappa|^2 hbar, 0)
    double slack = 0.0;  // second_moment - bound
};

/// Checks int |zeta|^2 n(zeta) d zeta >= max(epsilon |kappa|^2 hbar, 0) for a read-out
/// noise density n with the given second moment (physical units).
inline MomentBoundReport second_moment_bound_check(double second_moment, cplx kappa, double epsilon,
                                                   Units units = {}, double tolerance = 1e-12) {
    MomentBoundReport r;
    r.bound = std::max(epsilon * std::norm(kappa) * units.hbar, 0.0);
    r.slack = second_moment - r.bound;
    r.pass = second_moment >= 0.0 && r.slack >= -tolerance;
    return r;
}

}  // namespace qlqg::oracle
