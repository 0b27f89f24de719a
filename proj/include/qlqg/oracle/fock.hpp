#pragma once

// Truncated number-basis checks of the coherent-projector identities that make
// the heterodyne (coherent) read-out optimal:
//   x ~ annihilation:  (z - x) #n(z - x)# = 0,
//   x ~ creation:      #n(z - x)# (z - x) = 0,
// where #.# acts with x first and x* second, and n is the Gaussian read-out
// noise at the Heisenberg-minimal variance.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "qlqg/errors.hpp"
#include "qlqg/model.hpp"

namespace qlqg::oracle {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct FockOperator {
    int dim = 0;
    CMatrix matrix;

    bool is_hermitian(double tol = 1e-12) const { return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= tol; }
};

inline FockOperator annihilation(int dim) {
    FockOperator a{dim, CMatrix::Zero(dim, dim)};
    for (int n = 1; n < dim; ++n) a.matrix(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline FockOperator creation(int dim) {
    auto a = annihilation(dim);
    a.matrix.adjointInPlace();
    return a;
}

/// Amplitudes e^{-|w|^2/2} w^n / sqrt(n!) for n < dim.
inline CVector coherent_state(cplx w, int dim) {
    CVector v(dim);
    cplx amp = std::exp(-0.5 * std::norm(w));
    for (int n = 0; n < dim; ++n) {
        v[n] = amp;
        amp *= w / std::sqrt(static_cast<double>(n + 1));
    }
    return v;
}

/// Poisson tail P(N >= dim) of the coherent state |w>.
inline double tail_mass(cplx w, int dim) {
    const double lam = std::norm(w);
    // log of e^{-lam} lam^n / n! at n = dim, then sum the (decreasing past the mode) series
    double log_term = -lam + dim * std::log(std::max(lam, 1e-300)) - std::lgamma(dim + 1.0);
    if (lam == 0.0) return 0.0;
    double term = std::exp(log_term), total = 0.0;
    for (int n = dim; n < dim + 2000 && term > 1e-30 * std::max(total, 1e-300); ++n) {
        total += term;
        term *= lam / (n + 1);
    }
    return total;
}

inline cplx ipow(cplx x, int k) {
    cplx r{1.0, 0.0};
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

/// Matrix of prefactor * :exp(-lambda (a* - conj w)(a - w)): read off the normal symbol:
/// <m|O|n> = sqrt(m! n!) [beta-bar^m alpha^n] f(beta-bar, alpha) e^{beta-bar alpha}.
inline FockOperator normal_ordered_gaussian(cplx w, double lambda, double prefactor, int dim) {
    FockOperator op{dim, CMatrix::Zero(dim, dim)};
    const double p = 1.0 - lambda;
    const cplx A = lambda * std::conj(w);  // coefficient of alpha
    const cplx B = lambda * w;             // coefficient of beta-bar
    const double scale = prefactor * std::exp(-lambda * std::norm(w));
    for (int m = 0; m < dim; ++m)
        for (int n = 0; n < dim; ++n) {
            cplx acc{0.0, 0.0};
            for (int j = 0; j <= std::min(m, n); ++j) {
                const double lg = 0.5 * (std::lgamma(m + 1.0) + std::lgamma(n + 1.0)) - std::lgamma(j + 1.0) -
                                  std::lgamma(n - j + 1.0) - std::lgamma(m - j + 1.0);
                const double pj = j == 0 ? 1.0 : std::pow(p, j);
                acc += std::exp(lg) * pj * ipow(A, n - j) * ipow(B, m - j);
            }
            op.matrix(m, n) = scale * acc;
        }
    return op;
}

/// Antinormally ordered Gaussian int (1/s) e^{-|alpha - b|^2 / s} |alpha><alpha| d^2 alpha / pi,
/// by tensor-grid quadrature; s = 0 is the coherent projector |b><b|.
inline FockOperator antinormal_gaussian(cplx b, double s, int dim, int nodes = 121) {
    FockOperator op{dim, CMatrix::Zero(dim, dim)};
    if (s == 0.0) {
        const CVector v = coherent_state(b, dim);
        op.matrix = v * v.adjoint();
        return op;
    }
    if (!(s > 0.0)) throw ValidationError("antinormal Gaussian width must be >= 0");
    const double hw = 7.0 * std::sqrt(s);
    const double h = 2.0 * hw / nodes;
    for (int iy = 0; iy < nodes; ++iy)
        for (int ix = 0; ix < nodes; ++ix) {
            const cplx alpha = b + cplx{-hw + (ix + 0.5) * h, -hw + (iy + 0.5) * h};
            const double wgt = std::exp(-std::norm(alpha - b) / s) / s * h * h / std::numbers::pi;
            const CVector v = coherent_state(alpha, dim);
            op.matrix.noalias() += wgt * (v * v.adjoint());
        }
    return op;
}

inline double spectral_norm(const CMatrix& m) {
    Eigen::JacobiSVD<CMatrix> svd(m);
    return svd.singularValues()(0);
}

enum class Channel {
    Annihilation,  // epsilon > 0: x_hat = c sqrt(hbar) a
    Creation,      // epsilon < 0: x_hat = c sqrt(hbar) a*
};

inline std::string to_string(Channel c) { return c == Channel::Annihilation ? "annihilation" : "creation"; }

/// Smallest admissible read-out variance (dimensionless, second moment / hbar).
inline double heisenberg_min_variance(cplx kappa_scale, Channel ch) {
    return ch == Channel::Annihilation ? std::norm(kappa_scale) : 0.0;
}

struct ProjectorReport {
    Channel channel = Channel::Annihilation;
    int dim = 0;
    double n_variance = 0.0;
    double min_variance = 0.0;
    double residual = 0.0;     // sup over the z-sample of the spectral norm of the identity
    double max_tail_mass = 0.0;
    int samples = 0;
};

/// Test points with |z| <= 3: the real axis plus two rings.
inline std::vector<cplx> default_z_samples() {
    std::vector<cplx> zs;
    for (double x : {-3.0, -1.5, 0.0, 1.5, 3.0}) zs.emplace_back(x, 0.0);
    for (double r : {1.5, 3.0})
        for (int k = 0; k < 8; ++k) zs.push_back(std::polar(r, std::numbers::pi * (k + 0.5) / 4.0));
    return zs;
}

/// For each z, builds #n(z - x_hat)# for a Gaussian n of variance hbar * n_variance and
/// reports the norm of the channel's identity. Throws TruncationDominated when a
/// test coherent state leaks more than `max_tail` past the truncation.
inline ProjectorReport coherent_projector_check(cplx kappa_scale, double n_variance, int dim,
                                                Channel ch = Channel::Annihilation, Units units = {},
                                                const std::vector<cplx>& z_samples = default_z_samples(),
                                                double max_tail = 1e-6) {
    if (dim < 20) throw ValidationError("Fock dimension must be >= 20");
    if (std::abs(kappa_scale) == 0.0) throw ValidationError("kappa_scale must be nonzero");
    const double min_var = heisenberg_min_variance(kappa_scale, ch);
    if (n_variance < min_var) throw ValidationError("read-out variance below the Heisenberg minimum");

    ProjectorReport rep;
    rep.channel = ch;
    rep.dim = dim;
    rep.n_variance = n_variance;
    rep.min_variance = min_var;
    rep.samples = static_cast<int>(z_samples.size());

    const cplx scale = kappa_scale * std::sqrt(units.hbar);
    const CMatrix a = annihilation(dim).matrix;
    const CMatrix ad = creation(dim).matrix;
    const CMatrix id = CMatrix::Identity(dim, dim);
    for (cplx z : z_samples) {
        const cplx w = z / scale;  // z - x_hat = scale (w - a) or scale (w - a*)
        double res = 0.0;
        if (ch == Channel::Annihilation) {
            rep.max_tail_mass = std::max(rep.max_tail_mass, tail_mass(w, dim));
            // (1/v) :exp(-|z - x_hat|^2 / (hbar v)): = (1/v) :exp(-(|c|^2 / v) |w - a|^2):
            const auto op = normal_ordered_gaussian(w, std::norm(kappa_scale) / n_variance, 1.0 / n_variance, dim);
            res = spectral_norm(scale * (w * id - a) * op.matrix);
        } else {
            const cplx b = std::conj(w);
            rep.max_tail_mass = std::max(rep.max_tail_mass, tail_mass(b, dim));
            const auto op = antinormal_gaussian(b, n_variance / std::norm(kappa_scale), dim);
            res = spectral_norm(op.matrix * (scale * (w * id - ad)));
        }
        rep.residual = std::max(rep.residual, res);
    }
    if (rep.max_tail_mass > max_tail)
        throw TruncationDominated("test coherent states exceed the tail-mass budget at dim " + std::to_string(dim));
    return rep;
}

}  // namespace qlqg::oracle
