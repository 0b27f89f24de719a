#pragma once

// Reference computations for the tests, written against a real two-component
// state-space picture of the model (x = Re + i Im) and plain Gaussian
// conditioning. Nothing here calls the library's filter or Riccati code.

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "qlqg/model.hpp"

namespace ref {

using qlqg::cplx;
using M2 = Eigen::Matrix2d;
using V2 = Eigen::Vector2d;
using M4 = Eigen::Matrix4d;
using V4 = Eigen::Vector4d;

/// Real matrix of multiplication by c.
inline M2 mul(cplx c) {
    M2 m;
    m << c.real(), -c.imag(), c.imag(), c.real();
    return m;
}

inline V2 vec(cplx c) { return {c.real(), c.imag()}; }
inline cplx cpx(const V2& v) { return {v[0], v[1]}; }

/// Circular complex noise with E[a conj(b)] = c has real cross-covariance mul(c) / 2.
inline M2 circ(cplx c) { return 0.5 * mul(c); }

struct RealModel {
    M2 Phi, B, G, D, Q, S, R;  // S = E[v w^T], R = cov of w incl. the added read-out noise
};

inline RealModel realify(const qlqg::OscillatorModel& m, const qlqg::MeasurementModel& meas) {
    const double h = m.units.hbar;
    return {mul(m.phi),          mul(m.beta),        mul(m.gamma),
            mul(m.delta),        circ(h * m.sigma),  circ(-h * m.upsilon),
            circ(h * (m.nu + meas.mu))};
}

struct Belief {
    V2 mean;
    M2 cov;
    cplx z() const { return cpx(mean); }
    double Sigma(double hbar) const { return cov.trace() / hbar; }  // cov = (hbar Sigma / 2) I
};

/// Joint Gaussian of (x_k, eta_k) given the belief on x_{k-1}, conditioned on eta_k.
/// Also returns the real gain K so that the posterior mean is prior_mean + K (eta - eta_mean).
inline Belief condition(const Belief& b, const RealModel& r, cplx u, cplx eta, M2* gain = nullptr) {
    const V2 uu = vec(u);
    const V2 mx = r.Phi * b.mean + r.B * uu;
    const V2 my = r.G * b.mean + r.D * uu;
    const M2 Pxx = r.Phi * b.cov * r.Phi.transpose() + r.Q;
    const M2 Pxy = r.Phi * b.cov * r.G.transpose() + r.S;
    const M2 Pyy = r.G * b.cov * r.G.transpose() + r.R;
    const M2 K = Pxy * Pyy.inverse();
    if (gain) *gain = K;
    return {mx + K * (vec(eta) - my), Pxx - K * Pxy.transpose()};
}

inline Belief belief(const qlqg::GaussianState& s, double hbar) {
    return {vec(s.z), 0.5 * hbar * s.Sigma * M2::Identity()};
}

/// Exact expected cost of the linear policy u_k = -lambda_k z_k, by propagating the
/// joint mean and covariance of (x_k, z_k) through the closed loop.
inline double policy_cost(const qlqg::OscillatorModel& m, const qlqg::MeasurementModel& meas,
                          const qlqg::CostModel& cost, const qlqg::GaussianState& init,
                          const std::vector<cplx>& lambda) {
    const auto r = realify(m, meas);
    const double h = m.units.hbar;
    // state (x, z); x - z ~ N(0, belief cov) independent of z at k = 0
    V4 mean;
    mean << vec(init.z), vec(init.z);
    M4 C = M4::Zero();
    C.topLeftCorner<2, 2>() = 0.5 * h * init.Sigma * M2::Identity();

    // belief covariance sequence (data free) and gains
    Belief b = belief(init, h);
    const M2 Wx = cost.omega * M2::Identity();
    double total = 0.0;
    auto quad = [](const M2& W, const V2& mu, const M2& P) { return mu.dot(W * mu) + (W * P).trace(); };
    for (int k = 0; k < cost.horizon_K; ++k) {
        const M2 L = mul(-lambda[k]);  // u = L z
        const V2 mx = mean.head<2>(), mz = mean.tail<2>();
        const M2 Cxx = C.topLeftCorner<2, 2>(), Czz = C.bottomRightCorner<2, 2>(), Cxz = C.topRightCorner<2, 2>();
        // omega |x|^2 - 2 Re(vartheta conj(u) x) + vartheta1 |u|^2, with Re(conj(u) c x) = u^T mul(c) x
        const M2 T = mul(cost.vartheta);
        total += quad(Wx, mx, Cxx);
        total -= 2.0 * ((L * mz).dot(T * mx) + (L.transpose() * T * Cxz).trace());
        total += cost.vartheta1 * quad(M2::Identity(), L * mz, L * Czz * L.transpose());

        M2 K;
        b = condition(b, r, cplx{}, cplx{}, &K);  // only the gain and covariance are used
        // x' = Phi x + B L z + v;  z' = Phi z + B L z + K (G (x - z) + w)
        Eigen::Matrix<double, 4, 4> A;
        A << r.Phi, r.B * L, K * r.G, r.Phi + r.B * L - K * r.G;
        Eigen::Matrix<double, 4, 2> Nv, Nw;
        Nv << M2::Identity(), M2::Zero();
        Nw << M2::Zero(), K;
        const M2 Swv = r.S.transpose();
        mean = A * mean;
        C = A * C * A.transpose() + Nv * r.Q * Nv.transpose() + Nw * r.R * Nw.transpose() +
            Nv * r.S * Nw.transpose() + Nw * Swv * Nv.transpose();
    }
    total += cost.Omega_final * (mean.head<2>().squaredNorm() + C.topLeftCorner<2, 2>().trace());
    return total;
}

}  // namespace ref
