// Independent reference computations shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace oracle {

using isac::cd;
using isac::CMat;
using isac::CVec;

inline isac::PolarPosition cartesian_advance(const isac::PolarPosition& p, const isac::Velocity& v,
                                             double dt) {
    const double x = p.dist * std::cos(p.theta) + v.speed * dt * std::cos(v.heading);
    const double y = p.dist * std::sin(p.theta) + v.speed * dt * std::sin(v.heading);
    return {std::atan2(y, x), std::hypot(x, y)};
}

inline cd steering_entry(double theta, int n, int i) {
    const double ph = -M_PI * i * std::sin(theta);
    return cd(std::cos(ph), std::sin(ph)) / std::sqrt(static_cast<double>(n));
}

// Tap d, user u, antenna i, by explicit summation over paths.
inline cd tap_entry(const isac::ChannelState& s, const isac::SystemConfig& c, int d, int u, int i,
                    double t) {
    const auto& paths = s.users[u].paths;
    const double ts = c.sample_period();
    cd acc = 0.0;
    for (const auto& p : paths) {
        const double g = isac::raised_cosine(d * ts - p.delay_s, ts);
        const double ph = p.doppler_norm * t;
        acc += p.gain * g * cd(std::cos(ph), std::sin(ph)) * steering_entry(p.aod, c.n_tx, i);
    }
    return std::sqrt(static_cast<double>(c.n_tx) / paths.size()) * acc;
}

// Brute-force OFDM link for one symbol: IFFT, cyclic prefix, per-sample time-varying
// convolution, prefix removal, FFT. x is N_t x M with column k the subcarrier-k input.
inline CMat ofdm_time_domain(const isac::ChannelState& s, const isac::SystemConfig& c,
                             int symbol, const CMat& x) {
    const int M = c.n_sub;
    const int cp = c.cp_len;
    const int nt = c.n_tx;
    const int U = c.n_users;
    std::vector<CVec> tx(M + cp, CVec::Zero(nt));
    for (int n = 0; n < M; ++n) {
        CVec acc = CVec::Zero(nt);
        for (int k = 0; k < M; ++k) acc += x.col(k) * std::polar(1.0, 2.0 * M_PI * k * n / M);
        tx[cp + n] = acc;
    }
    // Cyclic extension; the prefix may be longer than the symbol.
    for (int t = 0; t < cp; ++t) tx[t] = tx[cp + ((t - cp) % M + M) % M];
    const double base = static_cast<double>(symbol) * (M + cp);
    std::vector<CVec> rx(M, CVec::Zero(U));
    for (int i = 0; i < M; ++i) {
        const int t = cp + i;
        for (int d = 0; d < c.n_delay; ++d) {
            for (int u = 0; u < U; ++u) {
                cd acc = 0.0;
                for (int a = 0; a < nt; ++a) acc += tap_entry(s, c, d, u, a, base + t) * tx[t - d][a];
                rx[i][u] += acc;
            }
        }
    }
    CMat y = CMat::Zero(U, M);
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < M; ++i) y.col(m) += rx[i] * std::polar(1.0, -2.0 * M_PI * m * i / M) / double(M);
    return y;
}

}  // namespace oracle

namespace oracle {

// Fisher information on theta with alpha a nuisance parameter, from central finite differences of
// the complex Gaussian log-likelihood evaluated at the noiseless observation.
inline double fd_fisher(double theta, const CMat& R, cd alpha, double noise_power, int n_rx,
                        double h_theta = 1e-5) {
    const int nt = static_cast<int>(R.rows());
    Eigen::SelfAdjointEigenSolver<CMat> es(R);
    const CMat X = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    auto mean = [&](const double* p) {
        CVec ar(n_rx), at(nt);
        for (int i = 0; i < n_rx; ++i) ar[i] = steering_entry(p[0], n_rx, i);
        for (int i = 0; i < nt; ++i) at[i] = steering_entry(p[0], nt, i);
        return CMat(cd(p[1], p[2]) * ar * at.adjoint() * X);
    };
    const double p0[3] = {theta, alpha.real(), alpha.imag()};
    const CMat y0 = mean(p0);
    auto loglik = [&](const double* p) { return -(y0 - mean(p)).squaredNorm() / noise_power; };
    const double scale_a = std::max(std::abs(alpha), 1e-300);
    const double h[3] = {h_theta, 1e-5 * scale_a, 1e-5 * scale_a};
    Eigen::Matrix3d F;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            auto at = [&](double si, double sj) {
                double p[3] = {p0[0], p0[1], p0[2]};
                p[i] += si * h[i];
                p[j] += sj * h[j];
                return loglik(p);
            };
            if (i == j) {
                F(i, i) = -(at(0.5, 0.5) - 2.0 * loglik(p0) + at(-0.5, -0.5)) / (h[i] * h[i]);
            } else {
                F(i, j) = -(at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h[i] * h[j]);
            }
        }
    const Eigen::Vector2d c = F.block<2, 1>(1, 0);
    return F(0, 0) - c.dot(F.block<2, 2>(1, 1).ldlt().solve(c));
}

}  // namespace oracle

namespace oracle {

// Largest Fisher floor per unit scale over {W >= 0, Tr W <= 1}: by minimax it equals
// min over complex c of lambda_max((dA - c A)^H (dA - c A)). The inner function is convex in c,
// so nested golden-section searches over Re c and Im c converge to the minimum.
inline double max_unit_fisher(const CMat& A, const CMat& dA, double bracket = 64.0) {
    auto lam = [&](double re, double im) {
        const CMat B = dA - cd(re, im) * A;
        const CMat G = B.adjoint() * B;
        return Eigen::SelfAdjointEigenSolver<CMat>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    };
    auto golden = [](auto f, double a, double b) {
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        double f1 = f(x1), f2 = f(x2);
        for (int it = 0; it < 90; ++it) {
            if (f1 <= f2) {
                b = x2; x2 = x1; f2 = f1; x1 = b - phi * (b - a); f1 = f(x1);
            } else {
                a = x1; x1 = x2; f1 = f2; x2 = a + phi * (b - a); f2 = f(x2);
            }
        }
        return std::min(f1, f2);
    };
    auto over_im = [&](double re) { return golden([&](double im) { return lam(re, im); }, -bracket, bracket); };
    return golden(over_im, -bracket, bracket);
}

}  // namespace oracle
