// SPDX-License-Identifier: Apache-2.0
#include "isac/metrics.hpp"

#include <cmath>

#include "isac/geometry.hpp"

namespace isac {

namespace {

void check_dims(const IciBlocks& h, const std::vector<CMat>& F) {
    if (static_cast<int>(F.size()) != h.n_sub)
        throw ShapeError("sinr: precoder has " + std::to_string(F.size()) +
                         " subcarriers, channel has " + std::to_string(h.n_sub));
    const CMat& b = h.block(0, 0);
    for (const auto& f : F)
        if (f.rows() != b.cols() || f.cols() != b.rows())
            throw ShapeError("sinr: precoder block is " + std::to_string(f.rows()) + "x" +
                             std::to_string(f.cols()) + ", expected " + std::to_string(b.cols()) +
                             "x" + std::to_string(b.rows()));
}

// Tr(X^H Y R).
cd trace_xhyr(const CMat& X, const CMat& Y, const CMat& R) {
    return (X.conjugate().cwiseProduct(Y * R)).sum();
}

}  // namespace

double sinr(const IciBlocks& h, const std::vector<CMat>& F, int u, int m, double noise_term) {
    check_dims(h, F);
    const int M = h.n_sub;
    const int U = static_cast<int>(F[0].cols());
    if (u < 0 || u >= U || m < 0 || m >= M) throw InvalidArgument("sinr: index out of range");
    const Eigen::RowVectorXcd hm = h.row(m, m, u);
    const double signal = std::norm((hm * F[m].col(u))(0));
    double ici = 0.0;
    for (int k = 0; k < M; ++k) {
        if (k == m) continue;
        ici += (h.row(m, k, u) * F[k]).squaredNorm();
    }
    double iui = 0.0;
    for (int i = 0; i < U; ++i)
        if (i != u) iui += std::norm((hm * F[m].col(i))(0));
    return signal / (ici + iui + noise_term);
}

RMat sinr_table(const IciBlocks& h, const std::vector<CMat>& F, double noise_term) {
    check_dims(h, F);
    const int M = h.n_sub;
    const int U = static_cast<int>(F[0].cols());
    RMat out(M, U);
    // G(m, k) = H_m[k] F_k, U x U: row u holds user u's response to every stream of subcarrier k.
    for (int m = 0; m < M; ++m) {
        RVec ici = RVec::Zero(U);
        RMat own(U, U);
        for (int k = 0; k < M; ++k) {
            const CMat g = h.block(m, k) * F[k];
            if (k == m) own = g.cwiseAbs2();
            else ici += g.cwiseAbs2().rowwise().sum();
        }
        for (int u = 0; u < U; ++u) {
            const double signal = own(u, u);
            const double iui = own.row(u).sum() - signal;
            out(m, u) = signal / (ici(u) + iui + noise_term);
        }
    }
    return out;
}

double spectral_efficiency(const std::vector<IciBlocks>& symbols, const std::vector<CMat>& F,
                           const SystemConfig& config) {
    const double noise = config.sinr_noise_term();
    double acc = 0.0;
    for (const auto& h : symbols) {
        const RMat g = sinr_table(h, F, noise);
        for (Eigen::Index i = 0; i < g.size(); ++i) acc += std::log2(1.0 + g.data()[i]);
    }
    const double denom = static_cast<double>(symbols.size()) * config.sample_period() *
                         config.n_sub * config.subcarrier_spacing_hz;
    return acc / denom;
}

CMat transmit_covariance(const CMat& Fm, const SystemConfig& config) {
    const double scale =
        config.total_power_w() / (static_cast<double>(config.n_tx) * config.n_users * config.n_sub);
    return scale * Fm * Fm.adjoint();
}

FisherValue fisher_information_subcarrier(double theta, const CMat& R, cd alpha,
                                          double noise_power, int n_rx) {
    const int nt = static_cast<int>(R.rows());
    const CVec at = steering_vector(theta, nt);
    const CVec ar = steering_vector(theta, n_rx);
    const CVec dat = steering_vector_derivative(theta, nt);
    const CVec dar = steering_vector_derivative(theta, n_rx);
    const CMat A = ar * at.adjoint();
    const CMat dA = dar * at.adjoint() + ar * dat.adjoint();
    const double taa = std::real(trace_xhyr(A, A, R));
    if (!(taa > 1e-300)) return {0.0, true};
    const double tdd = std::real(trace_xhyr(dA, dA, R));
    const cd tda = trace_xhyr(dA, A, R);
    const double num = tdd * taa - std::norm(tda);
    const double j = 2.0 * std::norm(alpha) * std::max(num, 0.0) / (noise_power * taa);
    return {j, false};
}

double total_fisher(double theta, const std::vector<CMat>& F, const std::vector<cd>& alpha,
                    const SystemConfig& config) {
    double acc = 0.0;
    for (std::size_t m = 0; m < F.size(); ++m)
        acc += fisher_information_subcarrier(theta, transmit_covariance(F[m], config), alpha[m],
                                             config.noise_sense_w(), config.n_rx)
                   .value;
    return acc;
}

double crlb(double theta, const std::vector<CMat>& F, const AlphaSampler& sampler, int draws,
            Rng& rng, const SystemConfig& config) {
    if (draws < 1) throw InvalidArgument("crlb: draws must be >= 1");
    std::vector<double> unit(F.size());
    double any = 0.0;
    for (std::size_t m = 0; m < F.size(); ++m) {
        unit[m] = fisher_information_subcarrier(theta, transmit_covariance(F[m], config), 1.0,
                                                config.noise_sense_w(), config.n_rx)
                      .value;
        any += unit[m];
    }
    if (!(any > 0.0)) return kInfiniteCrlb;
    double acc = 0.0;
    for (int d = 0; d < draws; ++d) {
        const auto alpha = sampler(rng);
        double j = 0.0;
        for (std::size_t m = 0; m < F.size(); ++m) j += std::norm(alpha[m]) * unit[m];
        if (!(j > 0.0)) return kInfiniteCrlb;
        acc += 1.0 / j;
    }
    return acc / draws;
}

double crlb_fixed(double theta, const std::vector<CMat>& F, const std::vector<cd>& alpha,
                  const SystemConfig& config) {
    const double j = total_fisher(theta, F, alpha, config);
    return j > 0.0 ? 1.0 / j : kInfiniteCrlb;
}

double isac_utility(double se, double fisher, const UtilityWeights& w) {
    if (!(w.se_bound > 0.0) || !(w.fisher_bound > 0.0))
        throw InvalidArgument("isac_utility: bounds must be positive");
    return w.psi * se / w.se_bound + (1.0 - w.psi) * fisher / w.fisher_bound;
}

double discounted_return(const std::vector<double>& rewards, double gamma, std::size_t n0) {
    if (gamma < 0.0 || gamma > 1.0) throw InvalidArgument("discounted_return: gamma must be in [0,1]");
    double acc = 0.0;
    double w = 1.0;
    for (std::size_t n = n0; n < rewards.size(); ++n) {
        acc += w * rewards[n];
        w *= gamma;
    }
    return acc;
}

}  // namespace isac
