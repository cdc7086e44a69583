// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/precoder.hpp"

namespace isac {

struct UtilityWeights {
    double psi = 0.5;
    double se_bound = 1.0;      // R*
    double fisher_bound = 1.0;  // J*
};

/// SINR of user u on subcarrier m, with inter-user and inter-carrier interference. F[k] is the N_t x U precoder of subcarrier k.
/// ICI is summed over every user on the other subcarriers.
double sinr(const IciBlocks& h, const std::vector<CMat>& F, int u, int m, double noise_term);

/// All SINRs at once, M x U.
RMat sinr_table(const IciBlocks& h, const std::vector<CMat>& F, double noise_term);

/// sum_l sum_m sum_u log2(1 + gamma) / (L T_s M df); `symbols` holds one IciBlocks per symbol.
double spectral_efficiency(const std::vector<IciBlocks>& symbols, const std::vector<CMat>& F,
                           const SystemConfig& config);

/// R_x,m = P_t / (N_t U M) F_m F_m^H.
CMat transmit_covariance(const CMat& Fm, const SystemConfig& config);

struct FisherValue {
    double value = 0.0;
    bool degenerate = false;  // Tr(A^H A R) vanished
};

/// Single-subcarrier Fisher information on theta with alpha unknown; noise_power = sigma_s^2.
FisherValue fisher_information_subcarrier(double theta, const CMat& R, cd alpha,
                                          double noise_power, int n_rx);

/// Sum over subcarriers of Fisher information for the precoder's current echoes.
double total_fisher(double theta, const std::vector<CMat>& F, const std::vector<cd>& alpha,
                    const SystemConfig& config);

/// Draws one set of per-subcarrier reflection coefficients.
using AlphaSampler = std::function<std::vector<cd>(Rng&)>;

inline constexpr double kInfiniteCrlb = std::numeric_limits<double>::infinity();

/// E[1 / sum_m J_m] over `draws` alpha draws. J_m is linear in |alpha_m|^2, so the per-unit-gain
/// information is evaluated once. Returns kInfiniteCrlb when the information is zero.
double crlb(double theta, const std::vector<CMat>& F, const AlphaSampler& sampler, int draws,
            Rng& rng, const SystemConfig& config);

/// 1 / sum_m J_m for fixed coefficients.
double crlb_fixed(double theta, const std::vector<CMat>& F, const std::vector<cd>& alpha,
                  const SystemConfig& config);

double isac_utility(double se, double fisher, const UtilityWeights& w);

double discounted_return(const std::vector<double>& rewards, double gamma, std::size_t n0);

}  // namespace isac
