// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "json.hpp"

#include "isac/config.hpp"
#include "isac/scenario.hpp"

namespace isac {

struct PathComponent {
    cd gain{1.0, 0.0};
    double delay_s = 0.0;      // in [0, (N_d - 1) T_s]
    double aod = 0.0;
    double doppler_norm = 0.0; // rad per sample: 2 pi f_c |v| T_s sin(aod) / c
    double aod_offset = 0.0;   // fixed offset from the user bearing; 0 for the LoS path
};

struct UserChannel {
    std::vector<PathComponent> paths;  // paths[0] is the line-of-sight path
};

/// Target echo parameters for one subframe.
struct TargetEcho {
    PolarPosition pos;
    double rcs = 1.0;
    std::vector<cd> alpha;  // one reflection coefficient per subcarrier
};

struct ChannelState {
    int subframe = 0;
    std::vector<UserChannel> users;
    TargetEcho target;
};

/// M x M grid of U x N_t blocks; block(m, k) couples subcarrier k into subcarrier m.
struct IciBlocks {
    int n_sub = 0;
    std::vector<CMat> blocks;
    const CMat& block(int m, int k) const { return blocks[static_cast<std::size_t>(m) * n_sub + k]; }
    CMat& block(int m, int k) { return blocks[static_cast<std::size_t>(m) * n_sub + k]; }
    /// Row vector h_{m,k,u}.
    Eigen::RowVectorXcd row(int m, int k, int u) const { return block(m, k).row(u); }
};

/// Raised-cosine pulse at t (seconds), roll-off 0.25, zero beyond 4 samples.
double raised_cosine(double t, double sample_period);

double doppler_norm(const SystemConfig& config, double speed, double aod);

/// Reflection coefficient for one subcarrier: c/(4 pi f d^2) sqrt(rcs) e^{j phase}.
cd reflection_coefficient(double light_speed, double freq_hz, double dist, double rcs,
                          double phase);

ChannelState init_channel(const SystemConfig& config, const Scenario& scenario,
                          std::uint64_t seed);

/// State at subframe n from the state at n-1. Randomness is keyed by (seed, n).
ChannelState evolve_channel(const ChannelState& prev, const SystemConfig& config,
                            const Scenario& scenario, int n, std::uint64_t seed);

/// Tap matrices H_d(t), d = 0..N_d-1, at sample index t counted from the subframe start.
std::vector<CMat> time_domain_channel(const ChannelState& state, const SystemConfig& config,
                                      double t);

/// Inter-carrier blocks of OFDM symbol `symbol` within the subframe. The channel is sampled at
/// t = symbol (M + L_cp) + L_cp + i for i = 0..M-1.
IciBlocks intercarrier_response(const ChannelState& state, const SystemConfig& config,
                                int symbol);

/// Received frequency-domain symbols y_m = sum_k H_m[k] x_k; x is N_t x M (column k = x_k).
CMat apply_stacked_model(const IciBlocks& h, const CMat& x);

/// alpha a_r(theta) a_t(theta)^H, N_r x N_t.
CMat target_response(double theta, cd alpha, int n_rx, int n_tx);

nlohmann::json channel_to_json(const ChannelState& s);

}  // namespace isac
