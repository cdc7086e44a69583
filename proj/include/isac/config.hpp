// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "json.hpp"

#include "isac/common.hpp"

namespace isac {

/// Angle-range occupancy grid bounds. Cells cover [theta_min, theta_max) x [d_min, d_max).
struct GridSpec {
    int n_x = 24;
    int n_y = 16;
    double theta_min = -kPi / 2;
    double theta_max = kPi / 2;
    double d_min = 0.0;
    double d_max = 100.0;
};

/// Scenario, array, OFDM, noise and estimation constants.
/// Powers are stored in dBm; noise_comm/noise_sense are noise powers.
struct SystemConfig {
    int n_tx = 8;
    int n_rx = 8;
    int n_sub = 8;
    int n_users = 2;
    int n_rf = 2;
    int n_delay = 4;
    int n_paths = 4;
    double carrier_hz = 28e9;
    double subcarrier_spacing_hz = 30e3;
    double sample_period_s = 0.0;  // 0 selects 1/(M*df)
    int cp_len = 4;
    int symbols_per_subframe = 8;
    int subframes_per_frame = 40;
    int phase_bits = 3;
    double total_power_dbm = 20.0;
    double noise_comm_dbm = -10.0;
    double noise_sense_dbm = -125.0;
    double rcs_sigma = 10.0;
    double gain_sigma = 1.0;
    double gain_walk_sigma = 0.05;
    double range_min_m = 10.0;
    double range_max_m = 100.0;
    double speed_min_mps = 10.0;
    double speed_max_mps = 30.0;
    int feedback_period = 5;
    int dict_size = 16;
    GridSpec grid{};
    double light_speed = 299792458.0;

    double subframe_interval_s = 0.0;  // 0 selects L*(M+L_cp)*T_s
    int u_max = 16;
    double gps_angle_sigma_deg = 0.5;
    double gps_range_sigma_m = 1.0;
    double angle_error_floor_rad2 = 1e-6;
    double angle_error_cap_rad2 = 0.25;
    double range_error_sigma_m = 1.0;
    double csi_error_var = 1e-3;
    double scan_error_sigma_deg = 1.0;
    int crlb_draws = 256;
    int opt_tau_grid = 32;
    int opt_decomp_iters = 10;

    double sample_period() const;
    double subframe_interval() const;
    double total_power_w() const { return dbm_to_watt(total_power_dbm); }
    double noise_comm_w() const { return dbm_to_watt(noise_comm_dbm); }
    double noise_sense_w() const { return dbm_to_watt(noise_sense_dbm); }
    double subcarrier_freq(int m) const;
    /// Noise term N_t U M sigma_c^2 / P_t of the SINR denominator.
    double sinr_noise_term() const;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
};

SystemConfig desk_profile();
SystemConfig paper_profile();
SystemConfig profile_by_name(const std::string& name);

void to_json(nlohmann::json& j, const SystemConfig& c);
/// Unknown keys are rejected; missing keys keep the value already in `c`.
void apply_json(SystemConfig& c, const nlohmann::json& j);
SystemConfig load_config(const std::string& path);
void save_config(const SystemConfig& c, const std::string& path);

}  // namespace isac
