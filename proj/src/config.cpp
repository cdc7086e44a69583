// SPDX-License-Identifier: Apache-2.0
#include "isac/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace isac {

double SystemConfig::sample_period() const {
    if (sample_period_s > 0.0) return sample_period_s;
    return 1.0 / (static_cast<double>(n_sub) * subcarrier_spacing_hz);
}

double SystemConfig::subframe_interval() const {
    if (subframe_interval_s > 0.0) return subframe_interval_s;
    return static_cast<double>(symbols_per_subframe) * static_cast<double>(n_sub + cp_len) *
           sample_period();
}

double SystemConfig::subcarrier_freq(int m) const {
    // Subcarriers centred on the carrier.
    return carrier_hz + (static_cast<double>(m) - 0.5 * static_cast<double>(n_sub - 1)) *
                            subcarrier_spacing_hz;
}

double SystemConfig::sinr_noise_term() const {
    return static_cast<double>(n_tx) * n_users * n_sub * noise_comm_w() / total_power_w();
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace

void SystemConfig::validate() const {
    require(n_tx >= 1, "n_tx >= 1");
    require(n_rx >= 1, "n_rx >= 1");
    require(n_sub >= 1, "n_sub >= 1");
    require(n_users >= 1, "n_users >= 1");
    require(n_rf >= 1, "n_rf >= 1");
    require(n_users <= n_rf, "n_users <= n_rf");
    require(n_delay >= 1, "n_delay >= 1");
    require(n_paths >= 1, "n_paths >= 1");
    require(cp_len >= n_delay - 1, "cp_len >= n_delay - 1");
    require(symbols_per_subframe >= 1, "symbols_per_subframe >= 1");
    require(subframes_per_frame >= 1, "subframes_per_frame >= 1");
    require(phase_bits >= 1 && phase_bits <= 16, "1 <= phase_bits <= 16");
    require(carrier_hz > 0.0, "carrier_hz > 0");
    require(subcarrier_spacing_hz > 0.0, "subcarrier_spacing_hz > 0");
    require(sample_period_s >= 0.0, "sample_period_s >= 0");
    require(rcs_sigma > 0.0, "rcs_sigma > 0");
    require(gain_sigma >= 0.0, "gain_sigma >= 0");
    require(gain_walk_sigma >= 0.0, "gain_walk_sigma >= 0");
    require(range_min_m > 0.0, "range_min_m > 0");
    require(range_min_m < range_max_m, "range_min_m < range_max_m");
    require(speed_min_mps >= 0.0, "speed_min_mps >= 0");
    require(speed_min_mps <= speed_max_mps, "v_min <= v_max");
    require(feedback_period >= 1, "feedback_period >= 1");
    require(dict_size >= n_tx, "dict_size >= n_tx");
    require(grid.n_x >= 1 && grid.n_y >= 1, "grid counts >= 1");
    require(grid.theta_min < grid.theta_max, "grid theta_min < theta_max");
    require(grid.d_min < grid.d_max, "grid d_min < d_max");
    require(grid.theta_min >= -kPi / 2 && grid.theta_max <= kPi / 2,
            "grid angles within [-pi/2, pi/2]");
    require(light_speed > 0.0, "light_speed > 0");
    require(subframe_interval_s >= 0.0, "subframe_interval_s >= 0");
    require(u_max >= n_users, "u_max >= n_users");
    require(crlb_draws >= 1, "crlb_draws >= 1");
    require(opt_tau_grid >= 2, "opt_tau_grid >= 2");
    require(opt_decomp_iters >= 0, "opt_decomp_iters >= 0");
    require(angle_error_floor_rad2 > 0.0, "angle_error_floor_rad2 > 0");
    require(angle_error_cap_rad2 >= angle_error_floor_rad2, "angle_error_cap_rad2 >= floor");
}

SystemConfig desk_profile() {
    SystemConfig c;
    // 20 ms between precoding updates so that a 40-subframe frame spans
    // visible motion; the physical subframe length is under 1 ms.
    c.subframe_interval_s = 0.02;
    return c;
}

SystemConfig paper_profile() {
    SystemConfig c;
    c.n_tx = 32;
    c.n_rx = 32;
    c.n_sub = 32;
    c.n_users = 8;
    c.n_rf = 8;
    c.n_delay = 8;
    c.n_paths = 8;
    c.cp_len = 8;
    c.symbols_per_subframe = 32;
    c.subframes_per_frame = 100;
    c.phase_bits = 3;
    c.noise_comm_dbm = -10.0;
    c.noise_sense_dbm = -125.0;
    c.total_power_dbm = 20.0;
    c.rcs_sigma = 10.0;
    c.gain_sigma = 1.0;
    c.dict_size = 64;
    c.grid = GridSpec{48, 32, -kPi / 2, kPi / 2, 0.0, 100.0};
    c.subframe_interval_s = 0.0;
    return c;
}

SystemConfig profile_by_name(const std::string& name) {
    if (name == "desk") return desk_profile();
    if (name == "paper") return paper_profile();
    throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

#define ISAC_CONFIG_FIELDS(X)                                                                   \
    X(n_tx) X(n_rx) X(n_sub) X(n_users) X(n_rf) X(n_delay) X(n_paths) X(carrier_hz)             \
    X(subcarrier_spacing_hz) X(sample_period_s) X(cp_len) X(symbols_per_subframe)               \
    X(subframes_per_frame) X(phase_bits) X(total_power_dbm) X(noise_comm_dbm)                   \
    X(noise_sense_dbm) X(rcs_sigma) X(gain_sigma) X(gain_walk_sigma) X(range_min_m)            \
    X(range_max_m) X(speed_min_mps) X(speed_max_mps) X(feedback_period) X(dict_size)            \
    X(light_speed) X(subframe_interval_s) X(u_max) X(gps_angle_sigma_deg) X(gps_range_sigma_m) \
    X(angle_error_floor_rad2) X(angle_error_cap_rad2) X(range_error_sigma_m) X(csi_error_var)  \
    X(scan_error_sigma_deg) X(crlb_draws) X(opt_tau_grid) X(opt_decomp_iters)

void to_json(nlohmann::json& j, const SystemConfig& c) {
    j = nlohmann::json::object();
#define X(f) j[#f] = c.f;
    ISAC_CONFIG_FIELDS(X)
#undef X
    j["grid"] = {{"n_x", c.grid.n_x},           {"n_y", c.grid.n_y},
                 {"theta_min", c.grid.theta_min}, {"theta_max", c.grid.theta_max},
                 {"d_min", c.grid.d_min},         {"d_max", c.grid.d_max}};
}

void apply_json(SystemConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        try {
            if (key == "profile") continue;
#define X(f)                         \
    if (key == #f) {                 \
        it.value().get_to(c.f);      \
        continue;                    \
    }
            ISAC_CONFIG_FIELDS(X)
#undef X
            if (key == "grid") {
                const auto& g = it.value();
                for (auto gi = g.begin(); gi != g.end(); ++gi) {
                    const std::string& gk = gi.key();
                    if (gk == "n_x") gi.value().get_to(c.grid.n_x);
                    else if (gk == "n_y") gi.value().get_to(c.grid.n_y);
                    else if (gk == "theta_min") gi.value().get_to(c.grid.theta_min);
                    else if (gk == "theta_max") gi.value().get_to(c.grid.theta_max);
                    else if (gk == "d_min") gi.value().get_to(c.grid.d_min);
                    else if (gk == "d_max") gi.value().get_to(c.grid.d_max);
                    else throw ConfigError("unknown config key 'grid." + gk + "'");
                }
                continue;
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for config key '" + key + "': " + e.what());
        }
        throw ConfigError("unknown config key '" + key + "'");
    }
}

#undef ISAC_CONFIG_FIELDS

SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    SystemConfig c = desk_profile();
    if (j.contains("profile")) c = profile_by_name(j.at("profile").get<std::string>());
    apply_json(c, j);
    c.validate();
    return c;
}

void save_config(const SystemConfig& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file '" + path + "'");
    nlohmann::json j;
    to_json(j, c);
    out << j.dump(2) << '\n';
}

}  // namespace isac
