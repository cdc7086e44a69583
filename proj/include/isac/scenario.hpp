// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace isac {

enum class TrajectoryClass { straight, turn, lane_change, level_flight, lift, hover };

const char* to_string(TrajectoryClass c);

/// pos[n] and vel[n] for n = 0..T; vel[n] carries pos[n] to pos[n+1].
struct Trajectory {
    TrajectoryClass cls = TrajectoryClass::straight;
    std::vector<PolarPosition> pos;
    std::vector<Velocity> vel;
};

struct Scenario {
    std::uint64_t seed = 0;
    double dt = 0.0;
    int n_subframes = 0;
    std::vector<Trajectory> users;
    Trajectory target;
};

/// Pure function of (config, seed). Throws ConfigError when no trajectory fits the coverage.
Scenario generate_scenario(const SystemConfig& config, std::uint64_t seed);

/// Bearing interval used for coverage checks.
std::pair<double, double> coverage_theta(const SystemConfig& config);
bool in_coverage(const SystemConfig& config, const PolarPosition& p);

nlohmann::json scenario_to_json(const Scenario& s);

}  // namespace isac
