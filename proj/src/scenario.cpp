// SPDX-License-Identifier: Apache-2.0
#include "isac/scenario.hpp"

#include <cmath>

namespace isac {

const char* to_string(TrajectoryClass c) {
    switch (c) {
        case TrajectoryClass::straight: return "straight";
        case TrajectoryClass::turn: return "turn";
        case TrajectoryClass::lane_change: return "lane-change";
        case TrajectoryClass::level_flight: return "level-flight";
        case TrajectoryClass::lift: return "lift";
        case TrajectoryClass::hover: return "hover";
    }
    return "unknown";
}

std::pair<double, double> coverage_theta(const SystemConfig& config) {
    constexpr double kEndfireMargin = 0.05;
    return {std::max(config.grid.theta_min, -kPi / 2 + kEndfireMargin),
            std::min(config.grid.theta_max, kPi / 2 - kEndfireMargin)};
}

bool in_coverage(const SystemConfig& config, const PolarPosition& p) {
    const auto [lo, hi] = coverage_theta(config);
    return p.theta > lo && p.theta < hi && p.dist >= config.range_min_m &&
           p.dist <= config.range_max_m;
}

namespace {

constexpr int kMaxAttempts = 2000;

// Piecewise-constant heading profile for one object.
std::vector<double> heading_profile(TrajectoryClass cls, double h0, double bearing, int steps,
                                    Rng& rng) {
    std::vector<double> h(static_cast<std::size_t>(steps) + 1, h0);
    const int ramp = std::max(1, steps / 8);
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    switch (cls) {
        case TrajectoryClass::straight:
        case TrajectoryClass::level_flight:
            break;
        case TrajectoryClass::turn: {
            const int start = static_cast<int>(uniform(rng, 0.0, std::max(1.0, steps - ramp - 1.0)));
            for (int n = 0; n <= steps; ++n) {
                double frac = std::clamp(static_cast<double>(n - start) / ramp, 0.0, 1.0);
                h[n] = h0 + sign * (kPi / 2) * frac;
            }
            break;
        }
        case TrajectoryClass::lane_change: {
            const double offset = 0.35;
            const int start = static_cast<int>(uniform(rng, 0.0, std::max(1.0, steps - 2.0 * ramp - 1.0)));
            for (int n = 0; n <= steps; ++n) {
                if (n >= start && n < start + ramp) h[n] = h0 + sign * offset;
                else if (n >= start + ramp && n < start + 2 * ramp) h[n] = h0 - sign * offset;
            }
            break;
        }
        case TrajectoryClass::lift:
            for (auto& x : h) x = bearing + (sign > 0 ? 0.0 : kPi);
            break;
        case TrajectoryClass::hover:
            for (int n = 0; n <= steps; ++n) h[n] = h0 + sign * 2.0 * kPi * n / std::max(1, steps);
            break;
    }
    return h;
}

Trajectory draw_trajectory(const SystemConfig& config, TrajectoryClass cls, double dt, int steps,
                           Rng& rng) {
    const auto [lo, hi] = coverage_theta(config);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Trajectory t;
        t.cls = cls;
        PolarPosition p{uniform(rng, lo, hi), uniform(rng, config.range_min_m, config.range_max_m)};
        if (!in_coverage(config, p)) continue;
        const double speed = config.speed_min_mps == config.speed_max_mps
                                 ? config.speed_min_mps
                                 : uniform(rng, config.speed_min_mps, config.speed_max_mps);
        const double h0 = uniform(rng, -kPi, kPi);
        const auto headings = heading_profile(cls, h0, p.theta, steps, rng);
        bool ok = true;
        t.pos.push_back(p);
        for (int n = 0; n <= steps && ok; ++n) {
            Velocity v{speed, wrap_angle(headings[n])};
            t.vel.push_back(v);
            if (n == steps) break;
            try {
                p = advance_positions(p, v, dt);
            } catch (const RangeUnderflow&) {
                ok = false;
                break;
            }
            if (!in_coverage(config, p)) ok = false;
            t.pos.push_back(p);
        }
        if (ok) return t;
    }
    throw ConfigError("generate_scenario: no trajectory of the requested class fits the coverage "
                      "area for this speed range and frame length");
}

}  // namespace

Scenario generate_scenario(const SystemConfig& config, std::uint64_t seed) {
    config.validate();
    if (config.grid.d_max < config.range_max_m)
        throw ConfigError("generate_scenario: grid d_max is below range_max_m, so the coverage "
                          "cannot contain every admissible range");
    Scenario s;
    s.seed = seed;
    s.dt = config.subframe_interval();
    s.n_subframes = config.subframes_per_frame;
    const int steps = config.subframes_per_frame;
    const TrajectoryClass vehicle[] = {TrajectoryClass::straight, TrajectoryClass::turn,
                                       TrajectoryClass::lane_change};
    const TrajectoryClass aerial[] = {TrajectoryClass::level_flight, TrajectoryClass::lift,
                                      TrajectoryClass::hover};
    for (int u = 0; u < config.n_users; ++u) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(u)));
        const auto cls = vehicle[std::uniform_int_distribution<int>(0, 2)(rng)];
        s.users.push_back(draw_trajectory(config, cls, s.dt, steps, rng));
    }
    Rng rng(mix_seed(seed, 1000));
    const auto cls = aerial[std::uniform_int_distribution<int>(0, 2)(rng)];
    s.target = draw_trajectory(config, cls, s.dt, steps, rng);
    return s;
}

nlohmann::json scenario_to_json(const Scenario& s) {
    using nlohmann::json;
    auto rec = [](const Trajectory& t, int n) {
        return json{{"theta", t.pos[n].theta},
                    {"dist", t.pos[n].dist},
                    {"speed", t.vel[n].speed},
                    {"heading", t.vel[n].heading}};
    };
    json classes = json::array();
    for (const auto& u : s.users) classes.push_back(to_string(u.cls));
    json frames = json::array();
    for (int n = 0; n <= s.n_subframes; ++n) {
        json users = json::array();
        for (const auto& u : s.users) users.push_back(rec(u, n));
        frames.push_back(json{{"n", n}, {"users", users}, {"target", rec(s.target, n)}});
    }
    return json{{"seed", s.seed},
                {"subframe_interval_s", s.dt},
                {"user_classes", classes},
                {"target_class", to_string(s.target.cls)},
                {"subframes", frames}};
}

}  // namespace isac
