// SPDX-License-Identifier: Apache-2.0
#include "isac/channel.hpp"

#include <cmath>

#include "isac/geometry.hpp"

namespace isac {

namespace {

constexpr double kRollOff = 0.25;
constexpr int kPulseHalfWidth = 4;
constexpr double kAodLimit = kPi / 2 - 1e-6;
constexpr double kScatterSpread = kPi / 3;

double clamp_aod(double a) { return std::clamp(a, -kAodLimit, kAodLimit); }

double los_delay(const SystemConfig& config, double dist) {
    const double max_delay = (config.n_delay - 1) * config.sample_period();
    return std::clamp(2.0 * dist / config.light_speed, 0.0, max_delay);
}

double rayleigh(Rng& rng, double sigma) {
    double u = uniform(rng, 0.0, 1.0);
    while (u <= 0.0) u = uniform(rng, 0.0, 1.0);
    return sigma * std::sqrt(-2.0 * std::log(u));
}

TargetEcho make_echo(const SystemConfig& config, const Scenario& scenario, int n, Rng& rng) {
    TargetEcho e;
    e.pos = scenario.target.pos[n];
    e.rcs = rayleigh(rng, config.rcs_sigma);
    const Velocity& v = scenario.target.vel[n];
    const double v_radial = v.speed * std::cos(v.heading - e.pos.theta);
    const double t0 = n * scenario.dt;
    e.alpha.resize(config.n_sub);
    for (int m = 0; m < config.n_sub; ++m) {
        const double f = config.subcarrier_freq(m);
        const double phase = 2.0 * kPi * (2.0 * v_radial * f / config.light_speed) * t0;
        e.alpha[m] = reflection_coefficient(config.light_speed, f, e.pos.dist, e.rcs, phase);
    }
    return e;
}

}  // namespace

double raised_cosine(double t, double sample_period) {
    const double x = t / sample_period;
    if (std::abs(x) > kPulseHalfWidth) return 0.0;
    const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    const double den = 1.0 - (2.0 * kRollOff * x) * (2.0 * kRollOff * x);
    if (std::abs(den) < 1e-10) return (kPi / 4.0) * std::sin(kPi / (2 * kRollOff)) / (kPi / (2 * kRollOff));
    return sinc * std::cos(kPi * kRollOff * x) / den;
}

double doppler_norm(const SystemConfig& config, double speed, double aod) {
    return 2.0 * kPi * config.carrier_hz * speed * config.sample_period() * std::sin(aod) /
           config.light_speed;
}

cd reflection_coefficient(double light_speed, double freq_hz, double dist, double rcs,
                          double phase) {
    const double mag = light_speed / (4.0 * kPi * freq_hz * dist * dist) * std::sqrt(rcs);
    return std::polar(mag, phase);
}

ChannelState init_channel(const SystemConfig& config, const Scenario& scenario,
                          std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x5eedULL));
    ChannelState s;
    s.subframe = 0;
    const double max_delay = (config.n_delay - 1) * config.sample_period();
    for (int u = 0; u < config.n_users; ++u) {
        const PolarPosition& p = scenario.users[u].pos[0];
        const Velocity& v = scenario.users[u].vel[0];
        UserChannel uc;
        for (int k = 0; k < config.n_paths; ++k) {
            PathComponent pc;
            pc.gain = complex_normal(rng, config.gain_sigma * config.gain_sigma);
            if (k == 0) {
                pc.aod_offset = 0.0;
                pc.delay_s = los_delay(config, p.dist);
            } else {
                pc.aod_offset = uniform(rng, -kScatterSpread, kScatterSpread);
                pc.delay_s = uniform(rng, 0.0, max_delay);
            }
            pc.aod = clamp_aod(p.theta + pc.aod_offset);
            pc.doppler_norm = doppler_norm(config, v.speed, pc.aod);
            uc.paths.push_back(pc);
        }
        s.users.push_back(std::move(uc));
    }
    s.target = make_echo(config, scenario, 0, rng);
    return s;
}

ChannelState evolve_channel(const ChannelState& prev, const SystemConfig& config,
                            const Scenario& scenario, int n, std::uint64_t seed) {
    if (n < 1 || n > scenario.n_subframes)
        throw InvalidArgument("evolve_channel: subframe index out of range");
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(n) + 1));
    ChannelState s = prev;
    s.subframe = n;
    const double walk_var = config.gain_walk_sigma * config.gain_walk_sigma;
    for (int u = 0; u < config.n_users; ++u) {
        const PolarPosition& p = scenario.users[u].pos[n];
        const Velocity& v = scenario.users[u].vel[n];
        auto& paths = s.users[u].paths;
        for (std::size_t k = 0; k < paths.size(); ++k) {
            auto& pc = paths[k];
            pc.aod = clamp_aod(p.theta + pc.aod_offset);
            if (k == 0) pc.delay_s = los_delay(config, p.dist);
            pc.doppler_norm = doppler_norm(config, v.speed, pc.aod);
            if (walk_var > 0.0) pc.gain += complex_normal(rng, walk_var);
        }
    }
    s.target = make_echo(config, scenario, n, rng);
    return s;
}

std::vector<CMat> time_domain_channel(const ChannelState& state, const SystemConfig& config,
                                      double t) {
    const int nd = config.n_delay;
    const int nt = config.n_tx;
    const double ts = config.sample_period();
    std::vector<CMat> taps(nd, CMat::Zero(config.n_users, nt));
    for (int u = 0; u < config.n_users; ++u) {
        const auto& paths = state.users[u].paths;
        const double scale = std::sqrt(static_cast<double>(nt) / static_cast<double>(paths.size()));
        for (const auto& pc : paths) {
            const CVec a = steering_vector(pc.aod, nt);
            const cd rot = std::polar(1.0, pc.doppler_norm * t);
            for (int d = 0; d < nd; ++d) {
                const double g = raised_cosine(d * ts - pc.delay_s, ts);
                if (g == 0.0) continue;
                taps[d].row(u) += (scale * pc.gain * g * rot) * a.transpose();
            }
        }
    }
    return taps;
}

IciBlocks intercarrier_response(const ChannelState& state, const SystemConfig& config,
                                int symbol) {
    const int M = config.n_sub;
    const int nd = config.n_delay;
    const int nt = config.n_tx;
    const double ts = config.sample_period();
    const double t0 = static_cast<double>(symbol) * (M + config.cp_len) + config.cp_len;
    IciBlocks out;
    out.n_sub = M;
    out.blocks.assign(static_cast<std::size_t>(M) * M, CMat::Zero(config.n_users, nt));
    std::vector<cd> tw(M);
    for (int q = 0; q < M; ++q) tw[q] = std::polar(1.0, -2.0 * kPi * q / M);
    std::vector<cd> gk(M), sq(M);
    for (int u = 0; u < config.n_users; ++u) {
        const auto& paths = state.users[u].paths;
        const double scale = std::sqrt(static_cast<double>(nt) / static_cast<double>(paths.size()));
        for (const auto& pc : paths) {
            const Eigen::RowVectorXcd a = steering_vector(pc.aod, nt).transpose();
            // Delay response across subcarriers: sum_d c_d e^{-j 2 pi k d / M}.
            for (int k = 0; k < M; ++k) {
                cd acc = 0.0;
                for (int d = 0; d < nd; ++d) {
                    const double g = raised_cosine(d * ts - pc.delay_s, ts);
                    if (g != 0.0) acc += g * tw[(static_cast<long>(k) * d) % M];
                }
                gk[k] = scale * pc.gain * acc;
            }
            // Doppler leakage: (1/M) sum_i e^{j w (t0 + i)} e^{-j 2 pi q i / M}.
            for (int q = 0; q < M; ++q) {
                cd acc = 0.0;
                for (int i = 0; i < M; ++i)
                    acc += std::polar(1.0, pc.doppler_norm * (t0 + i)) * tw[(static_cast<long>(q) * i) % M];
                sq[q] = acc / static_cast<double>(M);
            }
            for (int m = 0; m < M; ++m)
                for (int k = 0; k < M; ++k) {
                    const cd c = gk[k] * sq[((m - k) % M + M) % M];
                    out.block(m, k).row(u) += c * a;
                }
        }
    }
    return out;
}

CMat apply_stacked_model(const IciBlocks& h, const CMat& x) {
    const int M = h.n_sub;
    const int U = static_cast<int>(h.block(0, 0).rows());
    CMat y = CMat::Zero(U, M);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < M; ++k) y.col(m) += h.block(m, k) * x.col(k);
    return y;
}

CMat target_response(double theta, cd alpha, int n_rx, int n_tx) {
    return alpha * steering_vector(theta, n_rx) * steering_vector(theta, n_tx).adjoint();
}

nlohmann::json channel_to_json(const ChannelState& s) {
    using nlohmann::json;
    json users = json::array();
    for (const auto& u : s.users) {
        json paths = json::array();
        for (const auto& p : u.paths)
            paths.push_back(json{{"gain_re", p.gain.real()},
                                 {"gain_im", p.gain.imag()},
                                 {"delay_s", p.delay_s},
                                 {"aod", p.aod},
                                 {"doppler_norm", p.doppler_norm}});
        users.push_back(json{{"paths", paths}});
    }
    json alpha = json::array();
    for (const auto& a : s.target.alpha) alpha.push_back(json::array({a.real(), a.imag()}));
    return json{{"n", s.subframe},
                {"users", users},
                {"target",
                 {{"theta", s.target.pos.theta},
                  {"dist", s.target.pos.dist},
                  {"rcs", s.target.rcs},
                  {"alpha", alpha}}}};
}

}  // namespace isac
