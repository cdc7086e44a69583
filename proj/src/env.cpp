// SPDX-License-Identifier: Apache-2.0
#include "isac/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isac/design.hpp"

namespace isac {

namespace {

using nlohmann::json;

double rayleigh_draw(Rng& rng, double sigma) {
    double u = uniform(rng, 0.0, 1.0);
    while (u <= 0.0) u = uniform(rng, 0.0, 1.0);
    return sigma * std::sqrt(-2.0 * std::log(u));
}

double normal(Rng& rng, double sigma) { return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0; }

double deg2rad(double d) { return d * kPi / 180.0; }

// Index sampled with probability proportional to the first n weights; all-zero falls back to uniform.
int sample_index(const RVec& weights, int n, Rng& rng) {
    std::vector<double> w(weights.data(), weights.data() + n);
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) std::fill(w.begin(), w.end(), 1.0);
    return std::discrete_distribution<int>(w.begin(), w.end())(rng);
}

RVec dirichlet_ones(int n, Rng& rng) {
    std::exponential_distribution<double> e(1.0);
    RVec v(n);
    for (int i = 0; i < n; ++i) v[i] = e(rng);
    return v / v.sum();
}

RVec uniform_vec(int n, double lo, double hi, Rng& rng) {
    RVec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
    return v;
}

void check_range(const RVec& v, Eigen::Index n, double lo, double hi, const char* name) {
    if (v.size() != n)
        throw InvalidArgument(std::string("action: ") + name + " has size " + std::to_string(v.size()) +
                              ", expected " + std::to_string(n));
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(v[i]) || v[i] < lo - 1e-12 || v[i] > hi + 1e-12)
            throw InvalidArgument(std::string("action: ") + name + "[" + std::to_string(i) + "] = " +
                                  std::to_string(v[i]) + " outside [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
}

// Grid index of phase z on the B-bit set.
int phase_index(cd z, int levels) {
    const double k = std::round(std::arg(z) / (2.0 * kPi / levels));
    return ((static_cast<int>(k) % levels) + levels) % levels;
}

json vec_json(const RVec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_json(const RMat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const RVec row = m.row(r).transpose();
        rows.push_back(vec_json(row));
    }
    return rows;
}

PolarPosition gps_reading(const PolarPosition& truth, const SystemConfig& c, Rng& rng) {
    return {truth.theta + normal(rng, deg2rad(c.gps_angle_sigma_deg)),
            std::max(0.0, truth.dist + normal(rng, c.gps_range_sigma_m))};
}

}  // namespace

const char* to_string(ActionType t) { return t == ActionType::user_dim ? "user_dim" : "antenna_dim"; }

const char* to_string(ObsMode m) {
    switch (m) {
        case ObsMode::pc: return "pc";
        case ObsMode::po: return "po";
        case ObsMode::co: return "co";
    }
    return "?";
}

ActionType parse_action_type(const std::string& s) {
    if (s == "user_dim" || s == "uu" || s == "UU") return ActionType::user_dim;
    if (s == "antenna_dim" || s == "au" || s == "AU") return ActionType::antenna_dim;
    throw InvalidArgument("unknown action type '" + s + "'");
}

ObsMode parse_obs_mode(const std::string& s) {
    if (s == "pc") return ObsMode::pc;
    if (s == "po") return ObsMode::po;
    if (s == "co") return ObsMode::co;
    throw InvalidArgument("unknown observation mode '" + s + "'");
}

RVec HybridAction::flatten() const {
    RVec v(select.size() + phase.size() + digital.size());
    v << select, phase, digital;
    return v;
}

HybridAction HybridAction::unflatten(ActionType type, const RVec& v, const SystemConfig& config) {
    if (v.size() != action_dim(type, config))
        throw ShapeError("HybridAction::unflatten: size " + std::to_string(v.size()) + ", expected " +
                         std::to_string(action_dim(type, config)));
    HybridAction a;
    a.type = type;
    const int ns = type == ActionType::user_dim ? config.u_max : config.n_tx;
    const int np = type == ActionType::user_dim ? config.n_tx : 0;
    a.select = v.segment(0, ns);
    a.phase = v.segment(ns, np);
    a.digital = v.segment(ns + np, config.n_sub);
    return a;
}

int action_dim(ActionType type, const SystemConfig& config) {
    return type == ActionType::user_dim ? config.u_max + config.n_tx + config.n_sub : config.n_tx + config.n_sub;
}

void validate_action(const HybridAction& a, const SystemConfig& config) {
    if (a.type == ActionType::user_dim) {
        check_range(a.select, config.u_max, 0.0, 1.0, "a_rf1");
        check_range(a.phase, config.n_tx, -1.0, 1.0, "a_rf2");
    } else {
        check_range(a.select, config.n_tx, 0.0, 1.0, "a_rf");
        if (a.phase.size() != 0) throw InvalidArgument("action: antenna-dimension actions carry no phase part");
    }
    check_range(a.digital, config.n_sub, -1.0, 1.0, "a_bb");
}

HybridAction random_action(ActionType type, const SystemConfig& config, Rng& rng) {
    HybridAction a;
    a.type = type;
    if (type == ActionType::user_dim) {
        a.select = dirichlet_ones(config.u_max, rng);
        a.phase = uniform_vec(config.n_tx, -1.0, 1.0, rng);
    } else {
        a.select = dirichlet_ones(config.n_tx, rng);
        a.phase = RVec(0);
    }
    a.digital = uniform_vec(config.n_sub, -1.0, 1.0, rng);
    return a;
}

CMat beamspace_dictionary(int n_tx, int g_t) {
    if (n_tx < 1 || g_t < 1) throw InvalidArgument("beamspace_dictionary: sizes must be positive");
    CMat d(n_tx, g_t);
    for (int g = 0; g < g_t; ++g) d.col(g) = steering_vector(std::asin(-1.0 + 2.0 * g / g_t), n_tx);
    return d;
}

RMat channel_observation(const std::vector<CMat>& taps, const CMat& dict) {
    if (taps.empty()) throw InvalidArgument("channel_observation: no taps");
    const Eigen::Index U = taps[0].rows();
    RMat s(static_cast<Eigen::Index>(taps.size()), U * dict.cols());
    for (std::size_t d = 0; d < taps.size(); ++d) {
        if (taps[d].cols() != dict.rows()) throw ShapeError("channel_observation: tap/dictionary mismatch");
        const CMat b = taps[d] * dict;
        for (Eigen::Index g = 0; g < b.cols(); ++g)
            for (Eigen::Index u = 0; u < U; ++u) s(static_cast<Eigen::Index>(d), g * U + u) = std::abs(b(u, g));
    }
    return s;
}

PositionEstimates estimate_positions(const std::vector<PolarPosition>& users, const PolarPosition& target,
                                     double target_crlb, const SystemConfig& config, Rng& rng) {
    const double floor = config.angle_error_floor_rad2;
    const double cap = config.angle_error_cap_rad2;
    const double target_var = std::isnan(target_crlb) ? cap : std::min(std::max(target_crlb, floor), cap);
    std::vector<PolarPosition> est;
    std::vector<int> who;
    auto draw = [&](const PolarPosition& p, double var, int id) {
        est.push_back({p.theta + normal(rng, std::sqrt(var)),
                       std::max(0.0, p.dist + normal(rng, config.range_error_sigma_m))});
        who.push_back(id);
    };
    for (std::size_t u = 0; u < users.size(); ++u) draw(users[u], floor, static_cast<int>(u));
    draw(target, target_var, static_cast<int>(users.size()));
    std::vector<std::size_t> perm(est.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PositionEstimates out;
    for (std::size_t i : perm) {
        out.objects.push_back(est[i]);
        out.truth.push_back(who[i]);
    }
    return out;
}

Identification identify_users(const std::vector<PolarPosition>& objects,
                              const std::vector<PolarPosition>& reference, const SystemConfig& config) {
    if (objects.size() != reference.size() + 1)
        throw StateError("identify_users: " + std::to_string(objects.size()) + " estimates for " +
                         std::to_string(reference.size()) + " users and one target");
    const double d_scale = config.grid.d_max > 0.0 ? config.grid.d_max : 1.0;
    std::vector<bool> taken(objects.size(), false);
    Identification id;
    for (const auto& r : reference) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < objects.size(); ++i) {
            if (taken[i]) continue;
            const double a = (objects[i].theta - r.theta) / kPi;
            const double b = (objects[i].dist - r.dist) / d_scale;
            const double d = a * a + b * b;
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        taken[static_cast<std::size_t>(best)] = true;
        id.users.push_back(best);
    }
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (!taken[i]) id.target = static_cast<int>(i);
    return id;
}

GridResult position_spectrum(const std::vector<PolarPosition>& users, const std::optional<PolarPosition>& target,
                             const GridSpec& grid) {
    GridResult out;
    out.grid = RMat::Zero(grid.n_x, grid.n_y);
    auto cell = [&](const PolarPosition& p) {
        const double fx = (p.theta - grid.theta_min) / (grid.theta_max - grid.theta_min) * grid.n_x;
        const double fy = (p.dist - grid.d_min) / (grid.d_max - grid.d_min) * grid.n_y;
        int ix = std::isfinite(fx) ? static_cast<int>(std::floor(fx)) : 0;
        int iy = std::isfinite(fy) ? static_cast<int>(std::floor(fy)) : 0;
        if (ix < 0 || ix >= grid.n_x || iy < 0 || iy >= grid.n_y) out.clamped = true;
        ix = std::clamp(ix, 0, grid.n_x - 1);
        iy = std::clamp(iy, 0, grid.n_y - 1);
        return std::pair<int, int>{ix, iy};
    };
    for (const auto& u : users) {
        const auto [x, y] = cell(u);
        out.grid(x, y) = std::max(out.grid(x, y), 1.0);
    }
    if (target) {
        const auto [x, y] = cell(*target);
        out.grid(x, y) = 2.0;
    }
    return out;
}

UpdateCounts& update_counts() {
    thread_local UpdateCounts counts;
    return counts;
}

namespace {
// Per-entry costs: a grid step is one integer add; a real-scaled complex add is 2 multiplies and
// 2 adds; the antenna-dimension element update is two complex products (12), the 1 + eta e^{j phi}
// factor (4), the unit phase of p (5), the aligned accumulation (8) and the magnitude write (5).
constexpr std::uint64_t kGridStepFlops = 1, kDigitalAddFlops = 4, kAntennaElementFlops = 34,
                        kPhaseNormalizeFlops = 5, kPowerEntryFlops = 4;

void count_normalize(const HybridPrecoder& f) {
    update_counts().normalize += kPowerEntryFlops * static_cast<std::uint64_t>(f.digital.size() + f.analog.size());
}
}  // namespace

HybridPrecoder apply_action_user_dim(const HybridPrecoder& f, const HybridAction& a, const SystemConfig& config,
                                     Rng& rng, double digital_scale) {
    if (a.type != ActionType::user_dim) throw InvalidArgument("apply_action_user_dim: wrong action type");
    validate_action(a, config);
    const int U = f.n_users();
    if (U > config.u_max) throw InvalidArgument("apply_action_user_dim: more users than u_max");
    HybridPrecoder out = f;
    const int u = sample_index(a.select, U, rng);
    update_counts().decode += static_cast<std::uint64_t>(U);
    update_counts().update += kGridStepFlops * static_cast<std::uint64_t>(out.n_tx()) +
                              kDigitalAddFlops * static_cast<std::uint64_t>(out.n_sub());
    const int levels = 1 << config.phase_bits;
    // Re-deriving the grid index keeps the phases exactly on the grid after any number of steps.
    for (int i = 0; i < out.n_tx(); ++i) {
        const int k = phase_index(out.analog(i, u), levels) + (a.phase[i] >= 0.0 ? 1 : -1);
        out.analog(i, u) = std::polar(1.0, 2.0 * kPi * (((k % levels) + levels) % levels) / levels);
    }
    for (int m = 0; m < out.n_sub(); ++m) out.digital(m, u) += digital_scale * a.digital[m];
    count_normalize(out);
    out.normalize_power(1.0);
    return out;
}

HybridPrecoder apply_action_antenna_dim(const HybridPrecoder& f, const HybridAction& a,
                                        const SystemConfig& config, Rng& rng, double eta_r) {
    if (a.type != ActionType::antenna_dim) throw InvalidArgument("apply_action_antenna_dim: wrong action type");
    validate_action(a, config);
    HybridPrecoder out = f;
    const int i = sample_index(a.select, out.n_tx(), rng);
    update_counts().decode += static_cast<std::uint64_t>(out.n_tx());
    update_counts().update += static_cast<std::uint64_t>(out.n_users()) *
                              (kAntennaElementFlops * static_cast<std::uint64_t>(out.n_sub()) + kPhaseNormalizeFlops);
    for (int u = 0; u < out.n_users(); ++u) {
        cd aligned{0.0, 0.0};
        for (int m = 0; m < out.n_sub(); ++m) {
            const cd p = out.digital(m, u);
            // angle(a) of a real number is 0 or pi.
            const double phi = kPi * (a.digital[m] >= 0.0 ? 0.0 : kPi);
            const cd fnew = out.analog(i, u) * p * (1.0 + eta_r * std::polar(1.0, phi));
            const cd ph = std::abs(p) > 0.0 ? p / std::abs(p) : cd(1.0, 0.0);
            aligned += fnew * std::conj(ph);
            out.digital(m, u) = std::abs(fnew) * ph;
        }
        if (std::abs(aligned) > 0.0) out.analog(i, u) = aligned / std::abs(aligned);
    }
    count_normalize(out);
    out.normalize_power(1.0);
    out.analog = quantize_phases(out.analog, config.phase_bits);
    return out;
}

// ---------------------------------------------------------------------------------------------

ScenarioData::ScenarioData(const SystemConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed), scenario_(generate_scenario(config, seed)) {
    config_.validate();
    const std::uint64_t ch_seed = mix_seed(seed, 1);
    states_.push_back(init_channel(config_, scenario_, ch_seed));
    for (int n = 1; n < config_.subframes_per_frame; ++n)
        states_.push_back(evolve_channel(states_.back(), config_, scenario_, n, ch_seed));
}

const ChannelState& ScenarioData::state(int n) {
    if (n < 0 || n >= static_cast<int>(states_.size()))
        throw InvalidArgument("ScenarioData::state: subframe " + std::to_string(n) + " out of range");
    return states_[static_cast<std::size_t>(n)];
}

const std::vector<IciBlocks>& ScenarioData::symbols(int n) {
    auto it = symbols_.find(n);
    if (it != symbols_.end()) return it->second;
    std::vector<IciBlocks> s;
    for (int l = 0; l < config_.symbols_per_subframe; ++l) s.push_back(intercarrier_response(state(n), config_, l));
    return symbols_.emplace(n, std::move(s)).first->second;
}

SdrProblem ScenarioData::problem(int n, const UtilityWeights& w) {
    const auto& st = state(n);
    return make_sdr_problem(symbols(n)[0], st.target.pos.theta, st.target.alpha, config_, w);
}

namespace {
SdrOptions design_options(const SystemConfig& c) {
    SdrOptions o;
    o.tau_grid = c.opt_tau_grid;
    return o;
}
}  // namespace

const Boundaries& ScenarioData::boundaries(int n) {
    auto it = bounds_.find(n);
    if (it != bounds_.end()) return it->second;
    return bounds_.emplace(n, compute_boundaries(problem(n, {}), design_options(config_))).first->second;
}

void ScenarioData::ensure_preamble() {
    if (preamble_ready_) return;
    Rng rng(mix_seed(seed_, 2));
    const auto& st = state(0);
    preamble_csi_ = symbols(0)[0];
    for (auto& b : preamble_csi_.blocks) {
        const double var = config_.csi_error_var * b.squaredNorm() / static_cast<double>(b.size());
        if (var > 0.0)
            for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] += complex_normal(rng, var);
    }
    auto taps = time_domain_channel(st, config_, config_.cp_len);
    double mean = 0.0;
    std::size_t count = 0;
    for (const auto& t : taps) {
        mean += t.squaredNorm();
        count += static_cast<std::size_t>(t.size());
    }
    const double tap_var = count ? config_.csi_error_var * mean / static_cast<double>(count) : 0.0;
    if (tap_var > 0.0)
        for (auto& t : taps)
            for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += complex_normal(rng, tap_var);
    preamble_obs_ = channel_observation(taps, beamspace_dictionary(config_.n_tx, config_.dict_size));
    preamble_theta_ = st.target.pos.theta + normal(rng, deg2rad(config_.scan_error_sigma_deg));
    preamble_ready_ = true;
}

const HybridPrecoder& ScenarioData::preamble_precoder(double psi) {
    auto it = preamble_.find(psi);
    if (it != preamble_.end()) return it->second;
    ensure_preamble();
    const auto d = optimize_precoder(preamble_csi_, preamble_theta_, state(0).target.alpha, config_, psi,
                                     design_options(config_));
    return preamble_.emplace(psi, d.precoder).first->second;
}

const HybridPrecoder& ScenarioData::optimized_precoder(double psi, int n) {
    const auto key = std::make_pair(psi, n);
    auto it = optimized_.find(key);
    if (it != optimized_.end()) return it->second;
    const auto& st = state(n);
    const auto d = optimize_precoder(symbols(n)[0], st.target.pos.theta, st.target.alpha, config_, psi,
                                     design_options(config_), boundaries(n));
    return optimized_.emplace(key, d.precoder).first->second;
}

const RMat& ScenarioData::preamble_observation() {
    ensure_preamble();
    return preamble_obs_;
}

double ScenarioData::preamble_target_angle() {
    ensure_preamble();
    return preamble_theta_;
}

// ---------------------------------------------------------------------------------------------

double EpisodeRecord::cumulative_reward() const {
    double s = 0.0;
    for (const auto& i : info) s += i.reward;
    return s;
}

double EpisodeRecord::mean_se() const {
    if (info.empty()) return 0.0;
    double s = 0.0;
    for (const auto& i : info) s += i.se;
    return s / static_cast<double>(info.size());
}

double EpisodeRecord::mean_crlb() const {
    if (info.empty()) return 0.0;
    double s = 0.0;
    for (const auto& i : info) s += i.crlb;
    return s / static_cast<double>(info.size());
}

json observation_to_json(const Observation& o) {
    json grids = json::array();
    for (const auto& g : o.s_p) grids.push_back(mat_json(g));
    return {{"s_h", mat_json(o.s_h)}, {"s_p", grids}};
}

void EpisodeRecord::write_jsonl(std::ostream& os, bool include_obs) const {
    for (std::size_t k = 0; k < info.size(); ++k) {
        const auto& i = info[k];
        json j = {{"subframe", i.subframe},     {"reward", i.reward},
                  {"se", i.se},                 {"fisher", i.fisher},
                  {"crlb", std::isfinite(i.crlb) ? json(i.crlb) : json(nullptr)},
                  {"se_bound", i.se_bound},     {"fisher_bound", i.fisher_bound},
                  {"clamped", i.clamped}};
        if (k < transitions.size()) {
            const auto& a = transitions[k].action;
            j["action"] = {{"type", to_string(a.type)},
                           {"select", vec_json(a.select)},
                           {"phase", vec_json(a.phase)},
                           {"digital", vec_json(a.digital)}};
            j["terminal"] = transitions[k].terminal;
            if (include_obs) j["obs"] = observation_to_json(transitions[k].obs);
        }
        os << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------------------------

IsacEnv::IsacEnv(std::shared_ptr<ScenarioData> data, const EnvOptions& options, std::uint64_t episode_seed)
    : data_(std::move(data)), options_(options), episode_seed_(episode_seed), rng_(episode_seed) {
    if (!data_) throw InvalidArgument("IsacEnv: null scenario data");
    if (!(options_.psi >= 0.0 && options_.psi <= 1.0)) throw InvalidArgument("IsacEnv: psi must be in [0,1]");
    if (!(options_.eta_r >= 0.0)) throw InvalidArgument("IsacEnv: eta_r must be >= 0");
}

void IsacEnv::push_grid(const RMat& g) {
    window_[0] = window_[1];
    window_[1] = window_[2];
    window_[2] = g;
}

Observation IsacEnv::reset() {
    const auto& c = config();
    rng_.seed(episode_seed_);
    n_ = 0;
    precoder_ = data_->preamble_precoder(options_.psi);
    for (auto& w : window_) w = RMat::Zero(c.grid.n_x, c.grid.n_y);
    const auto& sc = data_->scenario();
    last_users_.clear();
    for (const auto& u : sc.users) last_users_.push_back(gps_reading(u.pos[0], c, rng_));
    const PolarPosition tgt{data_->preamble_target_angle(),
                            std::max(0.0, sc.target.pos[0].dist + normal(rng_, c.range_error_sigma_m))};
    push_grid(position_spectrum(last_users_, tgt, c.grid).grid);
    started_ = true;
    return observe();
}

Observation IsacEnv::observe() const {
    const auto& c = config();
    Observation o;
    const RMat& sh = data_->preamble_observation();
    o.s_h = options_.obs_mode == ObsMode::po ? RMat::Zero(sh.rows(), sh.cols()) : sh;
    for (int k = 0; k < 3; ++k)
        o.s_p[static_cast<std::size_t>(k)] = options_.obs_mode == ObsMode::co ? RMat::Zero(c.grid.n_x, c.grid.n_y)
                                                                              : window_[static_cast<std::size_t>(k)];
    return o;
}

Observation IsacEnv::step(const HybridAction& action, StepInfo& info) {
    if (!started_ || done()) throw StateError("IsacEnv::step: call reset() before stepping a finished frame");
    if (action.type != options_.action_type) throw InvalidArgument("IsacEnv::step: action type mismatch");
    precoder_ = action.type == ActionType::user_dim
                    ? apply_action_user_dim(precoder_, action, config(), rng_, options_.digital_scale)
                    : apply_action_antenna_dim(precoder_, action, config(), rng_, options_.eta_r);
    return transmit(info);
}

Observation IsacEnv::step_with_precoder(const HybridPrecoder& precoder, StepInfo& info) {
    if (!started_ || done()) throw StateError("IsacEnv::step_with_precoder: call reset() first");
    precoder_ = precoder;
    return transmit(info);
}

Observation IsacEnv::transmit(StepInfo& info) {
    const auto& c = config();
    const int n = n_;
    const auto& st = data_->state(n);
    const auto F = precoder_.equivalent_all();
    info = StepInfo{};
    info.subframe = n;
    info.se = spectral_efficiency(data_->symbols(n), F, c);
    info.fisher = total_fisher(st.target.pos.theta, F, st.target.alpha, c);
    const double dist = st.target.pos.dist;
    const AlphaSampler sampler = [&c, dist](Rng& r) {
        const double rcs = rayleigh_draw(r, c.rcs_sigma);
        const double ph = uniform(r, 0.0, 2.0 * kPi);
        std::vector<cd> a(static_cast<std::size_t>(c.n_sub));
        for (int m = 0; m < c.n_sub; ++m)
            a[static_cast<std::size_t>(m)] = reflection_coefficient(c.light_speed, c.subcarrier_freq(m), dist, rcs, ph);
        return a;
    };
    info.crlb = crlb(st.target.pos.theta, F, sampler, c.crlb_draws, rng_, c);
    const auto& b = data_->boundaries(n);
    info.se_bound = b.se_bound;
    info.fisher_bound = b.fisher_bound;
    info.reward = isac_utility(info.se, info.fisher, UtilityWeights{options_.psi, b.se_bound, b.fisher_bound});

    const auto& sc = data_->scenario();
    std::vector<PolarPosition> users;
    for (const auto& u : sc.users) users.push_back(u.pos[static_cast<std::size_t>(n)]);
    const auto est = estimate_positions(users, st.target.pos, info.crlb, c, rng_);
    std::vector<PolarPosition> ref = last_users_;
    if (c.feedback_period > 0 && n % c.feedback_period == 0) {
        ref.clear();
        for (const auto& u : users) ref.push_back(gps_reading(u, c, rng_));
    }
    const auto id = identify_users(est.objects, ref, c);
    last_users_.clear();
    for (int k : id.users) last_users_.push_back(est.objects[static_cast<std::size_t>(k)]);
    const auto g = position_spectrum(last_users_, est.objects[static_cast<std::size_t>(id.target)], c.grid);
    info.clamped = g.clamped;
    push_grid(g.grid);
    ++n_;
    return observe();
}

EpisodeRecord run_episode(Environment& env, const Policy& policy) {
    EpisodeRecord rec;
    Observation obs = env.reset();
    while (!env.done()) {
        Transition t;
        t.obs = obs;
        t.action = policy(obs, env);
        StepInfo info;
        t.next_obs = env.step(t.action, info);
        t.reward = info.reward;
        t.terminal = env.done();
        obs = t.next_obs;
        rec.transitions.push_back(std::move(t));
        rec.info.push_back(info);
    }
    return rec;
}

}  // namespace isac
