// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/hybrid.hpp"
#include "isac/metrics.hpp"
#include "isac/precoder.hpp"
#include "isac/scenario.hpp"
#include "isac/sdr.hpp"

namespace isac {

enum class ActionType { user_dim, antenna_dim };
/// Observation ablations: pc = CSI and positions, po = positions only, co = CSI only.
enum class ObsMode { pc, po, co };

const char* to_string(ActionType t);
const char* to_string(ObsMode m);
ActionType parse_action_type(const std::string& s);
ObsMode parse_obs_mode(const std::string& s);

struct Observation {
    RMat s_h;                  // N_d x (U G_t), beamspace magnitudes of the preamble CSI
    std::array<RMat, 3> s_p;   // oldest first; each N_x x N_y with entries in {0, 1, 2}
};

/// Type I: select = a_RF,1 in [0,1]^{U_max}, phase = a_RF,2 in [-1,1]^{N_t}, digital = a_BB in [-1,1]^M.
/// Type II: select = a_RF in [0,1]^{N_t}, phase empty, digital = a_BB in [-1,1]^M.
struct HybridAction {
    ActionType type = ActionType::user_dim;
    RVec select;
    RVec phase;
    RVec digital;

    RVec flatten() const;
    static HybridAction unflatten(ActionType type, const RVec& v, const SystemConfig& config);
};

int action_dim(ActionType type, const SystemConfig& config);
/// Throws InvalidArgument when a component is out of range or mis-sized.
void validate_action(const HybridAction& a, const SystemConfig& config);
/// Selection vectors uniform on the simplex, other components uniform in their ranges.
HybridAction random_action(ActionType type, const SystemConfig& config, Rng& rng);

/// Columns are steering vectors at sin-angles -1 + 2g/G_t, g = 0..G_t-1.
CMat beamspace_dictionary(int n_tx, int g_t);

/// Row d is |vec(H_d D_t)| (column-major vec, entry g U + u).
RMat channel_observation(const std::vector<CMat>& taps, const CMat& dict);

struct PositionEstimates {
    std::vector<PolarPosition> objects;  // unordered estimates of the U users and the target
    std::vector<int> truth;              // truth[i]: object index of estimate i (U = target); diagnostics only
};

/// Surrogate estimator. The target angle error has variance min(max(target_crlb, floor), cap);
/// user angle errors use the floor. Ranges get N(0, range_error_sigma^2), clamped to >= 0.
/// The returned estimates are randomly permuted.
PositionEstimates estimate_positions(const std::vector<PolarPosition>& users, const PolarPosition& target,
                                     double target_crlb, const SystemConfig& config, Rng& rng);

struct Identification {
    std::vector<int> users;  // users[u]: index into objects
    int target = -1;
};

/// Greedy nearest-neighbour assignment in user order under (dtheta/pi)^2 + (dd/d_max)^2; the
/// unclaimed estimate is the target. Throws StateError unless |objects| = |reference| + 1.
Identification identify_users(const std::vector<PolarPosition>& objects,
                              const std::vector<PolarPosition>& reference, const SystemConfig& config);

struct GridResult {
    RMat grid;
    bool clamped = false;
};

/// 1 at user cells, 2 at the target cell (the target wins a shared cell), 0 elsewhere.
GridResult position_spectrum(const std::vector<PolarPosition>& users, const std::optional<PolarPosition>& target,
                             const GridSpec& grid);

/// Floating-point operation tallies of the action-application routines on this thread: index
/// sampling, the precoder increment itself, and the unit-power renormalization.
struct UpdateCounts {
    std::uint64_t decode = 0;
    std::uint64_t update = 0;
    std::uint64_t normalize = 0;
};
UpdateCounts& update_counts();

/// Type I update: sample u*, rotate column u* by +-2 pi / 2^B per element, add scale * a_BB to
/// p_{., u*}, renormalize to unit power.
HybridPrecoder apply_action_user_dim(const HybridPrecoder& f, const HybridAction& a, const SystemConfig& config,
                                     Rng& rng, double digital_scale = 1.0);

/// Type II update: sample i*, F_m[i*, u] <- F_m[i*, u] (1 + eta_r e^{j pi angle(a_BB[m])}), new analog
/// phase from the phase-aligned sum over m, |p_{m,u}| <- |F_m[i*, u]|, renormalize, quantize.
HybridPrecoder apply_action_antenna_dim(const HybridPrecoder& f, const HybridAction& a,
                                        const SystemConfig& config, Rng& rng, double eta_r);

/// Action-independent per-scenario data: channel states, per-symbol ICI blocks, performance
/// boundaries and preamble designs. Lazily filled and reused across episodes.
class ScenarioData {
public:
    ScenarioData(const SystemConfig& config, std::uint64_t seed);

    const SystemConfig& config() const { return config_; }
    const Scenario& scenario() const { return scenario_; }
    std::uint64_t seed() const { return seed_; }
    int n_subframes() const { return config_.subframes_per_frame; }

    const ChannelState& state(int n);
    const std::vector<IciBlocks>& symbols(int n);
    const Boundaries& boundaries(int n);
    /// Optimization-based design on the preamble estimate; cached per psi.
    const HybridPrecoder& preamble_precoder(double psi);
    /// Optimization-based design on the true state of subframe n; cached per (psi, n).
    const HybridPrecoder& optimized_precoder(double psi, int n);
    const RMat& preamble_observation();
    double preamble_target_angle();
    /// SDR problem for subframe n (symbol-0 snapshot, true target) with the given weights.
    SdrProblem problem(int n, const UtilityWeights& w);

private:
    HybridPrecoder run_algorithm1(const SdrProblem& p, int n);
    void ensure_preamble();

    SystemConfig config_;
    std::uint64_t seed_;
    Scenario scenario_;
    std::vector<ChannelState> states_;
    std::map<int, std::vector<IciBlocks>> symbols_;
    std::map<int, Boundaries> bounds_;
    std::map<double, HybridPrecoder> preamble_;
    std::map<std::pair<double, int>, HybridPrecoder> optimized_;
    bool preamble_ready_ = false;
    IciBlocks preamble_csi_;
    RMat preamble_obs_;
    double preamble_theta_ = 0.0;
};

struct EnvOptions {
    ActionType action_type = ActionType::user_dim;
    ObsMode obs_mode = ObsMode::pc;
    double psi = 0.5;
    double eta_r = 0.1;
    double digital_scale = 1.0;  // Type I a_BB multiplier
};

struct StepInfo {
    int subframe = 0;
    double reward = 0.0;
    double se = 0.0;
    double fisher = 0.0;
    double crlb = 0.0;
    double se_bound = 0.0;
    double fisher_bound = 0.0;
    bool clamped = false;
};

struct Transition {
    Observation obs;
    HybridAction action;
    double reward = 0.0;
    Observation next_obs;
    bool terminal = false;
};

struct EpisodeRecord {
    std::vector<Transition> transitions;
    std::vector<StepInfo> info;
    double cumulative_reward() const;
    double mean_se() const;
    double mean_crlb() const;
    /// One JSON object per subframe (actions and metrics; observations when include_obs).
    void write_jsonl(std::ostream& os, bool include_obs = false) const;
};

nlohmann::json observation_to_json(const Observation& o);

/// Episodic interface consumed by the agent and the harness.
class Environment {
public:
    virtual ~Environment() = default;
    virtual Observation reset() = 0;
    virtual Observation step(const HybridAction& action, StepInfo& info) = 0;
    virtual bool done() const = 0;
    virtual ActionType action_type() const = 0;
    virtual const SystemConfig& config() const = 0;
};

/// One frame of the protocol: reset() runs the preamble, then step() once per subframe.
class IsacEnv : public Environment {
public:
    IsacEnv(std::shared_ptr<ScenarioData> data, const EnvOptions& options, std::uint64_t episode_seed);

    Observation reset() override;
    /// Applies the action, transmits subframe n, scores it and returns the next observation.
    Observation step(const HybridAction& action, StepInfo& info) override;
    /// Scores subframe n with an externally designed precoder (no action applied).
    Observation step_with_precoder(const HybridPrecoder& precoder, StepInfo& info);

    bool done() const override { return n_ >= data_->n_subframes(); }
    ActionType action_type() const override { return options_.action_type; }
    int subframe() const { return n_; }
    const HybridPrecoder& precoder() const { return precoder_; }
    const EnvOptions& options() const { return options_; }
    const SystemConfig& config() const override { return data_->config(); }
    ScenarioData& data() { return *data_; }
    Rng& rng() { return rng_; }

private:
    Observation observe() const;
    Observation transmit(StepInfo& info);
    void push_grid(const RMat& g);

    std::shared_ptr<ScenarioData> data_;
    EnvOptions options_;
    std::uint64_t episode_seed_;
    Rng rng_;
    HybridPrecoder precoder_;
    int n_ = 0;
    std::array<RMat, 3> window_;
    std::vector<PolarPosition> last_users_;
    bool started_ = false;
};

/// Runs one episode with a policy callback; the record holds T transitions.
using Policy = std::function<HybridAction(const Observation&, Environment&)>;
EpisodeRecord run_episode(Environment& env, const Policy& policy);

}  // namespace isac
