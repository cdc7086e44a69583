// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "isac/env.hpp"
#include "isac/nn.hpp"

namespace isac {

/// Layer widths of the actor-critic network; the defaults are the documented desk values.
struct NetworkDims {
    int conv1 = 8;
    int conv2 = 16;
    int kernel = 3;
    int width = 128;
    double bn_momentum = 0.1;  // running-statistics weight of the newest batch
};

/// Input and output geometry derived from one observation and the action type.
struct NetworkShapes {
    int sh_rows = 0, sh_cols = 0;
    int grid_x = 0, grid_y = 0;
    ActionType type = ActionType::user_dim;
    int n_select = 0, n_phase = 0, n_digital = 0;

    int action_dim() const { return n_select + n_phase + n_digital; }
    static NetworkShapes from(const Observation& obs, ActionType type, const SystemConfig& config);
};

/// Batched observations: s_h as (N, 1, rows, cols), s_p as (N, 3, n_x, n_y).
struct ObsBatch {
    nn::Tensor sh, sp;
    static ObsBatch from(const std::vector<const Observation*>& obs);
    int size() const { return sh.dim(0); }
};

/// Parameter-shared actor-critic. The state encoder and internal layer are shared; the actor
/// feeds a zero action embedding into the internal layer.
class PsacNetwork {
public:
    enum class Group { state_encoder, action_encoder, internal, action_decoder, value_decoder };

    PsacNetwork(const NetworkShapes& shapes, const NetworkDims& dims, Rng& rng);

    nn::Tensor encode_state(const ObsBatch& obs, bool training);
    /// (N, action_dim) in HybridAction::flatten order.
    nn::Tensor actor_from_state(const nn::Tensor& state, bool training);
    /// (N, 1). With frozen_head the state and every critic-side weight enter as constants, so the
    /// gradient reaches the parameters only through the action input.
    nn::Tensor critic_from_state(const nn::Tensor& state, const nn::Tensor& action, bool training,
                                 bool frozen_head = false);
    nn::Tensor actor(const ObsBatch& obs, bool training) { return actor_from_state(encode_state(obs, training), training); }
    nn::Tensor critic(const ObsBatch& obs, const nn::Tensor& action, bool training) {
        return critic_from_state(encode_state(obs, training), action, training);
    }
    /// Evaluation-mode action for one observation.
    HybridAction act(const Observation& obs, const SystemConfig& config);

    std::vector<nn::Tensor> group(Group g);
    std::vector<nn::Tensor> actor_params();   // state encoder, internal, action decoder
    std::vector<nn::Tensor> critic_params();  // state encoder, action encoder, internal, value decoder
    std::vector<nn::Tensor> all_params();
    /// Trainable parameters and batch-norm buffers, in a fixed order.
    std::vector<nn::NamedTensor> named();
    /// Copies every parameter and buffer value (hard target sync).
    void copy_from(PsacNetwork& other);

    const NetworkShapes& shapes() const { return shapes_; }
    const NetworkDims& dims() const { return dims_; }

private:
    struct Stream {
        nn::Conv2d c1, c2;
        nn::BatchNorm b1, b2;
        bool pool1 = true, pool2 = true;
        int out_features = 0;
    };
    Stream make_stream(int in_ch, int h, int w, Rng& rng);
    nn::Tensor run_stream(Stream& s, const nn::Tensor& x, bool training);
    void collect_stream(const std::string& prefix, Stream& s, std::vector<nn::NamedTensor>& out);

    NetworkShapes shapes_;
    NetworkDims dims_;
    Stream sh_, sp_;
    nn::Dense ae_;
    nn::BatchNorm ae_bn_;
    nn::Dense in_;
    nn::BatchNorm in_bn_;
    nn::Dense apu1_, apu2_, dpu1_, dpu2_, vd1_, vd2_;
};

struct Experience {
    Observation obs;
    RVec action;  // flattened
    double reward = 0.0;
    Observation next_obs;
    bool terminal = false;
};

/// Fixed-capacity ring buffer with uniform sampling without replacement inside a batch.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(Experience e);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// Throws InvalidArgument when n exceeds size().
    std::vector<const Experience*> sample(std::size_t n, Rng& rng) const;
    const Experience& at(std::size_t i) const { return items_.at(i); }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Experience> items_;
};

struct TrainConfig {
    double gamma = 0.6;
    double xi = 0.2;
    int batch = 64;
    double lr = 1e-3;  // 0.02 saturates the bounded action heads under Adam
    int batches_per_episode = 16;
    int lambda_period = 4;
    double lambda_init = 0.5;
    double tau_blend = 0.5;
    double lambda_thres = 0.6;
    int episodes = 200;
    std::size_t buffer_capacity = 1024;
    bool use_sgd = false;
    /// Differentiate the -lambda Q(o, mu(o)) term through the critic weights and the state too.
    bool policy_term_full_gradient = false;
    NetworkDims dims{};
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void apply_json(TrainConfig& c, const nlohmann::json& j);

/// y_i = r_i + gamma Q'(o'_i, mu'(o'_i)), with no bootstrap on terminal transitions. The target
/// network runs in evaluation mode.
RVec target_values(const std::vector<const Experience*>& batch, PsacNetwork& target, double gamma);

struct LossParts {
    nn::Tensor total;      // Z, batch mean
    double critic = 0.0;   // mean f(y - Q(o, a))
    double actor = 0.0;    // mean of (1 - lambda) sum_j f(mu - mu') - lambda Q(o, mu(o))
};

/// Z_i = f(y_i - Q(o,a)) + (1 - lambda) sum_j f(mu_j(o) - mu'_j(o)) - lambda Q(o, mu(o)).
/// full_gradient = false routes the -lambda Q(o, mu(o)) term through mu only (deterministic policy
/// gradient); otherwise it also pushes Q up through the critic weights, which diverges in training.
/// The actor and the policy term read batch-norm running statistics from before this call.
LossParts unified_loss(const std::vector<const Experience*>& batch, const RVec& y, PsacNetwork& net,
                       PsacNetwork& target, double lambda, bool full_gradient = true);

/// lambda <- tau e^{-L_c^2} + (1 - tau) lambda_prev.
double lambda_update(double lambda_prev, double critic_loss_avg, double tau_blend);

/// With probability xi the whole action is replaced by random_action; otherwise it passes through.
HybridAction explore(const HybridAction& a, double xi, const SystemConfig& config, Rng& rng);

struct EpisodeLog {
    int episode = 0;
    double cumulative_reward = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double lambda = 0.0;
    double grad_norm = 0.0;      // actor-parameter gradient norm of the last batch
    double grad_norm_min = 0.0;  // running minimum over training
    int syncs = 0;               // cumulative hard target syncs
};

class PsacAgent {
public:
    PsacAgent(const NetworkShapes& shapes, const TrainConfig& config, std::uint64_t seed);

    /// Algorithm 2 over config.episodes episodes; make_env(e) supplies the environment of episode e.
    /// `on_episode` observes each log row. Throws NumericalError on a non-finite loss.
    std::vector<EpisodeLog> train(const std::function<std::unique_ptr<Environment>(int)>& make_env,
                                  const std::function<void(const EpisodeLog&)>& on_episode = {});
    /// One gradient step on a sampled batch; updates lambda bookkeeping. Returns the loss parts.
    LossParts learn_batch();

    HybridAction act(const Observation& obs, const SystemConfig& config) { return net_.act(obs, config); }
    Policy greedy_policy();

    PsacNetwork& network() { return net_; }
    PsacNetwork& target() { return target_; }
    ReplayBuffer& buffer() { return buffer_; }
    double lambda() const { return lambda_; }
    const TrainConfig& config() const { return config_; }
    Rng& rng() { return rng_; }

    /// Binary checkpoint of the online network plus `path + ".meta.json"` with shapes and config.
    void save(const std::string& path);
    /// Loads into a network with matching shapes; the target network is synced to it.
    void load(const std::string& path);

private:
    void sync_target();

    TrainConfig config_;
    Rng rng_;
    PsacNetwork net_, target_;
    ReplayBuffer buffer_;
    std::unique_ptr<nn::Optimizer> opt_;
    double lambda_;
    std::vector<double> pending_critic_;
    int syncs_ = 0;
    double last_grad_norm_ = 0.0;
};

void write_training_csv(std::ostream& os, const std::vector<EpisodeLog>& log);

}  // namespace isac
