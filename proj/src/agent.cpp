// SPDX-License-Identifier: Apache-2.0
#include "isac/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "isac/io.hpp"

namespace isac {

using nn::Tensor;

NetworkShapes NetworkShapes::from(const Observation& obs, ActionType type, const SystemConfig& config) {
    NetworkShapes s;
    s.sh_rows = static_cast<int>(obs.s_h.rows());
    s.sh_cols = static_cast<int>(obs.s_h.cols());
    s.grid_x = static_cast<int>(obs.s_p[0].rows());
    s.grid_y = static_cast<int>(obs.s_p[0].cols());
    s.type = type;
    s.n_select = type == ActionType::user_dim ? config.u_max : config.n_tx;
    s.n_phase = type == ActionType::user_dim ? config.n_tx : 0;
    s.n_digital = config.n_sub;
    return s;
}

ObsBatch ObsBatch::from(const std::vector<const Observation*>& obs) {
    if (obs.empty()) throw InvalidArgument("ObsBatch: empty batch");
    const int N = static_cast<int>(obs.size());
    const int R = static_cast<int>(obs[0]->s_h.rows()), C = static_cast<int>(obs[0]->s_h.cols());
    const int X = static_cast<int>(obs[0]->s_p[0].rows()), Y = static_cast<int>(obs[0]->s_p[0].cols());
    RVec sh(static_cast<Eigen::Index>(N) * R * C), sp(static_cast<Eigen::Index>(N) * 3 * X * Y);
    for (int n = 0; n < N; ++n) {
        const Observation& o = *obs[static_cast<std::size_t>(n)];
        if (o.s_h.rows() != R || o.s_h.cols() != C) throw ShapeError("ObsBatch: inconsistent s_h shapes");
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) sh[(static_cast<Eigen::Index>(n) * R + r) * C + c] = o.s_h(r, c);
        for (int k = 0; k < 3; ++k) {
            const RMat& g = o.s_p[static_cast<std::size_t>(k)];
            if (g.rows() != X || g.cols() != Y) throw ShapeError("ObsBatch: inconsistent s_p shapes");
            for (int x = 0; x < X; ++x)
                for (int y = 0; y < Y; ++y) sp[((static_cast<Eigen::Index>(n) * 3 + k) * X + x) * Y + y] = g(x, y);
        }
    }
    ObsBatch b;
    b.sh = Tensor::constant({N, 1, R, C}, std::move(sh));
    b.sp = Tensor::constant({N, 3, X, Y}, std::move(sp));
    return b;
}

// ---------------------------------------------------------------------------------------------

PsacNetwork::Stream PsacNetwork::make_stream(int in_ch, int h, int w, Rng& rng) {
    Stream s;
    s.c1 = nn::Conv2d(in_ch, dims_.conv1, dims_.kernel, nn::Init::he_uniform, rng);
    s.b1 = nn::BatchNorm(dims_.conv1, dims_.bn_momentum);
    // A pooling stage is skipped once a spatial side would drop below one.
    s.pool1 = h >= 2 && w >= 2;
    if (s.pool1) h /= 2, w /= 2;
    s.c2 = nn::Conv2d(dims_.conv1, dims_.conv2, dims_.kernel, nn::Init::he_uniform, rng);
    s.b2 = nn::BatchNorm(dims_.conv2, dims_.bn_momentum);
    s.pool2 = h >= 2 && w >= 2;
    if (s.pool2) h /= 2, w /= 2;
    s.out_features = dims_.conv2 * h * w;
    return s;
}

Tensor PsacNetwork::run_stream(Stream& s, const Tensor& x, bool training) {
    Tensor y = nn::relu(s.b1(s.c1(x), training));
    if (s.pool1) y = nn::maxpool2d(y, 2);
    y = nn::relu(s.b2(s.c2(y), training));
    if (s.pool2) y = nn::maxpool2d(y, 2);
    return nn::flatten(y);
}

PsacNetwork::PsacNetwork(const NetworkShapes& shapes, const NetworkDims& dims, Rng& rng)
    : shapes_(shapes), dims_(dims) {
    if (shapes.sh_rows < 1 || shapes.sh_cols < 1 || shapes.grid_x < 1 || shapes.grid_y < 1 || shapes.n_select < 1 ||
        shapes.n_digital < 1)
        throw InvalidArgument("PsacNetwork: empty input or output shape");
    if (dims.conv1 < 1 || dims.conv2 < 1 || dims.width < 1 || dims.kernel < 1 || dims.kernel % 2 == 0 ||
        !(dims.bn_momentum > 0.0 && dims.bn_momentum <= 1.0))
        throw InvalidArgument("PsacNetwork: layer sizes must be positive, the kernel odd and bn_momentum in (0, 1]");
    const int W = dims.width;
    sh_ = make_stream(1, shapes.sh_rows, shapes.sh_cols, rng);
    sp_ = make_stream(3, shapes.grid_x, shapes.grid_y, rng);
    ae_ = nn::Dense(shapes.action_dim(), W, nn::Init::he_uniform, rng);
    ae_bn_ = nn::BatchNorm(W, dims.bn_momentum);
    in_ = nn::Dense(sh_.out_features + sp_.out_features + W, W, nn::Init::he_uniform, rng);
    in_bn_ = nn::BatchNorm(W, dims.bn_momentum);
    apu1_ = nn::Dense(W, W, nn::Init::he_uniform, rng);
    apu2_ = nn::Dense(W, shapes.n_select + shapes.n_phase, nn::Init::small_uniform, rng);
    dpu1_ = nn::Dense(W + shapes.n_select + shapes.n_phase, W, nn::Init::he_uniform, rng);
    dpu2_ = nn::Dense(W, shapes.n_digital, nn::Init::small_uniform, rng);
    vd1_ = nn::Dense(W, W, nn::Init::he_uniform, rng);
    vd2_ = nn::Dense(W, 1, nn::Init::xavier_uniform, rng);
}

Tensor PsacNetwork::encode_state(const ObsBatch& obs, bool training) {
    if (obs.sh.dim(2) != shapes_.sh_rows || obs.sh.dim(3) != shapes_.sh_cols)
        throw ShapeError("PsacNetwork: s_h input " + nn::shape_str(obs.sh.shape()) + " does not match network");
    if (obs.sp.dim(2) != shapes_.grid_x || obs.sp.dim(3) != shapes_.grid_y)
        throw ShapeError("PsacNetwork: s_p input " + nn::shape_str(obs.sp.shape()) + " does not match network");
    return nn::concat_cols({run_stream(sh_, obs.sh, training), run_stream(sp_, obs.sp, training)});
}

Tensor PsacNetwork::actor_from_state(const Tensor& state, bool /*training*/) {
    const int N = state.dim(0);
    const Tensor zero = Tensor::zeros({N, dims_.width});
    // The internal batch norm always reads its running statistics here: they track critic inputs
    // only, so the acting and the trained actor are the same function.
    const Tensor v = nn::relu(in_bn_(in_(nn::concat_cols({state, zero})), false));
    const Tensor rf = apu2_(nn::relu(apu1_(v)));
    Tensor a_rf = nn::sigmoid(nn::slice_cols(rf, 0, shapes_.n_select));
    if (shapes_.n_phase > 0)
        a_rf = nn::concat_cols({a_rf, nn::tanh(nn::slice_cols(rf, shapes_.n_select, shapes_.n_phase))});
    const Tensor bb = nn::tanh(dpu2_(nn::relu(dpu1_(nn::concat_cols({v, a_rf})))));
    return nn::concat_cols({a_rf, bb});
}

Tensor PsacNetwork::critic_from_state(const Tensor& state, const Tensor& action, bool training, bool frozen_head) {
    if (action.ndim() != 2 || action.dim(1) != shapes_.action_dim())
        throw ShapeError("PsacNetwork: action input " + nn::shape_str(action.shape()) + ", expected width " +
                         std::to_string(shapes_.action_dim()));
    auto p = [frozen_head](const Tensor& t) { return frozen_head ? t.detach() : t; };
    const Tensor ae = nn::linear(action, p(ae_.W), p(ae_.b));
    const Tensor va = nn::relu(nn::batch_norm(ae, p(ae_bn_.gamma), p(ae_bn_.beta), ae_bn_.running_mean,
                                              ae_bn_.running_var, training, ae_bn_.momentum, ae_bn_.eps));
    const Tensor in = nn::linear(nn::concat_cols({p(state), va}), p(in_.W), p(in_.b));
    const Tensor v = nn::relu(nn::batch_norm(in, p(in_bn_.gamma), p(in_bn_.beta), in_bn_.running_mean,
                                             in_bn_.running_var, training, in_bn_.momentum, in_bn_.eps));
    return nn::linear(nn::relu(nn::linear(v, p(vd1_.W), p(vd1_.b))), p(vd2_.W), p(vd2_.b));
}

HybridAction PsacNetwork::act(const Observation& obs, const SystemConfig& config) {
    const Tensor a = actor(ObsBatch::from({&obs}), false);
    return HybridAction::unflatten(shapes_.type, a.value(), config);
}

std::vector<Tensor> PsacNetwork::group(Group g) {
    std::vector<nn::NamedTensor> named;
    switch (g) {
        case Group::state_encoder:
            collect_stream("se.sh", sh_, named);
            collect_stream("se.sp", sp_, named);
            break;
        case Group::action_encoder:
            ae_.collect("ae.dense", named);
            ae_bn_.collect("ae.bn", named);
            break;
        case Group::internal:
            in_.collect("in.dense", named);
            in_bn_.collect("in.bn", named);
            break;
        case Group::action_decoder:
            apu1_.collect("ad.apu1", named);
            apu2_.collect("ad.apu2", named);
            dpu1_.collect("ad.dpu1", named);
            dpu2_.collect("ad.dpu2", named);
            break;
        case Group::value_decoder:
            vd1_.collect("vd.1", named);
            vd2_.collect("vd.2", named);
            break;
    }
    std::vector<Tensor> out;
    for (const auto& n : named)
        if (n.trainable) out.push_back(*n.tensor);
    return out;
}

namespace {
void append(std::vector<Tensor>& a, const std::vector<Tensor>& b) { a.insert(a.end(), b.begin(), b.end()); }
}  // namespace

std::vector<Tensor> PsacNetwork::actor_params() {
    std::vector<Tensor> out = group(Group::state_encoder);
    append(out, group(Group::internal));
    append(out, group(Group::action_decoder));
    return out;
}

std::vector<Tensor> PsacNetwork::critic_params() {
    std::vector<Tensor> out = group(Group::state_encoder);
    append(out, group(Group::action_encoder));
    append(out, group(Group::internal));
    append(out, group(Group::value_decoder));
    return out;
}

std::vector<Tensor> PsacNetwork::all_params() {
    std::vector<Tensor> out;
    for (auto g : {Group::state_encoder, Group::action_encoder, Group::internal, Group::action_decoder,
                   Group::value_decoder})
        append(out, group(g));
    return out;
}

void PsacNetwork::collect_stream(const std::string& prefix, Stream& s, std::vector<nn::NamedTensor>& out) {
    s.c1.collect(prefix + ".conv1", out);
    s.b1.collect(prefix + ".bn1", out);
    s.c2.collect(prefix + ".conv2", out);
    s.b2.collect(prefix + ".bn2", out);
}

std::vector<nn::NamedTensor> PsacNetwork::named() {
    std::vector<nn::NamedTensor> out;
    collect_stream("se.sh", sh_, out);
    collect_stream("se.sp", sp_, out);
    ae_.collect("ae.dense", out);
    ae_bn_.collect("ae.bn", out);
    in_.collect("in.dense", out);
    in_bn_.collect("in.bn", out);
    apu1_.collect("ad.apu1", out);
    apu2_.collect("ad.apu2", out);
    dpu1_.collect("ad.dpu1", out);
    dpu2_.collect("ad.dpu2", out);
    vd1_.collect("vd.1", out);
    vd2_.collect("vd.2", out);
    return out;
}

void PsacNetwork::copy_from(PsacNetwork& other) {
    auto dst = named();
    auto src = other.named();
    if (dst.size() != src.size()) throw ShapeError("PsacNetwork::copy_from: different architectures");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].tensor->shape() != src[i].tensor->shape())
            throw ShapeError("PsacNetwork::copy_from: '" + dst[i].name + "' shape mismatch");
        dst[i].tensor->value() = src[i].tensor->value();
    }
}

// ---------------------------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidArgument("ReplayBuffer: capacity must be positive");
    items_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(e));
    } else {
        items_[next_] = std::move(e);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (n > items_.size())
        throw InvalidArgument("ReplayBuffer::sample: " + std::to_string(n) + " requested, " +
                              std::to_string(items_.size()) + " stored");
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first n entries are a uniform sample without replacement.
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    std::vector<const Experience*> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[idx[i]]);
    return out;
}

// ---------------------------------------------------------------------------------------------

void TrainConfig::validate() const {
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("train: ") + name + " must be in [0,1]");
    };
    unit(gamma, "gamma");
    unit(xi, "xi");
    unit(tau_blend, "tau_blend");
    unit(lambda_init, "lambda_init");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (batch < 1 || batches_per_episode < 0 || lambda_period < 1 || episodes < 0)
        throw ConfigError("train: batch, batches_per_episode, lambda_period and episodes must be positive");
    if (buffer_capacity < static_cast<std::size_t>(batch)) throw ConfigError("train: buffer smaller than a batch");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"gamma", c.gamma},
         {"xi", c.xi},
         {"batch", c.batch},
         {"lr", c.lr},
         {"batches_per_episode", c.batches_per_episode},
         {"lambda_period", c.lambda_period},
         {"lambda_init", c.lambda_init},
         {"tau_blend", c.tau_blend},
         {"lambda_thres", c.lambda_thres},
         {"episodes", c.episodes},
         {"buffer_capacity", c.buffer_capacity},
         {"optimizer", c.use_sgd ? "sgd" : "adam"},
         {"dims", {{"conv1", c.dims.conv1}, {"conv2", c.dims.conv2}, {"kernel", c.dims.kernel}, {"width", c.dims.width},
                   {"bn_momentum", c.dims.bn_momentum}}},
         {"policy_term_full_gradient", c.policy_term_full_gradient}};
}

void apply_json(TrainConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "gamma") v.get_to(c.gamma);
            else if (k == "xi") v.get_to(c.xi);
            else if (k == "batch") v.get_to(c.batch);
            else if (k == "lr") v.get_to(c.lr);
            else if (k == "batches_per_episode") v.get_to(c.batches_per_episode);
            else if (k == "lambda_period") v.get_to(c.lambda_period);
            else if (k == "lambda_init") v.get_to(c.lambda_init);
            else if (k == "tau_blend") v.get_to(c.tau_blend);
            else if (k == "lambda_thres") v.get_to(c.lambda_thres);
            else if (k == "episodes") v.get_to(c.episodes);
            else if (k == "buffer_capacity") v.get_to(c.buffer_capacity);
            else if (k == "policy_term_full_gradient") v.get_to(c.policy_term_full_gradient);
            else if (k == "optimizer") {
                const auto s = v.get<std::string>();
                if (s != "adam" && s != "sgd") throw ConfigError("train: optimizer must be 'adam' or 'sgd'");
                c.use_sgd = s == "sgd";
            } else if (k == "dims") {
                for (auto d = v.begin(); d != v.end(); ++d) {
                    if (d.key() == "conv1") d.value().get_to(c.dims.conv1);
                    else if (d.key() == "conv2") d.value().get_to(c.dims.conv2);
                    else if (d.key() == "kernel") d.value().get_to(c.dims.kernel);
                    else if (d.key() == "width") d.value().get_to(c.dims.width);
                    else if (d.key() == "bn_momentum") d.value().get_to(c.dims.bn_momentum);
                    else throw ConfigError("unknown train key 'dims." + d.key() + "'");
                }
            } else {
                throw ConfigError("unknown train key '" + k + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("train key '" + k + "': " + e.what());
        }
    }
    c.validate();
}

// ---------------------------------------------------------------------------------------------

namespace {

std::vector<const Observation*> obs_of(const std::vector<const Experience*>& batch, bool next) {
    std::vector<const Observation*> out;
    for (const auto* e : batch) out.push_back(next ? &e->next_obs : &e->obs);
    return out;
}

}  // namespace

RVec target_values(const std::vector<const Experience*>& batch, PsacNetwork& target, double gamma) {
    const int N = static_cast<int>(batch.size());
    RVec y(N);
    for (int i = 0; i < N; ++i) y[i] = batch[static_cast<std::size_t>(i)]->reward;
    if (gamma == 0.0) return y;
    const Tensor s = target.encode_state(ObsBatch::from(obs_of(batch, true)), false);
    const Tensor q = target.critic_from_state(s, target.actor_from_state(s, false), false);
    for (int i = 0; i < N; ++i)
        if (!batch[static_cast<std::size_t>(i)]->terminal) y[i] += gamma * q.value()[i];
    return y;
}

LossParts unified_loss(const std::vector<const Experience*>& batch, const RVec& y, PsacNetwork& net,
                       PsacNetwork& target, double lambda, bool full_gradient) {
    const int N = static_cast<int>(batch.size());
    const int A = net.shapes().action_dim();
    if (y.size() != N) throw ShapeError("unified_loss: target size mismatch");
    const ObsBatch obs = ObsBatch::from(obs_of(batch, false));
    RVec acts(static_cast<Eigen::Index>(N) * A);
    for (int i = 0; i < N; ++i) {
        const RVec& a = batch[static_cast<std::size_t>(i)]->action;
        if (a.size() != A) throw ShapeError("unified_loss: stored action has the wrong width");
        acts.segment(static_cast<Eigen::Index>(i) * A, A) = a;
    }
    const Tensor mu_t = target.actor(obs, false).detach();

    const Tensor state = net.encode_state(obs, true);
    // The actor and the policy term read the running statistics before the critic pass moves
    // them, so Z depends on the parameters only through the graph.
    const Tensor mu = net.actor_from_state(state, true);
    const Tensor q_mu = net.critic_from_state(state, mu, false, !full_gradient);
    const Tensor q = net.critic_from_state(state, Tensor::constant({N, A}, acts), true);

    const double inv_n = 1.0 / N;
    const Tensor critic = nn::scale(nn::sum(nn::smooth_l1(nn::sub(Tensor::constant({N, 1}, y), q))), inv_n);
    const Tensor imitation = nn::scale(nn::sum(nn::smooth_l1(nn::sub(mu, mu_t))), (1.0 - lambda) * inv_n);
    const Tensor policy = nn::scale(nn::sum(q_mu), lambda * inv_n);
    const Tensor actor = nn::sub(imitation, policy);
    LossParts out;
    out.total = nn::add(critic, actor);
    out.critic = critic.item();
    out.actor = actor.item();
    return out;
}

double lambda_update(double lambda_prev, double critic_loss_avg, double tau_blend) {
    return tau_blend * std::exp(-critic_loss_avg * critic_loss_avg) + (1.0 - tau_blend) * lambda_prev;
}

HybridAction explore(const HybridAction& a, double xi, const SystemConfig& config, Rng& rng) {
    if (!(xi >= 0.0 && xi <= 1.0)) throw InvalidArgument("explore: xi must be in [0,1]");
    if (xi == 0.0) return a;
    // Drawn unconditionally so the stream position does not depend on the outcome.
    const double u = uniform(rng, 0.0, 1.0);
    HybridAction r = random_action(a.type, config, rng);
    return u < xi ? r : a;
}

// ---------------------------------------------------------------------------------------------

PsacAgent::PsacAgent(const NetworkShapes& shapes, const TrainConfig& config, std::uint64_t seed)
    : config_(config),
      rng_(mix_seed(seed, 11)),
      net_(shapes, config.dims, rng_),
      target_(shapes, config.dims, rng_),
      buffer_(config.buffer_capacity),
      lambda_(config.lambda_init) {
    config_.validate();
    target_.copy_from(net_);
    if (config_.use_sgd)
        opt_ = std::make_unique<nn::Sgd>(net_.all_params(), config_.lr);
    else
        opt_ = std::make_unique<nn::Adam>(net_.all_params(), config_.lr);
}

void PsacAgent::sync_target() {
    target_.copy_from(net_);
    ++syncs_;
}

LossParts PsacAgent::learn_batch() {
    const auto batch = buffer_.sample(static_cast<std::size_t>(config_.batch), rng_);
    const RVec y = target_values(batch, target_, config_.gamma);
    LossParts parts = unified_loss(batch, y, net_, target_, lambda_, config_.policy_term_full_gradient);
    if (!std::isfinite(parts.total.item()) || !y.allFinite()) {
        std::ostringstream os;
        os << "training diverged: loss " << parts.total.item() << " (critic " << parts.critic << ", actor "
           << parts.actor << "), lambda " << lambda_ << ", max |y| " << y.cwiseAbs().maxCoeff() << ", syncs "
           << syncs_;
        throw NumericalError(os.str());
    }
    opt_->zero_grad();
    parts.total.backward();
    double g2 = 0.0;
    for (const auto& p : net_.actor_params()) g2 += p.grad().squaredNorm();
    last_grad_norm_ = std::sqrt(g2);
    opt_->step();

    pending_critic_.push_back(parts.critic);
    if (static_cast<int>(pending_critic_.size()) == config_.lambda_period) {
        const double avg =
            std::accumulate(pending_critic_.begin(), pending_critic_.end(), 0.0) / static_cast<double>(pending_critic_.size());
        pending_critic_.clear();
        lambda_ = lambda_update(lambda_, avg, config_.tau_blend);
        if (lambda_ > config_.lambda_thres) sync_target();
    }
    return parts;
}

std::vector<EpisodeLog> PsacAgent::train(const std::function<std::unique_ptr<Environment>(int)>& make_env,
                                         const std::function<void(const EpisodeLog&)>& on_episode) {
    std::vector<EpisodeLog> log;
    double grad_min = std::numeric_limits<double>::infinity();
    for (int e = 0; e < config_.episodes; ++e) {
        auto env = make_env(e);
        if (!env) throw InvalidArgument("train: environment factory returned null");
        if (env->action_type() != net_.shapes().type) throw InvalidArgument("train: environment action type mismatch");
        EpisodeLog row;
        row.episode = e;
        Observation obs = env->reset();
        while (!env->done()) {
            const HybridAction a = explore(net_.act(obs, env->config()), config_.xi, env->config(), rng_);
            StepInfo info;
            Observation next = env->step(a, info);
            row.cumulative_reward += info.reward;
            buffer_.push({obs, a.flatten(), info.reward, next, env->done()});
            obs = std::move(next);
        }
        if (buffer_.size() >= static_cast<std::size_t>(config_.batch) && config_.batches_per_episode > 0) {
            for (int k = 0; k < config_.batches_per_episode; ++k) {
                const LossParts p = learn_batch();
                row.critic_loss += p.critic / config_.batches_per_episode;
                row.actor_loss += p.actor / config_.batches_per_episode;
            }
            grad_min = std::min(grad_min, last_grad_norm_);
        }
        row.lambda = lambda_;
        row.grad_norm = last_grad_norm_;
        row.grad_norm_min = grad_min;
        row.syncs = syncs_;
        log.push_back(row);
        if (on_episode) on_episode(row);
    }
    return log;
}

Policy PsacAgent::greedy_policy() {
    return [this](const Observation& o, Environment& env) { return net_.act(o, env.config()); };
}

void PsacAgent::save(const std::string& path) {
    nn::save_checkpoint(path, net_.named());
    const auto& s = net_.shapes();
    nlohmann::json meta = {{"version", nn::kCheckpointVersion},
                           {"action_type", to_string(s.type)},
                           {"shapes",
                            {{"sh_rows", s.sh_rows},
                             {"sh_cols", s.sh_cols},
                             {"grid_x", s.grid_x},
                             {"grid_y", s.grid_y},
                             {"n_select", s.n_select},
                             {"n_phase", s.n_phase},
                             {"n_digital", s.n_digital}}},
                           {"train", config_},
                           {"lambda", lambda_}};
    std::ofstream os(path + ".meta.json");
    if (!os) throw IoError("PsacAgent::save: cannot write " + path + ".meta.json");
    os << meta.dump(2) << '\n';
}

void PsacAgent::load(const std::string& path) {
    nn::load_checkpoint(path, net_.named());
    target_.copy_from(net_);
}

void write_training_csv(std::ostream& os, const std::vector<EpisodeLog>& log) {
    CsvWriter w(os);
    w.row({"episode", "cumulative_reward", "critic_loss", "actor_loss", "lambda", "grad_norm", "grad_norm_min", "syncs"});
    for (const auto& r : log)
        w.row({std::to_string(r.episode), format_double(r.cumulative_reward), format_double(r.critic_loss),
               format_double(r.actor_loss), format_double(r.lambda), format_double(r.grad_norm),
               format_double(r.grad_norm_min), std::to_string(r.syncs)});
}

}  // namespace isac
