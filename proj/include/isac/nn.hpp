// SPDX-License-Identifier: Apache-2.0
// Reverse-mode automatic differentiation over dense double tensors, plus the layer set used by the
// actor-critic network. Tensors are row-major; 4-D activations are NCHW.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "isac/common.hpp"

namespace isac::nn {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
Eigen::Index shape_numel(const Shape& s);

struct Node {
    Shape shape;
    RVec value;
    RVec grad;  // empty until first accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    RVec& grad_ref();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor constant(const Shape& shape, RVec values);
    static Tensor zeros(const Shape& shape);
    static Tensor parameter(const Shape& shape, RVec values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int dim(int i) const;
    int ndim() const { return static_cast<int>(shape().size()); }
    Eigen::Index numel() const { return value().size(); }
    const RVec& value() const;
    RVec& value();
    /// Zero-filled when no gradient has been accumulated.
    RVec grad() const;
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void zero_grad();
    double item() const;
    /// Constant with the same value, cut from the graph.
    Tensor detach() const;
    /// Seeds d(this)/d(this) = 1 and propagates to every reachable node. Throws StateError for an
    /// undefined tensor and ShapeError for a non-scalar.
    void backward() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// ---- operations ---------------------------------------------------------------------------

/// x (N x I) times W (I x O) plus b (O).
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);
/// 'same' padding when pad = k/2; stride 1. x (N,C,H,W), W (O,C,k,k), b (O).
Tensor conv2d(const Tensor& x, const Tensor& W, const Tensor& b, int pad);
/// Non-overlapping k x k windows; trailing rows/columns that do not fill a window are dropped.
Tensor maxpool2d(const Tensor& x, int k = 2);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// 0.5 x^2 for |x| <= 1, |x| - 0.5 otherwise.
Tensor smooth_l1(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// (N, ...) -> (N, prod(...)).
Tensor flatten(const Tensor& x);
/// Same values under a new shape with the same element count.
Tensor reshape(const Tensor& x, const Shape& shape);
/// Column-wise concatenation of 2-D tensors with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor slice_cols(const Tensor& x, int start, int len);
/// Feature axis 1. Training mode normalizes with batch statistics and updates the running
/// buffers in place; evaluation mode reads them only.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum, double eps);

double smooth_l1_value(double x);
double smooth_l1_grad(double x);

// ---- layers -------------------------------------------------------------------------------

/// small_uniform draws from U(-3e-3, 3e-3), keeping bounded output heads in their linear range at start.
enum class Init { he_uniform, xavier_uniform, small_uniform, identity, zeros };

struct NamedTensor {
    std::string name;
    Tensor* tensor;
    bool trainable;
};

class Dense {
public:
    Dense() = default;
    Dense(int in, int out, Init init, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedTensor>& out);
    int in() const { return in_; }
    int out() const { return out_; }
    Tensor W, b;

private:
    int in_ = 0, out_ = 0;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int k, Init init, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedTensor>& out);
    Tensor W, b;

private:
    int in_ = 0, out_ = 0, k_ = 3;
};

class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int features, double momentum = 0.1, double eps = 1e-5);
    Tensor operator()(const Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<NamedTensor>& out);
    Tensor gamma, beta, running_mean, running_var;
    double momentum = 0.1, eps = 1e-5;
};

// ---- optimizers ---------------------------------------------------------------------------

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step() = 0;
    void zero_grad();
    double lr = 1e-3;

protected:
    std::vector<Tensor> params_;
};

class Adam : public Optimizer {
public:
    Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step() override;
    long steps() const { return t_; }

private:
    double b1_, b2_, eps_;
    long t_ = 0;
    std::vector<RVec> m_, v_;
};

class Sgd : public Optimizer {
public:
    Sgd(std::vector<Tensor> params, double lr);
    void step() override;
};

// ---- checkpoints --------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary blob: "ISACNN\0\0", u32 version, u32 count, then per tensor (u32 name length, name,
/// u32 ndim, i32 dims, f64 values). A JSON manifest with names, shapes and offsets goes to
/// `path + ".json"`.
void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
/// Loads values in place; names and shapes must match exactly. Throws IoError / ShapeError.
void load_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
nlohmann::json export_json(const std::vector<NamedTensor>& tensors);

}  // namespace isac::nn
