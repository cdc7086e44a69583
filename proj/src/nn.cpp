// SPDX-License-Identifier: Apache-2.0
#include "isac/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace isac::nn {

namespace {

using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RM>;
using CMapRM = Eigen::Map<const RM>;
using NodePtr = std::shared_ptr<Node>;

Tensor make(const Shape& shape, RVec value, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value = std::move(value);
    n->is_leaf = false;
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return Tensor(n);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

void accumulate(const NodePtr& p, const RVec& g) {
    if (p->requires_grad) p->grad_ref() += g;
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

Eigen::Index shape_numel(const Shape& s) {
    Eigen::Index n = 1;
    for (int d : s) n *= d;
    return n;
}

RVec& Node::grad_ref() {
    if (grad.size() != value.size()) grad = RVec::Zero(value.size());
    return grad;
}

Tensor Tensor::constant(const Shape& shape, RVec values) {
    if (values.size() != shape_numel(shape))
        throw ShapeError("Tensor::constant: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value = std::move(values);
    return Tensor(n);
}

Tensor Tensor::zeros(const Shape& shape) { return constant(shape, RVec::Zero(shape_numel(shape))); }

Tensor Tensor::parameter(const Shape& shape, RVec values) {
    Tensor t = constant(shape, std::move(values));
    t.node_->requires_grad = true;
    return t;
}

const Shape& Tensor::shape() const {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->shape;
}

int Tensor::dim(int i) const { return shape().at(static_cast<std::size_t>(i)); }

const RVec& Tensor::value() const {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->value;
}

RVec& Tensor::value() {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->value;
}

RVec Tensor::grad() const {
    const RVec& v = value();
    return node_->grad.size() == v.size() ? node_->grad : RVec::Zero(v.size());
}

void Tensor::zero_grad() {
    if (node_) node_->grad.resize(0);
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
    return value()[0];
}

Tensor Tensor::detach() const { return constant(shape(), value()); }

void Tensor::backward() const {
    if (!node_) throw StateError("backward: no forward result to differentiate");
    if (node_->value.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_str(node_->shape));
    if (!node_->requires_grad) return;
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->grad_ref().array() += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
}

// ---- operations -----------------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
    require(x.ndim() == 2 && W.ndim() == 2 && b.ndim() == 1, "linear: expects 2-D input, 2-D weight, 1-D bias");
    const int N = x.dim(0), I = x.dim(1), O = W.dim(1);
    require(W.dim(0) == I && b.dim(0) == O,
            "linear: input " + shape_str(x.shape()) + " does not chain with weight " + shape_str(W.shape()));
    RVec y(static_cast<Eigen::Index>(N) * O);
    MapRM Y(y.data(), N, O);
    Y.noalias() = CMapRM(x.value().data(), N, I) * CMapRM(W.value().data(), I, O);
    Y.rowwise() += b.value().transpose();
    auto xn = x.node(), wn = W.node(), bn = b.node();
    return make({N, O}, std::move(y), {xn, wn, bn}, [xn, wn, bn, N, I, O](Node& self) {
        CMapRM dY(self.grad.data(), N, O);
        if (xn->requires_grad) {
            MapRM dX(xn->grad_ref().data(), N, I);
            dX.noalias() += dY * CMapRM(wn->value.data(), I, O).transpose();
        }
        if (wn->requires_grad) {
            MapRM dW(wn->grad_ref().data(), I, O);
            dW.noalias() += CMapRM(xn->value.data(), N, I).transpose() * dY;
        }
        if (bn->requires_grad) bn->grad_ref() += dY.colwise().sum().transpose();
    });
}

Tensor conv2d(const Tensor& x, const Tensor& W, const Tensor& b, int pad) {
    require(x.ndim() == 4 && W.ndim() == 4 && b.ndim() == 1, "conv2d: expects NCHW input and OCkk weight");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), Wd = x.dim(3);
    const int O = W.dim(0), k = W.dim(2);
    require(W.dim(1) == C && W.dim(3) == k && b.dim(0) == O,
            "conv2d: input " + shape_str(x.shape()) + " does not chain with weight " + shape_str(W.shape()));
    const int Ho = H + 2 * pad - k + 1, Wo = Wd + 2 * pad - k + 1;
    require(Ho > 0 && Wo > 0, "conv2d: kernel larger than padded input " + shape_str(x.shape()));
    const int K = C * k * k, P = Ho * Wo;
    auto cols = std::make_shared<std::vector<RM>>(static_cast<std::size_t>(N), RM(K, P));
    RVec y(static_cast<Eigen::Index>(N) * O * P);
    CMapRM Wm(W.value().data(), O, K);
    for (int n = 0; n < N; ++n) {
        RM& col = (*cols)[static_cast<std::size_t>(n)];
        const double* xs = x.value().data() + static_cast<Eigen::Index>(n) * C * H * Wd;
        for (int c = 0; c < C; ++c)
            for (int ki = 0; ki < k; ++ki)
                for (int kj = 0; kj < k; ++kj) {
                    const int r = (c * k + ki) * k + kj;
                    for (int i = 0; i < Ho; ++i) {
                        const int si = i + ki - pad;
                        for (int j = 0; j < Wo; ++j) {
                            const int sj = j + kj - pad;
                            col(r, i * Wo + j) =
                                (si >= 0 && si < H && sj >= 0 && sj < Wd) ? xs[(c * H + si) * Wd + sj] : 0.0;
                        }
                    }
                }
        MapRM Y(y.data() + static_cast<Eigen::Index>(n) * O * P, O, P);
        Y.noalias() = Wm * col;
        Y.colwise() += b.value();
    }
    auto xn = x.node(), wn = W.node(), bn = b.node();
    return make({N, O, Ho, Wo}, std::move(y), {xn, wn, bn},
                [xn, wn, bn, cols, N, C, H, Wd, O, k, pad, Ho, Wo, K, P](Node& self) {
                    CMapRM Wm(wn->value.data(), O, K);
                    for (int n = 0; n < N; ++n) {
                        CMapRM dY(self.grad.data() + static_cast<Eigen::Index>(n) * O * P, O, P);
                        const RM& col = (*cols)[static_cast<std::size_t>(n)];
                        if (wn->requires_grad) MapRM(wn->grad_ref().data(), O, K).noalias() += dY * col.transpose();
                        if (bn->requires_grad) bn->grad_ref() += dY.rowwise().sum();
                        if (xn->requires_grad) {
                            const RM dcol = Wm.transpose() * dY;
                            double* dx = xn->grad_ref().data() + static_cast<Eigen::Index>(n) * C * H * Wd;
                            for (int c = 0; c < C; ++c)
                                for (int ki = 0; ki < k; ++ki)
                                    for (int kj = 0; kj < k; ++kj) {
                                        const int r = (c * k + ki) * k + kj;
                                        for (int i = 0; i < Ho; ++i) {
                                            const int si = i + ki - pad;
                                            if (si < 0 || si >= H) continue;
                                            for (int j = 0; j < Wo; ++j) {
                                                const int sj = j + kj - pad;
                                                if (sj >= 0 && sj < Wd) dx[(c * H + si) * Wd + sj] += dcol(r, i * Wo + j);
                                            }
                                        }
                                    }
                        }
                    }
                });
}

Tensor maxpool2d(const Tensor& x, int k) {
    require(x.ndim() == 4, "maxpool2d: expects NCHW input, got " + shape_str(x.shape()));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), Wd = x.dim(3);
    const int Ho = H / k, Wo = Wd / k;
    require(Ho > 0 && Wo > 0, "maxpool2d: window larger than input " + shape_str(x.shape()));
    RVec y(static_cast<Eigen::Index>(N) * C * Ho * Wo);
    auto arg = std::make_shared<std::vector<Eigen::Index>>(static_cast<std::size_t>(y.size()));
    const double* xv = x.value().data();
    Eigen::Index o = 0;
    for (int nc = 0; nc < N * C; ++nc)
        for (int i = 0; i < Ho; ++i)
            for (int j = 0; j < Wo; ++j, ++o) {
                Eigen::Index best = static_cast<Eigen::Index>(nc) * H * Wd + (i * k) * Wd + j * k;
                for (int a = 0; a < k; ++a)
                    for (int c = 0; c < k; ++c) {
                        const Eigen::Index idx = static_cast<Eigen::Index>(nc) * H * Wd + (i * k + a) * Wd + j * k + c;
                        if (xv[idx] > xv[best]) best = idx;
                    }
                y[o] = xv[best];
                (*arg)[static_cast<std::size_t>(o)] = best;
            }
    auto xn = x.node();
    return make({N, C, Ho, Wo}, std::move(y), {xn}, [xn, arg](Node& self) {
        RVec& dx = xn->grad_ref();
        for (Eigen::Index i = 0; i < self.grad.size(); ++i) dx[(*arg)[static_cast<std::size_t>(i)]] += self.grad[i];
    });
}

namespace {

template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx_from_xy) {
    RVec y = x.value().unaryExpr(f);
    auto xn = x.node();
    auto yv = std::make_shared<RVec>(y);
    return make(x.shape(), std::move(y), {xn}, [xn, yv, dfdx_from_xy](Node& self) {
        RVec g(self.grad.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = self.grad[i] * dfdx_from_xy(xn->value[i], (*yv)[i]);
        accumulate(xn, g);
    });
}

}  // namespace

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

double smooth_l1_value(double x) { return std::abs(x) <= 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; }
double smooth_l1_grad(double x) { return std::clamp(x, -1.0, 1.0); }

Tensor smooth_l1(const Tensor& x) {
    return unary(x, smooth_l1_value, [](double v, double) { return smooth_l1_grad(v); });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    auto an = a.node(), bn = b.node();
    return make(a.shape(), a.value() + b.value(), {an, bn}, [an, bn](Node& self) {
        accumulate(an, self.grad);
        accumulate(bn, self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "sub: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    auto an = a.node(), bn = b.node();
    return make(a.shape(), a.value() - b.value(), {an, bn}, [an, bn](Node& self) {
        accumulate(an, self.grad);
        accumulate(bn, -self.grad);
    });
}

Tensor scale(const Tensor& a, double s) {
    auto an = a.node();
    return make(a.shape(), a.value() * s, {an}, [an, s](Node& self) { accumulate(an, self.grad * s); });
}

Tensor sum(const Tensor& x) {
    auto xn = x.node();
    return make({1}, RVec::Constant(1, x.value().sum()), {xn},
                [xn](Node& self) { accumulate(xn, RVec::Constant(xn->value.size(), self.grad[0])); });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor flatten(const Tensor& x) {
    require(x.ndim() >= 1, "flatten: scalar input");
    const int N = x.dim(0);
    const int F = static_cast<int>(x.numel() / std::max(N, 1));
    auto xn = x.node();
    return make({N, F}, x.value(), {xn}, [xn](Node& self) { accumulate(xn, self.grad); });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
    require(shape_numel(shape) == x.numel(), "reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
    auto xn = x.node();
    return make(shape, x.value(), {xn}, [xn](Node& self) { accumulate(xn, self.grad); });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat_cols: no inputs");
    const int N = xs[0].dim(0);
    std::vector<int> widths;
    std::vector<NodePtr> nodes;
    int total = 0;
    for (const auto& x : xs) {
        require(x.ndim() == 2 && x.dim(0) == N, "concat_cols: input " + shape_str(x.shape()) + " has wrong rows");
        widths.push_back(x.dim(1));
        nodes.push_back(x.node());
        total += x.dim(1);
    }
    RVec y(static_cast<Eigen::Index>(N) * total);
    MapRM Y(y.data(), N, total);
    int off = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Y.middleCols(off, widths[i]) = CMapRM(xs[i].value().data(), N, widths[i]);
        off += widths[i];
    }
    return make({N, total}, std::move(y), nodes, [nodes, widths, N, total](Node& self) {
        CMapRM dY(self.grad.data(), N, total);
        int o = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i]->requires_grad)
                MapRM(nodes[i]->grad_ref().data(), N, widths[i]) += dY.middleCols(o, widths[i]);
            o += widths[i];
        }
    });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    require(x.ndim() == 2 && start >= 0 && len >= 0 && start + len <= x.dim(1),
            "slice_cols: range out of bounds for " + shape_str(x.shape()));
    const int N = x.dim(0), F = x.dim(1);
    RVec y(static_cast<Eigen::Index>(N) * len);
    MapRM(y.data(), N, len) = CMapRM(x.value().data(), N, F).middleCols(start, len);
    auto xn = x.node();
    return make({N, len}, std::move(y), {xn}, [xn, N, F, start, len](Node& self) {
        if (xn->requires_grad) MapRM(xn->grad_ref().data(), N, F).middleCols(start, len) += CMapRM(self.grad.data(), N, len);
    });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum, double eps) {
    require(x.ndim() >= 2, "batch_norm: expects (N, C, ...) input, got " + shape_str(x.shape()));
    const int N = x.dim(0), C = x.dim(1);
    require(gamma.numel() == C && beta.numel() == C && running_mean.numel() == C && running_var.numel() == C,
            "batch_norm: " + std::to_string(C) + " features but parameters sized " + std::to_string(gamma.numel()));
    const Eigen::Index S = x.numel() / (static_cast<Eigen::Index>(N) * C);
    const Eigen::Index m = static_cast<Eigen::Index>(N) * S;
    const double* xv = x.value().data();
    auto at = [S, C](int n, int c, Eigen::Index s) { return (static_cast<Eigen::Index>(n) * C + c) * S + s; };
    RVec mu(C), var(C);
    if (training) {
        for (int c = 0; c < C; ++c) {
            double s1 = 0.0;
            for (int n = 0; n < N; ++n)
                for (Eigen::Index s = 0; s < S; ++s) s1 += xv[at(n, c, s)];
            mu[c] = s1 / m;
            double s2 = 0.0;
            for (int n = 0; n < N; ++n)
                for (Eigen::Index s = 0; s < S; ++s) s2 += std::pow(xv[at(n, c, s)] - mu[c], 2);
            var[c] = s2 / m;
        }
        const double unbias = m > 1 ? static_cast<double>(m) / (m - 1) : 1.0;
        running_mean.value() = (1.0 - momentum) * running_mean.value() + momentum * mu;
        running_var.value() = (1.0 - momentum) * running_var.value() + momentum * unbias * var;
    } else {
        mu = running_mean.value();
        var = running_var.value();
    }
    const RVec inv = (var.array() + eps).rsqrt().matrix();
    auto xhat = std::make_shared<RVec>(x.numel());
    RVec y(x.numel());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (Eigen::Index s = 0; s < S; ++s) {
                const Eigen::Index i = at(n, c, s);
                (*xhat)[i] = (xv[i] - mu[c]) * inv[c];
                y[i] = gamma.value()[c] * (*xhat)[i] + beta.value()[c];
            }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return make(x.shape(), std::move(y), {xn, gn, bn},
                [xn, gn, bn, xhat, inv, training, N, C, S, m, at](Node& self) {
                    const RVec& dy = self.grad;
                    RVec dg = RVec::Zero(C), db = RVec::Zero(C);
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c)
                            for (Eigen::Index s = 0; s < S; ++s) {
                                const Eigen::Index i = at(n, c, s);
                                dg[c] += dy[i] * (*xhat)[i];
                                db[c] += dy[i];
                            }
                    accumulate(gn, dg);
                    accumulate(bn, db);
                    if (!xn->requires_grad) return;
                    RVec& dx = xn->grad_ref();
                    const RVec& g = gn->value;
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c)
                            for (Eigen::Index s = 0; s < S; ++s) {
                                const Eigen::Index i = at(n, c, s);
                                // Batch statistics depend on x; running statistics do not.
                                dx[i] += training ? g[c] * inv[c] / m * (m * dy[i] - db[c] - (*xhat)[i] * dg[c])
                                                  : g[c] * inv[c] * dy[i];
                            }
                });
}

// ---- layers ---------------------------------------------------------------------------------

namespace {

RVec init_values(Eigen::Index count, int fan_in, int fan_out, Init init, Rng& rng) {
    RVec v(count);
    double bound = 0.0;
    switch (init) {
        case Init::he_uniform: bound = std::sqrt(6.0 / fan_in); break;
        case Init::xavier_uniform: bound = std::sqrt(6.0 / (fan_in + fan_out)); break;
        case Init::small_uniform: bound = 3e-3; break;
        case Init::zeros:
        case Init::identity: return RVec::Zero(count);
    }
    for (Eigen::Index i = 0; i < count; ++i) v[i] = uniform(rng, -bound, bound);
    return v;
}

}  // namespace

Dense::Dense(int in, int out, Init init, Rng& rng) : in_(in), out_(out) {
    if (in < 1 || out < 1) throw InvalidArgument("Dense: sizes must be positive");
    RVec w = init_values(static_cast<Eigen::Index>(in) * out, in, out, init, rng);
    if (init == Init::identity)
        for (int i = 0; i < std::min(in, out); ++i) w[static_cast<Eigen::Index>(i) * out + i] = 1.0;
    W = Tensor::parameter({in, out}, w);
    b = Tensor::parameter({out}, RVec::Zero(out));
}

Tensor Dense::operator()(const Tensor& x) const { return linear(x, W, b); }

void Dense::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
    out.push_back({prefix + ".W", &W, true});
    out.push_back({prefix + ".b", &b, true});
}

Conv2d::Conv2d(int in_ch, int out_ch, int k, Init init, Rng& rng) : in_(in_ch), out_(out_ch), k_(k) {
    if (in_ch < 1 || out_ch < 1 || k < 1) throw InvalidArgument("Conv2d: sizes must be positive");
    W = Tensor::parameter({out_ch, in_ch, k, k},
                          init_values(static_cast<Eigen::Index>(out_ch) * in_ch * k * k, in_ch * k * k, out_ch * k * k, init, rng));
    b = Tensor::parameter({out_ch}, RVec::Zero(out_ch));
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, W, b, k_ / 2); }

void Conv2d::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
    out.push_back({prefix + ".W", &W, true});
    out.push_back({prefix + ".b", &b, true});
}

BatchNorm::BatchNorm(int features, double momentum_, double eps_) : momentum(momentum_), eps(eps_) {
    gamma = Tensor::parameter({features}, RVec::Ones(features));
    beta = Tensor::parameter({features}, RVec::Zero(features));
    running_mean = Tensor::constant({features}, RVec::Zero(features));
    running_var = Tensor::constant({features}, RVec::Ones(features));
}

Tensor BatchNorm::operator()(const Tensor& x, bool training) {
    return batch_norm(x, gamma, beta, running_mean, running_var, training, momentum, eps);
}

void BatchNorm::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
    out.push_back({prefix + ".gamma", &gamma, true});
    out.push_back({prefix + ".beta", &beta, true});
    out.push_back({prefix + ".running_mean", &running_mean, false});
    out.push_back({prefix + ".running_var", &running_var, false});
}

// ---- optimizers -----------------------------------------------------------------------------

void Optimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

Adam::Adam(std::vector<Tensor> params, double lr_, double beta1, double beta2, double eps)
    : b1_(beta1), b2_(beta2), eps_(eps) {
    params_ = std::move(params);
    lr = lr_;
    for (const auto& p : params_) {
        m_.push_back(RVec::Zero(p.numel()));
        v_.push_back(RVec::Zero(p.numel()));
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const RVec g = params_[i].grad();
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseAbs2();
        params_[i].value().array() -=
            lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

Sgd::Sgd(std::vector<Tensor> params, double lr_) {
    params_ = std::move(params);
    lr = lr_;
}

void Sgd::step() {
    for (auto& p : params_) p.value() -= lr * p.grad();
}

// ---- checkpoints ----------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'N', 'N', '\0', '\0'};

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("load_checkpoint: truncated file " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    nlohmann::json manifest = {{"format", "isac-nn"}, {"version", kCheckpointVersion}, {"tensors", nlohmann::json::array()}};
    for (const auto& t : tensors) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        const Shape& s = t.tensor->shape();
        put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
        for (int d : s) put<std::int32_t>(os, d);
        const auto offset = static_cast<long long>(os.tellp());
        os.write(reinterpret_cast<const char*>(t.tensor->value().data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.tensor->numel())));
        manifest["tensors"].push_back({{"name", t.name}, {"shape", s}, {"offset", offset}, {"trainable", t.trainable}});
    }
    if (!os) throw IoError("save_checkpoint: write failed for " + path);
    std::ofstream js(path + ".json");
    if (!js) throw IoError("save_checkpoint: cannot open " + path + ".json");
    js << manifest.dump(2) << '\n';
}

void load_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("load_checkpoint: " + path + " is not a checkpoint");
    const auto version = get<std::uint32_t>(is, path);
    if (version != kCheckpointVersion)
        throw IoError("load_checkpoint: unsupported version " + std::to_string(version));
    const auto count = get<std::uint32_t>(is, path);
    if (count != tensors.size())
        throw ShapeError("load_checkpoint: file has " + std::to_string(count) + " tensors, network has " +
                         std::to_string(tensors.size()));
    std::vector<RVec> values;
    for (const auto& t : tensors) {
        const auto len = get<std::uint32_t>(is, path);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw IoError("load_checkpoint: truncated file " + path);
        if (name != t.name) throw ShapeError("load_checkpoint: expected tensor '" + t.name + "', found '" + name + "'");
        const auto nd = get<std::uint32_t>(is, path);
        Shape s;
        for (std::uint32_t i = 0; i < nd; ++i) s.push_back(get<std::int32_t>(is, path));
        if (s != t.tensor->shape())
            throw ShapeError("load_checkpoint: '" + name + "' has shape " + shape_str(s) + ", expected " +
                             shape_str(t.tensor->shape()));
        RVec v(shape_numel(s));
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size())))
            throw IoError("load_checkpoint: truncated file " + path);
        values.push_back(std::move(v));
    }
    // Commit only after the whole file validated.
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].tensor->value() = values[i];
}

nlohmann::json export_json(const std::vector<NamedTensor>& tensors) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& t : tensors)
        out[t.name] = {{"shape", t.tensor->shape()},
                       {"values", std::vector<double>(t.tensor->value().data(),
                                                      t.tensor->value().data() + t.tensor->numel())}};
    return out;
}

}  // namespace isac::nn
