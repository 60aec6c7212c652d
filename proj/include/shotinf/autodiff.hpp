#pragma once

// Tape-based reverse-mode differentiation over small dense tensors.
//
// A Tensor is a shared handle to a value buffer and (when it requires
// gradients) a gradient buffer of the same shape. Operations take a Graph,
// compute their output eagerly, and, when the graph is recording and some
// input requires gradients, push a backward step. Graph::backward replays the
// steps in exact reverse order.
//
// Rank-1 tensors of shape {n} are treated as a single row (1 x n) by the
// matrix operations.

#include "shotinf/kernels.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace shotinf::ad {

using Shape = std::vector<std::size_t>;

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // empty unless requires_grad
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const { return node_->value; }
    std::span<double> values() { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad() { return node_->grad; }
    double item() const;
    double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    void zero_grad();
    /// Deep copy with a fresh node.
    Tensor clone() const;

    const std::shared_ptr<Node>& node() const noexcept { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    friend class Graph;
    std::shared_ptr<Node> node_;
};

class Graph {
public:
    explicit Graph(bool record = true) : recording_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const noexcept { return recording_; }
    std::size_t size() const noexcept { return steps_.size(); }

    /// Allocates an output tensor; it requires gradients iff the graph is
    /// recording and any input does.
    Tensor output(Shape shape, std::initializer_list<const Tensor*> inputs);
    Tensor output(Shape shape, std::span<const Tensor> inputs);

    /// Registers the backward step for `out`. No-op when `out` does not
    /// require gradients.
    void record(const Tensor& out, std::vector<std::shared_ptr<Node>> inputs, std::function<void()> backward);

    /// Seeds d(out) and runs every recorded step in reverse. Consumes the tape.
    /// Throws NonFinite if any propagated gradient is NaN/Inf.
    void backward(const Tensor& out, std::span<const double> seed);
    void backward(const Tensor& scalar_out, double seed = 1.0);

private:
    struct Step {
        std::shared_ptr<Node> out;
        std::vector<std::shared_ptr<Node>> inputs;
        std::function<void()> fn;
    };
    bool recording_;
    std::vector<Step> steps_;
};

/// Throws NonFinite naming `what` if any entry is NaN/Inf.
void check_finite(std::span<const double> v, std::string_view what);

enum class Activation { None, Relu, Sigmoid, Tanh };

// Embedding lookup: row n of the result is table row idx[n].
Tensor gather_rows(Graph& g, const Tensor& table, std::span<const std::size_t> idx);

// x: N x C_in, kernels: {K, C_in, C_out}, bias: {C_out}. K must be odd.
Tensor conv1d_same(Graph& g, const Tensor& x, const Tensor& kernels, const Tensor& bias);

// activation(x W + bias); x: N x a (or {a}), W: a x b, bias: {b}.
Tensor dense(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias, Activation act = Activation::None);

Tensor activate(Graph& g, const Tensor& x, Activation act);
inline Tensor relu(Graph& g, const Tensor& x) { return activate(g, x, Activation::Relu); }
inline Tensor sigmoid(Graph& g, const Tensor& x) { return activate(g, x, Activation::Sigmoid); }
inline Tensor tanh(Graph& g, const Tensor& x) { return activate(g, x, Activation::Tanh); }

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
/// a + scale * b
Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double scale);

/// Row n of x multiplied by s[n]; s has N entries.
Tensor scale_rows(Graph& g, const Tensor& x, const Tensor& s);

Tensor concat_cols(Graph& g, std::span<const Tensor> parts);
Tensor concat_cols(Graph& g, std::initializer_list<Tensor> parts);

/// Row i of x as a 1 x d tensor.
Tensor row(Graph& g, const Tensor& x, std::size_t i);
Tensor stack_rows(Graph& g, std::span<const Tensor> rows);

/// Row n comes from `b` when take_b[n], otherwise from `a`.
Tensor merge_rows(Graph& g, const Tensor& a, const Tensor& b, const std::vector<bool>& take_b);

/// Gate order in the packed matrices is [update z | reset r | candidate].
struct GruWeights {
    Tensor input;  // c x 3d
    Tensor hidden; // d x 3d
    Tensor bias;   // {3d}
};

/// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
/// c = tanh(x Wc + (r * h) Uc + bc), h' = (1 - z) * h + z * c.
Tensor gru_cell(Graph& g, const Tensor& h_prev, const Tensor& x, const GruWeights& w);

/// Max-subtracted softmax over the unmasked entries; masked entries get 0.
Tensor softmax(Graph& g, const Tensor& e, const std::optional<std::vector<bool>>& mask = std::nullopt);

/// e / sum(e) without exponentials. Throws NonFinite on a zero sum.
Tensor normalize_sum(Graph& g, const Tensor& e);

/// sum_n alpha[n] * x[n, :] as a 1 x d tensor.
Tensor weighted_sum(Graph& g, const Tensor& alpha, const Tensor& x);

/// Scalar sum of squared entries over all tensors.
Tensor sum_squares(Graph& g, std::span<const Tensor> tensors);

/// -[y log p + (1 - y) log(1 - p)] with p clamped to [clamp, 1 - clamp].
Tensor binary_cross_entropy(Graph& g, const Tensor& p, int y, double clamp = 1e-7);

struct AdamState {
    kernels::AdamHyper hyper;
    long long step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(std::span<const Tensor> params, const kernels::AdamHyper& hyper = {});

/// One bias-corrected Adam update from each parameter's gradient buffer.
/// Throws ShapeMismatch if the state was built for different parameters.
void adam_step(std::span<Tensor> params, AdamState& state);

} // namespace shotinf::ad
