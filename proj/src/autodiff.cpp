#include "shotinf/autodiff.hpp"

#include "shotinf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace shotinf::ad {

namespace {

std::size_t product(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "}";
}

[[noreturn]] void mismatch(std::string_view op, const std::string& detail) {
    throw ShapeMismatch(std::string(op) + ": " + detail);
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double apply(Activation a, double x) {
    switch (a) {
    case Activation::None: return x;
    case Activation::Relu: return x > 0 ? x : 0.0;
    case Activation::Sigmoid: return sigmoid_scalar(x);
    case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

// Derivative expressed through the activation output y.
double derivative(Activation a, double y) {
    switch (a) {
    case Activation::None: return 1.0;
    case Activation::Relu: return y > 0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Tanh: return 1.0 - y * y;
    }
    return 1.0;
}

} // namespace

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    const std::size_t size = product(shape);
    n->shape = std::move(shape);
    n->value.assign(size, 0.0);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(size, 0.0);
    return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (product(shape) != values.size())
        mismatch("Tensor::from", shape_str(shape) + " vs " + std::to_string(values.size()) + " values");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->value.size(), 0.0);
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

std::size_t Tensor::rows() const { return node_->shape.size() <= 1 ? 1 : node_->shape[0]; }

std::size_t Tensor::cols() const {
    const std::size_t r = rows();
    return r == 0 ? 0 : size() / r;
}

double Tensor::item() const {
    if (size() != 1) mismatch("item", "tensor has " + std::to_string(size()) + " entries");
    return node_->value[0];
}

void Tensor::zero_grad() {
    if (node_ && node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    auto n = std::make_shared<Node>(*node_);
    return Tensor(std::move(n));
}

// --- Graph -----------------------------------------------------------------

Tensor Graph::output(Shape shape, std::initializer_list<const Tensor*> inputs) {
    bool needs = false;
    if (recording_)
        for (const Tensor* t : inputs) needs = needs || t->requires_grad();
    return Tensor::zeros(std::move(shape), needs);
}

Tensor Graph::output(Shape shape, std::span<const Tensor> inputs) {
    bool needs = false;
    if (recording_)
        for (const Tensor& t : inputs) needs = needs || t.requires_grad();
    return Tensor::zeros(std::move(shape), needs);
}

void Graph::record(const Tensor& out, std::vector<std::shared_ptr<Node>> inputs, std::function<void()> backward) {
    if (!recording_ || !out.requires_grad()) return;
    steps_.push_back({out.node(), std::move(inputs), std::move(backward)});
}

void Graph::backward(const Tensor& out, std::span<const double> seed) {
    if (!out.requires_grad()) {
        steps_.clear();
        return;
    }
    if (seed.size() != out.size()) mismatch("backward", "seed size differs from output");
    auto& g = out.node()->grad;
    for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        check_finite(it->out->grad, "gradient");
        it->fn();
    }
    for (const Step& s : steps_)
        for (const auto& in : s.inputs)
            if (in->requires_grad) check_finite(in->grad, "gradient");
    steps_.clear();
}

void Graph::backward(const Tensor& scalar_out, double seed) {
    const double s[1] = {seed};
    backward(scalar_out, std::span<const double>(s, 1));
}

void check_finite(std::span<const double> v, std::string_view what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NonFinite("non-finite value in " + std::string(what));
}

// --- primitives ------------------------------------------------------------

Tensor gather_rows(Graph& g, const Tensor& table, std::span<const std::size_t> idx) {
    const std::size_t d = table.cols();
    for (std::size_t i : idx)
        if (i >= table.rows()) mismatch("gather_rows", "index " + std::to_string(i) + " out of " + std::to_string(table.rows()));
    Tensor out = g.output({idx.size(), d}, {&table});
    auto ov = out.values();
    for (std::size_t n = 0; n < idx.size(); ++n)
        std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(idx[n] * d), d, ov.begin() + static_cast<std::ptrdiff_t>(n * d));
    if (out.requires_grad()) {
        std::vector<std::size_t> ids(idx.begin(), idx.end());
        Node* o = out.node().get();
        Node* t = table.node().get();
        g.record(out, {table.node()}, [o, t, d, ids = std::move(ids)] {
            for (std::size_t n = 0; n < ids.size(); ++n)
                for (std::size_t j = 0; j < d; ++j) t->grad[ids[n] * d + j] += o->grad[n * d + j];
        });
    }
    return out;
}

Tensor conv1d_same(Graph& g, const Tensor& x, const Tensor& kernels_, const Tensor& bias) {
    if (kernels_.shape().size() != 3) mismatch("conv1d_same", "kernels must be {K, C_in, C_out}");
    const std::size_t k = kernels_.shape()[0];
    const std::size_t c_in = kernels_.shape()[1];
    const std::size_t c_out = kernels_.shape()[2];
    if (k % 2 == 0) mismatch("conv1d_same", "kernel size must be odd");
    if (x.cols() != c_in) mismatch("conv1d_same", "input has " + std::to_string(x.cols()) + " channels, kernels expect " + std::to_string(c_in));
    if (bias.size() != c_out) mismatch("conv1d_same", "bias size differs from C_out");
    const std::size_t n = x.rows();
    Tensor out = g.output({n, c_out}, {&x, &kernels_, &bias});
    kernels::conv1d_same(x.values(), n, c_in, kernels_.values(), k, c_out, bias.values(), out.values());
    check_finite(out.values(), "conv1d_same");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* xn = x.node().get();
        Node* wn = kernels_.node().get();
        Node* bn = bias.node().get();
        g.record(out, {x.node(), kernels_.node(), bias.node()}, [=] {
            if (xn->requires_grad) kernels::conv1d_same_grad_input(o->grad, n, c_in, wn->value, k, c_out, xn->grad);
            if (wn->requires_grad) kernels::conv1d_same_grad_kernel(xn->value, o->grad, n, c_in, k, c_out, wn->grad);
            if (bn->requires_grad)
                for (std::size_t t = 0; t < n; ++t)
                    for (std::size_t c = 0; c < c_out; ++c) bn->grad[c] += o->grad[t * c_out + c];
        });
    }
    return out;
}

Tensor dense(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias, Activation act) {
    if (weight.shape().size() != 2) mismatch("dense", "weight must be a matrix");
    const std::size_t a = weight.shape()[0];
    const std::size_t b = weight.shape()[1];
    if (x.cols() != a) mismatch("dense", "input width " + std::to_string(x.cols()) + " vs weight rows " + std::to_string(a));
    if (bias.size() != b) mismatch("dense", "bias size differs from output width");
    const std::size_t n = x.rows();
    Shape shape = x.shape().size() == 1 ? Shape{b} : Shape{n, b};
    Tensor out = g.output(std::move(shape), {&x, &weight, &bias});
    auto ov = out.values();
    kernels::matmul(x.values(), weight.values(), ov, n, a, b, false);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < b; ++j) ov[t * b + j] = apply(act, ov[t * b + j] + bias.values()[j]);
    check_finite(ov, "dense");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* xn = x.node().get();
        Node* wn = weight.node().get();
        Node* bn = bias.node().get();
        g.record(out, {x.node(), weight.node(), bias.node()}, [=] {
            std::vector<double> gpre(o->grad);
            for (std::size_t i = 0; i < gpre.size(); ++i) gpre[i] *= derivative(act, o->value[i]);
            if (xn->requires_grad) kernels::matmul_a_bt(gpre, wn->value, xn->grad, n, b, a);
            if (wn->requires_grad) kernels::matmul_at_b(xn->value, gpre, wn->grad, n, a, b);
            if (bn->requires_grad)
                for (std::size_t t = 0; t < n; ++t)
                    for (std::size_t j = 0; j < b; ++j) bn->grad[j] += gpre[t * b + j];
        });
    }
    return out;
}

Tensor activate(Graph& g, const Tensor& x, Activation act) {
    Tensor out = g.output(x.shape(), {&x});
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = apply(act, x.values()[i]);
    check_finite(ov, "activation");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* xn = x.node().get();
        g.record(out, {x.node()}, [=] {
            for (std::size_t i = 0; i < o->grad.size(); ++i) xn->grad[i] += o->grad[i] * derivative(act, o->value[i]);
        });
    }
    return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return add_scaled(g, a, b, 1.0); }

Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double scale) {
    if (a.size() != b.size()) mismatch("add", shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = g.output(a.shape(), {&a, &b});
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = a.values()[i] + scale * b.values()[i];
    check_finite(ov, "add");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* an = a.node().get();
        Node* bn = b.node().get();
        g.record(out, {a.node(), b.node()}, [=] {
            if (an->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += scale * o->grad[i];
        });
    }
    return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) mismatch("mul", shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = g.output(a.shape(), {&a, &b});
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = a.values()[i] * b.values()[i];
    check_finite(ov, "mul");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* an = a.node().get();
        Node* bn = b.node().get();
        g.record(out, {a.node(), b.node()}, [=] {
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                if (an->requires_grad) an->grad[i] += o->grad[i] * bn->value[i];
                if (bn->requires_grad) bn->grad[i] += o->grad[i] * an->value[i];
            }
        });
    }
    return out;
}

Tensor scale_rows(Graph& g, const Tensor& x, const Tensor& s) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (s.size() != n) mismatch("scale_rows", "scale has " + std::to_string(s.size()) + " entries for " + std::to_string(n) + " rows");
    Tensor out = g.output(x.shape(), {&x, &s});
    auto ov = out.values();
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < d; ++j) ov[t * d + j] = x.values()[t * d + j] * s.values()[t];
    check_finite(ov, "scale_rows");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* xn = x.node().get();
        Node* sn = s.node().get();
        g.record(out, {x.node(), s.node()}, [=] {
            for (std::size_t t = 0; t < n; ++t) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double go = o->grad[t * d + j];
                    if (xn->requires_grad) xn->grad[t * d + j] += go * sn->value[t];
                    if (sn->requires_grad) sn->grad[t] += go * xn->value[t * d + j];
                }
            }
        });
    }
    return out;
}

Tensor concat_cols(Graph& g, std::span<const Tensor> parts) {
    if (parts.empty()) mismatch("concat_cols", "no inputs");
    const std::size_t n = parts.front().rows();
    std::size_t width = 0;
    for (const Tensor& p : parts) {
        if (p.rows() != n) mismatch("concat_cols", "row counts differ");
        width += p.cols();
    }
    const bool flat = parts.front().shape().size() == 1;
    Tensor out = g.output(flat ? Shape{width} : Shape{n, width}, parts);
    auto ov = out.values();
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t d = p.cols();
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 0; j < d; ++j) ov[t * width + offset + j] = p.values()[t * d + j];
        offset += d;
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<Node>> ins;
        for (const Tensor& p : parts) ins.push_back(p.node());
        Node* o = out.node().get();
        std::vector<Node*> raw;
        for (auto& i : ins) raw.push_back(i.get());
        g.record(out, ins, [o, raw, n, width] {
            std::size_t off = 0;
            for (Node* p : raw) {
                const std::size_t d = p->value.size() / n;
                if (p->requires_grad)
                    for (std::size_t t = 0; t < n; ++t)
                        for (std::size_t j = 0; j < d; ++j) p->grad[t * d + j] += o->grad[t * width + off + j];
                off += d;
            }
        });
    }
    return out;
}

Tensor concat_cols(Graph& g, std::initializer_list<Tensor> parts) {
    return concat_cols(g, std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor row(Graph& g, const Tensor& x, std::size_t i) {
    if (i >= x.rows()) mismatch("row", "index out of range");
    const std::size_t d = x.cols();
    Tensor out = g.output({1, d}, {&x});
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(i * d), d, out.values().begin());
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* xn = x.node().get();
        g.record(out, {x.node()}, [=] {
            for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += o->grad[j];
        });
    }
    return out;
}

Tensor stack_rows(Graph& g, std::span<const Tensor> rows) {
    if (rows.empty()) mismatch("stack_rows", "no rows");
    const std::size_t d = rows.front().size();
    for (const Tensor& r : rows)
        if (r.size() != d) mismatch("stack_rows", "row widths differ");
    const std::size_t n = rows.size();
    Tensor out = g.output({n, d}, rows);
    for (std::size_t t = 0; t < n; ++t)
        std::copy(rows[t].values().begin(), rows[t].values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(t * d));
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<Node>> ins;
        std::vector<Node*> raw;
        for (const Tensor& r : rows) {
            ins.push_back(r.node());
            raw.push_back(r.node().get());
        }
        Node* o = out.node().get();
        g.record(out, ins, [o, raw, d] {
            for (std::size_t t = 0; t < raw.size(); ++t)
                if (raw[t]->requires_grad)
                    for (std::size_t j = 0; j < d; ++j) raw[t]->grad[j] += o->grad[t * d + j];
        });
    }
    return out;
}

Tensor merge_rows(Graph& g, const Tensor& a, const Tensor& b, const std::vector<bool>& take_b) {
    if (a.shape() != b.shape()) mismatch("merge_rows", shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t n = a.rows();
    const std::size_t d = a.cols();
    if (take_b.size() != n) mismatch("merge_rows", "selector length differs from row count");
    Tensor out = g.output(a.shape(), {&a, &b});
    for (std::size_t t = 0; t < n; ++t) {
        const auto& src = take_b[t] ? b : a;
        std::copy_n(src.values().begin() + static_cast<std::ptrdiff_t>(t * d), d, out.values().begin() + static_cast<std::ptrdiff_t>(t * d));
    }
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* an = a.node().get();
        Node* bn = b.node().get();
        g.record(out, {a.node(), b.node()}, [=] {
            for (std::size_t t = 0; t < n; ++t) {
                Node* dst = take_b[t] ? bn : an;
                if (!dst->requires_grad) continue;
                for (std::size_t j = 0; j < d; ++j) dst->grad[t * d + j] += o->grad[t * d + j];
            }
        });
    }
    return out;
}

Tensor gru_cell(Graph& g, const Tensor& h_prev, const Tensor& x, const GruWeights& w) {
    const std::size_t d = h_prev.size();
    const std::size_t c = x.size();
    if (w.input.size() != c * 3 * d || w.hidden.size() != d * 3 * d || w.bias.size() != 3 * d)
        mismatch("gru_cell", "weights do not match h=" + std::to_string(d) + ", x=" + std::to_string(c));
    const std::size_t d3 = 3 * d;
    std::vector<double> xw(d3, 0.0);
    kernels::matmul(x.values(), w.input.values(), xw, 1, c, d3, false);
    std::vector<double> hu(d3, 0.0);
    kernels::matmul(h_prev.values(), w.hidden.values(), hu, 1, d, d3, false);

    const auto hp = h_prev.values();
    const auto bias = w.bias.values();
    const auto uh = w.hidden.values();
    std::vector<double> z(d), r(d), rh(d), cand(d);
    for (std::size_t j = 0; j < d; ++j) {
        z[j] = sigmoid_scalar(xw[j] + hu[j] + bias[j]);
        r[j] = sigmoid_scalar(xw[d + j] + hu[d + j] + bias[d + j]);
        rh[j] = r[j] * hp[j];
    }
    for (std::size_t j = 0; j < d; ++j) {
        double acc = xw[2 * d + j] + bias[2 * d + j];
        for (std::size_t p = 0; p < d; ++p) acc += rh[p] * uh[p * d3 + 2 * d + j];
        cand[j] = std::tanh(acc);
    }
    Tensor out = g.output({1, d}, {&h_prev, &x, &w.input, &w.hidden, &w.bias});
    auto ov = out.values();
    for (std::size_t j = 0; j < d; ++j) ov[j] = (1.0 - z[j]) * hp[j] + z[j] * cand[j];
    check_finite(ov, "gru_cell");

    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* hn = h_prev.node().get();
        Node* xn = x.node().get();
        Node* wi = w.input.node().get();
        Node* wh = w.hidden.node().get();
        Node* wb = w.bias.node().get();
        g.record(out, {h_prev.node(), x.node(), w.input.node(), w.hidden.node(), w.bias.node()},
                 [=, z = std::move(z), r = std::move(r), rh = std::move(rh), cand = std::move(cand)] {
                     const auto& gh = o->grad;
                     const auto& h = hn->value;
                     const auto& u = wh->value;
                     // dpre holds gradients w.r.t. the three gate pre-activations.
                     std::vector<double> dpre(d3, 0.0);
                     std::vector<double> dh(d, 0.0);
                     for (std::size_t j = 0; j < d; ++j) {
                         const double dz = gh[j] * (cand[j] - h[j]);
                         const double dcand = gh[j] * z[j];
                         dh[j] = gh[j] * (1.0 - z[j]);
                         dpre[j] = dz * z[j] * (1.0 - z[j]);
                         dpre[2 * d + j] = dcand * (1.0 - cand[j] * cand[j]);
                     }
                     std::vector<double> drh(d, 0.0);
                     for (std::size_t p = 0; p < d; ++p) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < d; ++j) acc += dpre[2 * d + j] * u[p * d3 + 2 * d + j];
                         drh[p] = acc;
                     }
                     for (std::size_t j = 0; j < d; ++j) {
                         dpre[d + j] = drh[j] * h[j] * r[j] * (1.0 - r[j]);
                         dh[j] += drh[j] * r[j];
                     }
                     // h contributes through U for the z and r gates.
                     for (std::size_t p = 0; p < d; ++p) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < 2 * d; ++j) acc += dpre[j] * u[p * d3 + j];
                         dh[p] += acc;
                     }
                     if (hn->requires_grad)
                         for (std::size_t j = 0; j < d; ++j) hn->grad[j] += dh[j];
                     if (xn->requires_grad) kernels::matmul_a_bt(dpre, wi->value, xn->grad, 1, d3, c);
                     if (wi->requires_grad) kernels::matmul_at_b(xn->value, dpre, wi->grad, 1, c, d3);
                     if (wb->requires_grad)
                         for (std::size_t j = 0; j < d3; ++j) wb->grad[j] += dpre[j];
                     if (wh->requires_grad) {
                         for (std::size_t p = 0; p < d; ++p) {
                             double* row_g = wh->grad.data() + p * d3;
                             for (std::size_t j = 0; j < 2 * d; ++j) row_g[j] += h[p] * dpre[j];
                             for (std::size_t j = 0; j < d; ++j) row_g[2 * d + j] += rh[p] * dpre[2 * d + j];
                         }
                     }
                 });
    }
    return out;
}

Tensor softmax(Graph& g, const Tensor& e, const std::optional<std::vector<bool>>& mask) {
    const std::size_t n = e.size();
    if (mask && mask->size() != n) mismatch("softmax", "mask length differs");
    auto live = [&](std::size_t i) { return !mask || !(*mask)[i]; };
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < n; ++i)
        if (live(i)) {
            mx = std::max(mx, e.values()[i]);
            any = true;
        }
    if (!any) throw AllMasked("softmax: every entry is masked");
    Tensor out = g.output(e.shape(), {&e});
    auto ov = out.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ov[i] = live(i) ? std::exp(e.values()[i] - mx) : 0.0;
        sum += ov[i];
    }
    for (double& v : ov) v /= sum;
    check_finite(ov, "softmax");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* en = e.node().get();
        g.record(out, {e.node()}, [o, en, n] {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += o->value[i] * o->grad[i];
            for (std::size_t i = 0; i < n; ++i) en->grad[i] += o->value[i] * (o->grad[i] - dot);
        });
    }
    return out;
}

Tensor normalize_sum(Graph& g, const Tensor& e) {
    const std::size_t n = e.size();
    double sum = 0.0;
    for (double v : e.values()) sum += v;
    if (sum == 0.0 || !std::isfinite(sum)) throw NonFinite("normalize_sum: scores sum to zero");
    Tensor out = g.output(e.shape(), {&e});
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) ov[i] = e.values()[i] / sum;
    check_finite(ov, "normalize_sum");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* en = e.node().get();
        g.record(out, {e.node()}, [o, en, n, sum] {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += o->grad[i] * o->value[i];
            for (std::size_t i = 0; i < n; ++i) en->grad[i] += (o->grad[i] - dot) / sum;
        });
    }
    return out;
}

Tensor weighted_sum(Graph& g, const Tensor& alpha, const Tensor& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (alpha.size() != n) mismatch("weighted_sum", "weights length differs from row count");
    Tensor out = g.output({1, d}, {&alpha, &x});
    auto ov = out.values();
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < d; ++j) ov[j] += alpha.values()[t] * x.values()[t * d + j];
    check_finite(ov, "weighted_sum");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* an = alpha.node().get();
        Node* xn = x.node().get();
        g.record(out, {alpha.node(), x.node()}, [=] {
            for (std::size_t t = 0; t < n; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    acc += o->grad[j] * xn->value[t * d + j];
                    if (xn->requires_grad) xn->grad[t * d + j] += an->value[t] * o->grad[j];
                }
                if (an->requires_grad) an->grad[t] += acc;
            }
        });
    }
    return out;
}

Tensor sum_squares(Graph& g, std::span<const Tensor> tensors) {
    Tensor out = g.output({1}, tensors);
    double acc = 0.0;
    for (const Tensor& t : tensors)
        for (double v : t.values()) acc += v * v;
    out.values()[0] = acc;
    check_finite(out.values(), "sum_squares");
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<Node>> ins;
        std::vector<Node*> raw;
        for (const Tensor& t : tensors) {
            ins.push_back(t.node());
            raw.push_back(t.node().get());
        }
        Node* o = out.node().get();
        g.record(out, ins, [o, raw] {
            const double go = o->grad[0];
            for (Node* t : raw)
                if (t->requires_grad)
                    for (std::size_t i = 0; i < t->value.size(); ++i) t->grad[i] += 2.0 * t->value[i] * go;
        });
    }
    return out;
}

Tensor binary_cross_entropy(Graph& g, const Tensor& p, int y, double clamp) {
    const double raw = p.item();
    const double pc = std::clamp(raw, clamp, 1.0 - clamp);
    const double yd = y ? 1.0 : 0.0;
    Tensor out = g.output({1}, {&p});
    out.values()[0] = -(yd * std::log(pc) + (1.0 - yd) * std::log(1.0 - pc));
    check_finite(out.values(), "binary_cross_entropy");
    if (out.requires_grad()) {
        Node* o = out.node().get();
        Node* pn = p.node().get();
        const bool inside = raw > clamp && raw < 1.0 - clamp;
        g.record(out, {p.node()}, [=] {
            if (inside) pn->grad[0] += o->grad[0] * (-yd / pc + (1.0 - yd) / (1.0 - pc));
        });
    }
    return out;
}

// --- Adam ------------------------------------------------------------------

AdamState make_adam_state(std::span<const Tensor> params, const kernels::AdamHyper& hyper) {
    AdamState s;
    s.hyper = hyper;
    for (const Tensor& p : params) {
        s.first_moment.emplace_back(p.size(), 0.0);
        s.second_moment.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
    if (params.size() != state.first_moment.size() || params.size() != state.second_moment.size())
        mismatch("adam_step", "state tracks " + std::to_string(state.first_moment.size()) + " tensors, got " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].requires_grad()) mismatch("adam_step", "parameter without gradient buffer");
        if (state.first_moment[i].size() != params[i].size() || state.second_moment[i].size() != params[i].size())
            mismatch("adam_step", "moment shape differs from parameter " + std::to_string(i));
    }
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i)
        kernels::adam_update(params[i].values(), params[i].grad(), state.first_moment[i], state.second_moment[i],
                             state.hyper, state.step);
}

} // namespace shotinf::ad
