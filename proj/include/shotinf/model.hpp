#pragma once

// Short-term/long-term rally model: dual 1-D CNN pattern extraction merged by
// row parity, a bidirectional GRU over the merged patterns, skip-connection
// attention pooling, fusion with rally context, and a sigmoid win
// probability. Every stage has a toggle so ablated variants can be built.

#include "shotinf/autodiff.hpp"
#include "shotinf/blsr.hpp"
#include "shotinf/encoder.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace shotinf::model {

struct ModelConfig {
    std::size_t d_loc = 10;
    std::size_t d_type = 15;
    std::size_t d_cnn = 32;
    std::size_t d_gru = 32; // split evenly between the two GRU directions
    std::size_t kernel_size = 3;
    std::size_t d_rally = 2;
    double lambda = 0.01;

    bool use_two_cnns = true;
    bool use_cnn = true;
    bool use_bigru = true;
    bool use_temporal_score = true;
    bool use_attention = true;
    bool use_rally_input = true;
    bool literal_eq6_normalization = false;

    std::size_t d_shot() const { return d_type + 3 * d_loc + enc::kFlagCount; }
    std::size_t d_pooled() const { return d_cnn + d_gru; }

    /// Throws InvalidConfig.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedParam {
    std::string name;
    ad::Tensor tensor;
    bool regularized;
};

/// All learnable tensors. Tensors for disabled stages stay undefined. Copies
/// are deep.
class ModelParams {
public:
    ModelParams() = default;
    ModelParams(const ModelParams& other);
    ModelParams& operator=(const ModelParams& other);
    ModelParams(ModelParams&&) noexcept = default;
    ModelParams& operator=(ModelParams&&) noexcept = default;

    enc::EncoderParams encoder;
    ad::Tensor conv1_kernels, conv1_bias; // {K, d_shot, d_cnn}, {d_cnn}
    ad::Tensor conv2_kernels, conv2_bias;
    ad::Tensor cnn_proj_weight, cnn_proj_bias; // used when use_cnn is off
    ad::GruWeights gru_forward, gru_backward;  // d_gru / 2 units each
    ad::Tensor gru_proj_weight, gru_proj_bias; // used when use_bigru is off
    ad::Tensor attention_weight, attention_bias; // {d_pooled, 1}, {1}
    ad::Tensor output_weight, output_bias;       // {d_pooled (+ d_rally), 1}, {1}

    /// Defined tensors in a fixed order. Handles alias the parameters.
    std::vector<NamedParam> named() const;
    std::vector<ad::Tensor> tensors() const;
    std::size_t parameter_count() const;
    void zero_grad();
    /// Order-sensitive FNV-1a hash over all parameter values.
    std::uint64_t checksum() const;

    template <typename F>
    void visit(F&& f);
};

/// Allocates every tensor the config needs. Embeddings ~ U(-0.05, 0.05),
/// theta and mu zero, weight matrices Glorot-uniform, biases zero.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
ModelParams zero_params(const ModelConfig& cfg);

struct ForwardTrace {
    enc::EncodedRally encoded;
    ad::Tensor patterns; // N x d_cnn
    ad::Tensor hidden;   // N x d_gru
    ad::Tensor scores;   // N x 1 attention scores
    ad::Tensor alpha;    // N x 1
    ad::Tensor pooled;   // 1 x d_pooled
    enc::RallyContext context;
    ad::Tensor p_win;    // {1}

    double win_probability() const { return p_win.item(); }
    std::vector<double> attention() const { return {alpha.values().begin(), alpha.values().end()}; }
};

/// Row n (1-based) from p_hat when n is odd, from p_bar when n is even.
ad::Tensor alternate_merge(ad::Graph& g, const ad::Tensor& p_hat, const ad::Tensor& p_bar);

ad::Tensor extract_patterns(ad::Graph& g, const ad::Tensor& features, const ModelParams& p, const ModelConfig& cfg);
ad::Tensor encode_patterns(ad::Graph& g, const ad::Tensor& patterns, const ModelParams& p, const ModelConfig& cfg);

struct Attention {
    ad::Tensor scores;
    ad::Tensor alpha;
    ad::Tensor pooled;
};
Attention attend(ad::Graph& g, const ad::Tensor& patterns, const ad::Tensor& hidden, const ModelParams& p,
                 const ModelConfig& cfg);

ad::Tensor predict_win(ad::Graph& g, const ad::Tensor& pooled, const enc::RallyContext& ctx, const ModelParams& p,
                       const ModelConfig& cfg);

ForwardTrace forward(ad::Graph& g, const blsr::Instance& inst, const ModelParams& p, const ModelConfig& cfg);

/// Inference-only forward pass; safe to call concurrently on shared params.
double predict(const blsr::Instance& inst, const ModelParams& p, const ModelConfig& cfg);

inline constexpr double kDecisionThreshold = 0.5;
inline bool predicts_win(double p_win) { return p_win > kDecisionThreshold; }

struct Loss {
    ad::Tensor total;
    ad::Tensor cross_entropy;
    ad::Tensor regularization; // unscaled sum of squares
};

/// total = CE(p_win, y) + lambda * sum of squared weight-matrix entries.
Loss compute_loss(ad::Graph& g, const ad::Tensor& p_win, int y, const ModelParams& p, const ModelConfig& cfg);

// --- implementation of the visitor --------------------------------------

template <typename F>
void ModelParams::visit(F&& f) {
    f("location_table", encoder.location_table, false);
    f("type_table", encoder.type_table, false);
    f("theta", encoder.theta, false);
    f("mu", encoder.mu, false);
    f("conv1_kernels", conv1_kernels, true);
    f("conv1_bias", conv1_bias, false);
    f("conv2_kernels", conv2_kernels, true);
    f("conv2_bias", conv2_bias, false);
    f("cnn_proj_weight", cnn_proj_weight, true);
    f("cnn_proj_bias", cnn_proj_bias, false);
    f("gru_forward_input", gru_forward.input, true);
    f("gru_forward_hidden", gru_forward.hidden, true);
    f("gru_forward_bias", gru_forward.bias, false);
    f("gru_backward_input", gru_backward.input, true);
    f("gru_backward_hidden", gru_backward.hidden, true);
    f("gru_backward_bias", gru_backward.bias, false);
    f("gru_proj_weight", gru_proj_weight, true);
    f("gru_proj_bias", gru_proj_bias, false);
    f("attention_weight", attention_weight, true);
    f("attention_bias", attention_bias, false);
    f("output_weight", output_weight, true);
    f("output_bias", output_bias, false);
}

} // namespace shotinf::model
