#include "shotinf/model.hpp"

#include "shotinf/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

namespace shotinf::model {

void ModelConfig::validate() const {
    auto fail = [](const std::string& m) { throw InvalidConfig("model config: " + m); };
    if (d_loc == 0 || d_type == 0 || d_cnn == 0 || d_gru == 0) fail("dimensions must be positive");
    if (kernel_size == 0 || kernel_size % 2 == 0) fail("kernel_size must be odd");
    if (use_bigru && d_gru % 2 != 0) fail("d_gru must be even for a bidirectional GRU");
    if (d_rally != 2) fail("d_rally must be 2 (score difference and scoring run)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be a non-negative number");
}

ModelParams::ModelParams(const ModelParams& other) { *this = other; }

ModelParams& ModelParams::operator=(const ModelParams& other) {
    if (this == &other) return *this;
    encoder = other.encoder;
    conv1_kernels = other.conv1_kernels;
    conv1_bias = other.conv1_bias;
    conv2_kernels = other.conv2_kernels;
    conv2_bias = other.conv2_bias;
    cnn_proj_weight = other.cnn_proj_weight;
    cnn_proj_bias = other.cnn_proj_bias;
    gru_forward = other.gru_forward;
    gru_backward = other.gru_backward;
    gru_proj_weight = other.gru_proj_weight;
    gru_proj_bias = other.gru_proj_bias;
    attention_weight = other.attention_weight;
    attention_bias = other.attention_bias;
    output_weight = other.output_weight;
    output_bias = other.output_bias;
    visit([](const char*, ad::Tensor& t, bool) {
        if (t.defined()) t = t.clone();
    });
    return *this;
}

std::vector<NamedParam> ModelParams::named() const {
    std::vector<NamedParam> out;
    const_cast<ModelParams*>(this)->visit([&](const char* name, ad::Tensor& t, bool reg) {
        if (t.defined()) out.push_back({name, t, reg});
    });
    return out;
}

std::vector<ad::Tensor> ModelParams::tensors() const {
    std::vector<ad::Tensor> out;
    for (auto& np : named()) out.push_back(np.tensor);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& np : named()) n += np.tensor.size();
    return n;
}

void ModelParams::zero_grad() {
    visit([](const char*, ad::Tensor& t, bool) {
        if (t.defined()) t.zero_grad();
    });
}

std::uint64_t ModelParams::checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& np : named()) {
        for (double v : np.tensor.values()) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffU;
                h *= 1099511628211ULL;
            }
        }
    }
    return h;
}

namespace {

ad::Shape gru_input_shape(std::size_t in, std::size_t units) { return {in, 3 * units}; }

ModelParams allocate(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    const std::size_t k = cfg.kernel_size;
    p.encoder.location_table = ad::Tensor::zeros({blsr::kAreaCount, cfg.d_loc}, true);
    p.encoder.type_table = ad::Tensor::zeros({blsr::kShotTypeCount, cfg.d_type}, true);
    if (cfg.use_temporal_score) {
        p.encoder.theta = ad::Tensor::zeros({blsr::kShotTypeCount, 1}, true);
        p.encoder.mu = ad::Tensor::zeros({blsr::kShotTypeCount, 1}, true);
    }
    if (cfg.use_cnn) {
        p.conv1_kernels = ad::Tensor::zeros({k, cfg.d_shot(), cfg.d_cnn}, true);
        p.conv1_bias = ad::Tensor::zeros({cfg.d_cnn}, true);
        if (cfg.use_two_cnns) {
            p.conv2_kernels = ad::Tensor::zeros({k, cfg.d_shot(), cfg.d_cnn}, true);
            p.conv2_bias = ad::Tensor::zeros({cfg.d_cnn}, true);
        }
    } else {
        p.cnn_proj_weight = ad::Tensor::zeros({cfg.d_shot(), cfg.d_cnn}, true);
        p.cnn_proj_bias = ad::Tensor::zeros({cfg.d_cnn}, true);
    }
    if (cfg.use_bigru) {
        const std::size_t units = cfg.d_gru / 2;
        for (ad::GruWeights* w : {&p.gru_forward, &p.gru_backward}) {
            w->input = ad::Tensor::zeros(gru_input_shape(cfg.d_cnn, units), true);
            w->hidden = ad::Tensor::zeros(gru_input_shape(units, units), true);
            w->bias = ad::Tensor::zeros({3 * units}, true);
        }
    } else {
        p.gru_proj_weight = ad::Tensor::zeros({cfg.d_cnn, cfg.d_gru}, true);
        p.gru_proj_bias = ad::Tensor::zeros({cfg.d_gru}, true);
    }
    if (cfg.use_attention) {
        p.attention_weight = ad::Tensor::zeros({cfg.d_pooled(), 1}, true);
        p.attention_bias = ad::Tensor::zeros({1}, true);
    }
    const std::size_t out_in = cfg.d_pooled() + (cfg.use_rally_input ? cfg.d_rally : 0);
    p.output_weight = ad::Tensor::zeros({out_in, 1}, true);
    p.output_bias = ad::Tensor::zeros({1}, true);
    return p;
}

// Keras-style fan computation: conv kernels count the receptive field.
std::pair<double, double> fans(const ad::Shape& s) {
    if (s.size() == 3) return {double(s[0] * s[1]), double(s[0] * s[2])};
    return {double(s[0]), double(s[1])};
}

} // namespace

ModelParams zero_params(const ModelConfig& cfg) { return allocate(cfg); }

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = allocate(cfg);
    std::mt19937_64 rng(seed);
    const std::string_view embeddings[] = {"location_table", "type_table"};
    p.visit([&](const char* name, ad::Tensor& t, bool regularized) {
        if (!t.defined()) return;
        double limit = 0.0;
        if (std::find(std::begin(embeddings), std::end(embeddings), name) != std::end(embeddings)) {
            limit = 0.05;
        } else if (regularized) {
            const auto [fan_in, fan_out] = fans(t.shape());
            limit = std::sqrt(6.0 / (fan_in + fan_out));
        }
        if (limit == 0.0) return;
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& v : t.values()) v = u(rng);
    });
    return p;
}

ad::Tensor alternate_merge(ad::Graph& g, const ad::Tensor& p_hat, const ad::Tensor& p_bar) {
    std::vector<bool> take_bar(p_hat.rows());
    for (std::size_t t = 0; t < take_bar.size(); ++t) take_bar[t] = (t % 2) == 1; // 1-based even rows
    return ad::merge_rows(g, p_hat, p_bar, take_bar);
}

ad::Tensor extract_patterns(ad::Graph& g, const ad::Tensor& features, const ModelParams& p, const ModelConfig& cfg) {
    if (!cfg.use_cnn) return ad::dense(g, features, p.cnn_proj_weight, p.cnn_proj_bias, ad::Activation::Relu);
    ad::Tensor p_hat = ad::relu(g, ad::conv1d_same(g, features, p.conv1_kernels, p.conv1_bias));
    if (!cfg.use_two_cnns) return p_hat;
    ad::Tensor p_bar = ad::relu(g, ad::conv1d_same(g, features, p.conv2_kernels, p.conv2_bias));
    return alternate_merge(g, p_hat, p_bar);
}

ad::Tensor encode_patterns(ad::Graph& g, const ad::Tensor& patterns, const ModelParams& p, const ModelConfig& cfg) {
    if (!cfg.use_bigru) return ad::dense(g, patterns, p.gru_proj_weight, p.gru_proj_bias, ad::Activation::Tanh);
    const std::size_t n = patterns.rows();
    if (n == 0) throw ShapeMismatch("encode_patterns: empty pattern sequence");
    const std::size_t units = cfg.d_gru / 2;
    std::vector<ad::Tensor> inputs(n);
    for (std::size_t t = 0; t < n; ++t) inputs[t] = ad::row(g, patterns, t);

    std::vector<ad::Tensor> fwd(n), bwd(n);
    ad::Tensor h = ad::Tensor::zeros({1, units});
    for (std::size_t t = 0; t < n; ++t) fwd[t] = h = ad::gru_cell(g, h, inputs[t], p.gru_forward);
    h = ad::Tensor::zeros({1, units});
    for (std::size_t t = n; t-- > 0;) bwd[t] = h = ad::gru_cell(g, h, inputs[t], p.gru_backward);
    return ad::concat_cols(g, {ad::stack_rows(g, fwd), ad::stack_rows(g, bwd)});
}

Attention attend(ad::Graph& g, const ad::Tensor& patterns, const ad::Tensor& hidden, const ModelParams& p,
                 const ModelConfig& cfg) {
    const std::size_t n = patterns.rows();
    if (hidden.rows() != n) throw ShapeMismatch("attend: pattern and hidden row counts differ");
    Attention a;
    const ad::Tensor joined = ad::concat_cols(g, {patterns, hidden});
    if (cfg.use_attention) {
        a.scores = ad::dense(g, joined, p.attention_weight, p.attention_bias);
        a.alpha = cfg.literal_eq6_normalization ? ad::normalize_sum(g, a.scores) : ad::softmax(g, a.scores);
    } else {
        a.scores = ad::Tensor::zeros({n, 1});
        a.alpha = ad::Tensor::from({n, 1}, std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }
    a.pooled = ad::weighted_sum(g, a.alpha, joined);
    return a;
}

ad::Tensor predict_win(ad::Graph& g, const ad::Tensor& pooled, const enc::RallyContext& ctx, const ModelParams& p,
                       const ModelConfig& cfg) {
    ad::Tensor x = pooled;
    if (cfg.use_rally_input) {
        if (ctx.vector.size() != cfg.d_rally) throw ShapeMismatch("predict_win: context width differs from d_rally");
        x = ad::concat_cols(g, {pooled, ad::Tensor::from({1, cfg.d_rally}, ctx.vector)});
    }
    return ad::dense(g, x, p.output_weight, p.output_bias, ad::Activation::Sigmoid);
}

ForwardTrace forward(ad::Graph& g, const blsr::Instance& inst, const ModelParams& p, const ModelConfig& cfg) {
    if (inst.shots.empty()) throw ShapeMismatch("forward: rally " + inst.rally_id + " has no shots");
    ForwardTrace tr;
    tr.encoded = enc::encode_rally(g, inst.shots, inst.target, p.encoder, cfg.use_temporal_score);
    tr.patterns = extract_patterns(g, tr.encoded.features, p, cfg);
    tr.hidden = encode_patterns(g, tr.patterns, p, cfg);
    Attention a = attend(g, tr.patterns, tr.hidden, p, cfg);
    tr.scores = std::move(a.scores);
    tr.alpha = std::move(a.alpha);
    tr.pooled = std::move(a.pooled);
    tr.context = enc::rally_context(inst.roundscore_a, inst.roundscore_b, inst.prior_winners, inst.target);
    tr.p_win = predict_win(g, tr.pooled, tr.context, p, cfg);
    return tr;
}

double predict(const blsr::Instance& inst, const ModelParams& p, const ModelConfig& cfg) {
    ad::Graph g(false);
    return forward(g, inst, p, cfg).win_probability();
}

Loss compute_loss(ad::Graph& g, const ad::Tensor& p_win, int y, const ModelParams& p, const ModelConfig& cfg) {
    Loss l;
    l.cross_entropy = ad::binary_cross_entropy(g, p_win, y);
    std::vector<ad::Tensor> weights;
    for (const auto& np : p.named())
        if (np.regularized) weights.push_back(np.tensor);
    l.regularization = ad::sum_squares(g, weights);
    l.total = ad::add_scaled(g, l.cross_entropy, l.regularization, cfg.lambda);
    return l;
}

} // namespace shotinf::model
