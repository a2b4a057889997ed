#include "fecl/encoder.hpp"

#include <cmath>

#include "fecl/corpus.hpp"
#include "fecl/log.hpp"

namespace fecl {

void EncoderConfig::validate() const {
    if (hidden_dim < 1) throw ContractError("hidden_dim must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ContractError("dropout_rate must be in [0, 1)");
    if (n_heads < 1 || hidden_dim % n_heads != 0) throw ContractError("hidden_dim must be divisible by n_heads");
    if (n_layers < 0) throw ContractError("n_layers must be >= 0");
    if (max_sequence_length < 4) throw ContractError("max_sequence_length must be >= 4");
}

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    Tensor t(rows, cols);
    for (auto& x : t.values()) x = uniform(rng, -bound, bound);
    return t;
}

namespace {

Tensor sinusoidal_positions(std::size_t length, std::size_t dim) {
    Tensor t(length, dim);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
            const double angle = static_cast<double>(pos) * rate;
            t(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return t;
}

ad::Var linear(const ad::Var& x, const ad::Var& w, const ad::Var& b) {
    return ad::add_row(ad::matmul_nt(x, w), b);
}

ad::Var maybe_dropout(const ad::Var& x, double p, Rng* rng) {
    return rng ? ad::dropout(x, p, *rng) : x;
}

}  // namespace

ToyEncoder::ToyEncoder(EncoderConfig config, std::shared_ptr<const Vocabulary> vocab)
    : config_(config), vocab_(std::move(vocab)) {
    if (!vocab_) throw ContractError("ToyEncoder: vocabulary required");
    if (config_.vocab_size == 0) config_.vocab_size = static_cast<int>(vocab_->size());
    if (static_cast<std::size_t>(config_.vocab_size) != vocab_->size()) {
        throw ContractError("ToyEncoder: vocab_size does not match the vocabulary");
    }
    config_.validate();

    const auto d = static_cast<std::size_t>(config_.hidden_dim);
    const auto ffn = static_cast<std::size_t>(config_.feed_forward_dim());
    Rng rng(config_.seed);
    auto normal = [&](std::size_t r, std::size_t c, double sd) {
        Tensor t(r, c);
        for (auto& x : t.values()) x = sd * standard_normal(rng);
        return t;
    };
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    const double ffn_bound = 1.0 / std::sqrt(static_cast<double>(ffn));

    token_embedding_ = ad::parameter(normal(vocab_->size(), d, 1.0));
    segment_embedding_ = ad::parameter(normal(2, d, 1.0));
    embedding_norm_gain_ = ad::parameter(Tensor(1, d, 1.0));
    embedding_norm_bias_ = ad::parameter(Tensor(1, d, 0.0));
    positions_ = sinusoidal_positions(static_cast<std::size_t>(config_.max_sequence_length), d);

    for (int l = 0; l < config_.n_layers; ++l) {
        Layer layer;
        layer.wq = ad::parameter(uniform_tensor(d, d, bound, rng));
        layer.bq = ad::parameter(Tensor(1, d));
        layer.wk = ad::parameter(uniform_tensor(d, d, bound, rng));
        layer.bk = ad::parameter(Tensor(1, d));
        layer.wv = ad::parameter(uniform_tensor(d, d, bound, rng));
        layer.bv = ad::parameter(Tensor(1, d));
        layer.wo = ad::parameter(uniform_tensor(d, d, bound, rng));
        layer.bo = ad::parameter(Tensor(1, d));
        layer.norm1_gain = ad::parameter(Tensor(1, d, 1.0));
        layer.norm1_bias = ad::parameter(Tensor(1, d));
        layer.w1 = ad::parameter(uniform_tensor(ffn, d, bound, rng));
        layer.b1 = ad::parameter(Tensor(1, ffn));
        layer.w2 = ad::parameter(uniform_tensor(d, ffn, ffn_bound, rng));
        layer.b2 = ad::parameter(Tensor(1, d));
        layer.norm2_gain = ad::parameter(Tensor(1, d, 1.0));
        layer.norm2_bias = ad::parameter(Tensor(1, d));
        layers_.push_back(std::move(layer));
    }
}

TokenSequence ToyEncoder::assemble_joint(std::string_view target, std::string_view text) const {
    const auto target_ids = vocab_->encode(target);
    auto text_ids = vocab_->encode(text);
    if (text_ids.empty()) throw DataError("encode_joint: empty text");
    const auto max_len = static_cast<std::size_t>(config_.max_sequence_length);
    const std::size_t fixed = 3 + target_ids.size();
    if (fixed >= max_len) {
        throw ContractError("encode_joint: target alone exceeds max_sequence_length");
    }
    if (fixed + text_ids.size() > max_len) text_ids.resize(max_len - fixed);

    TokenSequence seq;
    seq.ids.push_back(Vocabulary::kCls);
    seq.ids.insert(seq.ids.end(), target_ids.begin(), target_ids.end());
    seq.ids.push_back(Vocabulary::kSep);
    seq.segments.assign(seq.ids.size(), 0);
    seq.text_begin = seq.ids.size();
    seq.text_count = text_ids.size();
    seq.ids.insert(seq.ids.end(), text_ids.begin(), text_ids.end());
    seq.ids.push_back(Vocabulary::kSep);
    seq.segments.resize(seq.ids.size(), 1);
    return seq;
}

TokenSequence ToyEncoder::assemble_single(std::string_view text) const {
    auto text_ids = vocab_->encode(text);
    if (text_ids.empty()) throw DataError("encode_masked: empty text");
    const auto max_len = static_cast<std::size_t>(config_.max_sequence_length);
    if (text_ids.size() + 2 > max_len) text_ids.resize(max_len - 2);
    TokenSequence seq;
    seq.ids.push_back(Vocabulary::kCls);
    seq.ids.insert(seq.ids.end(), text_ids.begin(), text_ids.end());
    seq.ids.push_back(Vocabulary::kSep);
    seq.segments.assign(seq.ids.size(), 0);
    seq.text_begin = 1;
    seq.text_count = text_ids.size();
    return seq;
}

ad::Var ToyEncoder::self_attention(const Layer& layer, const ad::Var& x) const {
    const auto d = static_cast<std::size_t>(config_.hidden_dim);
    const auto heads = static_cast<std::size_t>(config_.n_heads);
    const std::size_t head_dim = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const auto q = linear(x, layer.wq, layer.bq);
    const auto k = linear(x, layer.wk, layer.bk);
    const auto v = linear(x, layer.wv, layer.bv);
    std::vector<ad::Var> outputs;
    outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto qh = ad::slice_cols(q, h * head_dim, head_dim);
        const auto kh = ad::slice_cols(k, h * head_dim, head_dim);
        const auto vh = ad::slice_cols(v, h * head_dim, head_dim);
        const auto weights = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt));
        outputs.push_back(ad::matmul(weights, vh));
    }
    const auto merged = heads == 1 ? outputs.front() : ad::concat_cols(outputs);
    return linear(merged, layer.wo, layer.bo);
}

ad::Var ToyEncoder::forward(const TokenSequence& seq, Rng* dropout_rng) const {
    const std::size_t n = seq.ids.size();
    const auto d = static_cast<std::size_t>(config_.hidden_dim);
    Tensor pos(n, d);
    std::copy(positions_.data(), positions_.data() + n * d, pos.data());
    auto x = ad::add(ad::gather_rows(token_embedding_, seq.ids), ad::gather_rows(segment_embedding_, seq.segments));
    x = ad::add(x, ad::constant(std::move(pos)));
    x = ad::layer_norm_rows(x, embedding_norm_gain_, embedding_norm_bias_);

    const double p = config_.dropout_rate;
    for (const auto& layer : layers_) {
        const auto attended = maybe_dropout(self_attention(layer, x), p, dropout_rng);
        x = ad::layer_norm_rows(ad::add(x, attended), layer.norm1_gain, layer.norm1_bias);
        const auto hidden = ad::relu(linear(x, layer.w1, layer.b1));
        const auto ff = maybe_dropout(linear(hidden, layer.w2, layer.b2), p, dropout_rng);
        x = ad::layer_norm_rows(ad::add(x, ff), layer.norm2_gain, layer.norm2_bias);
    }
    return x;
}

JointEncoding ToyEncoder::forward_joint(std::string_view target, std::string_view text, Rng* dropout_rng) const {
    const auto seq = assemble_joint(target, text);
    const auto states = forward(seq, dropout_rng);
    return {ad::slice_rows(states, 0, 1), ad::slice_rows(states, seq.text_begin, seq.text_count)};
}

ad::Var ToyEncoder::forward_masked(std::string_view masked_text, Rng* dropout_rng) const {
    const auto states = forward(assemble_single(masked_text), dropout_rng);
    return ad::slice_rows(states, 0, 1);
}

namespace {
Rng* select_rng(EncodeMode mode, Rng* rng) {
    if (mode == EncodeMode::Deterministic) return nullptr;
    if (!rng) throw ContractError("stochastic encoding needs a random generator");
    return rng;
}
}  // namespace

EncodedText ToyEncoder::encode_joint(std::string_view target, std::string_view text, EncodeMode mode,
                                     Rng* rng) const {
    ad::NoGradGuard no_grad;
    const auto enc = forward_joint(target, text, select_rng(mode, rng));
    return {enc.pooled.value(), enc.tokens.value(), enc.tokens.rows()};
}

Tensor ToyEncoder::encode_masked(std::string_view masked_text, EncodeMode mode, Rng* rng) const {
    ad::NoGradGuard no_grad;
    return forward_masked(masked_text, select_rng(mode, rng)).value();
}

ViewPair ToyEncoder::make_view_pair(std::string_view masked_text, Rng& rng) const {
    if (config_.dropout_rate == 0.0) {
        log::warn("make_view_pair: dropout rate is 0, both views are identical");
    }
    return {encode_masked(masked_text, EncodeMode::Stochastic, &rng),
            encode_masked(masked_text, EncodeMode::Stochastic, &rng)};
}

ad::ParameterList ToyEncoder::parameters(const std::string& prefix) const {
    ad::ParameterList out = {
        {prefix + "token_embedding", token_embedding_},
        {prefix + "segment_embedding", segment_embedding_},
        {prefix + "embedding_norm.gain", embedding_norm_gain_},
        {prefix + "embedding_norm.bias", embedding_norm_bias_},
    };
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        const auto p = prefix + "layer" + std::to_string(l) + ".";
        out.push_back({p + "attention.query.weight", L.wq});
        out.push_back({p + "attention.query.bias", L.bq});
        out.push_back({p + "attention.key.weight", L.wk});
        out.push_back({p + "attention.key.bias", L.bk});
        out.push_back({p + "attention.value.weight", L.wv});
        out.push_back({p + "attention.value.bias", L.bv});
        out.push_back({p + "attention.output.weight", L.wo});
        out.push_back({p + "attention.output.bias", L.bo});
        out.push_back({p + "attention_norm.gain", L.norm1_gain});
        out.push_back({p + "attention_norm.bias", L.norm1_bias});
        out.push_back({p + "ffn.in.weight", L.w1});
        out.push_back({p + "ffn.in.bias", L.b1});
        out.push_back({p + "ffn.out.weight", L.w2});
        out.push_back({p + "ffn.out.bias", L.b2});
        out.push_back({p + "ffn_norm.gain", L.norm2_gain});
        out.push_back({p + "ffn_norm.bias", L.norm2_bias});
    }
    return out;
}

}  // namespace fecl
