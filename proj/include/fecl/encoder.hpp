#pragma once

// Text encoders.
//
// `ToyEncoder` is a small post-norm transformer trained from scratch. It is
// used twice by the model: for the joint "[CLS] target [SEP] text [SEP]"
// input, and for the masked sentence "[CLS] masked [SEP]". Dropout follows
// the attention and feed-forward sublayers; in stochastic mode every call
// draws fresh masks from the caller's generator.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fecl/autograd.hpp"
#include "fecl/random.hpp"
#include "fecl/tensor.hpp"
#include "fecl/vocabulary.hpp"

namespace fecl {

struct EncoderConfig {
    int hidden_dim = 32;
    int vocab_size = 0;  // taken from the vocabulary when 0
    int max_sequence_length = 64;
    double dropout_rate = 0.1;
    int n_layers = 2;
    int n_heads = 2;
    int ffn_dim = 0;  // 4 * hidden_dim when 0
    std::uint64_t seed = 0;

    void validate() const;
    int feed_forward_dim() const { return ffn_dim > 0 ? ffn_dim : 4 * hidden_dim; }
};

enum class EncodeMode { Deterministic, Stochastic };

struct EncodedText {
    Tensor pooled;  // 1 x d_m, final state at [CLS]
    Tensor tokens;  // n x d_m, final states of the text positions
    std::size_t token_count = 0;
};

struct ViewPair {
    Tensor first;
    Tensor second;
};

/// Graph-level result of a joint encoding.
struct JointEncoding {
    ad::Var pooled;
    ad::Var tokens;
};

/// Token ids with segment ids and the location of the text span.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<int> segments;
    std::size_t text_begin = 0;
    std::size_t text_count = 0;
};

/// Read-only encoding contract shared by the toy encoder and external backends.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual std::size_t hidden_dim() const = 0;
    virtual EncodedText encode_joint(std::string_view target, std::string_view text) const = 0;
    virtual Tensor encode_masked(std::string_view masked_text) const = 0;
};

class ToyEncoder final : public TextEncoder {
public:
    ToyEncoder(EncoderConfig config, std::shared_ptr<const Vocabulary> vocab);

    const EncoderConfig& config() const { return config_; }
    const Vocabulary& vocabulary() const { return *vocab_; }
    std::size_t hidden_dim() const override { return static_cast<std::size_t>(config_.hidden_dim); }

    /// [CLS] target [SEP] text [SEP], text truncated from the right to fit.
    TokenSequence assemble_joint(std::string_view target, std::string_view text) const;
    /// [CLS] text [SEP].
    TokenSequence assemble_single(std::string_view text) const;

    /// Graph forward pass; `dropout_rng == nullptr` disables dropout.
    JointEncoding forward_joint(std::string_view target, std::string_view text, Rng* dropout_rng) const;
    ad::Var forward_masked(std::string_view masked_text, Rng* dropout_rng) const;
    ad::Var forward(const TokenSequence& seq, Rng* dropout_rng) const;

    EncodedText encode_joint(std::string_view target, std::string_view text, EncodeMode mode,
                             Rng* rng = nullptr) const;
    Tensor encode_masked(std::string_view masked_text, EncodeMode mode, Rng* rng = nullptr) const;
    EncodedText encode_joint(std::string_view target, std::string_view text) const override {
        return encode_joint(target, text, EncodeMode::Deterministic);
    }
    Tensor encode_masked(std::string_view masked_text) const override {
        return encode_masked(masked_text, EncodeMode::Deterministic);
    }

    /// Two independent stochastic passes over the same masked sentence.
    ViewPair make_view_pair(std::string_view masked_text, Rng& rng) const;

    ad::ParameterList parameters(const std::string& prefix) const;

private:
    struct Layer {
        ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
        ad::Var norm1_gain, norm1_bias;
        ad::Var w1, b1, w2, b2;
        ad::Var norm2_gain, norm2_bias;
    };

    ad::Var self_attention(const Layer& layer, const ad::Var& x) const;

    EncoderConfig config_;
    std::shared_ptr<const Vocabulary> vocab_;
    ad::Var token_embedding_;
    ad::Var segment_embedding_;
    ad::Var embedding_norm_gain_, embedding_norm_bias_;
    Tensor positions_;
    std::vector<Layer> layers_;
};

/// Uniform(-bound, bound) initialised tensor.
Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng);

}  // namespace fecl
