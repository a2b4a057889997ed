#pragma once

// The full stance model: joint encoder, masked-sentence encoder, projection
// head, fusion and classifier, with a flat name -> tensor state.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "fecl/autograd.hpp"
#include "fecl/contrastive.hpp"
#include "fecl/corpus.hpp"
#include "fecl/encoder.hpp"
#include "fecl/fusion.hpp"

namespace fecl {

struct ModelConfig {
    EncoderConfig encoder;
    bool share_encoder = false;
    int projection_hidden_dim = 0;  // d_h; d_m when 0
    int projection_dim = 128;       // d_c
    int fusion_dim = 128;           // d_s
    FusionKind fusion = FusionKind::Attention;
    std::uint64_t seed = 0;

    int hidden_dim() const { return encoder.hidden_dim; }
    int projection_hidden() const { return projection_hidden_dim > 0 ? projection_hidden_dim : encoder.hidden_dim; }
    int feature_dim() const { return 2 * encoder.hidden_dim + fusion_dim; }
    void validate() const;
};

using StateDict = std::map<std::string, Tensor>;

class FeclModel {
public:
    FeclModel(ModelConfig config, std::shared_ptr<const Vocabulary> vocab);
    // Parameters are shared nodes; a copy would alias them.
    FeclModel(const FeclModel&) = delete;
    FeclModel& operator=(const FeclModel&) = delete;
    FeclModel(FeclModel&&) = default;
    FeclModel& operator=(FeclModel&&) = default;

    const ModelConfig& config() const { return config_; }
    const Vocabulary& vocabulary() const { return *vocab_; }
    std::shared_ptr<const Vocabulary> vocabulary_ptr() const { return vocab_; }
    const ToyEncoder& joint_encoder() const { return joint_; }
    const ToyEncoder& masked_encoder() const { return masked_ ? *masked_ : joint_; }

    /// Every trainable tensor once, under a stable name.
    ad::ParameterList parameters() const;

    /// Masked-sentence feature h (1 x d_m).
    ad::Var masked_feature(std::string_view masked_text, Rng* dropout_rng) const;
    /// Joint encoding, fusion with `h`, and classifier logits (1 x 3).
    ad::Var logits(std::string_view target, std::string_view text, const ad::Var& h, Rng* dropout_rng) const;
    /// Projections g(h) for the rows of `h`.
    ad::Var projection(const ad::Var& h) const;

    /// Deterministic class probabilities; the instance must carry masked_text.
    Tensor predict_proba(const Instance& instance) const;
    Stance predict(const Instance& instance) const;
    /// Deterministic h for the instance's masked text.
    Tensor embed_masked(const Instance& instance) const;

    ProjectionHead projection_head() const;
    AttentionParams attention_params() const;
    ClassifierParams classifier_params() const;

    StateDict state() const;
    /// Copies values into the parameters; names and shapes must match exactly.
    void load_state(const StateDict& state);

private:
    ModelConfig config_;
    std::shared_ptr<const Vocabulary> vocab_;
    ToyEncoder joint_;
    std::optional<ToyEncoder> masked_;
    ad::Var proj_w1_, proj_w2_;
    ad::Var w_q_, w_k_, w_v_;
    ad::Var w_o_, b_o_;
};

const std::string& require_masked_text(const Instance& instance);

}  // namespace fecl
