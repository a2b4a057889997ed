#include "fecl/model.hpp"

#include <algorithm>
#include <cmath>

namespace fecl {

void ModelConfig::validate() const {
    encoder.validate();
    if (projection_dim < 1 || fusion_dim < 1 || projection_hidden() < 1) {
        throw ContractError("projection and fusion dimensions must be >= 1");
    }
}

namespace {

EncoderConfig with_seed(EncoderConfig c, std::uint64_t seed) {
    c.seed = seed;
    return c;
}

}  // namespace

FeclModel::FeclModel(ModelConfig config, std::shared_ptr<const Vocabulary> vocab)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      joint_(with_seed(config_.encoder, derive_seed(config_.seed, "joint_encoder")), vocab_) {
    config_.validate();
    config_.encoder.vocab_size = joint_.config().vocab_size;
    if (!config_.share_encoder) {
        masked_.emplace(with_seed(config_.encoder, derive_seed(config_.seed, "masked_encoder")), vocab_);
    }
    const auto d_m = static_cast<std::size_t>(config_.hidden_dim());
    const auto d_h = static_cast<std::size_t>(config_.projection_hidden());
    const auto d_c = static_cast<std::size_t>(config_.projection_dim);
    const auto d_s = static_cast<std::size_t>(config_.fusion_dim);
    const auto d_f = static_cast<std::size_t>(config_.feature_dim());
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_m));

    Rng rng(derive_seed(config_.seed, "heads"));
    proj_w1_ = ad::parameter(uniform_tensor(d_h, d_m, bound, rng));
    proj_w2_ = ad::parameter(uniform_tensor(d_c, d_h, 1.0 / std::sqrt(static_cast<double>(d_h)), rng));
    w_q_ = ad::parameter(uniform_tensor(d_s, d_m, bound, rng));
    w_k_ = ad::parameter(uniform_tensor(d_s, d_m, bound, rng));
    w_v_ = ad::parameter(uniform_tensor(d_s, d_m, bound, rng));
    w_o_ = ad::parameter(uniform_tensor(kNumStances, d_f, bound, rng));
    b_o_ = ad::parameter(Tensor(1, kNumStances));
}

ad::ParameterList FeclModel::parameters() const {
    auto out = joint_.parameters("joint_encoder.");
    if (masked_) {
        auto more = masked_->parameters("masked_encoder.");
        out.insert(out.end(), more.begin(), more.end());
    }
    out.push_back({"projection.w1", proj_w1_});
    out.push_back({"projection.w2", proj_w2_});
    out.push_back({"fusion.w_q", w_q_});
    out.push_back({"fusion.w_k", w_k_});
    out.push_back({"fusion.w_v", w_v_});
    out.push_back({"classifier.w_o", w_o_});
    out.push_back({"classifier.b_o", b_o_});
    return out;
}

ad::Var FeclModel::masked_feature(std::string_view masked_text, Rng* dropout_rng) const {
    return masked_encoder().forward_masked(masked_text, dropout_rng);
}

ad::Var FeclModel::logits(std::string_view target, std::string_view text, const ad::Var& h,
                          Rng* dropout_rng) const {
    const auto enc = joint_.forward_joint(target, text, dropout_rng);
    const auto fused = fuse(config_.fusion, h, enc.pooled, enc.tokens, w_q_, w_k_, w_v_);
    return classifier_logits(fused.feature, w_o_, b_o_);
}

ad::Var FeclModel::projection(const ad::Var& h) const { return project(h, proj_w1_, proj_w2_); }

const std::string& require_masked_text(const Instance& instance) {
    if (!instance.masked_text) throw DataError("instance " + instance.id + " has no masked text");
    return *instance.masked_text;
}

Tensor FeclModel::predict_proba(const Instance& instance) const {
    ad::NoGradGuard no_grad;
    const auto h = masked_feature(require_masked_text(instance), nullptr);
    return ad::softmax_rows(logits(instance.target, instance.text, h, nullptr)).value();
}

Stance FeclModel::predict(const Instance& instance) const {
    const auto p = predict_proba(instance);
    const auto best = std::max_element(p.values().begin(), p.values().end()) - p.values().begin();
    return static_cast<Stance>(best);
}

Tensor FeclModel::embed_masked(const Instance& instance) const {
    ad::NoGradGuard no_grad;
    return masked_feature(require_masked_text(instance), nullptr).value();
}

ProjectionHead FeclModel::projection_head() const { return {proj_w1_.value(), proj_w2_.value()}; }
AttentionParams FeclModel::attention_params() const { return {w_q_.value(), w_k_.value(), w_v_.value()}; }
ClassifierParams FeclModel::classifier_params() const { return {w_o_.value(), b_o_.value()}; }

StateDict FeclModel::state() const {
    StateDict out;
    for (const auto& p : parameters()) out.emplace(p.name, p.var.value());
    return out;
}

void FeclModel::load_state(const StateDict& state) {
    const auto params = parameters();
    if (state.size() != params.size()) {
        throw DataError("load_state: expected " + std::to_string(params.size()) + " tensors, got " +
                        std::to_string(state.size()));
    }
    for (const auto& p : params) {
        const auto it = state.find(p.name);
        if (it == state.end()) throw DataError("load_state: missing tensor '" + p.name + "'");
        if (!it->second.same_shape(p.var.value())) {
            throw DataError("load_state: shape mismatch for '" + p.name + "': " + it->second.shape_string() +
                            " vs " + p.var.value().shape_string());
        }
        auto var = p.var;
        var.mutable_value() = it->second;
    }
}

}  // namespace fecl
