#pragma once

// Joint optimization of the stance loss and the contrastive loss, the
// fit loop with best-dev selection, and checkpoint archives.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fecl/corpus.hpp"
#include "fecl/metrics.hpp"
#include "fecl/model.hpp"

namespace fecl {

enum class Variant { Full, Concat, NoTopicMask, NoCl };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct TrainConfig {
    double learning_rate = 2e-5;
    int batch_size = 32;
    int epochs = 30;
    double eta = 0.1;
    double l2_coefficient = 1e-5;
    double temperature = 0.07;
    std::uint64_t seed = 0;
    Variant variant = Variant::Full;
    int patience = 5;           // 0 disables early stopping
    double grad_clip = 1.0;     // global norm; <= 0 disables clipping
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t max_steps = 0;  // 0: no step limit
    /// Compute L_CL on detached projections, so it contributes no gradient.
    bool detach_contrastive = false;

    void validate() const;
    /// eta, or 0 for the NO_CL variant.
    double effective_eta() const { return variant == Variant::NoCl ? 0.0 : eta; }
    FusionKind fusion_kind() const { return variant == Variant::Concat ? FusionKind::Concat : FusionKind::Attention; }
};

/// Thrown when a loss or dev metric stops being finite.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// -sum_i sum_j y_ij log p_ij with p clamped to 1e-12 at the true label.
double cls_loss(const Tensor& predicted, const Tensor& one_hot);
double total_loss(double cls, double cl, double params_sq_norm, const TrainConfig& config);

/// Sum of squares over every parameter tensor.
double parameter_squared_norm(const ad::ParameterList& params);

struct StepMetrics {
    double cls = 0.0;
    double cl = 0.0;
    double total = 0.0;
    std::size_t contrastive_rows = 0;  // 2 N_b
};

class Adam {
public:
    Adam(ad::ParameterList params, double learning_rate, double beta1, double beta2, double epsilon);
    /// Applies one update from the current gradient buffers.
    void step();
    std::size_t steps() const { return t_; }

private:
    ad::ParameterList params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, epsilon_;
    std::size_t t_ = 0;
};

class Trainer {
public:
    Trainer(FeclModel& model, TrainConfig config);

    /// Losses of a batch without touching parameters or gradient buffers.
    StepMetrics losses(std::span<const Instance> batch);
    /// Forward, backward and one optimizer update.
    StepMetrics train_step(std::span<const Instance> batch);

    std::size_t steps() const { return optimizer_.steps(); }
    const TrainConfig& config() const { return config_; }

private:
    struct Forward {
        ad::Var cls, cl;
        std::size_t contrastive_rows = 0;
    };
    Forward forward(std::span<const Instance> batch, std::uint64_t dropout_seed) const;

    FeclModel& model_;
    TrainConfig config_;
    ad::ParameterList params_;
    Adam optimizer_;
};

struct EpochRecord {
    int epoch = 0;
    double cls = 0.0;
    double cl = 0.0;
    double total = 0.0;
    double dev_metric = 0.0;
};

/// Index of the first epoch with the highest dev metric; -1 for an empty history.
int best_epoch(const std::vector<EpochRecord>& history);

struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    std::shared_ptr<const Vocabulary> vocab;
    StateDict tensors;
    int epoch = 0;
    std::vector<EpochRecord> history;

    /// Writes manifest.json, tensors/*.bin, vocab.txt and history.jsonl into `dir`.
    void save(const std::string& dir) const;
    static Checkpoint load(const std::string& dir);
};

FeclModel restore_model(const Checkpoint& checkpoint);

HeadlineProtocol headline_for(Protocol protocol);

/// Deterministic predictions over labeled instances.
ConfusionTable confusion_on(const FeclModel& model, std::span<const Instance> instances);

struct FitOptions {
    HeadlineProtocol protocol = HeadlineProtocol::ZeroShot;
    MicroMode micro = MicroMode::Binary;
    /// Called with the number of completed steps: once before training, then after every step.
    std::function<void(std::size_t, const FeclModel&)> on_progress;
};

/// Vocabulary of train and dev texts, targets and masked texts.
std::shared_ptr<const Vocabulary> build_vocabulary(const DatasetBundle& bundle);

Checkpoint fit(const DatasetBundle& bundle, ModelConfig model_config, const TrainConfig& config,
               const FitOptions& options = {});

}  // namespace fecl
