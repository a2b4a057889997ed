#pragma once

// Experiment orchestration: masking a bundle, evaluation, repeated runs
// with a summary, alignment/uniformity traces and embedding export.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fecl/corpus.hpp"
#include "fecl/metrics.hpp"
#include "fecl/synthetic.hpp"
#include "fecl/topicmask.hpp"
#include "fecl/training.hpp"

namespace fecl {

/// Fits per-target topic keywords on every split's texts (labels unused) and
/// attaches masked texts. NO_TOPICMASK uses random masking instead.
TopicLexicon mask_bundle(DatasetBundle& bundle, const TopicModelParams& topics, Variant variant,
                         double random_fraction, std::uint64_t seed);

/// Deterministic inference over bundle.test.
MetricReport evaluate(const FeclModel& model, const std::vector<Instance>& test, HeadlineProtocol protocol,
                      MicroMode micro, std::uint64_t run_seed);
MetricReport evaluate(const Checkpoint& checkpoint, const DatasetBundle& bundle, MicroMode micro = MicroMode::Binary);

enum class DatasetKind {
    Synthetic,  // built-in generator
    Bundle,     // directory written by save_bundle
    File,       // one delimited file, split by protocol
    Vast,       // train/dev/test files
};

struct RunConfig {
    DatasetKind dataset = DatasetKind::Synthetic;
    std::string data_path;  // file or bundle directory
    std::string vast_dev_path;
    std::string vast_test_path;
    std::string label_scheme = "canonical";
    ColumnSpec columns;
    Protocol protocol = Protocol::ZeroShot;
    std::string held_out_target;
    std::string source_target;
    std::string dest_target;
    VastSubset vast_subset = VastSubset::All;
    double dev_fraction = 0.15;
    MicroMode micro = MicroMode::Binary;
    SyntheticConfig synthetic;
    TopicModelParams topics;
    ModelConfig model;
    TrainConfig train;
    double random_mask_fraction = 0.15;
    std::string output_dir;  // empty: nothing written
    int repeats = 1;
    bool parallel_repeats = false;

    void validate() const;
};

/// Bundle for one repeat seed.
DatasetBundle prepare_bundle(const RunConfig& config, std::uint64_t seed);

struct RunSummary {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation; 0 for fewer than 2 runs
    int completed = 0;
    std::vector<std::string> errors;
};

struct ExperimentResult {
    std::vector<MetricReport> reports;
    RunSummary summary;
};

RunSummary summarize(const std::vector<MetricReport>& reports, std::vector<std::string> errors);

/// One run per repeat with seed train.seed + r. A failing repeat is recorded
/// in summary.errors and skipped.
ExperimentResult run_experiment(const RunConfig& config);

struct TraceRecord {
    std::size_t step = 0;
    double alignment = 0.0;
    double uniformity = 0.0;
};

/// Alignment of stochastic view pairs and uniformity of deterministic
/// embeddings of the probe masked sentences.
TraceRecord probe_geometry(const FeclModel& model, const std::vector<std::string>& probe, std::uint64_t seed,
                           std::size_t step);

/// Trains as fit() does and records probe geometry every `every` steps, starting at step 0.
std::vector<TraceRecord> diagnostics_trace(const DatasetBundle& bundle, const ModelConfig& model,
                                           const TrainConfig& train, const std::vector<std::string>& probe,
                                           std::size_t every = 5, Checkpoint* final_checkpoint = nullptr);

enum class Projector { None, Pca2d };
Projector parse_projector(std::string_view name);

struct EmbeddingRow {
    std::string id;
    std::string split;
    std::string target;
    std::vector<double> coords;
};

std::vector<EmbeddingRow> export_embeddings(const FeclModel& model, const std::vector<Instance>& instances,
                                            const std::vector<std::string>& split_tags, Projector projector);

/// Principal-component scores of the rows of `data` on the leading `k` axes.
Tensor pca_project(const Tensor& data, std::size_t k);

/// Flat "key = value" file; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::string& path);
/// Applies known keys to `config`; unknown keys throw ContractError.
void apply_key_values(RunConfig& config, const std::map<std::string, std::string>& values);

/// Configuration used for the built-in synthetic task at desk scale.
RunConfig synthetic_run_config(std::uint64_t seed);

}  // namespace fecl
