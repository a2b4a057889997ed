#pragma once

// Built-in zero-shot task: label-bearing sentence templates crossed with
// per-target topic vocabularies. Train and test targets share no topic
// words; within each training target the labels are skewed, so topic words
// are a cue that does not transfer.

#include <cstdint>
#include <string>
#include <vector>

#include "fecl/corpus.hpp"

namespace fecl {

struct SyntheticConfig {
    int train_targets = 6;
    int test_targets = 2;
    int train_per_target = 100;
    int test_per_target = 100;
    int topic_words_per_target = 6;
    /// Share of a training target's instances that carry its majority label.
    double train_label_skew = 0.8;
    /// Topic phrases hold 1..max_topic_words words.
    int max_topic_words = 2;
    /// AGAINST questions end in '?'; when false every sentence ends in '.'.
    bool question_marks = true;
    double dev_fraction = 0.15;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Pseudo-word topic vocabulary of one target; disjoint across targets.
std::vector<std::string> synthetic_topic_words(const SyntheticConfig& config, int target_index);

/// FAVOR/AGAINST instances; test targets are unseen in train and dev.
DatasetBundle generate_synthetic(const SyntheticConfig& config);

}  // namespace fecl
