#pragma once

// Per-target topic keywords (collapsed Gibbs LDA) and sentence masking.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fecl/corpus.hpp"

namespace fecl {

struct TopicModelParams {
    int n_topics = 6;
    int n_keywords = 5;
    double doc_topic_prior = 50.0 / 6.0;
    double topic_word_prior = 0.01;
    int gibbs_iterations = 1000;
    std::uint64_t seed = 0;
    bool filter_stop_words = true;

    /// Sets T and K and the matching symmetric prior alpha = 50 / T.
    static TopicModelParams with_topics(int n_topics, int n_keywords);
    void validate() const;
};

struct TopicLexicon {
    std::map<std::string, std::vector<std::string>> per_target;

    const std::vector<std::string>& keywords(const std::string& target) const;
    bool covers(const std::string& target) const { return per_target.contains(target); }
};

struct MaskedInstance {
    std::string instance_id;
    std::string masked_text;
};

enum class MaskStrategy { Topic, Random };

/// Built-in English stop-word list kept out of the topic vocabulary.
const std::unordered_set<std::string>& stop_words();

/// Lowercased, punctuation-stripped word cores used for topic modelling.
std::vector<std::string> topic_tokens(std::string_view text, bool filter_stop_words);

/// Fits one topic model per target (targets run in parallel) and collects
/// the top keywords of every topic, deduplicated in first-occurrence order.
TopicLexicon fit_topic_lexicon(const std::vector<Instance>& instances, const TopicModelParams& params);

/// Keywords of a single document collection; exposed for testing.
std::vector<std::string> fit_topic_keywords(const std::vector<std::string>& documents,
                                            const TopicModelParams& params, const std::string& label);

using KeywordSet = std::unordered_set<std::string>;

/// Replaces every word whose lowercase core is a keyword with [MASK] and
/// collapses adjacent masks. Returns `text` unchanged when nothing matches.
std::string mask_sentence(std::string_view text, const KeywordSet& keywords);
std::string mask_sentence(std::string_view text, const std::vector<std::string>& keywords);

/// Masks ceil(fraction * n) of the n words chosen uniformly with `seed`.
std::string mask_random(std::string_view text, double fraction, std::uint64_t seed);

struct AugmentOptions {
    MaskStrategy strategy = MaskStrategy::Topic;
    double random_fraction = 0.15;
    std::uint64_t seed = 0;
};

std::vector<MaskedInstance> augment_corpus(const std::vector<Instance>& instances, const TopicLexicon& lexicon,
                                           const AugmentOptions& options);

/// Copies masked texts onto the instances (matched by position and id).
void attach_masks(std::vector<Instance>& instances, const std::vector<MaskedInstance>& masked);

void save_lexicon(const std::string& path, const TopicLexicon& lexicon);
TopicLexicon load_lexicon(const std::string& path);

}  // namespace fecl
