#include "fecl/topicmask.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <optional>
#include <sstream>

#include "fecl/log.hpp"
#include "fecl/random.hpp"
#include "fecl/tensor.hpp"
#include "fecl/text.hpp"

namespace fecl {

TopicModelParams TopicModelParams::with_topics(int n_topics, int n_keywords) {
    TopicModelParams p;
    p.n_topics = n_topics;
    p.n_keywords = n_keywords;
    p.doc_topic_prior = 50.0 / static_cast<double>(n_topics);
    return p;
}

void TopicModelParams::validate() const {
    if (n_topics < 1) throw ContractError("n_topics must be >= 1");
    if (n_keywords < 1) throw ContractError("n_keywords must be >= 1");
    if (!(doc_topic_prior > 0.0) || !(topic_word_prior > 0.0)) throw ContractError("topic priors must be > 0");
    if (gibbs_iterations < 1) throw ContractError("gibbs_iterations must be >= 1");
}

const std::vector<std::string>& TopicLexicon::keywords(const std::string& target) const {
    const auto it = per_target.find(target);
    if (it == per_target.end()) throw DataError("topic lexicon has no entry for target '" + target + "'");
    return it->second;
}

const std::unordered_set<std::string>& stop_words() {
    static const std::unordered_set<std::string> words = {
        "a",       "about",  "above", "after", "again",  "against", "all",    "am",     "an",    "and",
        "any",     "are",    "as",    "at",    "be",     "because", "been",   "before", "being", "below",
        "between", "both",   "but",   "by",    "can",    "could",   "did",    "do",     "does",  "doing",
        "down",    "during", "each",  "few",   "for",    "from",    "further", "had",   "has",   "have",
        "having",  "he",     "her",   "here",  "hers",   "herself", "him",    "himself", "his",  "how",
        "i",       "if",     "in",    "into",  "is",     "it",      "its",    "itself", "just",  "me",
        "more",    "most",   "my",    "myself", "no",    "nor",     "not",    "now",    "of",    "off",
        "on",      "once",   "only",  "or",    "other",  "our",     "ours",   "out",    "over",  "own",
        "same",    "she",    "should", "so",   "some",   "such",    "than",   "that",   "the",   "their",
        "theirs",  "them",   "then",  "there", "these",  "they",    "this",   "those",  "through", "to",
        "too",     "under",  "until", "up",    "very",   "was",     "we",     "were",   "what",  "when",
        "where",   "which",  "while", "who",   "whom",   "why",     "will",   "with",   "would", "you",
        "your",    "yours",  "rt",    "amp",   "s",      "t",       "don",    "im",     "u",     "us",
    };
    return words;
}

std::vector<std::string> topic_tokens(std::string_view text, bool filter_stop_words) {
    std::vector<std::string> out;
    for (const auto word : text::split_whitespace(text)) {
        const auto parts = text::split_affixes(word);
        if (parts.core.empty() || parts.core == text::kMaskToken) continue;
        auto core = text::to_lower(parts.core);
        if (core.find_first_of(",\t") != std::string::npos) continue;
        if (filter_stop_words && stop_words().contains(core)) continue;
        out.push_back(std::move(core));
    }
    return out;
}

std::vector<std::string> fit_topic_keywords(const std::vector<std::string>& documents,
                                            const TopicModelParams& params, const std::string& label) {
    params.validate();
    // Vocabulary in sorted order so ids do not depend on document order.
    std::vector<std::vector<std::string>> tokenized;
    std::vector<std::string> vocab;
    for (const auto& doc : documents) {
        auto toks = topic_tokens(doc, params.filter_stop_words);
        if (toks.empty()) continue;
        vocab.insert(vocab.end(), toks.begin(), toks.end());
        tokenized.push_back(std::move(toks));
    }
    if (tokenized.empty()) throw DataError("target '" + label + "' has no documents to fit a topic model on");
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());

    const auto n_topics = static_cast<std::size_t>(params.n_topics);
    const auto n_vocab = vocab.size();
    std::vector<std::vector<int>> docs;
    for (const auto& toks : tokenized) {
        std::vector<int> ids;
        for (const auto& t : toks) {
            ids.push_back(static_cast<int>(std::lower_bound(vocab.begin(), vocab.end(), t) - vocab.begin()));
        }
        docs.push_back(std::move(ids));
    }

    Rng rng(derive_seed(params.seed, label));
    std::vector<std::vector<int>> assign(docs.size());
    std::vector<std::vector<int>> doc_topic(docs.size(), std::vector<int>(n_topics, 0));
    std::vector<int> topic_word(n_topics * n_vocab, 0);
    std::vector<int> topic_total(n_topics, 0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (int w : docs[d]) {
            const auto k = static_cast<int>(uniform_index(rng, n_topics));
            assign[d].push_back(k);
            ++doc_topic[d][static_cast<std::size_t>(k)];
            ++topic_word[static_cast<std::size_t>(k) * n_vocab + static_cast<std::size_t>(w)];
            ++topic_total[static_cast<std::size_t>(k)];
        }
    }

    const double alpha = params.doc_topic_prior;
    const double beta = params.topic_word_prior;
    const double v_beta = beta * static_cast<double>(n_vocab);
    std::vector<double> weights(n_topics);
    for (int it = 0; it < params.gibbs_iterations; ++it) {
        for (std::size_t d = 0; d < docs.size(); ++d) {
            for (std::size_t i = 0; i < docs[d].size(); ++i) {
                const auto w = static_cast<std::size_t>(docs[d][i]);
                auto k = static_cast<std::size_t>(assign[d][i]);
                --doc_topic[d][k];
                --topic_word[k * n_vocab + w];
                --topic_total[k];
                double total = 0.0;
                for (std::size_t t = 0; t < n_topics; ++t) {
                    weights[t] = (doc_topic[d][t] + alpha) * (topic_word[t * n_vocab + w] + beta) /
                                 (topic_total[t] + v_beta);
                    total += weights[t];
                }
                double u = uniform01(rng) * total;
                k = n_topics - 1;
                for (std::size_t t = 0; t < n_topics; ++t) {
                    u -= weights[t];
                    if (u < 0.0) {
                        k = t;
                        break;
                    }
                }
                assign[d][i] = static_cast<int>(k);
                ++doc_topic[d][k];
                ++topic_word[k * n_vocab + w];
                ++topic_total[k];
            }
        }
    }

    const auto n_keywords = static_cast<std::size_t>(params.n_keywords);
    if (n_vocab < n_keywords) {
        log::warn("target '" + label + "': vocabulary has " + std::to_string(n_vocab) + " words, fewer than K=" +
                  std::to_string(n_keywords) + "; using the whole vocabulary");
    }
    std::vector<std::string> keywords;
    std::unordered_set<std::string> taken;
    std::vector<std::size_t> order(n_vocab);
    for (std::size_t k = 0; k < n_topics; ++k) {
        for (std::size_t w = 0; w < n_vocab; ++w) order[w] = w;
        // phi_kw shares its denominator within a topic, so counts rank identically;
        // ties break toward the lexicographically smaller word.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return topic_word[k * n_vocab + a] > topic_word[k * n_vocab + b];
        });
        for (std::size_t r = 0; r < std::min(n_keywords, n_vocab); ++r) {
            const auto& word = vocab[order[r]];
            if (taken.insert(word).second) keywords.push_back(word);
        }
    }
    return keywords;
}

TopicLexicon fit_topic_lexicon(const std::vector<Instance>& instances, const TopicModelParams& params) {
    params.validate();
    if (instances.empty()) throw ContractError("fit_topic_lexicon: no instances");
    const auto targets = targets_of(instances);
    std::vector<std::vector<std::string>> docs(targets.size());
    for (const auto& inst : instances) {
        const auto idx = static_cast<std::size_t>(std::find(targets.begin(), targets.end(), inst.target) -
                                                  targets.begin());
        docs[idx].push_back(inst.text);
    }

    std::vector<std::vector<std::string>> results(targets.size());
    std::vector<std::exception_ptr> errors(targets.size());
    const auto n = static_cast<std::ptrdiff_t>(targets.size());
    // Independent Gibbs chains, one per target.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            results[idx] = fit_topic_keywords(docs[idx], params, targets[idx]);
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    TopicLexicon lexicon;
    for (std::size_t i = 0; i < targets.size(); ++i) lexicon.per_target[targets[i]] = std::move(results[i]);
    return lexicon;
}

namespace {

struct OutWord {
    std::string lead;
    std::string core;
    std::string trail;
    bool masked = false;
};

std::string join_words(const std::vector<OutWord>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w.lead;
        out += w.core;
        out += w.trail;
    }
    return out;
}

}  // namespace

std::string mask_sentence(std::string_view text, const KeywordSet& keywords) {
    if (keywords.empty()) return std::string(text);
    std::vector<OutWord> words;
    bool replaced = false;
    for (const auto word : text::split_whitespace(text)) {
        const auto parts = text::split_affixes(word);
        OutWord w{std::string(parts.lead), std::string(parts.core), std::string(parts.trail), false};
        if (parts.core == text::kMaskToken) {
            w.masked = true;
        } else if (!parts.core.empty() && keywords.contains(text::to_lower(parts.core))) {
            w.core = std::string(text::kMaskToken);
            w.masked = true;
            replaced = true;
        }
        words.push_back(std::move(w));
    }
    if (!replaced) return std::string(text);

    // Merge a mask into the preceding one when no punctuation separates them.
    std::vector<OutWord> merged;
    for (auto& w : words) {
        if (w.masked && !merged.empty() && merged.back().masked && merged.back().trail.empty() && w.lead.empty()) {
            merged.back().trail = std::move(w.trail);
            continue;
        }
        merged.push_back(std::move(w));
    }
    return join_words(merged);
}

std::string mask_sentence(std::string_view text, const std::vector<std::string>& keywords) {
    return mask_sentence(text, KeywordSet(keywords.begin(), keywords.end()));
}

std::string mask_random(std::string_view text, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw ContractError("mask_random: fraction must be in [0, 1]");
    std::vector<OutWord> words;
    std::vector<std::size_t> candidates;
    for (const auto word : text::split_whitespace(text)) {
        const auto parts = text::split_affixes(word);
        if (!parts.core.empty()) candidates.push_back(words.size());
        words.push_back({std::string(parts.lead), std::string(parts.core), std::string(parts.trail), false});
    }
    const auto n_mask = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(candidates.size()) - 1e-9));
    if (n_mask == 0) return std::string(text);

    Rng rng(seed);
    // Partial Fisher-Yates: the first n_mask slots are a uniform sample.
    for (std::size_t i = 0; i < n_mask; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_index(rng, candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
        words[candidates[i]].core = std::string(text::kMaskToken);
    }
    return join_words(words);
}

std::vector<MaskedInstance> augment_corpus(const std::vector<Instance>& instances, const TopicLexicon& lexicon,
                                           const AugmentOptions& options) {
    std::vector<MaskedInstance> out;
    out.reserve(instances.size());
    std::map<std::string, KeywordSet> sets;
    if (options.strategy == MaskStrategy::Topic) {
        for (const auto& inst : instances) {
            if (!lexicon.covers(inst.target)) {
                throw DataError("topic lexicon has no entry for target '" + inst.target + "'");
            }
            if (!sets.contains(inst.target)) {
                const auto& kw = lexicon.keywords(inst.target);
                sets.emplace(inst.target, KeywordSet(kw.begin(), kw.end()));
            }
        }
    }
    for (const auto& inst : instances) {
        if (options.strategy == MaskStrategy::Topic) {
            out.push_back({inst.id, mask_sentence(inst.text, sets.at(inst.target))});
        } else {
            out.push_back({inst.id, mask_random(inst.text, options.random_fraction, derive_seed(options.seed, inst.id))});
        }
    }
    return out;
}

void attach_masks(std::vector<Instance>& instances, const std::vector<MaskedInstance>& masked) {
    if (instances.size() != masked.size()) throw ContractError("attach_masks: size mismatch");
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].id != masked[i].instance_id) {
            throw ContractError("attach_masks: id mismatch at " + std::to_string(i));
        }
        instances[i].masked_text = masked[i].masked_text;
    }
}

void save_lexicon(const std::string& path, const TopicLexicon& lexicon) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [target, words] : lexicon.per_target) {
        out << target << '\t';
        for (std::size_t i = 0; i < words.size(); ++i) out << (i ? "," : "") << words[i];
        out << '\n';
    }
}

TopicLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    TopicLexicon lexicon;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": expected target<TAB>keywords");
        }
        auto& words = lexicon.per_target[line.substr(0, tab)];
        std::stringstream rest(line.substr(tab + 1));
        std::string word;
        while (std::getline(rest, word, ',')) {
            if (!word.empty()) words.push_back(word);
        }
    }
    return lexicon;
}

}  // namespace fecl
