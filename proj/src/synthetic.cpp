#include "fecl/synthetic.hpp"

#include <set>
#include <string_view>

#include "fecl/random.hpp"
#include "fecl/tensor.hpp"

namespace fecl {

namespace {

// Templates are built from stop words and punctuation only, so topic
// masking leaves them intact. Each row pairs a declarative (FAVOR) with a
// rhetorical question (AGAINST) over the same words; "#" is the topic slot.
struct TemplatePair {
    std::string_view favor;
    std::string_view against;
};

constexpr TemplatePair kTemplates[] = {
    {"# is what we should have .", "is # what we should have ?"},
    {"we should all be for # .", "who should be for # ?"},
    {"this is why we have # .", "why do we have # ?"},
    {"i am for # , and so are they .", "am i for # , or are they ?"},
    {"# is here , and it should be .", "why is # here at all ?"},
    {"they have # and so do we .", "do they have # , and do we ?"},
};

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "v", "z"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u"};

std::string pseudo_word(Rng& rng) {
    std::string w;
    for (int s = 0; s < 3; ++s) {
        w += kOnsets[uniform_index(rng, std::size(kOnsets))];
        w += kVowels[uniform_index(rng, std::size(kVowels))];
    }
    return w;
}

std::string render(std::string_view pattern, const std::string& topic, bool question_marks) {
    std::string out;
    for (char c : pattern) {
        if (c == '#') {
            out += topic;
        } else if (c == '?' && !question_marks) {
            out += '.';
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

void SyntheticConfig::validate() const {
    if (train_targets < 1 || test_targets < 1) throw ContractError("synthetic: need train and test targets");
    if (train_per_target < 2 || test_per_target < 1) throw ContractError("synthetic: too few instances per target");
    if (max_topic_words < 1) throw ContractError("synthetic: max_topic_words must be >= 1");
    if (topic_words_per_target < 2) throw ContractError("synthetic: need at least 2 topic words per target");
    if (!(train_label_skew >= 0.5 && train_label_skew <= 1.0)) {
        throw ContractError("synthetic: train_label_skew must be in [0.5, 1]");
    }
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ContractError("synthetic: dev_fraction must be in (0, 1)");
}

std::vector<std::string> synthetic_topic_words(const SyntheticConfig& config, int target_index) {
    // Words of every target come from one stream so they never collide.
    Rng rng(derive_seed(config.seed, "synthetic.words"));
    std::set<std::string> used;
    std::vector<std::string> words;
    for (int t = 0; t <= target_index; ++t) {
        words.clear();
        while (words.size() < static_cast<std::size_t>(config.topic_words_per_target)) {
            auto w = pseudo_word(rng);
            if (used.insert(w).second) words.push_back(std::move(w));
        }
    }
    return words;
}

DatasetBundle generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, "synthetic.sentences"));
    const int n_targets = config.train_targets + config.test_targets;

    std::vector<Instance> train_pool;
    DatasetBundle bundle;
    bundle.protocol = Protocol::ZeroShot;
    bundle.seed = config.seed;

    for (int t = 0; t < n_targets; ++t) {
        const auto words = synthetic_topic_words(config, t);
        const std::string target = words[0] + " " + words[1];
        const bool is_test = t >= config.train_targets;
        const int count = is_test ? config.test_per_target : config.train_per_target;
        const Stance majority = t % 2 == 0 ? Stance::Favor : Stance::Against;
        for (int i = 0; i < count; ++i) {
            Stance label;
            if (is_test) {
                label = i % 2 == 0 ? Stance::Favor : Stance::Against;
            } else {
                const bool major = uniform01(rng) < config.train_label_skew;
                label = major ? majority : (majority == Stance::Favor ? Stance::Against : Stance::Favor);
            }
            const auto n_words = 1 + uniform_index(rng, static_cast<std::uint64_t>(config.max_topic_words));
            std::string topic;
            for (std::uint64_t k = 0; k < n_words; ++k) {
                if (k > 0) topic += ' ';
                topic += words[uniform_index(rng, words.size())];
            }
            const auto& tpl = kTemplates[uniform_index(rng, std::size(kTemplates))];
            Instance inst;
            inst.id = "syn:" + std::to_string(t) + ":" + std::to_string(i);
            inst.text = render(label == Stance::Favor ? tpl.favor : tpl.against, topic, config.question_marks);
            inst.target = target;
            inst.label = label;
            (is_test ? bundle.test : train_pool).push_back(std::move(inst));
        }
    }

    shuffle(train_pool, rng);
    const std::size_t n_dev = fraction_count(config.dev_fraction, train_pool.size());
    bundle.dev.assign(train_pool.begin(), train_pool.begin() + static_cast<std::ptrdiff_t>(n_dev));
    bundle.train.assign(train_pool.begin() + static_cast<std::ptrdiff_t>(n_dev), train_pool.end());
    return bundle;
}

}  // namespace fecl
