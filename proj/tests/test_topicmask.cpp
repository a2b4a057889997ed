#include <doctest.h>

#include <set>

#include "fecl/log.hpp"
#include "fecl/text.hpp"
#include "fecl/topicmask.hpp"
#include "fuzz.hpp"
#include "support.hpp"

using namespace fecl;

namespace {

const std::string kExample =
    "Today Europe is breaking heat records, while Asia is breaking the lowest temperature records! "
    "Should we not be concerned?";
const std::vector<std::string> kExampleKeywords = {"breaking", "heat",        "records",  "the",
                                                  "lowest",   "temperature", "concerned"};

std::vector<Instance> docs_for(const std::string& target, const std::vector<std::string>& texts) {
    std::vector<Instance> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.push_back({target + std::to_string(i), texts[i], target, {}, {}, {}});
    }
    return out;
}

std::vector<std::string> words_of(const std::string& s) {
    std::vector<std::string> out;
    for (auto w : text::split_whitespace(s)) out.emplace_back(w);
    return out;
}

}  // namespace

TEST_CASE("the Europe and Asia example sentence is masked exactly") {
    CHECK(mask_sentence(kExample, kExampleKeywords) ==
          "Today Europe is [MASK], while Asia is [MASK]! Should we not be [MASK]?");
}

TEST_CASE("mask_sentence edge cases") {
    CHECK(mask_sentence("any text at all.", std::vector<std::string>{}) == "any text at all.");
    CHECK(mask_sentence("cats cats dogs", std::vector<std::string>{"cats"}) == "[MASK] dogs");
    CHECK(mask_sentence("Cats, cats dogs", std::vector<std::string>{"cats"}) == "[MASK], [MASK] dogs");
    CHECK(mask_sentence("no match here", std::vector<std::string>{"zebra"}) == "no match here");
    CHECK(mask_sentence("the [MASK] heat wave", std::vector<std::string>{"heat"}) == "the [MASK] wave");
}

TEST_CASE("mask_sentence properties on a fuzz corpus") {
    Rng rng(41);
    for (int i = 0; i < 300; ++i) {
        const auto s = fuzz::sentence(rng);
        const auto kw = fuzz::keywords(rng);
        const auto once = mask_sentence(s, kw);
        CHECK(mask_sentence(once, kw) == once);
        const auto in = words_of(s), out = words_of(once);
        CHECK(out.size() <= in.size());
        // Unmasked words keep their relative order.
        std::size_t cursor = 0;
        for (const auto& w : out) {
            if (w.find("[MASK]") != std::string::npos) continue;
            while (cursor < in.size() && in[cursor] != w) ++cursor;
            CHECK(cursor < in.size());
            ++cursor;
        }
    }
}

TEST_CASE("mask_random") {
    CHECK(mask_random("a b c", 0.0, 1) == "a b c");
    CHECK(mask_random("a b c", 1.0, 1) == "[MASK] [MASK] [MASK]");
    std::string twenty;
    for (int i = 0; i < 20; ++i) twenty += (i ? " w" : "w") + std::to_string(i);
    const auto masked = mask_random(twenty, 0.15, 9);
    int count = 0;
    for (const auto& w : words_of(masked)) count += w == "[MASK]";
    CHECK(count == 3);
    CHECK(words_of(masked).size() == 20);
    CHECK(mask_random(twenty, 0.15, 9) == masked);
    CHECK(mask_random(twenty, 0.15, 10) != masked);
    CHECK_THROWS_AS(mask_random("a", 1.5, 1), ContractError);
}

TEST_CASE("topic model: single document, one topic, one keyword") {
    auto params = TopicModelParams::with_topics(1, 1);
    params.filter_stop_words = false;  // "a" is on the stop list
    CHECK(fit_topic_keywords({"a a a b"}, params, "t") == std::vector<std::string>{"a"});
}

TEST_CASE("topic model: vocabulary of exactly K words, one topic") {
    auto params = TopicModelParams::with_topics(1, 3);
    auto kw = fit_topic_keywords({"red green blue", "green blue green"}, params, "t");
    std::sort(kw.begin(), kw.end());
    CHECK(kw == std::vector<std::string>{"blue", "green", "red"});
}

TEST_CASE("topic model: small vocabulary warns and returns every word") {
    log::ScopedWarningCapture warnings;
    auto params = TopicModelParams::with_topics(2, 5);
    auto kw = fit_topic_keywords({"alpha beta", "beta gamma"}, params, "small");
    std::sort(kw.begin(), kw.end());
    CHECK(kw == std::vector<std::string>{"alpha", "beta", "gamma"});
    CHECK(warnings.contains("fewer than K"));
}

TEST_CASE("topic lexicon: bounds, determinism, stop words and errors") {
    Rng rng(42);
    std::vector<Instance> all;
    for (const std::string target : {"climate", "election"}) {
        std::vector<std::string> texts;
        for (int i = 0; i < 40; ++i) texts.push_back(fuzz::sentence(rng) + " " + target + " policy");
        auto d = docs_for(target, texts);
        all.insert(all.end(), d.begin(), d.end());
    }
    TopicModelParams params;
    params.gibbs_iterations = 50;
    params.seed = 5;
    const auto lex = fit_topic_lexicon(all, params);
    CHECK(lex.per_target.size() == 2);
    for (const auto& [target, words] : lex.per_target) {
        CHECK(words.size() <= 30);
        CHECK(std::set<std::string>(words.begin(), words.end()).size() == words.size());
        for (const auto& w : words) {
            CHECK_FALSE(stop_words().contains(w));
            CHECK(w != "[mask]");
        }
    }
    CHECK(fit_topic_lexicon(all, params).per_target == lex.per_target);
    CHECK(lex.covers("climate"));
    CHECK_THROWS_AS(lex.keywords("sports"), DataError);

    CHECK_THROWS_AS(fit_topic_lexicon({}, params), ContractError);
    auto only_stop = docs_for("empty", {"the a an", "of to"});
    CHECK_THROWS_AS(fit_topic_lexicon(only_stop, params), DataError);
    params.n_topics = 0;
    CHECK_THROWS_AS(params.validate(), ContractError);
}

TEST_CASE("augment_corpus") {
    auto inst = docs_for("CC", {kExample, "nothing topical"});
    TopicLexicon lex;
    lex.per_target["CC"] = kExampleKeywords;
    const auto topic = augment_corpus(inst, lex, {MaskStrategy::Topic, 0.15, 0});
    REQUIRE(topic.size() == 2);
    CHECK(topic[0].masked_text == "Today Europe is [MASK], while Asia is [MASK]! Should we not be [MASK]?");
    CHECK(topic[1].masked_text == "nothing topical");
    CHECK(topic[0].instance_id == inst[0].id);

    const auto random0 = augment_corpus(inst, lex, {MaskStrategy::Random, 0.0, 0});
    for (std::size_t i = 0; i < inst.size(); ++i) CHECK(random0[i].masked_text == inst[i].text);

    auto other = docs_for("XX", {"text"});
    try {
        augment_corpus(other, lex, {MaskStrategy::Topic, 0.15, 0});
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("XX") != std::string::npos);
    }

    attach_masks(inst, topic);
    CHECK(inst[0].masked_text == topic[0].masked_text);
}

TEST_CASE("lexicon file round trip") {
    testing::TempDir dir("lexicon");
    TopicLexicon lex;
    lex.per_target["Climate Change is a Real Concern"] = {"heat", "records"};
    lex.per_target["DT"] = {"trump"};
    save_lexicon(dir.file("lex.tsv"), lex);
    CHECK(load_lexicon(dir.file("lex.tsv")).per_target == lex.per_target);
}
