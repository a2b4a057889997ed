#include <doctest.h>

#include <set>

#include "fecl/encoder.hpp"
#include "fecl/kernels.hpp"
#include "fecl/log.hpp"
#include "support.hpp"

using namespace fecl;

namespace {

std::shared_ptr<const Vocabulary> small_vocab() {
    return std::make_shared<const Vocabulary>(Vocabulary::build(
        {"climate change is real", "we should act now !", "is it a hoax ?", "donald trump", "[MASK] is real"}));
}

EncoderConfig small_config(double dropout = 0.1) {
    EncoderConfig c;
    c.hidden_dim = 8;
    c.n_heads = 2;
    c.n_layers = 2;
    c.max_sequence_length = 16;
    c.dropout_rate = dropout;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("tokenizer and vocabulary") {
    CHECK(tokenize("Hello, World! [MASK]?") ==
          std::vector<std::string>{"hello", ",", "world", "!", "[MASK]", "?"});
    const auto v = Vocabulary::build({"b a", "a c"});
    CHECK(v.size() == Vocabulary::kNumReserved + 3);
    CHECK(v.token(Vocabulary::kMask) == "[MASK]");
    CHECK(v.id("a") == Vocabulary::kNumReserved);
    CHECK(v.id("zzz") == Vocabulary::kUnk);
    CHECK(v.encode("A zzz [MASK]") == std::vector<int>{Vocabulary::kNumReserved, Vocabulary::kUnk, Vocabulary::kMask});

    testing::TempDir dir("vocab");
    v.save(dir.file("vocab.txt"));
    CHECK(Vocabulary::load(dir.file("vocab.txt")) == v);
}

TEST_CASE("encoder config validation") {
    auto c = small_config();
    c.hidden_dim = 7;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = small_config();
    c.dropout_rate = 1.0;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = small_config();
    c.hidden_dim = 0;
    CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("encode_joint shapes, determinism and token positions") {
    const ToyEncoder enc(small_config(), small_vocab());
    const auto a = enc.encode_joint("climate change", "we should act now");
    CHECK(a.pooled.rows() == 1);
    CHECK(a.pooled.cols() == 8);
    CHECK(a.tokens.rows() == 4);
    CHECK(a.token_count == 4);
    CHECK(all_finite(a.tokens));
    const auto b = enc.encode_joint("climate change", "we should act now");
    CHECK(a.pooled == b.pooled);
    CHECK(a.tokens == b.tokens);

    const auto seq = enc.assemble_joint("climate change", "we should act now");
    CHECK(seq.ids.front() == Vocabulary::kCls);
    CHECK(seq.ids[3] == Vocabulary::kSep);
    CHECK(seq.ids.back() == Vocabulary::kSep);
    CHECK(seq.text_begin == 4);
    CHECK(seq.text_count == 4);
}

TEST_CASE("unknown tokens map to UNK without error") {
    const ToyEncoder enc(small_config(), small_vocab());
    const auto seq = enc.assemble_joint("martian", "zorp blip");
    CHECK(seq.ids[1] == Vocabulary::kUnk);
    CHECK(all_finite(enc.encode_joint("martian", "zorp blip").pooled));
}

TEST_CASE("long text is truncated from the right; the target is kept") {
    const ToyEncoder enc(small_config(), small_vocab());
    std::string text;
    for (int i = 0; i < 40; ++i) text += "real ";
    const auto seq = enc.assemble_joint("donald trump", text);
    CHECK(seq.ids.size() == 16);
    CHECK(seq.ids[1] == enc.vocabulary().id("donald"));
    CHECK(seq.ids[2] == enc.vocabulary().id("trump"));
    CHECK(enc.encode_joint("donald trump", text).tokens.rows() == 16 - 5);
    CHECK(enc.encode_masked(text).cols() == 8);

    std::string long_target;
    for (int i = 0; i < 20; ++i) long_target += "trump ";
    CHECK_THROWS_AS(enc.assemble_joint(long_target, "real"), ContractError);
}

TEST_CASE("empty text is an error") {
    const ToyEncoder enc(small_config(), small_vocab());
    CHECK_THROWS(enc.encode_joint("climate", "   "));
    CHECK_THROWS(enc.encode_masked(""));
}

TEST_CASE("encode_masked: deterministic, fixed width, finite on a mask-only sentence") {
    const ToyEncoder enc(small_config(), small_vocab());
    const auto a = enc.encode_masked("[MASK] is real");
    CHECK(a == enc.encode_masked("[MASK] is real"));
    CHECK(a.cols() == 8);
    CHECK(all_finite(enc.encode_masked("[MASK]")));
    CHECK_THROWS_AS(enc.encode_masked("x", EncodeMode::Stochastic, nullptr), ContractError);
}

TEST_CASE("stochastic encodings differ and are seed-reproducible") {
    const ToyEncoder enc(small_config(0.1), small_vocab());
    Rng rng(7);
    std::set<std::vector<double>> seen;
    for (int i = 0; i < 100; ++i) {
        const auto e = enc.encode_joint("climate change", "is it a hoax ?", EncodeMode::Stochastic, &rng);
        seen.insert({e.pooled.values().begin(), e.pooled.values().end()});
    }
    CHECK(seen.size() >= 99);

    Rng r1(9), r2(9);
    CHECK(enc.encode_masked("[MASK] is real", EncodeMode::Stochastic, &r1) ==
          enc.encode_masked("[MASK] is real", EncodeMode::Stochastic, &r2));
}

TEST_CASE("view pairs") {
    {
        const ToyEncoder enc(small_config(0.0), small_vocab());
        Rng rng(1);
        log::ScopedWarningCapture warnings;
        const auto v = enc.make_view_pair("[MASK] is real", rng);
        CHECK(v.first == v.second);
        CHECK(warnings.contains("dropout rate is 0"));
    }
    const ToyEncoder enc(small_config(0.1), small_vocab());
    Rng rng(2);
    const auto v = enc.make_view_pair("[MASK] is real", rng);
    CHECK(v.first != v.second);
    CHECK(v.first.cols() == v.second.cols());
}

TEST_CASE("positive views are closer than other sentences") {
    auto cfg = small_config(0.1);
    cfg.hidden_dim = 16;
    const std::vector<std::string> words = {"climate", "change", "is", "real", "we", "should", "act",
                                            "now",     "!",      "it", "a",    "hoax", "?",     "donald"};
    const auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(words));
    const ToyEncoder enc(cfg, vocab);
    Rng rng(4);
    Tensor firsts(32, 16), seconds(32, 16);
    for (std::size_t i = 0; i < 32; ++i) {
        std::string s;
        const auto n = 3 + uniform_index(rng, 6);
        for (std::uint64_t k = 0; k < n; ++k) s += words[uniform_index(rng, words.size())] + " ";
        const auto v = enc.make_view_pair(s, rng);
        std::copy(v.first.values().begin(), v.first.values().end(), firsts.row_span(i).begin());
        std::copy(v.second.values().begin(), v.second.values().end(), seconds.row_span(i).begin());
    }
    Tensor both(64, 16);
    std::copy(firsts.values().begin(), firsts.values().end(), both.values().begin());
    std::copy(seconds.values().begin(), seconds.values().end(), both.values().begin() + 32 * 16);
    const auto cos = kernels::pairwise_cosine(both);
    double positive = 0.0, cross = 0.0;
    int n_cross = 0;
    for (std::size_t i = 0; i < 32; ++i) {
        positive += cos(i, 32 + i) / 32.0;
        for (std::size_t j = 0; j < 32; ++j) {
            if (j != i) {
                cross += cos(i, 32 + j);
                ++n_cross;
            }
        }
    }
    CHECK(positive > cross / n_cross);
}

TEST_CASE("encoder gradients match central differences") {
    const auto vocab = small_vocab();
    const ToyEncoder enc(small_config(0.0), vocab);
    Rng rng(6);
    const auto w = testing::random_tensor(5, 8, rng);
    auto loss = [&] {
        const auto e = enc.forward_joint("climate change", "is it real ?", nullptr);
        const ad::Var rows[] = {e.pooled, e.tokens};
        return ad::sum_squares(ad::add(ad::concat_rows(rows), ad::constant(w)));
    };
    for (const auto& p : enc.parameters("")) {
        INFO(p.name);
        CHECK(testing::check_gradient(p.var, loss, 12, rng).max_error < 1e-4);
    }
}

TEST_CASE("parameter names are unique and prefixed") {
    const ToyEncoder enc(small_config(), small_vocab());
    std::set<std::string> names;
    for (const auto& p : enc.parameters("enc.")) {
        CHECK(p.name.rfind("enc.", 0) == 0);
        names.insert(p.name);
    }
    CHECK(names.size() == enc.parameters("enc.").size());
    CHECK(names.contains("enc.token_embedding"));
}
