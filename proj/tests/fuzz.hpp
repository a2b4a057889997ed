#pragma once

// Random sentences for masking properties: words, punctuation attached on
// either side, repeated keywords and literal [MASK] tokens.

#include <string>
#include <vector>

#include "fecl/random.hpp"

namespace fecl::fuzz {

inline const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> w = {"heat",   "records", "Europe", "asia",  "is",     "the",
                                               "not",    "climate", "change", "we",    "should", "be",
                                               "vote",   "Trump",   "mask",   "school", "[MASK]", "ok",
                                               "don't",  "e-mail",  "café",   "#tag",  "@user",  "2020"};
    return w;
}

inline std::string sentence(Rng& rng) {
    static const std::string lead[] = {"", "", "", "\"", "(", "#"};
    static const std::string trail[] = {"", "", "", ",", ".", "!", "?", "!!", ")", "\"", "...", ":"};
    const auto n = 1 + uniform_index(rng, 14);
    std::string s;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i > 0) s += uniform01(rng) < 0.1 ? "  " : " ";
        s += lead[uniform_index(rng, std::size(lead))];
        s += word_pool()[uniform_index(rng, word_pool().size())];
        s += trail[uniform_index(rng, std::size(trail))];
    }
    return s;
}

inline std::vector<std::string> keywords(Rng& rng) {
    std::vector<std::string> k;
    for (const auto& w : word_pool()) {
        if (w != "[MASK]" && uniform01(rng) < 0.3) {
            std::string lower;
            for (char c : w) lower += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
            k.push_back(lower);
        }
    }
    return k;
}

}  // namespace fecl::fuzz
