#include "fecl/text.hpp"

#include <cctype>

namespace fecl::text {

namespace {
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
}  // namespace

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

bool is_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

WordParts split_affixes(std::string_view word) {
    const auto mask_at = word.find(kMaskToken);
    if (mask_at != std::string_view::npos) {
        const auto after = mask_at + kMaskToken.size();
        bool affixes_are_punct = true;
        for (std::size_t i = 0; i < word.size(); ++i) {
            if ((i < mask_at || i >= after) && !is_punct(word[i])) affixes_are_punct = false;
        }
        if (affixes_are_punct) {
            return {word.substr(0, mask_at), word.substr(mask_at, kMaskToken.size()), word.substr(after)};
        }
    }
    std::size_t b = 0, e = word.size();
    while (b < e && is_punct(word[b])) ++b;
    while (e > b && is_punct(word[e - 1])) --e;
    return {word.substr(0, b), word.substr(b, e - b), word.substr(e)};
}

}  // namespace fecl::text
