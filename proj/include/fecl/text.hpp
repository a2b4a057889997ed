#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fecl::text {

inline constexpr std::string_view kMaskToken = "[MASK]";

std::string_view trim(std::string_view s);
/// ASCII lowercase; bytes >= 0x80 are left untouched.
std::string to_lower(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
/// ASCII punctuation. Non-ASCII bytes count as word characters.
bool is_punct(char c);

/// A whitespace-delimited word split into leading punctuation, core and
/// trailing punctuation. "[MASK]" is kept whole as a core.
struct WordParts {
    std::string_view lead;
    std::string_view core;
    std::string_view trail;
};
WordParts split_affixes(std::string_view word);

}  // namespace fecl::text
