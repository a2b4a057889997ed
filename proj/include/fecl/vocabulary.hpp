#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fecl {

/// Lowercased whitespace + punctuation tokenizer. Each ASCII punctuation
/// character is its own token; "[MASK]" is recognized as a single token.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumReserved = 5;

    Vocabulary();

    /// Every token occurring at least once in `texts`, in sorted order after the reserved ones.
    static Vocabulary build(const std::vector<std::string>& texts);
    /// One token per line; the line number is the id. The reserved tokens must come first.
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int id(std::string_view token) const;
    std::vector<int> encode(std::string_view text) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

private:
    explicit Vocabulary(std::vector<std::string> tokens);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace fecl
