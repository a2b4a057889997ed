#include "fecl/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fecl/corpus.hpp"
#include "fecl/text.hpp"

namespace fecl {

namespace {
const std::vector<std::string>& reserved() {
    static const std::vector<std::string> r = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    return r;
}
}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> out;
    for (const auto word : text::split_whitespace(input)) {
        std::size_t i = 0;
        std::string current;
        auto flush = [&] {
            if (!current.empty()) out.push_back(text::to_lower(current));
            current.clear();
        };
        while (i < word.size()) {
            if (word.substr(i, text::kMaskToken.size()) == text::kMaskToken) {
                flush();
                out.emplace_back(text::kMaskToken);
                i += text::kMaskToken.size();
            } else if (text::is_punct(word[i])) {
                flush();
                out.emplace_back(1, word[i]);
                ++i;
            } else {
                current.push_back(word[i]);
                ++i;
            }
        }
        flush();
    }
    return out;
}

Vocabulary::Vocabulary() : Vocabulary(reserved()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
            throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
        }
    }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
    std::set<std::string> seen;
    for (const auto& t : texts) {
        for (auto& tok : tokenize(t)) seen.insert(std::move(tok));
    }
    std::vector<std::string> tokens = reserved();
    for (const auto& tok : seen) {
        if (std::find(tokens.begin(), tokens.begin() + kNumReserved, tok) == tokens.begin() + kNumReserved) {
            tokens.push_back(tok);
        }
    }
    return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    if (tokens.size() < kNumReserved || !std::equal(reserved().begin(), reserved().end(), tokens.begin())) {
        throw SchemaError(path + ": vocabulary must start with the reserved tokens");
    }
    return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
    return ids;
}

}  // namespace fecl
