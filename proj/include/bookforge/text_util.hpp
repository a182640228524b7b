#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace bookforge {

/// Lowercased alphanumeric runs; every other byte is a separator.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens, std::size_t first, std::size_t last) {
    std::string out;
    for (std::size_t i = first; i < last; ++i) {
        if (i != first) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

/// Title key used by the title index: tokens joined by single spaces.
inline std::string fold_title(std::string_view title) {
    auto t = tokenize(title);
    return join_tokens(t, 0, t.size());
}

inline bool is_stop_word(std::string_view w) {
    static constexpr std::string_view words[] = {"a",  "an", "and", "as", "at",  "by",   "for", "from", "in",
                                                 "of", "on", "or",  "the", "to", "with", "vs",  "versus"};
    for (auto s : words)
        if (s == w) return true;
    return false;
}

} // namespace bookforge
