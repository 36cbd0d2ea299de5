#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace backstory::textstats {

// Lowercase, punctuation-free, whitespace-delimited word tokens.
struct TokenList {
  std::vector<std::string> tokens;

  bool empty() const noexcept { return tokens.empty(); }
  std::size_t size() const noexcept { return tokens.size(); }
  friend bool operator==(const TokenList&, const TokenList&) = default;
};

namespace detail {

// Multi-byte UTF-8 punctuation that shows up in model output.
inline constexpr std::array<std::string_view, 14> kUnicodePunct = {
    "‘", "’", "“", "”", "–", "—", "…",
    "«", "»", "¿", "¡", "′", "″", "·",
};

inline bool is_ascii_punct(unsigned char c) noexcept {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) ||
         (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

inline bool is_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace detail

// Removes punctuation (apostrophes and hyphens included, so "company's"
// becomes "companys"), lowercases ASCII letters, then splits on whitespace.
inline TokenList tokenize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c >= 0x80) {
      bool punct = false;
      for (auto p : detail::kUnicodePunct) {
        if (text.substr(i, p.size()) == p) {
          i += p.size();
          punct = true;
          break;
        }
      }
      if (!punct) cleaned.push_back(text[i++]);
      continue;
    }
    if (!detail::is_ascii_punct(c)) {
      cleaned.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32)
                                             : static_cast<char>(c));
    }
    ++i;
  }
  TokenList out;
  std::size_t start = 0;
  while (start < cleaned.size()) {
    while (start < cleaned.size() &&
           detail::is_space(static_cast<unsigned char>(cleaned[start]))) {
      ++start;
    }
    std::size_t end = start;
    while (end < cleaned.size() &&
           !detail::is_space(static_cast<unsigned char>(cleaned[end]))) {
      ++end;
    }
    if (end > start) out.tokens.emplace_back(cleaned.substr(start, end - start));
    start = end;
  }
  return out;
}

}  // namespace backstory::textstats
