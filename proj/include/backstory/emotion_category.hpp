#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "backstory/error.hpp"

namespace backstory {

// Fixed category order: alphabetical, no-emotion last. Every probability
// vector, confusion matrix and tie-break in the library uses this order.
enum class Emotion : std::size_t {
  anger = 0,
  boredom,
  disgust,
  fear,
  guilt,
  joy,
  pride,
  relief,
  sadness,
  shame,
  surprise,
  trust,
  no_emotion,
};

inline constexpr std::size_t kNumEmotions = 13;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::anger,   Emotion::boredom, Emotion::disgust,  Emotion::fear,
    Emotion::guilt,   Emotion::joy,     Emotion::pride,    Emotion::relief,
    Emotion::sadness, Emotion::shame,   Emotion::surprise, Emotion::trust,
    Emotion::no_emotion,
};

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "anger", "boredom", "disgust", "fear",     "guilt", "joy",       "pride",
    "relief", "sadness", "shame",  "surprise", "trust", "no-emotion",
};

constexpr std::size_t index_of(Emotion e) noexcept {
  return static_cast<std::size_t>(e);
}

constexpr Emotion emotion_at(std::size_t i) noexcept {
  return static_cast<Emotion>(i);
}

constexpr std::string_view to_string(Emotion e) noexcept {
  return kEmotionNames[index_of(e)];
}

// Case-insensitive; accepts "no emotion" / "no_emotion" / "noemotion" as
// spellings of no-emotion since models and annotators produce all three.
inline std::optional<Emotion> try_parse_emotion(std::string_view text) {
  std::string norm;
  norm.reserve(text.size());
  for (char c : text) {
    if (c == ' ' || c == '_') c = '-';
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    norm.push_back(c);
  }
  if (norm == "noemotion") norm = "no-emotion";
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == norm) return emotion_at(i);
  }
  return std::nullopt;
}

inline Emotion parse_emotion(std::string_view text) {
  if (auto e = try_parse_emotion(text)) return *e;
  throw ValidationError("emotion", "unknown emotion category '" +
                                       std::string(text) + "'");
}

}  // namespace backstory
