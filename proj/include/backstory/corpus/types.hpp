#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "backstory/corpus/catalog.hpp"
#include "backstory/emotion_category.hpp"
#include "backstory/error.hpp"
#include "backstory/util/hash.hpp"
#include "backstory/util/time.hpp"

namespace backstory {

enum class Method { baseline, pc, pcr };

inline constexpr std::array<Method, 3> kAllMethods = {Method::baseline,
                                                      Method::pc, Method::pcr};

constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::pc: return "pc";
    case Method::pcr: return "pcr";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("method", "expected baseline|pc|pcr, got '" +
                                      std::string(s) + "'");
}

inline constexpr std::size_t kChainLength = 5;
inline constexpr std::size_t kBackstoryLength = kChainLength - 1;

// A generated concluding event (the fifth sentence of every chain built on it).
struct EventRecord {
  std::string id;
  std::string event_type;
  std::string event_object;
  std::string text;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// Intermediate artifacts kept for auditing the pc/pcr routes.
struct ChainDerivation {
  std::optional<std::string> plan;
  std::optional<std::vector<std::string>> pre_revision;

  friend bool operator==(const ChainDerivation&,
                         const ChainDerivation&) = default;
};

struct EventChain {
  std::string id;
  std::string event_id;
  Method method = Method::baseline;
  Emotion prompted_emotion = Emotion::anger;
  std::vector<std::string> sentences;
  ChainDerivation derivation;

  std::span<const std::string> backstory() const {
    return std::span<const std::string>(sentences).first(
        std::min(sentences.size(), kBackstoryLength));
  }
  const std::string& final_event() const { return sentences.back(); }

  friend bool operator==(const EventChain&, const EventChain&) = default;
};

struct BackstorySet {
  std::string event_id;
  Method method = Method::baseline;
  std::map<Emotion, EventChain> chains;

  bool complete() const noexcept { return chains.size() == kNumEmotions; }
};

struct AnnotationRecord {
  std::string instance_id;
  std::string annotator_id;
  Emotion emotion = Emotion::no_emotion;
  std::optional<int> vagueness;
  std::optional<int> plausibility;
  std::optional<int> written_by_human;
  std::optional<int> written_by_ai;
  std::optional<bool> influence;
  std::optional<int> realism;
  bool attention_pass = true;
  util::UtcSeconds timestamp{};

  friend bool operator==(const AnnotationRecord&,
                         const AnnotationRecord&) = default;
};

// Content address of a chain: method, emotion and sentence text.
inline std::string chain_content_id(Method method, Emotion emotion,
                                    std::span<const std::string> sentences) {
  util::Fnv1a h;
  h.field(to_string(method)).field(to_string(emotion));
  for (const auto& s : sentences) h.field(s);
  return "c-" + util::to_hex(h.digest());
}

inline std::string event_content_id(std::string_view event_type,
                                    std::string_view event_object,
                                    std::string_view text) {
  util::Fnv1a h;
  h.field(event_type).field(event_object).field(text);
  return "e-" + util::to_hex(h.digest());
}

// -- validation -------------------------------------------------------------

inline void validate(const EventRecord& e) {
  if (e.id.empty()) throw ValidationError("id", "must be non-empty");
  if (e.text.empty()) throw ValidationError("text", "must be non-empty");
  if (!corpus::is_catalog_type(e.event_type)) {
    throw ValidationError("event_type",
                          "'" + e.event_type + "' is not a catalog event type");
  }
}

inline void validate(const EventChain& c) {
  if (c.event_id.empty()) throw ValidationError("event_id", "must be non-empty");
  if (c.sentences.size() != kChainLength) {
    throw ValidationError("sentences",
                          "expected 5 sentences, got " +
                              std::to_string(c.sentences.size()));
  }
  for (std::size_t i = 0; i < c.sentences.size(); ++i) {
    if (c.sentences[i].empty()) {
      throw ValidationError("sentences",
                            "sentence " + std::to_string(i + 1) + " is empty");
    }
  }
}

// The fifth sentence must reproduce the event text byte for byte.
inline void validate(const EventChain& c, const EventRecord& event) {
  validate(c);
  if (c.event_id != event.id) {
    throw ValidationError("event_id", "chain references '" + c.event_id +
                                          "' but event is '" + event.id + "'");
  }
  if (c.sentences.back() != event.text) {
    throw ValidationError("sentences",
                          "final sentence differs from event text of '" +
                              event.id + "'");
  }
}

inline void validate_likert(const std::optional<int>& v, const char* field) {
  if (v && (*v < 1 || *v > 5)) {
    throw ValidationError(field, "Likert value " + std::to_string(*v) +
                                     " outside [1,5]");
  }
}

inline void validate(const AnnotationRecord& a) {
  if (a.instance_id.empty()) {
    throw ValidationError("instance_id", "must be non-empty");
  }
  if (a.annotator_id.empty()) {
    throw ValidationError("annotator_id", "must be non-empty");
  }
  validate_likert(a.vagueness, "vagueness");
  validate_likert(a.plausibility, "plausibility");
  validate_likert(a.written_by_human, "written_by_human");
  validate_likert(a.written_by_ai, "written_by_ai");
  validate_likert(a.realism, "realism");
}

}  // namespace backstory
