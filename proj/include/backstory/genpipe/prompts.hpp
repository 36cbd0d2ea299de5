#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "backstory/chat.hpp"
#include "backstory/emotion_category.hpp"
#include "backstory/error.hpp"
#include "backstory/util/rng.hpp"

namespace backstory::genpipe {

enum class PromptId { P1, P2, P2_1, P2_2, P2_3, EMO_CLS };

inline constexpr std::array<PromptId, 6> kAllPromptIds = {
    PromptId::P1,   PromptId::P2,   PromptId::P2_1,
    PromptId::P2_2, PromptId::P2_3, PromptId::EMO_CLS};

constexpr std::string_view to_string(PromptId id) noexcept {
  switch (id) {
    case PromptId::P1: return "P1";
    case PromptId::P2: return "P2";
    case PromptId::P2_1: return "P2_1";
    case PromptId::P2_2: return "P2_2";
    case PromptId::P2_3: return "P2_3";
    case PromptId::EMO_CLS: return "EMO_CLS";
  }
  return "?";
}

inline PromptId parse_prompt_id(std::string_view s) {
  for (auto id : kAllPromptIds) {
    if (to_string(id) == s) return id;
  }
  throw PreconditionError("unknown prompt template id '" + std::string(s) + "'");
}

using Bindings = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline bool is_placeholder_char(char c) noexcept {
  return (c >= 'a' && c <= 'z') || c == '_';
}

// Calls on_text/on_name for literal runs and {name} placeholders. Braces
// not enclosing a [a-z_]+ name are literal text.
template <typename OnText, typename OnName>
void scan_placeholders(std::string_view text, OnText on_text, OnName on_name) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const auto name = text.substr(open + 1, close - open - 1);
    const bool valid = !name.empty() && std::all_of(name.begin(), name.end(),
                                                    is_placeholder_char);
    if (!valid) {
      on_text(text.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    on_text(text.substr(pos, open - pos));
    on_name(name);
    pos = close + 1;
  }
  on_text(text.substr(pos));
}

}  // namespace detail

struct MessageTemplate {
  Role role;
  std::string text;
};

class PromptTemplate {
 public:
  PromptTemplate(PromptId id, std::vector<MessageTemplate> messages,
                 std::set<std::string, std::less<>> placeholders)
      : id_(id), messages_(std::move(messages)),
        placeholders_(std::move(placeholders)) {
    for (const auto& m : messages_) {
      detail::scan_placeholders(
          m.text, [](std::string_view) {},
          [&](std::string_view name) {
            if (!placeholders_.contains(name)) {
              throw ValidationError(
                  "placeholders", std::string(to_string(id_)) +
                                      " uses undeclared placeholder {" +
                                      std::string(name) + "}");
            }
          });
    }
  }

  PromptId id() const noexcept { return id_; }
  const std::vector<MessageTemplate>& messages() const noexcept {
    return messages_;
  }
  const std::set<std::string, std::less<>>& placeholders() const noexcept {
    return placeholders_;
  }

 private:
  PromptId id_;
  std::vector<MessageTemplate> messages_;
  std::set<std::string, std::less<>> placeholders_;
};

// Substitutes every {name} with its binding verbatim.
inline Conversation render(const PromptTemplate& tmpl, const Bindings& bindings) {
  for (const auto& name : tmpl.placeholders()) {
    if (!bindings.contains(name)) {
      throw PreconditionError(std::string(to_string(tmpl.id())) +
                              ": missing binding for {" + name + "}");
    }
  }
  Conversation out;
  out.reserve(tmpl.messages().size());
  for (const auto& m : tmpl.messages()) {
    std::string text;
    detail::scan_placeholders(
        m.text, [&](std::string_view lit) { text += lit; },
        [&](std::string_view name) { text += bindings.find(name)->second; });
    out.push_back({m.role, std::move(text)});
  }
  return out;
}

// The twelve non-target emotion names in a seeded random order, joined by
// ", ".
inline std::string distractor_list(Emotion target, std::uint64_t seed) {
  std::vector<std::string_view> others;
  for (auto e : kAllEmotions) {
    if (e != target) others.push_back(to_string(e));
  }
  util::Engine eng(seed);
  util::fisher_yates(others, eng);
  std::string out;
  for (auto name : others) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

namespace detail {

inline constexpr std::string_view kBackstorySystem =
    "It is often clear from the text that describes an event which specific "
    "emotion it evokes in a person that experienced it. However, additional "
    "information about the situation can change our understanding of how a "
    "person might interpret the event. You are an expert at creating a "
    "scenario that explains why a specific event may cause a possibly unusual "
    "emotion in you. In addition, you can concisely make this scenario "
    "apparent for the reader by formulating a description of 4 events that "
    "took place immediately before the event.";

inline constexpr std::string_view kSummaryInstruction =
    "In your response, for each of the 4 event descriptions: Only give a "
    "summary text consisting of the main clause in a very short sentence. "
    "Each description should only describe a singular event. Indicate each "
    "event description in a separate line.";

inline PromptTemplate make_template(PromptId id) {
  using R = Role;
  switch (id) {
    case PromptId::P1:
      return PromptTemplate(
          id,
          {{R::system,
            "You are a person describing an event which you have experienced.\n"
            "10 examples of such event descriptions are as follows:\n"
            "0: The phone rang.\n"
            "1: A cat meowed.\n"
            "2: The car engine sputtered to a stop.\n"
            "3: A child laughed in the park.\n"
            "4: A bird fluttered past the window.\n"
            "5: The waves crashed against the shore.\n"
            "6: A train whistled as it approached.\n"
            "7: The fireworks lit up the sky.\n"
            "8: A bicycle rode by.\n"
            "9: A crowd cheered at the concert."},
           {R::user,
            "The event you experienced is of type: {ds_event_type}. In a longer "
            "text you are describing several things that happened at that "
            "event. Something happened at that event with the following "
            "object(s): {ds_event_object}. In your response, only provide a "
            "very short sentence describing what happened to/with the "
            "object(s)."}},
          {"ds_event_type", "ds_event_object"});
    case PromptId::P2:
      return PromptTemplate(
          id,
          {{R::system, std::string(kBackstorySystem)},
           {R::user,
            "You experienced something happening which is described by the "
            "following event description: 5. \"{event}\".\n"
            "This event somehow made you clearly feel the emotion: "
            "\"{emotion}\".\n"
            "Provide a text describing four events that took place immediately "
            "before event 5 by giving a list of descriptions of these events "
            "(1.-4.). The events 1.-4. clearly influence your personal "
            "emotional interpretation of the event that happened after (5.). "
            "The emotion \"{emotion}\" is only triggered by what specifically "
            "happened in event 5. The events 1.-4. evoked other emotions, such "
            "as: {other_emotions}. " +
                std::string(kSummaryInstruction)}},
          {"event", "emotion", "other_emotions"});
    case PromptId::P2_1:
      return PromptTemplate(
          id,
          {{R::system, std::string(kBackstorySystem)},
           {R::user,
            "You experienced something happening which is described by the "
            "following event description: 5. \"{event}\". This event somehow "
            "made you clearly feel the emotion: \"{emotion}\". First, give a "
            "brief explanation of a scenario in which it can be deduced from "
            "the description of event 5. that you felt {emotion}. Second, "
            "phrase this explanation as events that took place immediately "
            "before event 5 by giving a list of descriptions of these events "
            "(1.-4.). The events 1.-4. clearly influence your personal "
            "emotional interpretation of the event that happened after (5.). "
            "The emotion \"{emotion}\" is only triggered by what specifically "
            "happened in event 5. The events 1.-4. evoked other emotions, such "
            "as: {other_emotions}."}},
          {"event", "emotion", "other_emotions"});
    case PromptId::P2_2:
      return PromptTemplate(
          id,
          {{R::user,
            "Extract the sequence of 4 descriptions of events that happened "
            "from the following text: ### {explanation} ### The event 5: "
            "\"{event}\" happened after the 4 events. " +
                std::string(kSummaryInstruction)}},
          {"explanation", "event"});
    case PromptId::P2_3:
      return PromptTemplate(
          id,
          {{R::system,
            "You are an expert at adapting a narrative to convey specific "
            "emotional interpretations. You will receive a text that outlines "
            "a sequence of events as experienced by an individual. "
            "Additionally, there will be an explanation of how a particular "
            "emotion is triggered in this individual based on the final "
            "event."},
           {R::user,
            "Explanation: {story_plan}\n"
            "Event sequence: {chain}\n"
            "First, provide a brief evaluation on how the first four events "
            "(1.-4.) of the sequence could be adjusted to form a coherent "
            "narrative which better aligns with the conclusion given in the "
            "explanation. The text of the last event (5.) should remain as "
            "is.\n"
            "Second, provide a revised event sequence that incorporates these "
            "adjustments while keeping the sentence length for each event "
            "description similar. Each event description should consist only "
            "of a main clause in a very short sentence. Do not explicitly "
            "mention the emotions felt."}},
          {"story_plan", "chain"});
    case PromptId::EMO_CLS:
      return PromptTemplate(
          id,
          {{R::system,
            "You are an expert in emotion analysis on event descriptions."},
           {R::user,
            "A person describes their experience as follows:\n"
            "{text_instance}\n"
            "What emotion was evoked in the person at the end? As your "
            "response, provide only one label from the emotion set: anger, "
            "disgust, fear, guilt, joy, sadness, shame, pride, boredom, "
            "surprise, trust, relief, no-emotion."},
           {R::assistant, "{emotion}"}},
          {"text_instance", "emotion"});
  }
  throw PreconditionError("unknown prompt template id");
}

}  // namespace detail

inline const PromptTemplate& prompt_template(PromptId id) {
  static const std::array<PromptTemplate, kAllPromptIds.size()> all = [] {
    return std::array<PromptTemplate, kAllPromptIds.size()>{
        detail::make_template(PromptId::P1),
        detail::make_template(PromptId::P2),
        detail::make_template(PromptId::P2_1),
        detail::make_template(PromptId::P2_2),
        detail::make_template(PromptId::P2_3),
        detail::make_template(PromptId::EMO_CLS)};
  }();
  return all[static_cast<std::size_t>(id)];
}

inline Conversation render(PromptId id, const Bindings& bindings) {
  return render(prompt_template(id), bindings);
}

// "1. s1\n2. s2\n..." as bound to {chain} when revising.
inline std::string numbered_lines(std::span<const std::string> sentences) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + sentences[i];
  }
  return out;
}

}  // namespace backstory::genpipe
