#pragma once

#include <array>
#include <string>
#include <string_view>

#include "backstory/genpipe/backends.hpp"

namespace backstory::genpipe {

// Deterministic offline stand-in for a chat model. It recognises each
// generation prompt by its wording and answers in the shape a model would
// (numbered lists, a plan followed by a list, an evaluation followed by a
// revised sequence). Replies depend only on the rendered messages.
class ScriptedBackend final : public ChatBackend {
 public:
  std::string complete(const Conversation& messages, double,
                       std::uint64_t) override {
    const std::string* user = nullptr;
    for (const auto& m : messages) {
      if (m.role == Role::user) user = &m.content;
    }
    if (!user) throw BackendError("scripted backend: no user message");
    const std::string_view u = *user;
    const auto h = request_hash(messages);
    const auto variant = static_cast<std::size_t>(util::fnv1a(h) % 3);

    if (u.starts_with("The event you experienced is of type: ")) {
      const auto object = between(u, "following object(s): ", ". In your response");
      return event_sentence(object, variant);
    }
    if (u.starts_with("Extract the sequence of 4")) {
      const auto text = between(u, "### ", " ###");
      return extract_list(text);
    }
    if (u.starts_with("Explanation: ")) {
      const auto chain = between(u, "Event sequence: ", "\nFirst, provide");
      return revise(chain);
    }
    if (u.starts_with("You experienced something happening")) {
      const auto emotion_name = between(u, "feel the emotion: \"", "\"");
      const Emotion e = try_parse_emotion(emotion_name).value_or(Emotion::no_emotion);
      const auto event = between(u, "event description: 5. \"", "\".");
      const auto lines = backstory_lines(e, variant);
      if (u.find("First, give a brief explanation") != std::string_view::npos) {
        std::string out = "A plausible scenario: before \"" + std::string(event) +
                          "\" a short sequence of events set the stage.\n";
        for (std::size_t i = 0; i < lines.size(); ++i) {
          out += std::to_string(i + 1) + ". " + lines[i] + "\n";
        }
        return out;
      }
      std::string out = "Here are the events:\n";
      for (std::size_t i = 0; i < lines.size(); ++i) {
        out += std::to_string(i + 1) + ". " + lines[i] + "\n";
      }
      return out;
    }
    throw BackendError("scripted backend: unrecognised prompt");
  }

 private:
  static std::string_view between(std::string_view text, std::string_view open,
                                  std::string_view close) {
    const auto a = text.find(open);
    if (a == std::string_view::npos) return {};
    const auto start = a + open.size();
    const auto b = text.find(close, start);
    return text.substr(start, b == std::string_view::npos ? std::string_view::npos
                                                          : b - start);
  }

  static std::string event_sentence(std::string_view object, std::size_t variant) {
    static constexpr std::array<std::string_view, 3> kVerbs = {
        "suddenly stopped working", "fell to the floor",
        "were handed to me unexpectedly"};
    std::string obj(object.empty() ? std::string_view("equipment") : object);
    return "The " + obj + " " + std::string(kVerbs[variant]) + ".";
  }

  static std::array<std::string, 4> backstory_lines(Emotion e, std::size_t variant) {
    // Four situational beats per category; the variant picks an opener.
    static constexpr std::array<std::array<std::string_view, 4>, kNumEmotions> kBeats = {{
        {"My colleague took credit for my work at the meeting",
         "The organizer ignored my repeated requests for help",
         "I stayed late to fix problems I had not caused",
         "Someone blamed me publicly for the delays"},
        {"The schedule listed six identical sessions in a row",
         "I had already seen every part of the program twice",
         "Nothing new happened for the first three hours",
         "I kept checking the clock while waiting for the end"},
        {"The venue smelled of spoiled food from the night before",
         "A guest left a mess on every table he touched",
         "I found hair in the shared dessert tray",
         "The restroom had not been cleaned all day"},
        {"A stranger had been following me around the venue",
         "The lights in the hallway flickered and went dark",
         "I heard shouting from behind the locked door",
         "My phone battery died while I was alone"},
        {"I promised my team to check everything myself",
         "I skipped the final inspection to leave early",
         "My supervisor trusted me with the whole setup",
         "I noticed a loose cable but said nothing"},
        {"My best friend surprised me by flying in for the day",
         "We laughed through the whole opening speech",
         "Everyone I cared about was finally in one room",
         "The host thanked my family for their support"},
        {"I had trained for months to lead this event",
         "My mentor watched from the front row",
         "The first half of my presentation went flawlessly",
         "The audience applauded my final slide"},
        {"I was dreading the speech I was forced to give",
         "My notes had gone missing that morning",
         "The host kept looking over at me expectantly",
         "I was next in line to speak"},
        {"This was the last event my grandmother had planned",
         "Her photo stood at the entrance of the hall",
         "Everyone spoke about how much she loved these gatherings",
         "I found her handwriting on the program notes"},
        {"I had bragged to everyone about my flawless preparation",
         "My rival pointed out a mistake in front of the guests",
         "I insisted loudly that everything was under my control",
         "The whole room turned to look at me"},
        {"Nobody had mentioned any changes to the program",
         "The announcer paused in the middle of a sentence",
         "The crowd went quiet without any warning",
         "I had no idea what was about to happen"},
        {"The technician had checked every device twice",
         "He had never let our team down before",
         "He promised he had a backup plan ready",
         "I told the guests there was nothing to worry about"},
        {"I was only there to drop off a package",
         "I did not know anyone at the event",
         "I waited near the exit for my ride",
         "I scrolled through my messages out of habit"},
    }};
    static constexpr std::array<std::string_view, 3> kOpeners = {"", "Earlier that day, ",
                                                                 "Before it started, "};
    std::array<std::string, 4> out;
    const auto& beats = kBeats[index_of(e)];
    for (std::size_t i = 0; i < 4; ++i) {
      std::string s(beats[i]);
      if (i == 0 && !kOpeners[variant].empty()) {
        s[0] = static_cast<char>(s[0] - 'A' + 'a');
        if (s.starts_with("i ")) s[0] = 'I';
        s = std::string(kOpeners[variant]) + s;
      }
      out[i] = s + ".";
    }
    return out;
  }

  static std::string extract_list(std::string_view text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(pos, end - pos);
      if (line.size() > 3 && line[0] >= '1' && line[0] <= '9' && line[1] == '.') {
        out += std::string(line) + "\n";
      }
      pos = end + 1;
    }
    return out.empty() ? std::string(text) : out;
  }

  static std::string revise(std::string_view chain) {
    std::string out =
        "Evaluation: the first events should make the final event matter more "
        "by adding concrete detail.\n\nRevised event sequence:\n";
    std::size_t pos = 0;
    while (pos < chain.size()) {
      auto end = chain.find('\n', pos);
      if (end == std::string_view::npos) end = chain.size();
      std::string line(chain.substr(pos, end - pos));
      if (line.size() > 3 && line[0] >= '1' && line[0] <= '4' && line[1] == '.' &&
          line.back() == '.') {
        line.pop_back();
        line += ", and it stayed on my mind.";
      }
      out += line + "\n";
      pos = end + 1;
    }
    return out;
  }
};

}  // namespace backstory::genpipe
