#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "backstory/error.hpp"

namespace backstory {

enum class Role { system, user, assistant };

constexpr std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "?";
}

inline Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw ValidationError("role", "expected system|user|assistant, got '" +
                                    std::string(s) + "'");
}

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using Conversation = std::vector<ChatMessage>;

// Message contents joined by single spaces; how chat context is presented
// to plain-text scorers.
inline std::string flatten_contents(std::span<const ChatMessage> messages) {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out.push_back(' ');
    out += m.content;
  }
  return out;
}

}  // namespace backstory
