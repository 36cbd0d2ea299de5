#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "backstory/chat.hpp"
#include "backstory/corpus/io.hpp"
#include "backstory/error.hpp"
#include "backstory/util/hash.hpp"
#include "backstory/util/http.hpp"
#include "backstory/util/jsonl.hpp"

namespace backstory::genpipe {

// complete(messages, temperature, seed) -> assistant text. Implementations
// must tolerate concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const Conversation& messages,
                               double temperature, std::uint64_t seed) = 0;
};

// Stable key for a rendered conversation.
inline std::string request_hash(const Conversation& messages) {
  util::Fnv1a h;
  for (const auto& m : messages) h.field(to_string(m.role)).field(m.content);
  return util::to_hex(h.digest());
}

inline nlohmann::json to_wire(const Conversation& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) {
    arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return arr;
}

// Replays recorded transcripts: line records {"request": <hash>,
// "response": <text>}. Several records under one hash are served in file
// order, the last one repeating once exhausted.
class FixtureBackend final : public ChatBackend {
 public:
  FixtureBackend() = default;

  explicit FixtureBackend(const std::filesystem::path& transcript) {
    util::for_each_jsonl(transcript, [&](const util::OrderedJson& j,
                                         std::size_t line) {
      if (!j.is_object() || !j.contains("request") || !j.contains("response") ||
          !j["request"].is_string() || !j["response"].is_string()) {
        throw ParseError("transcript record needs string request/response",
                         line);
      }
      add(j["request"].get<std::string>(), j["response"].get<std::string>());
    });
  }

  void add(const std::string& hash, std::string response) {
    std::lock_guard lock(mu_);
    entries_[hash].responses.push_back(std::move(response));
  }

  void add(const Conversation& messages, std::string response) {
    add(request_hash(messages), std::move(response));
  }

  std::string complete(const Conversation& messages, double,
                       std::uint64_t) override {
    const auto key = request_hash(messages);
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw BackendError("no fixture response for request " + key);
    }
    auto& e = it->second;
    const auto i = std::min(e.cursor, e.responses.size() - 1);
    ++e.cursor;
    return e.responses[i];
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  struct Entry {
    std::vector<std::string> responses;
    std::size_t cursor = 0;
  };
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
};

// Forwards to another backend and appends every exchange to a transcript
// file readable by FixtureBackend.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner,
                   std::filesystem::path transcript)
      : inner_(std::move(inner)), path_(std::move(transcript)) {}

  std::string complete(const Conversation& messages, double temperature,
                       std::uint64_t seed) override {
    auto reply = inner_->complete(messages, temperature, seed);
    util::OrderedJson j;
    j["request"] = request_hash(messages);
    j["response"] = reply;
    std::lock_guard lock(mu_);
    auto out = util::open_for_write(path_, /*append=*/true);
    out << util::dump_line(j) << '\n';
    return reply;
  }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::filesystem::path path_;
  std::mutex mu_;
};

class FunctionBackend final : public ChatBackend {
 public:
  using Fn = std::function<std::string(const Conversation&, double,
                                       std::uint64_t)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const Conversation& messages, double temperature,
                       std::uint64_t seed) override {
    return fn_(messages, temperature, seed);
  }

 private:
  Fn fn_;
};

struct HttpChatConfig {
  std::string url;  // BACKEND_URL
  std::string api_key;  // BACKEND_KEY
  std::string model;
  int max_in_flight = 4;
};

// POST {model, messages, temperature, seed} -> {content}. Replies shaped
// like choices[0].message.content are accepted too.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig cfg)
      : cfg_(std::move(cfg)),
        endpoint_(util::parse_endpoint(cfg_.url)),
        limiter_(cfg_.max_in_flight) {}

  std::string complete(const Conversation& messages, double temperature,
                       std::uint64_t seed) override {
    nlohmann::json body = {{"model", cfg_.model},
                           {"messages", to_wire(messages)},
                           {"temperature", temperature},
                           {"seed", seed}};
    auto reply = limiter_.run([&] {
      return util::post_json(endpoint_, body, {cfg_.api_key, std::chrono::seconds{300}});
    });
    if (reply.contains("content") && reply["content"].is_string()) {
      return reply["content"].get<std::string>();
    }
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError("chat reply has no content field");
    }
  }

 private:
  HttpChatConfig cfg_;
  util::Endpoint endpoint_;
  util::InFlightLimiter limiter_;
};

}  // namespace backstory::genpipe
