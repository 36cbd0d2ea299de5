#pragma once

#include <memory>
#include <string>
#include <vector>

#include "backstory/likelihood/backend.hpp"
#include "backstory/util/http.hpp"

namespace backstory::likelihood {

struct RemoteScorerConfig {
  std::string url;  // completion endpoint that echoes prompt logprobs
  std::string model;
  std::string api_key;
  int max_in_flight = 4;
};

// Per-token logprobs of an echoed prompt.
struct EchoedTokens {
  std::vector<std::string> tokens;
  std::vector<std::optional<double>> logprobs;  // null for the first token
  std::vector<std::size_t> offsets;             // byte offset into the prompt
};

// Accepts either a flat {tokens, token_logprobs, text_offset} reply or the
// same object nested under choices[0].logprobs.
inline EchoedTokens parse_echo_reply(const nlohmann::json& reply) {
  const nlohmann::json* lp = &reply;
  if (reply.contains("choices") && reply["choices"].is_array() &&
      !reply["choices"].empty()) {
    const auto& c0 = reply["choices"][0];
    if (c0.contains("logprobs") && c0["logprobs"].is_object()) {
      lp = &c0["logprobs"];
    }
  }
  if (!lp->contains("token_logprobs") || !lp->contains("text_offset") ||
      !lp->contains("tokens")) {
    throw CapabilityError(
        "scoring backend did not return echoed prompt logprobs "
        "(tokens/token_logprobs/text_offset); use the n-gram scorer instead");
  }
  EchoedTokens out;
  try {
    out.tokens = (*lp)["tokens"].get<std::vector<std::string>>();
    for (const auto& v : (*lp)["token_logprobs"]) {
      out.logprobs.push_back(v.is_null() ? std::nullopt
                                         : std::optional<double>(v.get<double>()));
    }
    out.offsets = (*lp)["text_offset"].get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed logprob reply: ") + e.what());
  }
  if (out.tokens.size() != out.logprobs.size() ||
      out.tokens.size() != out.offsets.size()) {
    throw BackendError("logprob reply arrays differ in length");
  }
  return out;
}

// Scores text through a remote completion endpoint:
//   POST {model, prompt, echo: true, max_new: 0, logprobs: true}
// The first prompt token has no conditional probability and is skipped.
class RemoteLogprobBackend final : public LikelihoodBackend {
 public:
  explicit RemoteLogprobBackend(RemoteScorerConfig cfg)
      : cfg_(std::move(cfg)),
        endpoint_(util::parse_endpoint(cfg_.url)),
        limiter_(std::make_shared<util::InFlightLimiter>(cfg_.max_in_flight)) {}

  SequenceScore sequence_log_prob(std::string_view text) const override {
    if (textstats::tokenize(text).empty()) {
      throw PreconditionError("cannot score text without tokens");
    }
    const auto echo = request(text);
    SequenceScore s{std::string(text), echo.tokens.size(), 0.0};
    for (const auto& lp : echo.logprobs) {
      if (lp) s.total_log_prob += *lp;
    }
    return s;
  }

  // Sums the logprobs of tokens starting at or after the end of the
  // flattened context. The continuation is appended after one space.
  double score_continuation(std::span<const ChatMessage> context,
                            std::string_view continuation) const override {
    if (textstats::tokenize(continuation).empty()) {
      throw PreconditionError("continuation is empty");
    }
    const std::string ctx = flatten_contents(context);
    const std::string prompt =
        ctx.empty() ? std::string(continuation)
                    : ctx + " " + std::string(continuation);
    const auto echo = request(prompt);
    double total = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < echo.tokens.size(); ++i) {
      if (echo.offsets[i] >= ctx.size() && echo.logprobs[i]) {
        total += *echo.logprobs[i];
        any = true;
      }
    }
    if (!any) throw BackendError("no continuation tokens in logprob reply");
    return total;
  }

 private:
  EchoedTokens request(std::string_view prompt) const {
    nlohmann::json body = {{"model", cfg_.model},
                           {"prompt", std::string(prompt)},
                           {"echo", true},
                           {"max_new", 0},
                           {"logprobs", true}};
    return limiter_->run([&] {
      return parse_echo_reply(
          util::post_json(endpoint_, body, {cfg_.api_key, std::chrono::seconds{120}}));
    });
  }

  RemoteScorerConfig cfg_;
  util::Endpoint endpoint_;
  std::shared_ptr<util::InFlightLimiter> limiter_;
};

}  // namespace backstory::likelihood
