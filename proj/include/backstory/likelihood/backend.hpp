#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "backstory/chat.hpp"
#include "backstory/error.hpp"
#include "backstory/likelihood/ngram.hpp"
#include "backstory/textstats/tokenize.hpp"

namespace backstory::likelihood {

struct SequenceScore {
  std::string text;
  std::size_t token_count = 0;
  double total_log_prob = 0.0;  // natural log
};

// Scoring contract shared by the in-repo n-gram model and remote logprob
// endpoints. Implementations are immutable after construction and may be
// called concurrently.
class LikelihoodBackend {
 public:
  virtual ~LikelihoodBackend() = default;

  // Sum over tokens of log P(t_i | t_<i) under the backend's tokenizer.
  virtual SequenceScore sequence_log_prob(std::string_view text) const = 0;

  // log P(continuation | context) summed over continuation tokens.
  virtual double score_continuation(std::span<const ChatMessage> context,
                                    std::string_view continuation) const = 0;
};

class NGramBackend final : public LikelihoodBackend {
 public:
  explicit NGramBackend(std::shared_ptr<const NGramModel> model)
      : model_(std::move(model)) {
    if (!model_) throw PreconditionError("n-gram backend needs a model");
  }
  explicit NGramBackend(NGramModel model)
      : NGramBackend(std::make_shared<const NGramModel>(std::move(model))) {}

  const NGramModel& model() const noexcept { return *model_; }

  SequenceScore sequence_log_prob(std::string_view text) const override {
    const auto tokens = textstats::tokenize(text).tokens;
    if (tokens.empty()) {
      throw PreconditionError("cannot score text without tokens");
    }
    const auto history = model_->padded(model_->encode(tokens));
    return {std::string(text), tokens.size(),
            model_->sum_log_prob(history, 0)};
  }

  double score_continuation(std::span<const ChatMessage> context,
                            std::string_view continuation) const override {
    const auto cont = textstats::tokenize(continuation).tokens;
    if (cont.empty()) throw PreconditionError("continuation is empty");
    auto ids = model_->encode(textstats::tokenize(flatten_contents(context)).tokens);
    const std::size_t boundary =
        ids.size() + static_cast<std::size_t>(model_->order() - 1);
    const auto cont_ids = model_->encode(cont);
    ids.insert(ids.end(), cont_ids.begin(), cont_ids.end());
    return model_->sum_log_prob(model_->padded(ids), boundary);
  }

 private:
  std::shared_ptr<const NGramModel> model_;
};

}  // namespace backstory::likelihood
