#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "backstory/error.hpp"
#include "backstory/textstats/tokenize.hpp"

namespace backstory::likelihood {

using TokenId = std::uint32_t;

// Word-level n-gram model with add-delta (Laplace) smoothing:
//
//   P(w | ctx) = (c(ctx, w) + delta) / (c(ctx) + delta * V)
//
// V counts the known vocabulary plus one reserved unknown token, so every
// context's conditional distribution sums to one and no probability is zero.
// Contexts are the previous (order - 1) tokens, left-padded with <s>; the
// padding token is never predicted.
class NGramModel {
 public:
  static constexpr std::string_view kUnknown = "<unk>";
  static constexpr std::string_view kBegin = "<s>";

  NGramModel(int order, double delta, std::vector<std::string> vocabulary)
      : order_(order), delta_(delta) {
    if (order < 1) throw PreconditionError("n-gram order must be >= 1");
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw PreconditionError("smoothing delta must be > 0");
    }
    std::sort(vocabulary.begin(), vocabulary.end());
    vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()),
                     vocabulary.end());
    for (const auto& w : vocabulary) {
      if (w.empty() || w == kUnknown || w == kBegin ||
          w.find_first_of(" \t\n") != std::string::npos) {
        throw ValidationError("vocabulary", "invalid token '" + w + "'");
      }
    }
    vocab_ = std::move(vocabulary);
    for (TokenId i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], i);
  }

  int order() const noexcept { return order_; }
  double delta() const noexcept { return delta_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

  // Known words plus the unknown token.
  std::size_t outcome_count() const noexcept { return vocab_.size() + 1; }
  TokenId unknown_id() const noexcept {
    return static_cast<TokenId>(vocab_.size());
  }
  TokenId begin_id() const noexcept {
    return static_cast<TokenId>(vocab_.size() + 1);
  }

  TokenId id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? unknown_id() : it->second;
  }

  std::string_view token_text(TokenId id) const {
    if (id < vocab_.size()) return vocab_[id];
    return id == unknown_id() ? kUnknown : kBegin;
  }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  void add_count(std::span<const TokenId> context, TokenId token,
                 std::uint64_t n = 1) {
    if (context.size() != static_cast<std::size_t>(order_ - 1)) {
      throw PreconditionError("context length must equal order - 1");
    }
    if (token >= outcome_count()) {
      throw PreconditionError("cannot count the <s> padding token");
    }
    auto& entry = counts_[Context(context.begin(), context.end())];
    entry.followers[token] += n;
    entry.total += n;
  }

  double prob(std::span<const TokenId> context, TokenId token) const {
    return std::exp(log_prob(context, token));
  }

  double log_prob(std::span<const TokenId> context, TokenId token) const {
    const double v = static_cast<double>(outcome_count());
    auto it = counts_.find(Context(context.begin(), context.end()));
    if (it == counts_.end()) return -std::log(v);
    const auto f = it->second.followers.find(token);
    const double c = f == it->second.followers.end()
                         ? 0.0
                         : static_cast<double>(f->second);
    return std::log(c + delta_) -
           std::log(static_cast<double>(it->second.total) + delta_ * v);
  }

  // Token history left-padded to a full context for the first position.
  std::vector<TokenId> padded(std::span<const TokenId> tokens) const {
    std::vector<TokenId> out(static_cast<std::size_t>(order_ - 1), begin_id());
    out.insert(out.end(), tokens.begin(), tokens.end());
    return out;
  }

  // Sum of log P(t_i | previous order-1 tokens) over the positions
  // [first, history.size()) of a padded history. Identical (context, token)
  // events are grouped and summed in a fixed order, so the result depends
  // only on the multiset of events and is bit-identical under reorderings
  // that preserve it (e.g. any permutation for a unigram model).
  double sum_log_prob(std::span<const TokenId> padded_history,
                      std::size_t first) const {
    const std::size_t ctx = static_cast<std::size_t>(order_ - 1);
    std::map<std::vector<TokenId>, std::uint64_t> events;
    for (std::size_t i = std::max(first, ctx); i < padded_history.size(); ++i) {
      std::vector<TokenId> key(padded_history.begin() + static_cast<std::ptrdiff_t>(i - ctx),
                               padded_history.begin() + static_cast<std::ptrdiff_t>(i + 1));
      ++events[key];
    }
    double total = 0.0;
    for (const auto& [key, n] : events) {
      std::span<const TokenId> k(key);
      total += static_cast<double>(n) * log_prob(k.first(ctx), k.back());
    }
    return total;
  }

  // Versioned plain-text dump: header, vocabulary, then one
  // "context<TAB>token<TAB>count" line per observed n-gram.
  void save(std::ostream& out) const {
    std::ostringstream d;
    d.precision(17);
    d << delta_;
    out << "backstory-ngram v1\n"
        << "order " << order_ << "\n"
        << "delta " << d.str() << "\n"
        << "vocab " << vocab_.size() << "\n";
    for (const auto& w : vocab_) out << w << "\n";
    std::size_t lines = 0;
    for (const auto& [ctx, e] : counts_) lines += e.followers.size();
    out << "counts " << lines << "\n";
    for (const auto& [ctx, e] : counts_) {
      std::string ctx_text;
      for (auto t : ctx) {
        if (!ctx_text.empty()) ctx_text.push_back(' ');
        ctx_text += token_text(t);
      }
      if (ctx_text.empty()) ctx_text = "-";
      for (const auto& [tok, n] : e.followers) {
        out << ctx_text << '\t' << token_text(tok) << '\t' << n << '\n';
      }
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model '" + path.string() + "'");
    save(out);
  }

  static NGramModel load(std::istream& in) {
    std::size_t lineno = 0;
    std::string line;
    auto next = [&]() -> std::string& {
      if (!std::getline(in, line)) {
        throw ParseError("unexpected end of model file", lineno + 1);
      }
      ++lineno;
      return line;
    };
    if (next() != "backstory-ngram v1") {
      throw ParseError("not a backstory-ngram v1 model", lineno, line);
    }
    auto header = [&](std::string_view key) {
      next();
      if (line.rfind(std::string(key) + " ", 0) != 0) {
        throw ParseError("expected '" + std::string(key) + "'", lineno, line);
      }
      return line.substr(key.size() + 1);
    };
    int order = 0;
    double delta = 0;
    std::size_t nvocab = 0;
    try {
      order = std::stoi(header("order"));
      delta = std::stod(header("delta"));
      nvocab = std::stoul(header("vocab"));
    } catch (const std::logic_error&) {
      throw ParseError("bad numeric header", lineno, line);
    }
    std::vector<std::string> vocab;
    vocab.reserve(nvocab);
    for (std::size_t i = 0; i < nvocab; ++i) vocab.push_back(next());
    NGramModel model(order, delta, std::move(vocab));
    std::size_t ncounts = 0;
    try {
      ncounts = std::stoul(header("counts"));
    } catch (const std::logic_error&) {
      throw ParseError("bad counts header", lineno, line);
    }
    auto lookup = [&](std::string_view tok) -> TokenId {
      if (tok == kBegin) return model.begin_id();
      if (tok == kUnknown) return model.unknown_id();
      auto it = model.ids_.find(std::string(tok));
      if (it == model.ids_.end()) {
        throw ParseError("token '" + std::string(tok) + "' not in vocabulary",
                         lineno, line);
      }
      return it->second;
    };
    for (std::size_t i = 0; i < ncounts; ++i) {
      next();
      const auto t1 = line.find('\t');
      const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos) {
        throw ParseError("expected context<TAB>token<TAB>count", lineno, line);
      }
      std::vector<TokenId> ctx;
      const std::string ctx_text = line.substr(0, t1);
      if (ctx_text != "-") {
        std::istringstream ss(ctx_text);
        std::string tok;
        while (ss >> tok) ctx.push_back(lookup(tok));
      }
      const TokenId tok = lookup(line.substr(t1 + 1, t2 - t1 - 1));
      std::uint64_t n = 0;
      try {
        n = std::stoull(line.substr(t2 + 1));
      } catch (const std::logic_error&) {
        throw ParseError("bad count", lineno, line);
      }
      try {
        model.add_count(ctx, tok, n);
      } catch (const PreconditionError& e) {
        throw ParseError(e.what(), lineno, line);
      }
    }
    return model;
  }

  static NGramModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model '" + path.string() + "'");
    return load(in);
  }

  friend bool operator==(const NGramModel& a, const NGramModel& b) {
    return a.order_ == b.order_ && a.delta_ == b.delta_ &&
           a.vocab_ == b.vocab_ && a.counts_ == b.counts_;
  }

 private:
  using Context = std::vector<TokenId>;
  struct Entry {
    std::map<TokenId, std::uint64_t> followers;
    std::uint64_t total = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  int order_;
  double delta_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> ids_;
  std::map<Context, Entry> counts_;
};

// Counts every padded n-gram in each text of the corpus.
inline NGramModel train_ngram(std::span<const std::string> corpus, int order,
                              double delta) {
  if (corpus.empty()) throw PreconditionError("training corpus is empty");
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(corpus.size());
  std::vector<std::string> vocab;
  for (const auto& text : corpus) {
    tokenized.push_back(textstats::tokenize(text).tokens);
    vocab.insert(vocab.end(), tokenized.back().begin(), tokenized.back().end());
  }
  NGramModel model(order, delta, std::move(vocab));
  const std::size_t ctx = static_cast<std::size_t>(order - 1);
  for (const auto& toks : tokenized) {
    const auto history = model.padded(model.encode(toks));
    for (std::size_t i = ctx; i < history.size(); ++i) {
      model.add_count(std::span<const TokenId>(history).subspan(i - ctx, ctx),
                      history[i]);
    }
  }
  return model;
}

// One text per line; blank lines and lines starting with '#' are skipped.
inline std::vector<std::string> read_text_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace backstory::likelihood
