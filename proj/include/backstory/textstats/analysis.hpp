#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "backstory/corpus/types.hpp"
#include "backstory/error.hpp"
#include "backstory/textstats/lexicon.hpp"
#include "backstory/textstats/tokenize.hpp"

namespace backstory::textstats {

namespace detail {

inline std::vector<std::string> type_set(const TokenList& t) {
  std::vector<std::string> v = t.tokens;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline double jaccard_sorted(const std::vector<std::string>& a,
                             const std::vector<std::string>& b) {
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace detail

// |A ∩ B| / |A ∪ B| over word types.
inline double jaccard(const TokenList& a, const TokenList& b) {
  if (a.empty() && b.empty()) {
    throw UndefinedStatisticError("jaccard of two empty token lists is 0/0");
  }
  return detail::jaccard_sorted(detail::type_set(a), detail::type_set(b));
}

// D(B) = 1 - (sum_i sum_j J(b_i, b_j)) / n^2. The double sum runs over all
// ordered pairs including i == j, so D(B) <= 1 - 1/n.
inline double diversity(std::span<const TokenList> members) {
  if (members.empty()) throw PreconditionError("diversity needs n >= 1");
  std::vector<std::vector<std::string>> sets;
  sets.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i].empty()) {
      throw PreconditionError("diversity member " + std::to_string(i) +
                              " has no tokens");
    }
    sets.push_back(detail::type_set(members[i]));
  }
  const std::size_t n = sets.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += 1.0;  // J(b_i, b_i)
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += 2.0 * detail::jaccard_sorted(sets[i], sets[j]);
    }
  }
  const double nn = static_cast<double>(n);
  return 1.0 - sum / (nn * nn);
}

// Concatenated backstory (sentences 1-4) as one token list.
inline TokenList backstory_tokens(const EventChain& chain) {
  TokenList out;
  for (const auto& s : chain.backstory()) {
    auto t = tokenize(s);
    out.tokens.insert(out.tokens.end(), t.tokens.begin(), t.tokens.end());
  }
  return out;
}

// -- leakage --------------------------------------------------------------------

struct LeakMatch {
  std::string term;
  std::size_t sentence = 0;  // 1-based position in the chain
  std::size_t token = 0;     // 0-based token offset within that sentence

  friend bool operator==(const LeakMatch&, const LeakMatch&) = default;
};

struct LeakReport {
  std::string chain_id;
  Emotion emotion = Emotion::anger;
  std::vector<LeakMatch> matches;

  bool leaked() const noexcept { return !matches.empty(); }
};

// Scans the backstory for the prompted emotion's terms as contiguous token
// runs. Exact match after tokenization: no stemming.
inline LeakReport leakage_check(const EventChain& chain,
                                const SynonymLexicon& lexicon) {
  LeakReport report{chain.id, chain.prompted_emotion, {}};
  std::vector<std::pair<std::string, TokenList>> needles;
  for (auto& term : lexicon.match_terms(chain.prompted_emotion)) {
    auto toks = tokenize(term);
    if (!toks.empty()) needles.emplace_back(std::move(term), std::move(toks));
  }
  const auto backstory = chain.backstory();
  for (std::size_t s = 0; s < backstory.size(); ++s) {
    const auto hay = tokenize(backstory[s]).tokens;
    for (std::size_t pos = 0; pos < hay.size(); ++pos) {
      for (const auto& [term, needle] : needles) {
        const auto& nt = needle.tokens;
        if (pos + nt.size() > hay.size()) continue;
        if (std::equal(nt.begin(), nt.end(), hay.begin() + pos)) {
          report.matches.push_back({term, s + 1, pos});
        }
      }
    }
  }
  return report;
}

struct LeakageSummary {
  std::size_t total = 0;
  std::size_t leaking = 0;
  double rate() const noexcept {
    return total ? static_cast<double>(leaking) / static_cast<double>(total)
                 : 0.0;
  }
};

inline std::map<Method, LeakageSummary> leakage_rate(
    std::span<const EventChain> chains, const SynonymLexicon& lexicon) {
  if (chains.empty()) throw PreconditionError("leakage_rate needs chains");
  std::map<Method, LeakageSummary> out;
  for (const auto& c : chains) {
    auto& s = out[c.method];
    ++s.total;
    if (leakage_check(c, lexicon).leaked()) ++s.leaking;
  }
  return out;
}

// -- counts -------------------------------------------------------------------

using UnigramCount = std::pair<std::string, std::size_t>;

// Descending by count, ties alphabetical.
inline std::vector<UnigramCount> unigram_counts(
    std::span<const std::string> texts, const std::set<std::string>& stopwords) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t).tokens) {
      if (!stopwords.contains(tok)) ++counts[tok];
    }
  }
  std::vector<UnigramCount> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

struct LengthStats {
  std::size_t chains = 0;
  std::array<double, kBackstoryLength> mean_per_position{};
  double mean_backstory_total = 0.0;
  double mean_event = 0.0;  // the concluding sentence
};

// Mean token counts per backstory position and of the backstory total.
inline std::map<Method, LengthStats> length_stats(
    std::span<const EventChain> chains) {
  if (chains.empty()) throw PreconditionError("length_stats needs chains");
  struct Acc {
    std::size_t n = 0;
    std::array<std::size_t, kChainLength> sums{};
  };
  std::map<Method, Acc> acc;
  for (const auto& c : chains) {
    validate(c);
    auto& a = acc[c.method];
    ++a.n;
    for (std::size_t i = 0; i < kChainLength; ++i) {
      a.sums[i] += tokenize(c.sentences[i]).size();
    }
  }
  std::map<Method, LengthStats> out;
  for (const auto& [m, a] : acc) {
    LengthStats s;
    s.chains = a.n;
    const double n = static_cast<double>(a.n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < kBackstoryLength; ++i) {
      s.mean_per_position[i] = static_cast<double>(a.sums[i]) / n;
      total += a.sums[i];
    }
    s.mean_backstory_total = static_cast<double>(total) / n;
    s.mean_event = static_cast<double>(a.sums[kChainLength - 1]) / n;
    out[m] = s;
  }
  return out;
}

}  // namespace backstory::textstats
