#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "backstory/corpus/types.hpp"
#include "backstory/likelihood/backend.hpp"
#include "backstory/util/hash.hpp"
#include "backstory/util/rng.hpp"
#include "backstory/util/summary.hpp"

// Shuffle-test coherence: a chain is scored by how its own sentence order
// ranks, by sequence log-likelihood, among a sample of reorderings.
namespace backstory::coherence {

using Ordering = std::vector<std::size_t>;

struct PermutationSample {
  std::string chain_id;
  std::vector<Ordering> orderings;  // orderings[0] is the identity
  bool includes_original = true;
  std::uint64_t seed = 0;
};

struct CoherenceResult {
  std::string chain_id;
  std::size_t sample_size = 0;
  double original_log_prob = 0.0;
  std::size_t rank = 0;  // |{sampled c' : log P(c') >= log P(c)}|
  double score = 0.0;    // 1 - rank / sample_size
};

namespace detail {

// l!, saturating at uint64 max.
inline std::uint64_t factorial(std::size_t l) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= l; ++i) {
    if (f > std::numeric_limits<std::uint64_t>::max() / i) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    f *= i;
  }
  return f;
}

// The rank-th permutation of 0..l-1 in lexicographic order (Lehmer code).
inline Ordering unrank(std::uint64_t rank, std::size_t l) {
  std::vector<std::size_t> pool(l);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Ordering out;
  out.reserve(l);
  for (std::size_t i = l; i > 0; --i) {
    const std::uint64_t f = factorial(i - 1);
    const auto idx = static_cast<std::size_t>(rank / f);
    rank %= f;
    out.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return out;
}

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

}  // namespace detail

// min(target, l!) distinct orderings of l sentences, the identity first.
// The rest are drawn without replacement by a seeded partial Fisher-Yates
// over the lexicographic ranks of the non-identity permutations.
inline PermutationSample sample_permutations(std::size_t l, std::size_t target,
                                             std::uint64_t seed) {
  if (l < 2) throw PreconditionError("need at least 2 sentences to shuffle");
  if (target < 1) throw PreconditionError("sample target must be >= 1");
  const std::uint64_t total = detail::factorial(l);
  const std::size_t k =
      static_cast<std::size_t>(std::min<std::uint64_t>(target, total));
  PermutationSample out;
  out.seed = seed;
  Ordering identity(l);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  out.orderings.push_back(identity);
  util::Engine eng(seed);
  if (total <= detail::kEnumerationLimit) {
    std::vector<std::uint64_t> ranks(total - 1);
    std::iota(ranks.begin(), ranks.end(), std::uint64_t{1});
    util::partial_fisher_yates(ranks, k - 1, eng);
    for (std::size_t i = 0; i + 1 < k; ++i) {
      out.orderings.push_back(detail::unrank(ranks[i], l));
    }
  } else {
    std::set<Ordering> seen{identity};
    while (out.orderings.size() < k) {
      Ordering o = identity;
      util::fisher_yates(o, eng);
      if (seen.insert(o).second) out.orderings.push_back(std::move(o));
    }
  }
  return out;
}

inline std::string join_ordered(std::span<const std::string> sentences,
                                const Ordering& order) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out.push_back(' ');
    out += sentences[order[i]];
  }
  return out;
}

// Rank of the original among the sample's log-likelihoods. Ties count
// against the original, so a chain indistinguishable from its shuffles
// gets rank = sample size and score 0.
inline CoherenceResult score_sample(const likelihood::LikelihoodBackend& backend,
                                    std::span<const std::string> sentences,
                                    const PermutationSample& sample) {
  CoherenceResult r;
  r.chain_id = sample.chain_id;
  r.sample_size = sample.orderings.size();
  std::vector<double> scores;
  scores.reserve(sample.orderings.size());
  for (const auto& o : sample.orderings) {
    scores.push_back(backend.sequence_log_prob(join_ordered(sentences, o)).total_log_prob);
  }
  r.original_log_prob = scores.front();
  r.rank = static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(),
                    [&](double s) { return s >= r.original_log_prob; }));
  r.score = 1.0 - static_cast<double>(r.rank) / static_cast<double>(r.sample_size);
  return r;
}

inline CoherenceResult coherence_score(const likelihood::LikelihoodBackend& backend,
                                       std::span<const std::string> sentences,
                                       std::size_t sample_target, std::uint64_t seed,
                                       std::string chain_id = {}) {
  for (const auto& s : sentences) {
    if (s.empty()) throw PreconditionError("cannot score an empty sentence");
  }
  auto sample = sample_permutations(sentences.size(), sample_target, seed);
  sample.chain_id = std::move(chain_id);
  return score_sample(backend, sentences, sample);
}

// Chain entry point; the sampling seed is derived from (seed, chain id).
inline CoherenceResult coherence_score(const likelihood::LikelihoodBackend& backend,
                                       const EventChain& chain,
                                       std::size_t sample_target = 30,
                                       std::uint64_t seed = 0) {
  validate(chain);
  return coherence_score(backend, chain.sentences, sample_target,
                         util::derive_seed(seed, chain.id), chain.id);
}

// -- batches ------------------------------------------------------------------

struct BatchConfig {
  std::size_t sample_target = 30;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct GroupStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct ChainFailure {
  std::string chain_id;
  std::string message;
};

struct BatchResult {
  std::vector<CoherenceResult> results;  // input order, failures omitted
  std::vector<Method> methods;           // parallel to results
  std::vector<Emotion> emotions;         // parallel to results
  std::map<Method, std::map<Emotion, GroupStats>> by_emotion;
  std::map<Method, GroupStats> by_method;
  GroupStats overall;
  std::vector<ChainFailure> failures;
};

inline GroupStats to_group(const util::MeanSd& s) {
  return {s.count(), s.mean(), s.sd()};
}

inline BatchResult batch_coherence(const likelihood::LikelihoodBackend& backend,
                                   std::span<const EventChain> chains,
                                   const BatchConfig& cfg = {}) {
  if (chains.empty()) throw PreconditionError("batch_coherence needs chains");
  std::vector<std::optional<CoherenceResult>> slots(chains.size());
  std::vector<std::string> errors(chains.size());
  auto work = [&](std::size_t i) {
    try {
      slots[i] = coherence_score(backend, chains[i], cfg.sample_target, cfg.seed);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, chains.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < chains.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < chains.size();) work(i);
      });
    }
  }

  BatchResult out;
  std::map<Method, std::map<Emotion, util::MeanSd>> groups;
  std::map<Method, util::MeanSd> methods;
  util::MeanSd overall;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (!slots[i]) {
      out.failures.push_back({chains[i].id, errors[i]});
      continue;
    }
    const double h = slots[i]->score;
    groups[chains[i].method][chains[i].prompted_emotion].add(h);
    methods[chains[i].method].add(h);
    overall.add(h);
    out.results.push_back(std::move(*slots[i]));
    out.methods.push_back(chains[i].method);
    out.emotions.push_back(chains[i].prompted_emotion);
  }
  for (const auto& [m, per] : groups) {
    for (const auto& [e, s] : per) out.by_emotion[m][e] = to_group(s);
  }
  for (const auto& [m, s] : methods) out.by_method[m] = to_group(s);
  out.overall = to_group(overall);
  return out;
}

}  // namespace backstory::coherence
