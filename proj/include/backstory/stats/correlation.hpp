#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "backstory/corpus/types.hpp"
#include "backstory/emotion_category.hpp"
#include "backstory/error.hpp"

namespace backstory::stats {

struct CorrelationResult {
  double coefficient = 0.0;
  std::size_t n = 0;
  double p_value = 1.0;
};

enum class PValueMethod {
  automatic,    // exact permutation test below kPermutationLimit, t otherwise
  t_approx,
  permutation,
};

inline constexpr std::size_t kPermutationLimit = 10;

// Ranks starting at 1; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw PreconditionError("correlation inputs differ in length (" +
                            std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                            ")");
  }
  if (x.size() < 3) throw PreconditionError("correlation needs n >= 3");
  for (auto v : {x, y}) {
    for (double d : v) {
      if (!std::isfinite(d)) throw PreconditionError("non-finite correlation input");
    }
  }
}

// Product-moment coefficient on raw values, clamped to [-1, 1].
inline double product_moment(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedStatisticError("correlation is undefined for a constant input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Two-sided p from t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom.
inline double t_p_value(double r, std::size_t n) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))),
                    0.0, 1.0);
}

// Share of all n! pairings whose |r| reaches the observed |r|.
template <class Stat>
double permutation_p_value(std::span<const double> x, std::span<const double> y,
                           double observed, Stat stat) {
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> shuffled(y.size());
  const double bar = std::abs(observed) - 1e-12;
  std::size_t hits = 0, total = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = y[perm[i]];
    if (std::abs(stat(x, std::span<const double>(shuffled))) >= bar) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

template <class Stat>
CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                            PValueMethod method, Stat stat) {
  check_pair(x, y);
  CorrelationResult r;
  r.n = x.size();
  r.coefficient = stat(x, y);
  const bool exact = method == PValueMethod::permutation ||
                     (method == PValueMethod::automatic && r.n < kPermutationLimit);
  if (exact && r.n > kPermutationLimit) {
    throw PreconditionError("exact permutation test limited to n <= " +
                            std::to_string(kPermutationLimit));
  }
  r.p_value = exact ? permutation_p_value(x, y, r.coefficient, stat)
                    : t_p_value(r.coefficient, r.n);
  return r;
}

}  // namespace detail

inline CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                                 PValueMethod method = PValueMethod::automatic) {
  return detail::correlate(x, y, method, [](auto a, auto b) {
    return detail::product_moment(a, b);
  });
}

inline CorrelationResult spearman(std::span<const double> x, std::span<const double> y,
                                  PValueMethod method = PValueMethod::automatic) {
  return detail::correlate(x, y, method, [](auto a, auto b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return detail::product_moment(ra, rb);
  });
}

// Per-emotion probability tables keyed by instance id.
using PredictionTable = std::map<std::string, std::array<double, kNumEmotions>>;

struct PairedSample {
  std::vector<double> predicted;
  std::vector<double> annotated;
};

// One pair per (instance, emotion): the predicted probability and the
// fraction of that instance's annotators who chose the emotion. Instances
// without annotations are skipped.
inline PairedSample pair_with_annotations(const PredictionTable& predictions,
                                          std::span<const AnnotationRecord> annotations) {
  std::map<std::string, std::array<std::size_t, kNumEmotions>> counts;
  std::map<std::string, std::size_t> totals;
  for (const auto& a : annotations) {
    ++counts[a.instance_id][index_of(a.emotion)];
    ++totals[a.instance_id];
  }
  PairedSample out;
  for (const auto& [id, probs] : predictions) {
    auto it = counts.find(id);
    if (it == counts.end()) continue;
    const double n = static_cast<double>(totals[id]);
    for (std::size_t e = 0; e < kNumEmotions; ++e) {
      out.predicted.push_back(probs[e]);
      out.annotated.push_back(static_cast<double>(it->second[e]) / n);
    }
  }
  return out;
}

}  // namespace backstory::stats
