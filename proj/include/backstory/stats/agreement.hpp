#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "backstory/corpus/types.hpp"
#include "backstory/emotion_category.hpp"
#include "backstory/error.hpp"

namespace backstory::stats {

using CategoryCounts = std::array<std::uint32_t, kNumEmotions>;

// Per-item category counts for a fixed number of raters per item, columns
// in the fixed emotion order.
class AnnotationMatrix {
 public:
  AnnotationMatrix(std::vector<std::string> items, std::vector<CategoryCounts> counts,
                   std::uint32_t raters_per_item)
      : items_(std::move(items)), counts_(std::move(counts)), raters_(raters_per_item) {
    if (raters_ < 2) throw ValidationError("raters_per_item", "must be >= 2");
    if (items_.size() != counts_.size()) {
      throw ValidationError("counts", "one count row per item required");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      std::uint32_t sum = 0;
      for (auto c : counts_[i]) sum += c;
      if (sum != raters_) {
        throw ValidationError("counts", "row '" + items_[i] + "' sums to " +
                                            std::to_string(sum) + ", expected " +
                                            std::to_string(raters_));
      }
    }
  }

  const std::vector<std::string>& items() const noexcept { return items_; }
  const std::vector<CategoryCounts>& counts() const noexcept { return counts_; }
  std::uint32_t raters_per_item() const noexcept { return raters_; }
  std::size_t size() const noexcept { return items_.size(); }

  // Rows for the given item indices, in that order.
  AnnotationMatrix subset(std::span<const std::size_t> rows) const {
    std::vector<std::string> items;
    std::vector<CategoryCounts> counts;
    for (auto r : rows) {
      items.push_back(items_.at(r));
      counts.push_back(counts_.at(r));
    }
    return AnnotationMatrix(std::move(items), std::move(counts), raters_);
  }

 private:
  std::vector<std::string> items_;
  std::vector<CategoryCounts> counts_;
  std::uint32_t raters_;
};

struct CoverageReport {
  std::map<std::string, std::size_t> annotations_per_item;
  // Items whose annotation count differs from the required raters.
  std::vector<std::pair<std::string, std::size_t>> shortfalls;
};

// Groups annotation records by instance. Items are ordered by id. With
// `raters` unset, the most common count is used. Items with a different
// count are excluded from the matrix and listed in `coverage`.
inline AnnotationMatrix build_annotation_matrix(
    std::span<const AnnotationRecord> records, std::optional<std::uint32_t> raters = {},
    CoverageReport* coverage = nullptr) {
  std::map<std::string, CategoryCounts> rows;
  std::map<std::string, std::size_t> n;
  for (const auto& r : records) {
    ++rows[r.instance_id][index_of(r.emotion)];
    ++n[r.instance_id];
  }
  if (!raters) {
    std::map<std::size_t, std::size_t> freq;
    for (const auto& [id, c] : n) ++freq[c];
    std::size_t best = 0, best_freq = 0;
    for (const auto& [c, f] : freq) {
      if (f > best_freq || (f == best_freq && c > best)) {
        best = c;
        best_freq = f;
      }
    }
    raters = static_cast<std::uint32_t>(best);
  }
  std::vector<std::string> items;
  std::vector<CategoryCounts> counts;
  CoverageReport cov;
  for (const auto& [id, c] : n) {
    cov.annotations_per_item[id] = c;
    if (c == *raters) {
      items.push_back(id);
      counts.push_back(rows[id]);
    } else {
      cov.shortfalls.emplace_back(id, c);
    }
  }
  if (coverage) *coverage = std::move(cov);
  return AnnotationMatrix(std::move(items), std::move(counts), *raters);
}

// Fleiss' kappa: (P̄ - P̄e) / (1 - P̄e) with
//   P_i = sum_j n_ij (n_ij - 1) / (n (n - 1)),  p_j = sum_i n_ij / (N n).
// With A = sum_ij n_ij (n_ij - 1), C = sum_j (sum_i n_ij)^2 and T = N n this is
//   (A T^2 - C n (n - 1) N) / ((T^2 - C) n (n - 1) N),
// evaluated in integers and divided once, so exact ratios come out
// correctly rounded.
inline double fleiss_kappa(const AnnotationMatrix& m) {
  if (m.size() == 0) throw PreconditionError("fleiss_kappa needs at least one item");
  using Wide = __int128;
  const Wide n = m.raters_per_item();
  const Wide big_n = static_cast<Wide>(m.size());
  Wide agree = 0;
  std::array<Wide, kNumEmotions> col{};
  for (const auto& row : m.counts()) {
    for (std::size_t j = 0; j < kNumEmotions; ++j) {
      agree += Wide{row[j]} * (Wide{row[j]} - 1);
      col[j] += row[j];
    }
  }
  Wide col_sq = 0;
  for (auto c : col) col_sq += c * c;
  const Wide total = big_n * n;
  if (col_sq == total * total) {
    throw UndefinedStatisticError(
        "Fleiss' kappa is undefined when every rating falls in one category");
  }
  const Wide pairs = big_n * n * (n - 1);
  Wide num = agree * total * total - col_sq * pairs;
  Wide den = (total * total - col_sq) * pairs;
  Wide a = num < 0 ? -num : num, b = den;
  while (b != 0) {
    const Wide t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

// -- best-chain selection --------------------------------------------------------

struct CurvePoint {
  std::size_t k = 0;
  std::size_t items = 0;
  std::optional<double> kappa;  // empty when undefined for the selection
};

namespace detail {

struct RankedChain {
  std::size_t row;
  std::uint32_t modal;
  bool prompted_is_modal;
  Emotion prompted;
};

}  // namespace detail

// For each method and each k, Fleiss' kappa over the union of every
// event's k best chains. A chain's quality is the share of its raters that
// chose its most frequent label; ties prefer chains whose prompted emotion
// is that most frequent label, then the fixed category order of the
// prompted emotion.
inline std::map<Method, std::vector<CurvePoint>> best_chain_curve(
    const AnnotationMatrix& matrix, std::span<const EventChain> chains,
    std::size_t k_min = 1, std::size_t k_max = kNumEmotions) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < matrix.size(); ++i) row_of[matrix.items()[i]] = i;
  std::vector<std::string> missing;
  std::map<Method, std::map<std::string, std::vector<detail::RankedChain>>> groups;
  for (const auto& c : chains) {
    auto it = row_of.find(c.id);
    if (it == row_of.end()) {
      missing.push_back(c.id);
      continue;
    }
    const auto& row = matrix.counts()[it->second];
    const auto modal = *std::max_element(row.begin(), row.end());
    groups[c.method][c.event_id].push_back(
        {it->second, modal, row[index_of(c.prompted_emotion)] == modal, c.prompted_emotion});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw PreconditionError("chains without complete annotations: " + list);
  }
  std::map<Method, std::vector<CurvePoint>> out;
  for (auto& [method, events] : groups) {
    for (auto& [event, ranked] : events) {
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.modal != b.modal) return a.modal > b.modal;
        if (a.prompted_is_modal != b.prompted_is_modal) return a.prompted_is_modal;
        return index_of(a.prompted) < index_of(b.prompted);
      });
    }
    for (std::size_t k = k_min; k <= k_max; ++k) {
      std::vector<std::size_t> rows;
      for (const auto& [event, ranked] : events) {
        for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
          rows.push_back(ranked[i].row);
        }
      }
      CurvePoint p{k, rows.size(), std::nullopt};
      try {
        p.kappa = fleiss_kappa(matrix.subset(rows));
      } catch (const UndefinedStatisticError&) {
      }
      out[method].push_back(p);
    }
  }
  return out;
}

}  // namespace backstory::stats
