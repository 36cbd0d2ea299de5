#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>

#include "backstory/emotion_category.hpp"

namespace backstory::stats {

// Rows are the reference label (e.g. prompted emotion), columns the
// compared label (annotated or predicted).
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumEmotions>, kNumEmotions> counts{};
  std::array<std::size_t, kNumEmotions> row_sums{};
  std::array<std::size_t, kNumEmotions> col_sums{};
  std::size_t total = 0;

  std::size_t at(Emotion row, Emotion col) const {
    return counts[index_of(row)][index_of(col)];
  }
};

inline ConfusionMatrix confusion_matrix(std::span<const std::pair<Emotion, Emotion>> pairs) {
  ConfusionMatrix m;
  for (const auto& [row, col] : pairs) {
    const auto r = index_of(row), c = index_of(col);
    ++m.counts[r][c];
    ++m.row_sums[r];
    ++m.col_sums[c];
    ++m.total;
  }
  return m;
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // row total
  std::size_t predicted = 0;  // column total
};

struct ClassificationScores {
  std::array<ClassScores, kNumEmotions> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t classes_averaged = 0;
};

// Empty denominators give 0. The macro average runs over the categories
// that occur as a reference or a compared label.
inline ClassificationScores precision_recall_f1(const ConfusionMatrix& m) {
  ClassificationScores s;
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    auto& c = s.per_class[i];
    const double tp = static_cast<double>(m.counts[i][i]);
    c.support = m.row_sums[i];
    c.predicted = m.col_sums[i];
    c.precision = c.predicted ? tp / static_cast<double>(c.predicted) : 0.0;
    c.recall = c.support ? tp / static_cast<double>(c.support) : 0.0;
    c.f1 = c.precision + c.recall > 0.0
               ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
               : 0.0;
    if (c.support || c.predicted) {
      s.macro_precision += c.precision;
      s.macro_recall += c.recall;
      s.macro_f1 += c.f1;
      ++s.classes_averaged;
    }
  }
  if (s.classes_averaged) {
    const double k = static_cast<double>(s.classes_averaged);
    s.macro_precision /= k;
    s.macro_recall /= k;
    s.macro_f1 /= k;
  }
  return s;
}

}  // namespace backstory::stats
