#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace backstory::util {

// Running mean and sample standard deviation (Welford). The deviation of a
// single observation is reported as 0.
class MeanSd {
 public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return n_ ? mean_ : 0.0; }
  double sd() const noexcept {
    return n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline MeanSd summarize(std::span<const double> xs) noexcept {
  MeanSd s;
  for (double x : xs) s.add(x);
  return s;
}

}  // namespace backstory::util
