#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ricprobe {

inline constexpr double kZ95 = 1.959963984540054;  // two-sided 95% normal quantile

// Pairwise (cascade) summation. Used for every deterministic reduction so that
// results do not depend on accumulation chunking.
double pairwise_sum(std::span<const double> v);

struct McEstimate {
  double value = 0.0;
  double ci = 0.0;  // 95% half-width
  std::size_t n = 0;
  double sd = 0.0;
};

McEstimate mean_ci(std::span<const double> v);

// Per-batch sums of K path-level primitives. Batches are contiguous,
// deterministic index ranges; a batch is always filled by a single worker in
// path order, which keeps every reduction independent of the worker count.
struct BatchTable {
  std::size_t n_batches = 0;
  std::size_t width = 0;
  std::vector<double> sums;        // n_batches x width, row-major
  std::vector<std::size_t> counts; // paths accumulated per batch

  void resize(std::size_t b, std::size_t k) {
    n_batches = b;
    width = k;
    sums.assign(b * k, 0.0);
    counts.assign(b, 0);
  }
  double* row(std::size_t b) { return sums.data() + b * width; }
  const double* row(std::size_t b) const { return sums.data() + b * width; }

  std::size_t total_count() const;
  // Column means over all batches (pairwise over batch sums).
  std::vector<double> means() const;
};

struct JackEstimate {
  double value = 0.0;  // functional applied to full-sample means
  double ci = 0.0;     // 95% half-width from leave-one-batch-out variance
};

// Delta-free confidence interval for a smooth functional of primitive means.
// phi receives a width-sized array of means.
JackEstimate jackknife(const BatchTable& table,
                       const std::function<double(const double*)>& phi);

// Weighted least squares fit y = intercept + slope * x with independent
// Gaussian errors given as 95% half-widths.
struct AffineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_ci = 0.0;
  double slope_ci = 0.0;
  double chi2 = 0.0;
  int dof = 0;
  double cond = 0.0;  // condition estimate of the 2x2 normal matrix
  bool ok = false;
};

AffineFit fit_affine(std::span<const double> x, std::span<const double> y,
                     std::span<const double> ci95);

}  // namespace ricprobe
