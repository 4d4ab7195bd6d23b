#include "ricprobe/stats.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace ricprobe {

double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

McEstimate mean_ci(std::span<const double> v) {
  McEstimate e;
  e.n = v.size();
  if (e.n == 0) return e;
  e.value = pairwise_sum(v) / static_cast<double>(e.n);
  if (e.n < 2) return e;
  double ss = 0.0;
  for (double x : v) {
    const double d = x - e.value;
    ss += d * d;
  }
  e.sd = std::sqrt(ss / static_cast<double>(e.n - 1));
  e.ci = kZ95 * e.sd / std::sqrt(static_cast<double>(e.n));
  return e;
}

std::size_t BatchTable::total_count() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::vector<double> BatchTable::means() const {
  const double n = static_cast<double>(total_count());
  std::vector<double> m(width, 0.0);
  std::vector<double> col(n_batches);
  for (std::size_t k = 0; k < width; ++k) {
    for (std::size_t b = 0; b < n_batches; ++b) col[b] = sums[b * width + k];
    m[k] = pairwise_sum(col) / n;
  }
  return m;
}

JackEstimate jackknife(const BatchTable& table,
                       const std::function<double(const double*)>& phi) {
  const std::size_t B = table.n_batches;
  const std::size_t K = table.width;
  if (B < 2) throw std::invalid_argument("jackknife needs at least 2 batches");

  std::vector<double> total(K, 0.0);
  std::vector<double> col(B);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t b = 0; b < B; ++b) col[b] = table.sums[b * K + k];
    total[k] = pairwise_sum(col);
  }
  const double n_total = static_cast<double>(table.total_count());

  JackEstimate est;
  {
    std::vector<double> means(K);
    for (std::size_t k = 0; k < K; ++k) means[k] = total[k] / n_total;
    est.value = phi(means.data());
  }

  std::vector<double> theta(B);
  std::vector<double> loo(K);
  for (std::size_t b = 0; b < B; ++b) {
    const double n_loo = n_total - static_cast<double>(table.counts[b]);
    for (std::size_t k = 0; k < K; ++k)
      loo[k] = (total[k] - table.sums[b * K + k]) / n_loo;
    theta[b] = phi(loo.data());
  }
  const double theta_bar = pairwise_sum(theta) / static_cast<double>(B);
  double ss = 0.0;
  for (double t : theta) {
    const double d = t - theta_bar;
    ss += d * d;
  }
  const double var = ss * static_cast<double>(B - 1) / static_cast<double>(B);
  est.ci = kZ95 * std::sqrt(var);
  return est;
}

AffineFit fit_affine(std::span<const double> x, std::span<const double> y,
                     std::span<const double> ci95) {
  AffineFit fit;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || ci95.size() != n) return fit;

  // Normal equations with weights 1/var; var recovered from 95% half-widths.
  double s00 = 0, s01 = 0, s11 = 0, b0 = 0, b1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sd = ci95[i] / kZ95;
    const double w = 1.0 / (sd * sd);
    s00 += w;
    s01 += w * x[i];
    s11 += w * x[i] * x[i];
    b0 += w * y[i];
    b1 += w * x[i] * y[i];
  }
  const double det = s00 * s11 - s01 * s01;
  const double tr = s00 + s11;
  if (det <= 0.0) return fit;
  // Condition estimate from eigenvalue ratio of the symmetric 2x2.
  const double disc = std::sqrt(tr * tr / 4.0 - det);
  const double lmax = tr / 2.0 + disc;
  const double lmin = tr / 2.0 - disc;
  fit.cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();

  fit.intercept = (s11 * b0 - s01 * b1) / det;
  fit.slope = (s00 * b1 - s01 * b0) / det;
  // Parameter covariance is the inverse normal matrix.
  fit.intercept_ci = kZ95 * std::sqrt(s11 / det);
  fit.slope_ci = kZ95 * std::sqrt(s00 / det);

  for (std::size_t i = 0; i < n; ++i) {
    const double sd = ci95[i] / kZ95;
    const double r = (y[i] - fit.intercept - fit.slope * x[i]) / sd;
    fit.chi2 += r * r;
  }
  fit.dof = static_cast<int>(n) - 2;
  fit.ok = true;
  return fit;
}

}  // namespace ricprobe
