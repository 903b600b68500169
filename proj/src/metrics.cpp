#include "vqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <fmt/format.h>

#include "vqa/error.hpp"

namespace vqa::metrics {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  require(a.size() == b.size(), fmt::format("{}: length mismatch {} vs {}", what, a.size(), b.size()));
  require(a.size() >= 2, fmt::format("{}: need at least 2 samples, got {}", what, a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(std::isfinite(a[i]) && std::isfinite(b[i]), fmt::format("{}: non-finite value at {}", what, i));
  }
}

bool has_ties(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

double pearson(std::span<const double> x, std::span<const double> y, const char* what) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::kData, fmt::format("{}: correlation undefined for constant input", what));
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

}  // namespace

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double plcc(std::span<const double> pred, std::span<const double> gt) {
  check_pair(pred, gt, "plcc");
  return pearson(pred, gt, "plcc");
}

double srcc_pearson_ranks(std::span<const double> pred, std::span<const double> gt) {
  check_pair(pred, gt, "srcc");
  const auto rp = fractional_ranks(pred);
  const auto rg = fractional_ranks(gt);
  return pearson(rp, rg, "srcc");
}

double srcc(std::span<const double> pred, std::span<const double> gt) {
  check_pair(pred, gt, "srcc");
  if (has_ties(pred) || has_ties(gt)) return srcc_pearson_ranks(pred, gt);
  const auto rp = fractional_ranks(pred);
  const auto rg = fractional_ranks(gt);
  // Ranks are exact small integers here, so the squared-difference sum is exact.
  std::int64_t d2 = 0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const auto d = static_cast<std::int64_t>(rp[i]) - static_cast<std::int64_t>(rg[i]);
    d2 += d * d;
  }
  const auto n = static_cast<std::int64_t>(rp.size());
  return 1.0 - static_cast<double>(6 * d2) / static_cast<double>(n * (n * n - 1));
}

double weighted_overall(std::span<const std::pair<double, double>> per_dataset) {
  require(!per_dataset.empty(), "weighted_overall: no datasets");
  double num = 0.0, den = 0.0;
  for (const auto& [value, n] : per_dataset) {
    require(n > 0.0, fmt::format("weighted_overall: video count must be positive, got {}", n));
    num += value * n;
    den += n;
  }
  return num / den;
}

}  // namespace vqa::metrics
