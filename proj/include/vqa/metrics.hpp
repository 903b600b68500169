#pragma once

#include <span>
#include <utility>
#include <vector>

namespace vqa::metrics {

// Pearson linear correlation. Throws kData when either input is constant.
double plcc(std::span<const double> pred, std::span<const double> gt);

// Spearman rank correlation. Tie-free inputs use 1 - 6 sum(d^2) / (n(n^2-1))
// with exact integer rank differences; ties fall back to Pearson correlation
// of average fractional ranks.
double srcc(std::span<const double> pred, std::span<const double> gt);

// Pearson correlation of average fractional ranks, for any input.
double srcc_pearson_ranks(std::span<const double> pred, std::span<const double> gt);

// 1-based average ranks; tied values share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

// sum(value * n) / sum(n) over (value, n_videos) pairs.
double weighted_overall(std::span<const std::pair<double, double>> per_dataset);

}  // namespace vqa::metrics
