#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vqa/core.hpp"

namespace vqa::rewards {

// 1 iff text is exactly `<think>BODY</think><answer>NUMBER</answer>`, with
// optional whitespace around and between the two tag pairs. BODY must hold a
// non-whitespace character and no tags; NUMBER must be a finite decimal.
double format_reward(std::string_view text);

// Number inside the first <answer>...</answer> pair. No clamping.
std::optional<double> parse_score(std::string_view text);

// Strict decimal parse of a whole (whitespace-trimmed) string.
std::optional<double> parse_decimal(std::string_view text);

// alpha * exp(-(s - g)^2 / (2 sigma^2))
double regression_reward(double score, double truth, double alpha, double sigma);

// Standard normal CDF via erfc; absolute error well below 1e-12.
double standard_normal_cdf(double x);

// Mean and population variance of the scores that parsed.
struct GroupStats {
  std::vector<double> scores;
  double mean = 0.0;
  double var = 0.0;

  bool degenerate() const noexcept { return scores.empty(); }

  static GroupStats from_scores(std::span<const std::optional<double>> parsed);
  static GroupStats from_responses(std::span<const QualityResponse> responses);
};

struct PairContext {
  GroupStats self_group;
  GroupStats other_group;
  double g_self = 3.0;
  double g_other = 3.0;
};

// Probability that `score` (one response for the self video) outranks the
// other video's mean prediction. Throws kData on a degenerate group.
double comparative_probability(double score, const PairContext& ctx, double eps);

// Fidelity-style ranking reward. Tied ground truth uses the soft label 0.5
// on both terms.
double ranking_reward(double p, double g_self, double g_other, double eps);

// delta iff mu_raw >= mu_pert and mu_raw > tau, else 0.
double temporal_sub_reward(double mu_raw, double mu_pert, double delta, double tau);

double temporal_reward(double raw_reg_mean, double raw_rank_mean, double pert_reg_mean, double pert_rank_mean,
                       double delta, double tau);

// fmt + reg + rank + temp, always summed in that order.
double total_reward(double fmt, double reg, double rank, double temp);

RewardBreakdown make_breakdown(double fmt, double reg, double rank, double temp);

// Per-response format/regression/ranking rewards for one group of K
// responses. Responses whose score failed to parse get reg = rank = 0.
struct GroupScores {
  std::vector<double> fmt;
  std::vector<double> reg;
  std::vector<double> rank;

  double mean_reg() const;
  double mean_rank() const;
};

// `partner` is the comparison video's response group; without one (or with a
// degenerate pair) every ranking reward is 0.
GroupScores score_group(std::span<const QualityResponse> responses, double g_self, const GroupStats* partner,
                        double g_partner, const HyperParams& hyper);

// Adds the group-level temporal bonus to every response.
std::vector<RewardBreakdown> combine(const GroupScores& scores, double temp);

}  // namespace vqa::rewards
