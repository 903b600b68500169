#include "vqa/rewards.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

namespace vqa::rewards {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool contains_tag(std::string_view s) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (s.find(tag) != std::string_view::npos) return true;
  }
  return false;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::optional<double> parse_decimal(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

double format_reward(std::string_view text) {
  std::string_view rest = trim(text);
  if (!rest.starts_with(kThinkOpen)) return 0.0;
  rest.remove_prefix(kThinkOpen.size());

  const auto think_end = rest.find(kThinkClose);
  if (think_end == std::string_view::npos) return 0.0;
  const std::string_view think = rest.substr(0, think_end);
  if (trim(think).empty() || contains_tag(think)) return 0.0;
  rest = trim(rest.substr(think_end + kThinkClose.size()));

  if (!rest.starts_with(kAnswerOpen)) return 0.0;
  rest.remove_prefix(kAnswerOpen.size());
  const auto answer_end = rest.find(kAnswerClose);
  if (answer_end == std::string_view::npos) return 0.0;
  if (!parse_decimal(rest.substr(0, answer_end))) return 0.0;
  // Anything after the closing answer tag was trimmed away above, so the tail
  // must be empty here.
  return rest.substr(answer_end + kAnswerClose.size()).empty() ? 1.0 : 0.0;
}

std::optional<double> parse_score(std::string_view text) {
  const auto open = text.find(kAnswerOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const auto body_start = open + kAnswerOpen.size();
  const auto close = text.find(kAnswerClose, body_start);
  if (close == std::string_view::npos) return std::nullopt;
  return parse_decimal(text.substr(body_start, close - body_start));
}

double regression_reward(double score, double truth, double alpha, double sigma) {
  require(sigma > 0.0, fmt::format("regression reward: sigma must be positive, got {}", sigma));
  require(alpha > 0.0 && alpha <= 1.0, fmt::format("regression reward: alpha {} outside (0, 1]", alpha));
  const double err = score - truth;
  return alpha * std::exp(-(err * err) / (2.0 * sigma * sigma));
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

GroupStats GroupStats::from_scores(std::span<const std::optional<double>> parsed) {
  GroupStats g;
  for (const auto& s : parsed) {
    if (s) g.scores.push_back(*s);
  }
  if (g.scores.empty()) return g;
  g.mean = mean_of(g.scores);
  double ss = 0.0;
  for (double s : g.scores) ss += (s - g.mean) * (s - g.mean);
  g.var = ss / static_cast<double>(g.scores.size());
  return g;
}

GroupStats GroupStats::from_responses(std::span<const QualityResponse> responses) {
  std::vector<std::optional<double>> parsed;
  parsed.reserve(responses.size());
  for (const auto& r : responses) parsed.push_back(r.parsed_score);
  return from_scores(parsed);
}

double comparative_probability(double score, const PairContext& ctx, double eps) {
  if (ctx.self_group.degenerate() || ctx.other_group.degenerate()) {
    fail(ErrorKind::kData, "comparative probability: a response group has no parsed score");
  }
  require(eps > 0.0, "comparative probability: eps must be positive");
  const double spread = std::sqrt(ctx.self_group.var + ctx.other_group.var + eps);
  return standard_normal_cdf((score - ctx.other_group.mean) / spread);
}

double ranking_reward(double p, double g_self, double g_other, double eps) {
  require(p >= 0.0 && p <= 1.0, fmt::format("ranking reward: probability {} outside [0, 1]", p));
  require(eps > 0.0, "ranking reward: eps must be positive");
  double above = 0.0;
  double below = 0.0;
  if (g_self > g_other) {
    above = 1.0;
  } else if (g_self < g_other) {
    below = 1.0;
  } else {
    above = below = 0.5;
  }
  return std::sqrt(p * above + eps) + std::sqrt((1.0 - p) * below + eps);
}

double temporal_sub_reward(double mu_raw, double mu_pert, double delta, double tau) {
  require(delta > 0.0, "temporal reward: delta must be positive");
  return (mu_raw >= mu_pert && mu_raw > tau) ? delta : 0.0;
}

double temporal_reward(double raw_reg_mean, double raw_rank_mean, double pert_reg_mean, double pert_rank_mean,
                       double delta, double tau) {
  return temporal_sub_reward(raw_reg_mean, pert_reg_mean, delta, tau) +
         temporal_sub_reward(raw_rank_mean, pert_rank_mean, delta, tau);
}

double total_reward(double fmt, double reg, double rank, double temp) { return ((fmt + reg) + rank) + temp; }

RewardBreakdown make_breakdown(double fmt, double reg, double rank, double temp) {
  return {fmt, reg, rank, temp, total_reward(fmt, reg, rank, temp)};
}

double GroupScores::mean_reg() const { return mean_of(reg); }
double GroupScores::mean_rank() const { return mean_of(rank); }

GroupScores score_group(std::span<const QualityResponse> responses, double g_self, const GroupStats* partner,
                        double g_partner, const HyperParams& hyper) {
  GroupScores out;
  const std::size_t k = responses.size();
  out.fmt.resize(k, 0.0);
  out.reg.resize(k, 0.0);
  out.rank.resize(k, 0.0);

  PairContext ctx;
  const bool can_rank = partner != nullptr && !partner->degenerate();
  if (can_rank) {
    ctx.self_group = GroupStats::from_responses(responses);
    ctx.other_group = *partner;
    ctx.g_self = g_self;
    ctx.g_other = g_partner;
  }

  for (std::size_t i = 0; i < k; ++i) {
    const auto& r = responses[i];
    out.fmt[i] = format_reward(r.text);
    if (!r.parsed_score) continue;
    out.reg[i] = regression_reward(*r.parsed_score, g_self, hyper.alpha_reg, hyper.sigma_reg);
    if (can_rank) {
      const double p = comparative_probability(*r.parsed_score, ctx, hyper.eps_stab);
      out.rank[i] = ranking_reward(p, g_self, g_partner, hyper.eps_stab);
    }
  }
  return out;
}

std::vector<RewardBreakdown> combine(const GroupScores& scores, double temp) {
  std::vector<RewardBreakdown> out;
  out.reserve(scores.fmt.size());
  for (std::size_t i = 0; i < scores.fmt.size(); ++i) {
    out.push_back(make_breakdown(scores.fmt[i], scores.reg[i], scores.rank[i], temp));
  }
  return out;
}

}  // namespace vqa::rewards
