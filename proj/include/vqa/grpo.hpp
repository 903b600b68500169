#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vqa/core.hpp"
#include "vqa/data.hpp"
#include "vqa/rng.hpp"

namespace vqa::grpo {

// Gaussian-linear score policy: score ~ Normal(<weights, x> + bias, exp(log_std)^2).
struct PolicyParams {
  std::vector<double> weights;
  double bias = 3.0;
  double log_std = 0.0;

  std::size_t dim() const noexcept { return weights.size(); }
  // Flat layout used by gradients: weights..., bias, log_std.
  std::size_t num_params() const noexcept { return weights.size() + 2; }
  std::vector<double> flatten() const;
  static PolicyParams unflatten(std::span<const double> flat);

  // Clamps exp(log_std) into [kMinStd, kMaxStd]; throws kNumeric on non-finite entries.
  void project();

  bool operator==(const PolicyParams&) const = default;
};

inline constexpr double kMinStd = 1e-4;
inline constexpr double kMaxStd = 10.0;
inline constexpr double kMaxRatio = 1e6;

struct Forward {
  double mean = 0.0;
  double std = 1.0;
};

Forward policy_forward(const PolicyParams& params, std::span<const double> features);
double log_prob(const PolicyParams& params, std::span<const double> features, double score);

// Anything that can score a video and sample a quality response for it.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual double mean_score(std::span<const double> features) const = 0;
  virtual QualityResponse sample_response(std::span<const double> features, Rng& rng) const = 0;
};

class GaussianLinearPolicy final : public Policy {
 public:
  explicit GaussianLinearPolicy(PolicyParams params) : params_(std::move(params)) {}

  double mean_score(std::span<const double> features) const override;
  QualityResponse sample_response(std::span<const double> features, Rng& rng) const override;
  const PolicyParams& params() const noexcept { return params_; }

 private:
  PolicyParams params_;
};

// Draws one response and renders it as think/answer text. The answer carries
// the draw rounded to two decimals, and log-probabilities are evaluated at
// that rounded score.
QualityResponse sample_response(const PolicyParams& params, std::span<const double> features, Rng& rng);

// Human-readable name of feature channel j for a policy of dimension dim.
std::string channel_name(std::size_t j, std::size_t dim);

// Standardized advantages. Groups whose population std is <= eps get all
// zeros; otherwise (r - mean) / std exactly.
std::vector<double> group_advantages(std::span<const double> rewards, double eps);

struct Diagnostics {
  std::atomic<std::size_t> ratio_clamps{0};
};

// exp(log_p_current - log_p_old), clamped to kMaxRatio.
double importance_ratio(double log_p_current, double log_p_old, Diagnostics* diag = nullptr);

// min(ratio * a, clip(ratio, 1 - eps, 1 + eps) * a)
double clipped_term(double ratio, double advantage, double clip_eps);

// KL(current || reference) between the two response Gaussians at these features.
double kl_to_reference(const PolicyParams& params, const PolicyParams& ref, std::span<const double> features);

struct RolloutGroup {
  std::string video_id;
  std::vector<double> features;
  double mos = 3.0;
  std::vector<QualityResponse> responses;
  std::vector<RewardBreakdown> rewards;
  std::vector<double> advantages;
  // Perturbed twin group means, kept for logs; never optimized.
  double twin_mean_reg = 0.0;
  double twin_mean_rank = 0.0;
};

struct Objective {
  double value = 0.0;
  std::vector<double> gradient;  // ascent direction, PolicyParams flat layout
  double mean_kl = 0.0;
};

// Mean over every (group, response) of clipped_term - beta * KL. Old and
// reference parameters and the advantages are treated as constants.
Objective grpo_objective(std::span<const RolloutGroup> groups, const PolicyParams& params, const PolicyParams& old,
                         const PolicyParams& ref, const HyperParams& hyper, Diagnostics* diag = nullptr);

struct TrainConfig {
  HyperParams hyper;
  std::uint64_t seed = 0;
  std::uint64_t pairing_seed = 1;
  bool perturb_every_step = true;
  bool zero_coherence = false;
  double init_bias = 3.0;
  double init_log_std = -3.0;  // sigma ~ 0.05 on the MOS scale
  double init_weight_std = 0.05;
};

PolicyParams init_policy(std::size_t dim, const TrainConfig& cfg);

// Seeded derangement of 0..n-1 (no fixed points); n < 2 gives the identity.
std::vector<std::size_t> pairing_derangement(std::size_t n, std::uint64_t seed);

// Everything the trainer needs about one video, features pre-extracted.
struct PreparedSample {
  const VideoSample* sample = nullptr;
  std::vector<double> features;
};

struct StepContext {
  const HyperParams* hyper = nullptr;
  bool perturb = true;
  data::FeatureOptions feature_opts;
  std::uint64_t seed = 0;  // per-group seeds derive from (seed, slot)
};

// Samples K responses from the old policy, scores them against the paired
// video, and standardizes advantages. partners[i] indexes into batch.
std::vector<RolloutGroup> rollout_batch(std::span<const PreparedSample> batch,
                                        std::span<const std::size_t> partners, const Policy& old_policy,
                                        const StepContext& ctx);

struct LogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double mean_total_reward = 0.0;
  double mean_fmt = 0.0;
  double mean_reg = 0.0;
  double mean_rank = 0.0;
  double mean_temp = 0.0;
  double mean_kl = 0.0;
  double objective = 0.0;
  double probe_srcc = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<LogRow> log;
};

// probe defaults to the training set when empty.
TrainResult train(const std::vector<VideoSample>& dataset, const TrainConfig& cfg,
                  const std::vector<VideoSample>& probe = {});

struct EvalResult {
  double srcc = 0.0;
  double plcc = 0.0;
  std::size_t n = 0;
};

// Deterministic policy means against MOS.
EvalResult evaluate(const PolicyParams& params, const std::vector<VideoSample>& dataset,
                    const data::FeatureOptions& opts = {});

}  // namespace vqa::grpo
