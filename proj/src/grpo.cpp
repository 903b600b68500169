#include "vqa/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vqa/metrics.hpp"
#include "vqa/perturb.hpp"
#include "vqa/rewards.hpp"

namespace vqa::grpo {
namespace {

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Score whose likelihood the objective evaluates.
double action_of(const QualityResponse& r) { return r.parsed_score.value_or(r.raw_draw); }

std::string dump_group(const RolloutGroup& g) {
  std::string out = fmt::format("video {} (mos {:.4f}) features [{}]\n", g.video_id, g.mos, fmt::join(g.features, ", "));
  for (std::size_t k = 0; k < g.responses.size(); ++k) {
    const auto& r = g.responses[k];
    out += fmt::format("  response {}: draw {} logp_old {} total {} advantage {}\n", k, r.raw_draw, r.log_prob_old,
                       k < g.rewards.size() ? g.rewards[k].total : std::nan(""),
                       k < g.advantages.size() ? g.advantages[k] : std::nan(""));
  }
  return out;
}

}  // namespace

std::vector<double> PolicyParams::flatten() const {
  std::vector<double> flat(weights);
  flat.push_back(bias);
  flat.push_back(log_std);
  return flat;
}

PolicyParams PolicyParams::unflatten(std::span<const double> flat) {
  require(flat.size() >= 2, "policy parameters need at least bias and log_std");
  PolicyParams p;
  p.weights.assign(flat.begin(), flat.end() - 2);
  p.bias = flat[flat.size() - 2];
  p.log_std = flat.back();
  return p;
}

void PolicyParams::project() {
  const bool finite = std::isfinite(bias) && std::isfinite(log_std) &&
                      std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); });
  if (!finite) fail(ErrorKind::kNumeric, "policy parameters became non-finite");
  log_std = std::clamp(log_std, std::log(kMinStd), std::log(kMaxStd));
}

Forward policy_forward(const PolicyParams& params, std::span<const double> features) {
  require(features.size() == params.dim(),
          fmt::format("policy expects {} features, got {}", params.dim(), features.size()));
  return {dot(params.weights, features) + params.bias, std::exp(params.log_std)};
}

double log_prob(const PolicyParams& params, std::span<const double> features, double score) {
  const Forward f = policy_forward(params, features);
  const double z = (score - f.mean) / f.std;
  return -0.5 * z * z - params.log_std - kLogSqrt2Pi;
}

std::string channel_name(std::size_t j, std::size_t dim) {
  if (j + 1 == dim) return "temporal coherence";
  if (j == 0) return "sharpness";
  if (j == 1) return "noise level";
  return fmt::format("content cue {}", j);
}

QualityResponse sample_response(const PolicyParams& params, std::span<const double> features, Rng& rng) {
  const Forward f = policy_forward(params, features);
  QualityResponse r;
  r.raw_draw = std::normal_distribution<double>(f.mean, f.std)(rng);

  // Two largest-magnitude contributions to the mean score.
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto contrib = [&](std::size_t j) { return params.weights[j] * features[j]; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(contrib(a)) > std::abs(contrib(b)); });
  std::string trace = "Dominant quality cues:";
  for (std::size_t i = 0; i < std::min<std::size_t>(2, order.size()); ++i) {
    trace += fmt::format(" {} ({:+.3f}){}", channel_name(order[i], features.size()), contrib(order[i]),
                         i == 0 && order.size() > 1 ? ";" : ".");
  }
  trace += fmt::format(" Baseline {:.3f}.", params.bias);

  r.text = fmt::format("<think>{}</think><answer>{:.2f}</answer>", trace, r.raw_draw);
  r.parsed_score = rewards::parse_score(r.text);
  r.log_prob_current = log_prob(params, features, action_of(r));
  r.log_prob_old = r.log_prob_current;
  return r;
}

double GaussianLinearPolicy::mean_score(std::span<const double> features) const {
  return policy_forward(params_, features).mean;
}

QualityResponse GaussianLinearPolicy::sample_response(std::span<const double> features, Rng& rng) const {
  return grpo::sample_response(params_, features, rng);
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps) {
  require(rewards.size() >= 2, fmt::format("advantages need a group of at least 2, got {}", rewards.size()));
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (!(sd > eps)) return adv;
  for (std::size_t k = 0; k < rewards.size(); ++k) adv[k] = (rewards[k] - mean) / sd;
  return adv;
}

double importance_ratio(double log_p_current, double log_p_old, Diagnostics* diag) {
  require(std::isfinite(log_p_current) && std::isfinite(log_p_old), "importance ratio: non-finite log-probability");
  const double diff = log_p_current - log_p_old;
  if (diff > std::log(kMaxRatio)) {
    if (diag) diag->ratio_clamps.fetch_add(1, std::memory_order_relaxed);
    return kMaxRatio;
  }
  return std::exp(diff);
}

double clipped_term(double ratio, double advantage, double clip_eps) {
  require(clip_eps > 0.0, "clip_eps must be positive");
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_to_reference(const PolicyParams& params, const PolicyParams& ref, std::span<const double> features) {
  const Forward c = policy_forward(params, features);
  const Forward r = policy_forward(ref, features);
  const double dm = c.mean - r.mean;
  return (ref.log_std - params.log_std) + (c.std * c.std + dm * dm) / (2.0 * r.std * r.std) - 0.5;
}

Objective grpo_objective(std::span<const RolloutGroup> groups, const PolicyParams& params, const PolicyParams& old,
                         const PolicyParams& ref, const HyperParams& hyper, Diagnostics* diag) {
  std::size_t count = 0;
  for (const auto& g : groups) count += g.responses.size();
  if (count == 0) fail(ErrorKind::kInvalidArgument, "GRPO objective over an empty batch");

  const std::size_t d = params.dim();
  Objective obj;
  obj.gradient.assign(params.num_params(), 0.0);
  double kl_sum = 0.0;

  for (const auto& g : groups) {
    require(g.advantages.size() == g.responses.size(), "rollout group advantages/responses size mismatch");
    const std::span<const double> x = g.features;
    const Forward cur = policy_forward(params, x);
    const Forward rf = policy_forward(ref, x);
    const double var_c = cur.std * cur.std;
    const double var_r = rf.std * rf.std;

    const double kl = kl_to_reference(params, ref, x);
    const double dkl_dmean = (cur.mean - rf.mean) / var_r;
    const double dkl_dlogstd = var_c / var_r - 1.0;

    for (std::size_t k = 0; k < g.responses.size(); ++k) {
      const double s = action_of(g.responses[k]);
      const double a = g.advantages[k];
      const double lp_cur = log_prob(params, x, s);
      const double lp_old = log_prob(old, x, s);
      const double ratio = importance_ratio(lp_cur, lp_old, diag);
      const double term = clipped_term(ratio, a, hyper.clip_eps);
      obj.value += term - hyper.beta_kl * kl;
      kl_sum += kl;

      // The surrogate follows ratio * a unless the clipped branch is strictly
      // smaller with the ratio outside the trust region, where it is flat.
      const bool flat = ratio >= kMaxRatio || (clipped_term(ratio, a, hyper.clip_eps) < ratio * a &&
                                               (ratio < 1.0 - hyper.clip_eps || ratio > 1.0 + hyper.clip_eps));
      const double scale = flat ? 0.0 : a * ratio;
      const double z = (s - cur.mean) / cur.std;
      const double dlogp_dmean = z / cur.std;
      const double dlogp_dlogstd = z * z - 1.0;

      const double g_mean = scale * dlogp_dmean - hyper.beta_kl * dkl_dmean;
      for (std::size_t j = 0; j < d; ++j) obj.gradient[j] += g_mean * x[j];
      obj.gradient[d] += g_mean;
      obj.gradient[d + 1] += scale * dlogp_dlogstd - hyper.beta_kl * dkl_dlogstd;
    }
  }

  const double inv = 1.0 / static_cast<double>(count);
  obj.value *= inv;
  for (double& v : obj.gradient) v *= inv;
  obj.mean_kl = kl_sum * inv;
  return obj;
}

PolicyParams init_policy(std::size_t dim, const TrainConfig& cfg) {
  PolicyParams p;
  Rng rng = make_rng(derive_seed(cfg.seed, {0x1417}));
  std::normal_distribution<double> w(0.0, cfg.init_weight_std);
  p.weights.resize(dim);
  for (double& v : p.weights) v = cfg.init_weight_std > 0.0 ? w(rng) : 0.0;
  p.bias = cfg.init_bias;
  p.log_std = cfg.init_log_std;
  p.project();
  return p;
}

std::vector<std::size_t> pairing_derangement(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (n < 2) return perm;
  Rng rng = make_rng(seed);
  for (;;) {
    std::shuffle(perm.begin(), perm.end(), rng);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = perm[i] == i;
    if (!fixed) return perm;
  }
}

std::vector<RolloutGroup> rollout_batch(std::span<const PreparedSample> batch,
                                        std::span<const std::size_t> partners, const Policy& old_policy,
                                        const StepContext& ctx) {
  require(ctx.hyper != nullptr, "rollout needs hyper-parameters");
  require(partners.size() == batch.size(), "one partner index per batch slot required");
  const HyperParams& hyper = *ctx.hyper;
  const auto k_group = static_cast<std::size_t>(hyper.k_group);

  std::vector<RolloutGroup> groups(batch.size());
  std::vector<std::vector<QualityResponse>> twins(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& item = batch[i];
    auto& g = groups[i];
    g.video_id = item.sample->id;
    g.features = item.features;
    g.mos = item.sample->mos;
    Rng rng = make_rng(derive_seed(ctx.seed, {i, 0}));
    for (std::size_t k = 0; k < k_group; ++k) g.responses.push_back(old_policy.sample_response(g.features, rng));

    if (ctx.perturb) {
      const auto [twin_seq, spec] = perturb::apply_random_perturbation(item.sample->frames, derive_seed(ctx.seed, {i, 1}));
      const auto twin_x = data::recompute_features(twin_seq, ctx.feature_opts);
      Rng twin_rng = make_rng(derive_seed(ctx.seed, {i, 2}));
      for (std::size_t k = 0; k < k_group; ++k) twins[i].push_back(old_policy.sample_response(twin_x, twin_rng));
    }
  }

  std::vector<rewards::GroupStats> stats;
  stats.reserve(groups.size());
  for (const auto& g : groups) stats.push_back(rewards::GroupStats::from_responses(g.responses));

  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& g = groups[i];
    const std::size_t j = partners[i];
    const rewards::GroupStats* partner = (j != i && j < groups.size()) ? &stats[j] : nullptr;
    const double g_partner = partner ? groups[j].mos : g.mos;
    const auto scores = rewards::score_group(g.responses, g.mos, partner, g_partner, hyper);

    double temp = 0.0;
    if (ctx.perturb) {
      const auto twin_scores = rewards::score_group(twins[i], g.mos, partner, g_partner, hyper);
      g.twin_mean_reg = twin_scores.mean_reg();
      g.twin_mean_rank = twin_scores.mean_rank();
      temp = rewards::temporal_reward(scores.mean_reg(), scores.mean_rank(), g.twin_mean_reg, g.twin_mean_rank,
                                      hyper.delta_temp, hyper.tau_temp);
    }
    g.rewards = rewards::combine(scores, temp);

    std::vector<double> totals;
    totals.reserve(g.rewards.size());
    for (const auto& r : g.rewards) totals.push_back(r.total);
    g.advantages = group_advantages(totals, hyper.eps_stab);
  }
  return groups;
}

TrainResult train(const std::vector<VideoSample>& dataset, const TrainConfig& cfg,
                  const std::vector<VideoSample>& probe) {
  cfg.hyper.validate();
  if (dataset.empty()) fail(ErrorKind::kData, "training dataset is empty");
  const data::FeatureOptions feature_opts{cfg.zero_coherence};

  std::vector<PreparedSample> prepared;
  prepared.reserve(dataset.size());
  for (const auto& s : dataset) prepared.push_back({&s, data::recompute_features(s.frames, feature_opts)});
  const std::size_t dim = prepared.front().features.size();
  for (const auto& p : prepared) {
    if (p.features.size() != dim) fail(ErrorKind::kData, fmt::format("video {} has a different feature dimension", p.sample->id));
  }

  const auto& probe_set = probe.empty() ? dataset : probe;
  std::vector<std::vector<double>> probe_x;
  std::vector<double> probe_mos;
  for (const auto& s : probe_set) {
    probe_x.push_back(data::recompute_features(s.frames, feature_opts));
    probe_mos.push_back(s.mos);
  }

  TrainResult result;
  PolicyParams params = init_policy(dim, cfg);
  const PolicyParams ref = params;
  const auto batch_size = static_cast<std::size_t>(cfg.hyper.batch_size);
  std::size_t step = 0;

  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < static_cast<std::size_t>(cfg.hyper.epochs); ++epoch) {
    Rng shuffle_rng = make_rng(derive_seed(cfg.seed, {0xe90c, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<PreparedSample> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(prepared[order[i]]);

      const PolicyParams old = params;
      const GaussianLinearPolicy old_policy(old);
      const auto partners = pairing_derangement(batch.size(), derive_seed(cfg.pairing_seed, {step}));
      const StepContext ctx{&cfg.hyper, cfg.perturb_every_step, feature_opts, derive_seed(cfg.seed, {0x5e9, step})};
      const auto groups = rollout_batch(batch, partners, old_policy, ctx);

      const Objective obj = grpo_objective(groups, params, old, ref, cfg.hyper);
      if (!std::isfinite(obj.value) ||
          !std::all_of(obj.gradient.begin(), obj.gradient.end(), [](double v) { return std::isfinite(v); })) {
        std::string dump;
        for (const auto& g : groups) {
          bool bad = false;
          for (const auto& r : g.rewards) bad = bad || !std::isfinite(r.total);
          for (double a : g.advantages) bad = bad || !std::isfinite(a);
          if (bad || dump.empty()) dump += dump_group(g);
        }
        fail(ErrorKind::kNumeric, fmt::format("non-finite GRPO objective at step {}:\n{}", step, dump));
      }

      auto flat = params.flatten();
      for (std::size_t j = 0; j < flat.size(); ++j) flat[j] += cfg.hyper.learning_rate * obj.gradient[j];
      params = PolicyParams::unflatten(flat);
      params.project();

      LogRow row;
      row.step = step;
      row.epoch = epoch;
      std::size_t n_resp = 0;
      for (const auto& g : groups) {
        for (const auto& r : g.rewards) {
          row.mean_total_reward += r.total;
          row.mean_fmt += r.fmt;
          row.mean_reg += r.reg;
          row.mean_rank += r.rank;
          row.mean_temp += r.temp;
          ++n_resp;
        }
      }
      const double inv = 1.0 / static_cast<double>(n_resp);
      row.mean_total_reward *= inv;
      row.mean_fmt *= inv;
      row.mean_reg *= inv;
      row.mean_rank *= inv;
      row.mean_temp *= inv;
      row.mean_kl = obj.mean_kl;
      row.objective = obj.value;

      std::vector<double> pred;
      pred.reserve(probe_x.size());
      for (const auto& x : probe_x) pred.push_back(policy_forward(params, x).mean);
      try {
        row.probe_srcc = metrics::srcc(pred, probe_mos);
      } catch (const Error&) {
        row.probe_srcc = 0.0;  // constant predictions or a single probe video
      }
      result.log.push_back(row);
    }
  }
  result.params = std::move(params);
  return result;
}

EvalResult evaluate(const PolicyParams& params, const std::vector<VideoSample>& dataset,
                    const data::FeatureOptions& opts) {
  std::vector<double> pred;
  std::vector<double> mos;
  for (const auto& s : dataset) {
    const auto x = data::recompute_features(s.frames, opts);
    if (x.size() != params.dim()) {
      fail(ErrorKind::kData, fmt::format("model expects {} features but video {} has {}", params.dim(), s.id, x.size()));
    }
    pred.push_back(policy_forward(params, x).mean);
    mos.push_back(s.mos);
  }
  return {metrics::srcc(pred, mos), metrics::plcc(pred, mos), dataset.size()};
}

}  // namespace vqa::grpo
