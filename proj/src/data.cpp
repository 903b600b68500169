#include "vqa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "vqa/rewards.hpp"
#include "vqa/rng.hpp"

namespace vqa::data {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  require(n_videos >= 1, "synth: n_videos must be >= 1");
  require(n_frames >= 6, fmt::format("synth: n_frames must be >= 6, got {}", n_frames));
  require(feature_dim >= 3, fmt::format("synth: feature_dim must be >= 3, got {}", feature_dim));
  require(noise_std >= 0.0, "synth: noise_std must be non-negative");
  require(temporal_coherence_weight >= 0.0, "synth: temporal_coherence_weight must be non-negative");
}

double Oracle::raw_quality(std::span<const double> features) const {
  require(features.size() == w_star.size(),
          fmt::format("oracle: {} features for {} weights", features.size(), w_star.size()));
  double q = bias;
  for (std::size_t j = 0; j < w_star.size(); ++j) q += w_star[j] * features[j];
  return q;
}

double Oracle::mos(std::span<const double> features) const {
  const double raw = std::clamp(raw_quality(features), scale_lo, scale_hi);
  return normalize_mos(raw, scale_lo, scale_hi);
}

Oracle make_oracle(std::size_t feature_dim, double temporal_coherence_weight) {
  require(feature_dim >= 3, "oracle: feature_dim must be >= 3");
  Oracle o;
  o.w_star.assign(feature_dim, 0.0);
  o.w_star[0] = 17.0;   // sharper is better
  o.w_star[1] = -12.0;  // noisier is worse
  for (std::size_t j = 2; j + 1 < feature_dim; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    o.w_star[j] = sign * 3.0 / static_cast<double>(j - 1);
  }
  o.w_star[feature_dim - 1] = 18.0 * temporal_coherence_weight;

  // Centre the raw score at 50: content channels are U(-1,1) and natural
  // coherence spans [2 / (1 + kMaxJudder * kMotionStep) - 1, 1].
  const double coh_mid = 0.5 * (2.0 / (1.0 + kMaxJudder * kMotionStep) - 1.0 + 1.0);
  const double centre = coh_mid * o.w_star[feature_dim - 1];
  o.bias = 0.5 * (kRawScaleLo + kRawScaleHi) - centre;
  return o;
}

SynthDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthDataset out;
  out.oracle = make_oracle(spec.feature_dim, spec.temporal_coherence_weight);
  const std::size_t d = spec.feature_dim;
  const std::size_t t_len = spec.n_frames;

  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    Rng rng = make_rng(derive_seed(spec.seed, {v}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> level(-1.0, 1.0);

    std::vector<double> content(d - 1);
    for (double& c : content) c = level(rng);
    const double judder = kMaxJudder * kMotionStep * unit(rng);
    double phase = kMotionStep * unit(rng);
    const double first_sign = unit(rng) < 0.5 ? -1.0 : 1.0;

    std::vector<std::int64_t> ids(t_len);
    std::vector<double> feats;
    feats.reserve(t_len * d);
    for (std::size_t t = 0; t < t_len; ++t) {
      ids[t] = static_cast<std::int64_t>(t);
      feats.insert(feats.end(), content.begin(), content.end());
      feats.push_back(phase);
      const double sign = (t % 2 == 0) ? first_sign : -first_sign;
      phase += kMotionStep + sign * judder;
    }

    VideoSample sample;
    sample.id = fmt::format("synth_{:05d}", v);
    sample.frames = FrameSequence(std::move(ids), std::move(feats), d);

    const auto x = recompute_features(sample.frames);
    double mos = out.oracle.mos(x);
    if (spec.noise_std > 0.0) {
      mos += std::normal_distribution<double>(0.0, spec.noise_std)(rng);
    }
    sample.mos = std::clamp(mos, kMosMin, kMosMax);
    out.videos.push_back(std::move(sample));
  }
  return out;
}

double coherence(const FrameSequence& seq) {
  require(seq.size() >= 2, fmt::format("coherence needs at least 2 frames, got {}", seq.size()));
  require(seq.dim() >= 1, "coherence needs a motion channel");
  const std::size_t d = seq.dim();
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    const auto a = seq.row(t);
    const auto b = seq.row(t + 1);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double expected = (j + 1 == d) ? kMotionStep : 0.0;
      const double diff = b[j] - a[j] - expected;
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return 2.0 / (1.0 + total / static_cast<double>(seq.size() - 1)) - 1.0;
}

std::vector<double> recompute_features(const FrameSequence& seq, const FeatureOptions& opts) {
  require(seq.size() >= 2, fmt::format("feature extraction needs at least 2 frames, got {}", seq.size()));
  require(seq.dim() >= 2, "feature extraction needs a content channel and a motion channel");
  const std::size_t d = seq.dim();
  std::vector<double> x(d, 0.0);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto r = seq.row(t);
    for (std::size_t j = 0; j + 1 < d; ++j) x[j] += r[j];
  }
  for (std::size_t j = 0; j + 1 < d; ++j) x[j] /= static_cast<double>(seq.size());
  x[d - 1] = opts.zero_coherence ? 0.0 : coherence(seq);
  return x;
}

std::vector<std::size_t> uniform_sample_frames(std::size_t total, std::size_t count) {
  require(count >= 1, "frame sampling: count must be >= 1");
  if (count > total) {
    fail(ErrorKind::kData, fmt::format("frame sampling: {} frames requested from a {}-frame video", count, total));
  }
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i * total / count;
  return idx;
}

std::vector<VideoSample> load_mos_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kData, fmt::format("{}: empty file", path.string()));
  const auto header = split_csv(line);
  const bool scaled = header.size() == 4;
  if (!((header.size() == 2 || scaled) && header[0] == "id" && header[1] == "mos" &&
        (!scaled || (header[2] == "scale_lo" && header[3] == "scale_hi")))) {
    fail(ErrorKind::kData, fmt::format("{}:1: expected header id,mos[,scale_lo,scale_hi]", path.string()));
  }

  std::vector<VideoSample> out;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const auto where = fmt::format("{}:{}", path.string(), line_no);
    if (cells.size() != header.size() || cells[0].empty()) {
      fail(ErrorKind::kData, fmt::format("{}: expected {} columns", where, header.size()));
    }
    const auto mos = rewards::parse_decimal(cells[1]);
    if (!mos) fail(ErrorKind::kData, fmt::format("{}: unparseable mos '{}'", where, cells[1]));
    VideoSample s;
    s.id = cells[0];
    try {
      if (scaled) {
        const auto lo = rewards::parse_decimal(cells[2]);
        const auto hi = rewards::parse_decimal(cells[3]);
        if (!lo || !hi) fail(ErrorKind::kData, fmt::format("{}: unparseable scale", where));
        s.mos = normalize_mos(*mos, *lo, *hi);
      } else {
        require(*mos >= kMosMin && *mos <= kMosMax, fmt::format("mos {} outside [1, 5]", *mos));
        s.mos = *mos;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kData) throw;
      fail(ErrorKind::kData, fmt::format("{}: {}", where, e.what()));
    }
    if (!seen.insert(s.id).second) fail(ErrorKind::kData, fmt::format("{}: duplicate id '{}'", where, s.id));
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<std::vector<VideoSample>, std::vector<VideoSample>> split(const std::vector<VideoSample>& dataset,
                                                                    double train_frac, std::uint64_t seed) {
  require(train_frac > 0.0 && train_frac < 1.0, fmt::format("split: train fraction {} outside (0, 1)", train_frac));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(dataset.size())));
  std::pair<std::vector<VideoSample>, std::vector<VideoSample>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(dataset[order[i]]);
  }
  return out;
}

}  // namespace vqa::data
