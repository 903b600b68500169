#include "vqa/core.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

namespace vqa {

FrameSequence::FrameSequence(std::vector<std::int64_t> frame_ids, std::vector<double> features,
                             std::size_t dim)
    : frame_ids_(std::move(frame_ids)), features_(std::move(features)), dim_(dim) {
  require(!frame_ids_.empty(), "frame sequence must hold at least one frame");
  require(features_.size() == frame_ids_.size() * dim_,
          fmt::format("feature buffer holds {} values, expected {} frames x dim {}", features_.size(),
                      frame_ids_.size(), dim_));
}

FrameSequence::FrameSequence(std::vector<std::int64_t> frame_ids,
                             const std::vector<std::vector<double>>& rows) {
  require(frame_ids.size() == rows.size(),
          fmt::format("{} frame ids but {} feature rows", frame_ids.size(), rows.size()));
  require(!frame_ids.empty(), "frame sequence must hold at least one frame");
  const std::size_t dim = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    require(r.size() == dim, "all feature rows must share one dimension");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  *this = FrameSequence(std::move(frame_ids), std::move(flat), dim);
}

FrameSequence FrameSequence::ids_only(std::vector<std::int64_t> frame_ids) {
  return FrameSequence(std::move(frame_ids), std::vector<double>{}, 0);
}

FrameSequence FrameSequence::gather(std::span<const std::size_t> source) const {
  std::vector<std::int64_t> ids;
  std::vector<double> feats;
  ids.reserve(source.size());
  feats.reserve(source.size() * dim_);
  for (std::size_t s : source) {
    require(s < size(), fmt::format("source index {} out of range for {} frames", s, size()));
    ids.push_back(frame_ids_[s]);
    auto r = row(s);
    feats.insert(feats.end(), r.begin(), r.end());
  }
  return FrameSequence(std::move(ids), std::move(feats), dim_);
}

void HyperParams::validate() const {
  require(k_group >= 2, fmt::format("k_group must be >= 2, got {}", k_group));
  require(clip_eps > 0.0, "clip_eps must be positive");
  require(sigma_reg > 0.0, "sigma_reg must be positive");
  require(alpha_reg > 0.0 && alpha_reg <= 1.0, "alpha_reg must lie in (0, 1]");
  require(eps_stab > 0.0, "eps_stab must be positive");
  require(delta_temp > 0.0, "delta_temp must be positive");
  require(beta_kl >= 0.0, "beta_kl must be non-negative");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
}

double normalize_mos(double raw, double lo, double hi) {
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo,
          fmt::format("invalid MOS range [{}, {}]", lo, hi));
  require(std::isfinite(raw) && raw >= lo && raw <= hi,
          fmt::format("MOS {} outside its scale [{}, {}]", raw, lo, hi));
  return kMosMin + (kMosMax - kMosMin) * (raw - lo) / (hi - lo);
}

}  // namespace vqa
