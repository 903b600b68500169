#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "vqa/data.hpp"
#include "vqa/error.hpp"
#include "vqa/perturb.hpp"

using namespace vqa;
using namespace vqa::data;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("vqa_test_" + name);
  std::ofstream(path) << text;
  return path;
}

// Least squares via normal equations and Gaussian elimination with pivoting.
std::vector<double> least_squares(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  const std::size_t p = rows[0].size();
  std::vector<std::vector<double>> m(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) m[i][j] += rows[r][i] * rows[r][j];
      m[i][p] += rows[r][i] * y[r];
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k <= p; ++k) m[r][k] -= f * m[c][k];
    }
  }
  std::vector<double> beta(p);
  for (std::size_t i = 0; i < p; ++i) beta[i] = m[i][p] / m[i][i];
  return beta;
}

bool contiguous_run(const FrameSequence& seq) {
  for (std::size_t t = 0; t + 1 < seq.size(); ++t)
    if (seq.frame_ids()[t + 1] != seq.frame_ids()[t] + 1) return false;
  return true;
}

}  // namespace

TEST_CASE("synthetic generation is seeded and well formed") {
  SynthSpec spec;
  spec.n_videos = 40;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.videos.size() == 40);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.videos.size(); ++i) {
    CHECK(a.videos[i].frames == b.videos[i].frames);
    CHECK(a.videos[i].mos == b.videos[i].mos);
    CHECK(a.videos[i].mos >= 1.0);
    CHECK(a.videos[i].mos <= 5.0);
    CHECK(a.videos[i].frames.size() == spec.n_frames);
    CHECK(a.videos[i].frames.dim() == spec.feature_dim);
    ids.insert(a.videos[i].id);
  }
  CHECK(ids.size() == 40);
  spec.seed = 1;
  CHECK_FALSE(generate_synthetic(spec).videos[0].frames == a.videos[0].frames);

  SynthSpec bad;
  bad.feature_dim = 2;
  CHECK_THROWS_AS(generate_synthetic(bad), Error);
  bad = {};
  bad.n_frames = 5;
  CHECK_THROWS_AS(generate_synthetic(bad), Error);
}

TEST_CASE("noise-free mos is the oracle of the features") {
  SynthSpec spec;
  spec.n_videos = 50;
  spec.noise_std = 0.0;
  const auto ds = generate_synthetic(spec);
  for (const auto& v : ds.videos) CHECK(v.mos == ds.oracle.mos(recompute_features(v.frames)));
}

TEST_CASE("least squares recovers the oracle weights") {
  SynthSpec spec;
  spec.n_videos = 400;
  spec.noise_std = 0.0;
  const auto ds = generate_synthetic(spec);
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (const auto& v : ds.videos) {
    auto x = recompute_features(v.frames);
    const double raw = ds.oracle.raw_quality(x);
    if (raw <= ds.oracle.scale_lo || raw >= ds.oracle.scale_hi) continue;  // clamped, not linear
    x.push_back(1.0);
    rows.push_back(x);
    y.push_back(v.mos);
  }
  REQUIRE(rows.size() > 300);
  const auto beta = least_squares(rows, y);
  // mos = 1 + 4 (w.x + b - lo) / (hi - lo)
  const double scale = 4.0 / (ds.oracle.scale_hi - ds.oracle.scale_lo);
  for (std::size_t j = 0; j < spec.feature_dim; ++j) {
    const double w = beta[j] / scale;
    CHECK(std::abs(w - ds.oracle.w_star[j]) <= 1e-6 * std::abs(ds.oracle.w_star[j]));
  }
}

TEST_CASE("recompute_features") {
  SynthSpec spec;
  spec.n_videos = 3;
  const auto ds = generate_synthetic(spec);
  const auto& seq = ds.videos[0].frames;
  const auto x = recompute_features(seq);
  REQUIRE(x.size() == spec.feature_dim);
  CHECK(x.back() == coherence(seq));
  CHECK(x.back() <= 1.0);
  CHECK(x.back() > -1.0);

  const auto rev = recompute_features(perturb::reverse(seq));
  for (std::size_t j = 0; j + 1 < x.size(); ++j) CHECK(rev[j] == doctest::Approx(x[j]).epsilon(1e-14));
  CHECK(rev.back() < x.back());

  CHECK(recompute_features(seq.gather(perturb::reverse_indices(seq.size()))) == rev);
  CHECK(recompute_features(seq, {.zero_coherence = true}).back() == 0.0);

  // Freeze-frame: every frame is frame 0, so the motion stalls entirely.
  std::vector<std::size_t> drop(seq.size() - 1);
  std::iota(drop.begin(), drop.end(), 1);
  const auto frozen = perturb::duplicate(seq, 0, seq.size() - 1, 0, drop);
  CHECK(coherence(frozen) < coherence(seq));

  CHECK_THROWS_AS(recompute_features(seq.gather(std::vector<std::size_t>{0})), Error);
}

TEST_CASE("every non-trivial perturbation strictly lowers coherence") {
  SynthSpec spec;
  spec.n_videos = 50;
  const auto ds = generate_synthetic(spec);
  int strict = 0, runs = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto& seq = ds.videos[seed % ds.videos.size()].frames;
    const auto [out, applied] = perturb::apply_random_perturbation(seq, seed);
    if (contiguous_run(out)) {
      // Only a prefix/suffix drop (or an identity draw) leaves a contiguous run.
      CHECK(coherence(out) == doctest::Approx(coherence(seq)).epsilon(1e-12));
      ++runs;
      continue;
    }
    INFO("seed ", seed, " mode ", perturb::mode_name(applied.mode));
    CHECK(coherence(out) < coherence(seq));
    ++strict;
  }
  CHECK(strict > 950);
  MESSAGE(strict, " strict decreases, ", runs, " contiguous-run draws");
}

TEST_CASE("uniform_sample_frames") {
  CHECK(uniform_sample_frames(100, 6) == std::vector<std::size_t>{0, 16, 33, 50, 66, 83});
  CHECK(uniform_sample_frames(6, 6) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  const auto all = uniform_sample_frames(12, 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(uniform_sample_frames(5, 6), Error);
}

TEST_CASE("load_mos_csv") {
  const auto plain = load_mos_csv(write_temp("plain.csv", "id,mos\na,3.0\nb,4.5\n"));
  REQUIRE(plain.size() == 2);
  CHECK(plain[0].id == "a");
  CHECK(plain[0].mos == 3.0);

  const auto scaled = load_mos_csv(write_temp("scaled.csv", "id,mos,scale_lo,scale_hi\nb,75,0,100\n"));
  REQUIRE(scaled.size() == 1);
  CHECK(scaled[0].mos == 4.0);

  CHECK_THROWS_AS(load_mos_csv(write_temp("dup.csv", "id,mos\na,3\na,4\n")), Error);
  CHECK_THROWS_AS(load_mos_csv(write_temp("header.csv", "name,score\na,3\n")), Error);
  CHECK_THROWS_AS(load_mos_csv(write_temp("range.csv", "id,mos\na,7\n")), Error);
  try {
    load_mos_csv(write_temp("bad.csv", "id,mos\na,3\nb,x\n"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("split") {
  SynthSpec spec;
  spec.n_videos = 10;
  const auto ds = generate_synthetic(spec).videos;
  const auto [train, test] = split(ds, 0.8, 3);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  std::multiset<std::string> all;
  for (const auto& v : train) all.insert(v.id);
  for (const auto& v : test) all.insert(v.id);
  std::multiset<std::string> want;
  for (const auto& v : ds) want.insert(v.id);
  CHECK(all == want);
  const auto again = split(ds, 0.8, 3);
  CHECK(again.first[0].id == train[0].id);
  CHECK(again.second[1].id == test[1].id);
  CHECK_THROWS_AS(split(ds, 1.0, 3), Error);
  CHECK_THROWS_AS(split(ds, 0.0, 3), Error);
}
