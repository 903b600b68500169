#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "vqa/error.hpp"
#include "vqa/perturb.hpp"

using namespace vqa;
using namespace vqa::perturb;

namespace {

FrameSequence ids(std::vector<std::int64_t> v) { return FrameSequence::ids_only(std::move(v)); }

FrameSequence iota_seq(std::size_t n) {
  std::vector<std::int64_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return ids(v);
}

// Each frame carries its id as its only feature, so detached features show up.
FrameSequence tagged(std::size_t n) {
  std::vector<std::int64_t> v(n);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 100 + static_cast<std::int64_t>(i), f[i] = 100.0 + i;
  return FrameSequence(v, f, 1);
}

std::vector<std::int64_t> sorted(std::vector<std::int64_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

constexpr std::int64_t A = 0, B = 1, C = 2, D = 3, E = 4;

}  // namespace

TEST_CASE("global_shuffle") {
  const std::vector<std::size_t> perm = {1, 2, 0};
  CHECK(global_shuffle(ids({A, B, C}), perm).frame_ids() == std::vector<std::int64_t>{B, C, A});
  const std::vector<std::size_t> one = {0};
  CHECK(global_shuffle(ids({A}), one).frame_ids() == std::vector<std::int64_t>{A});
  const std::vector<std::size_t> identity = {0, 1, 2, 3};
  CHECK(global_shuffle(ids({A, B, C, D}), identity) == ids({A, B, C, D}));

  const std::vector<std::size_t> repeated = {0, 0, 2};
  const std::vector<std::size_t> short_perm = {0, 1};
  const std::vector<std::size_t> out_of_range = {0, 1, 3};
  CHECK_THROWS_AS(global_shuffle(ids({A, B, C}), repeated), Error);
  CHECK_THROWS_AS(global_shuffle(ids({A, B, C}), short_perm), Error);
  CHECK_THROWS_AS(global_shuffle(ids({A, B, C}), out_of_range), Error);
}

TEST_CASE("local_shuffle") {
  const std::vector<std::vector<std::size_t>> perms = {{2, 0, 3, 1}, {1, 0, 3, 2}};
  CHECK(local_shuffle(iota_seq(8), 4, perms).frame_ids() == std::vector<std::int64_t>{2, 0, 3, 1, 5, 4, 7, 6});

  const std::vector<std::vector<std::size_t>> identity = {{0, 1, 2, 3}};
  CHECK(local_shuffle(iota_seq(5), 4, identity) == iota_seq(5));

  CHECK_THROWS_AS(local_shuffle(iota_seq(8), 4, identity), Error);
  CHECK_THROWS_AS(local_shuffle(iota_seq(8), 1, perms), Error);
  const std::vector<std::vector<std::size_t>> bad = {{0, 0, 1, 2}, {0, 1, 2, 3}};
  CHECK_THROWS_AS(local_shuffle(iota_seq(8), 4, bad), Error);
}

TEST_CASE("reverse") {
  CHECK(reverse(ids({A, B, C, D})).frame_ids() == std::vector<std::int64_t>{D, C, B, A});
  CHECK(reverse(ids({A})) == ids({A}));
  CHECK(reverse(reverse(tagged(9))) == tagged(9));
}

TEST_CASE("jitter") {
  const std::vector<int> offsets = {0, 1, -1, 0};
  CHECK(jitter(ids({A, B, C, D}), offsets).frame_ids() == std::vector<std::int64_t>{A, C, B, D});
  const std::vector<int> edges = {-1, 1};
  CHECK(jitter(ids({A, B}), edges).frame_ids() == std::vector<std::int64_t>{A, B});
  const std::vector<int> zeros(6, 0);
  CHECK(jitter(iota_seq(6), zeros) == iota_seq(6));

  const std::vector<int> big = {0, 2, 0, 0};
  const std::vector<int> short_offsets = {0, 0};
  CHECK_THROWS_AS(jitter(ids({A, B, C, D}), big), Error);
  CHECK_THROWS_AS(jitter(ids({A, B, C, D}), short_offsets), Error);
}

TEST_CASE("duplicate") {
  const std::vector<std::size_t> drop_a = {0};
  CHECK(duplicate(ids({A, B, C, D}), 1, 1, 3, drop_a).frame_ids() == std::vector<std::int64_t>{B, C, B, D});
  const std::vector<std::size_t> drop_bc = {1, 2};
  CHECK(duplicate(ids({A, B, C}), 0, 2, 0, drop_bc).frame_ids() == std::vector<std::int64_t>{A, A, A});

  const std::vector<std::size_t> drop_k = {1};
  const std::vector<std::size_t> drop_two = {0, 2};
  const std::vector<std::size_t> drop_far = {7};
  CHECK_THROWS_AS(duplicate(ids({A, B, C, D}), 1, 1, 3, drop_k), Error);
  CHECK_THROWS_AS(duplicate(ids({A, B, C, D}), 1, 1, 3, drop_two), Error);
  CHECK_THROWS_AS(duplicate(ids({A, B, C, D}), 1, 1, 3, drop_far), Error);
  CHECK_THROWS_AS(duplicate(ids({A, B, C, D}), 4, 1, 3, drop_a), Error);
  CHECK_THROWS_AS(duplicate(ids({A, B, C, D}), 1, 1, 5, drop_a), Error);
  // Inserting at the end is allowed.
  CHECK(duplicate(ids({A, B, C, D}), 0, 1, 4, drop_k).frame_ids() == std::vector<std::int64_t>{A, C, D, A});
}

TEST_CASE("random_drop") {
  const std::vector<std::size_t> drop = {1, 3};
  CHECK(random_drop(ids({A, B, C, D, E}), drop).frame_ids() == std::vector<std::int64_t>{A, C, E});
  CHECK(random_drop(tagged(5), {}) == tagged(5));
  const std::vector<std::size_t> all = {0, 1, 2};
  const std::vector<std::size_t> dup = {1, 1};
  CHECK_THROWS_AS(random_drop(ids({A, B, C}), all), Error);
  CHECK_THROWS_AS(random_drop(ids({A, B, C}), dup), Error);
}

TEST_CASE("mode names round trip") {
  for (const Mode m : kAllModes) CHECK(parse_mode(mode_name(m)) == m);
  CHECK_FALSE(parse_mode("blur").has_value());
}

TEST_CASE("applicable modes and apply_random_perturbation preconditions") {
  CHECK(applicable_modes(24).size() == 6);
  CHECK(applicable_modes(3).size() == 5);
  CHECK_THROWS_AS(apply_random_perturbation(ids({A}), 1), Error);
  CHECK(default_count(24) == 5);
  CHECK(default_count(2) == 1);
}

TEST_CASE("seeded operator invariants") {
  const auto seq = tagged(24);
  for (const Mode m : kAllModes) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto spec = random_spec(m, seq.size(), seed);
      const auto out = apply(seq, spec);
      // Features stay attached to their frame ids.
      for (std::size_t t = 0; t < out.size(); ++t) REQUIRE(out.row(t)[0] == static_cast<double>(out.frame_ids()[t]));

      if (m == Mode::kRandomDrop) {
        REQUIRE(out.size() == seq.size() - spec.count);
        REQUIRE(std::includes(seq.frame_ids().begin(), seq.frame_ids().end(), out.frame_ids().begin(),
                              out.frame_ids().end()));
      } else {
        REQUIRE(out.size() == seq.size());
      }
      if (m == Mode::kGlobalShuffle || m == Mode::kLocalShuffle || m == Mode::kReverse) {
        REQUIRE(sorted(out.frame_ids()) == seq.frame_ids());
      }
      if (m == Mode::kLocalShuffle) {
        for (std::size_t w = 0; w + spec.window <= seq.size(); w += spec.window) {
          std::vector<std::int64_t> got(out.frame_ids().begin() + w, out.frame_ids().begin() + w + spec.window);
          std::vector<std::int64_t> want(seq.frame_ids().begin() + w, seq.frame_ids().begin() + w + spec.window);
          REQUIRE(sorted(got) == want);
        }
      }
    }
  }
}

TEST_CASE("apply_random_perturbation is deterministic and replayable") {
  const auto seq = tagged(24);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto [out, spec] = apply_random_perturbation(seq, seed);
    const auto [again, spec_again] = apply_random_perturbation(seq, seed);
    CHECK(out == again);
    CHECK(spec == spec_again);
    CHECK(apply(seq, spec) == out);
  }
}

TEST_CASE("mode draw is uniform over applicable modes") {
  const auto seq = iota_seq(24);
  std::map<Mode, int> counts;
  for (std::uint64_t seed = 0; seed < 6000; ++seed) ++counts[apply_random_perturbation(seq, seed).second.mode];
  CHECK(counts.size() == 6);
  for (const auto& [mode, n] : counts) {
    INFO(mode_name(mode), " ", n);
    CHECK(n >= 950);
    CHECK(n <= 1050);
  }
  // Too short for a window of 4: local shuffle never drawn.
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    CHECK(apply_random_perturbation(iota_seq(3), seed).second.mode != Mode::kLocalShuffle);
  }
}
