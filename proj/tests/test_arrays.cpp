#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "latinbox/arrays.hpp"
#include "oracles.hpp"

using namespace latinbox;

TEST(Rng, DeterministicAndSeedSensitive) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    (void)c;
  }
  EXPECT_NE(Rng(42).next(), Rng(43).next());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Rng, JumpGivesDistinctStream) {
  Rng a(5);
  Rng b = a.substream(1);
  EXPECT_NE(a.next(), b.next());
}

TEST(Rng, BelowIsUniform) {
  Rng rng(11);
  std::vector<int> counts(6, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[rng.below(6)];
  const double sigma = std::sqrt(draws * (1.0 / 6) * (5.0 / 6));
  for (int c : counts) EXPECT_NEAR(c, draws / 6.0, 4 * sigma);
}

TEST(Rng, Below128HandlesWideBounds) {
  Rng rng(3);
  const unsigned __int128 bound = (static_cast<unsigned __int128>(1) << 100) + 12345;
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below128(bound), bound);
}

TEST(Array3D, OnesTracksSetBits) {
  Array3D a(Dims{3, 4, 70});
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const int r = static_cast<int>(rng.below(3)), c = static_cast<int>(rng.below(4)), v = static_cast<int>(rng.below(70));
    a.set(r, c, v, rng.bernoulli(0.6));
    ASSERT_EQ(a.ones(), a.count_ones_slow());
  }
  EXPECT_THROW((void)a.get(3, 0, 0), std::out_of_range);
  EXPECT_THROW((void)a.get(0, 0, 70), std::out_of_range);
}

TEST(Array3D, RejectsZeroDims) { EXPECT_THROW(Array3D(Dims{0, 2, 2}), std::invalid_argument); }

TEST(SampleBinomial, Extremes) {
  EXPECT_EQ(sample_binomial(Dims{2, 2, 2}, 0.0, 1).ones(), 0u);
  EXPECT_EQ(sample_binomial(Dims{2, 2, 2}, 1.0, 1).ones(), 8u);
  EXPECT_THROW(sample_binomial(Dims{2, 2, 2}, 1.5, 1), std::invalid_argument);
}

TEST(SampleBinomial, MeanOnes) {
  const int trials = 10000;
  double sum = 0;
  for (int t = 0; t < trials; ++t) sum += static_cast<double>(sample_binomial(Dims{4, 4, 4}, 0.5, derive_seed(1, t)).ones());
  const double sigma = std::sqrt(64 * 0.25) / std::sqrt(static_cast<double>(trials));
  EXPECT_NEAR(sum / trials, 32.0, 3 * sigma);
}

TEST(SampleBinomial, Deterministic) {
  EXPECT_EQ(sample_binomial(Dims{3, 3, 5}, 0.4, 77), sample_binomial(Dims{3, 3, 5}, 0.4, 77));
}

TEST(SampleProcess, SingleCell) {
  const ArrayProcess p = sample_process(1, 1, 5);
  ASSERT_EQ(p.length(), 1u);
  const Cell c = p.cell(0);
  EXPECT_EQ(c.r, 0);
  EXPECT_EQ(c.c, 0);
  EXPECT_EQ(c.v, 0);
  EXPECT_EQ(p.shaft_hitting_time(), 1u);
}

TEST(SampleProcess, PrefixSizesAndSaturation) {
  const ArrayProcess p = sample_process(3, 4, 8);
  for (std::size_t t = 0; t <= p.length(); t += 5) EXPECT_EQ(p.prefix(t).ones(), t);
  const Array3D full = p.prefix(p.length());
  EXPECT_EQ(full.ones(), 36u);
  EXPECT_TRUE(empty_shafts(full).empty());
  EXPECT_EQ(p.prefix(0).ones(), 0u);
  std::set<std::uint32_t> seen(p.order.begin(), p.order.end());
  EXPECT_EQ(seen.size(), p.length());
}

TEST(SampleProcess, FirstCellUniform) {
  const int trials = 10000;
  std::vector<int> counts(8, 0);
  for (int t = 0; t < trials; ++t) ++counts[sample_process(2, 2, derive_seed(3, t)).order[0]];
  const double sigma = std::sqrt(trials * (1.0 / 8) * (7.0 / 8));
  for (int c : counts) EXPECT_NEAR(c, trials / 8.0, 3 * sigma);
}

TEST(SampleProcess, ShaftHittingTimeIsFirstFullCover) {
  for (int s = 0; s < 50; ++s) {
    const ArrayProcess p = sample_process(3, 4, derive_seed(10, s));
    const std::size_t tau = p.shaft_hitting_time();
    EXPECT_TRUE(empty_shafts(p.prefix(tau)).empty());
    EXPECT_FALSE(empty_shafts(p.prefix(tau - 1)).empty());
  }
}

TEST(GreenBlue, Extremes) {
  const ColoredArray full = sample_green_blue(3, 4, 1.0, 1);
  EXPECT_EQ(full.blue.ones(), 0u);
  const ColoredArray none = sample_green_blue(3, 4, 0.0, 1);
  EXPECT_EQ(none.blue.ones(), 9u);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(none.blue.shaft_count(r, c), 1);
}

TEST(GreenBlue, InvariantsHold) {
  for (int s = 0; s < 200; ++s) {
    const ColoredArray ca = sample_green_blue(4, 6, 0.15, derive_seed(4, s));
    const Array3D m = ca.combined();
    EXPECT_TRUE(empty_shafts(m).empty());
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        const int g = ca.green.shaft_count(r, c), b = ca.blue.shaft_count(r, c);
        EXPECT_EQ(b, g == 0 ? 1 : 0);
        for (int v = 0; v < 6; ++v) EXPECT_FALSE(ca.green.get(r, c, v) && ca.blue.get(r, c, v));
      }
  }
}

TEST(GreenBlue, BluePositionUniform) {
  const int trials = 10000;
  std::vector<int> counts(3, 0);
  for (int t = 0; t < trials; ++t) {
    const ColoredArray ca = sample_green_blue(2, 3, 0.0, derive_seed(6, t));
    ++counts[ca.blue.shaft_symbols(1, 0).at(0)];
  }
  const double sigma = std::sqrt(trials * (1.0 / 3) * (2.0 / 3));
  for (int c : counts) EXPECT_NEAR(c, trials / 3.0, 3 * sigma);
}

TEST(EmptyShafts, Examples) {
  EXPECT_TRUE(empty_shafts(Array3D::full(Dims{2, 2, 2})).empty());
  const std::vector<Position> all = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  EXPECT_EQ(empty_shafts(Array3D(Dims{2, 2, 2})), all);
  Array3D one(Dims{2, 2, 2});
  one.set(0, 0, 1);
  const std::vector<Position> rest = {{0, 1}, {1, 0}, {1, 1}};
  EXPECT_EQ(empty_shafts(one), rest);
}

TEST(EmptyShafts, MatchesNaiveExhaustively) {
  // every 2x2x2 array
  for (unsigned mask = 0; mask < 256; ++mask) {
    Array3D a(Dims{2, 2, 2});
    for (int i = 0; i < 8; ++i)
      if ((mask >> i) & 1u) a.set(i / 4, (i / 2) % 2, i % 2);
    ASSERT_EQ(empty_shafts(a), oracle::naive_empty_shafts(a));
  }
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    const int m = 3 + static_cast<int>(rng.below(2)), n = 3 + static_cast<int>(rng.below(2));
    const Array3D a = sample_binomial(Dims{m, n, 4}, 0.2, rng);
    ASSERT_EQ(empty_shafts(a), oracle::naive_empty_shafts(a));
  }
}

TEST(ShaftDegrees, Examples) {
  const ShaftDegrees full = shaft_degrees(Array3D::full(Dims{2, 2, 3}), 1, 1);
  EXPECT_EQ(full.d, 3);
  EXPECT_EQ(full.d_m, 1);
  const ShaftDegrees zero = shaft_degrees(Array3D(Dims{2, 2, 3}), 0, 0);
  EXPECT_EQ(zero.d, 0);
  EXPECT_EQ(zero.d_m, 0);
  Array3D a(Dims{2, 2, 3});
  a.set(0, 1, 0);
  a.set(0, 1, 2);
  const ShaftDegrees two = shaft_degrees(a, 0, 1);
  EXPECT_EQ(two.d, 2);
  EXPECT_EQ(two.d_m, 1);
}

TEST(ShaftDegrees, WideShaftsCrossWordBoundary) {
  Array3D a(Dims{2, 2, 130});
  for (int v : {0, 1, 63, 64, 65, 127, 128, 129}) a.set(1, 0, v);
  const ShaftDegrees d = shaft_degrees(a, 1, 0);
  EXPECT_EQ(d.d, 8);
  EXPECT_EQ(d.d_m, 6);  // symbols >= 2
  EXPECT_EQ(a.shaft_count(1, 0, 64), 5);
}

TEST(Validate, Examples) {
  const Array3D ones = Array3D::full(Dims{4, 4, 4});
  const PartialLatinBox empty(4, 4, 4);
  const BoxValidity e = validate_latin_box(empty, ones);
  EXPECT_TRUE(e.valid);
  EXPECT_FALSE(e.proper);
  const BoxValidity cyc = validate_latin_box(cyclic_square(4), ones);
  EXPECT_TRUE(cyc.valid);
  EXPECT_TRUE(cyc.proper);
  PartialLatinBox bad(4, 4, 4);
  bad.assign_unchecked(0, 0, 2);
  bad.assign_unchecked(0, 3, 2);
  EXPECT_FALSE(validate_latin_box(bad, ones).valid);
  EXPECT_THROW(validate_latin_box(empty, Array3D::full(Dims{3, 4, 4})), std::invalid_argument);
}

TEST(Validate, RequiresSupport) {
  Array3D a = Array3D::full(Dims{3, 3, 3});
  const PartialLatinBox cyc = cyclic_square(3);
  a.reset(1, 1, cyc.at(1, 1));
  EXPECT_FALSE(validate_latin_box(cyc, a).valid);
}

TEST(Validate, MonotoneInArray) {
  Rng rng(21);
  for (int t = 0; t < 300; ++t) {
    Array3D a = sample_binomial(Dims{3, 3, 3}, 0.7, rng);
    PartialLatinBox b(3, 3, 3);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int v : a.shaft_symbols(r, c))
          if (b.can_assign(r, c, v)) {
            b.assign(r, c, v);
            break;
          }
    ASSERT_TRUE(validate_latin_box(b, a).valid);
    a.set(static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)));
    EXPECT_TRUE(validate_latin_box(b, a).valid);
  }
}

TEST(PartialLatinBox, AssignRejectsConflicts) {
  PartialLatinBox b(2, 3, 3);
  b.assign(0, 0, 1);
  EXPECT_THROW(b.assign(0, 2, 1), std::logic_error);
  EXPECT_THROW(b.assign(1, 0, 1), std::logic_error);
  b.assign(1, 1, 1);
  EXPECT_TRUE(b.distinct_lines());
  b.erase(1, 1);
  EXPECT_FALSE(b.covered(1, 1));
}

TEST(AllLatinSquares, Counts) {
  EXPECT_EQ(all_latin_squares(1).size(), 1u);
  EXPECT_EQ(all_latin_squares(2).size(), 2u);
  EXPECT_EQ(all_latin_squares(3).size(), 12u);
  EXPECT_EQ(all_latin_squares(4).size(), 576u);
}

TEST(Serialization, BinaryRoundTrip) {
  const Array3D a = sample_binomial(Dims{3, 5, 67}, 0.3, 99);
  std::stringstream ss;
  write_binary(ss, a);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "LBX3");
  std::stringstream in(bytes);
  EXPECT_EQ(read_binary(in), a);
}

TEST(Serialization, BinaryRejectsBadMagic) {
  std::stringstream ss("XXXX0000");
  EXPECT_THROW(read_binary(ss), std::runtime_error);
}

TEST(Serialization, JsonRoundTripIsOneBased) {
  Array3D a(Dims{2, 2, 3});
  a.set(0, 1, 2);
  const auto j = to_json(a);
  EXPECT_EQ(j["ones"][0], (nlohmann::json{1, 2, 3}));
  EXPECT_EQ(array_from_json(j), a);
  const auto g = to_json(cyclic_square(2));
  EXPECT_EQ(g[0], (nlohmann::json{1, 2}));
}
