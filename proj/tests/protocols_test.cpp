#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "cyin/errors.hpp"
#include "cyin/protocols.hpp"

namespace cyin {
namespace {

TEST(FixedMask, MissingRates) {
  EXPECT_EQ(compute_mr(fixed_mask(10, {0, 1, 2}, 3)), 0.0);
  EXPECT_DOUBLE_EQ(compute_mr(fixed_mask(10, {0}, 3)), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(compute_mr(fixed_mask(10, {0, 2}, 3)), 1.0 / 3.0);
  for (std::size_t n : {1u, 7u, 1000u})
    EXPECT_EQ(compute_mr(fixed_mask(n, {1, 3}, 4)), 1.0 - 2.0 / 4.0);
  PresenceMask m = fixed_mask(3, {0, 2}, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(m.present(i, 0));
    EXPECT_FALSE(m.present(i, 1));
    EXPECT_TRUE(m.present(i, 2));
  }
}

TEST(FixedMask, InvalidSets) {
  EXPECT_THROW(fixed_mask(4, {}, 3), ProtocolError);
  EXPECT_THROW(fixed_mask(4, {3}, 3), ProtocolError);
}

TEST(RandomMask, ZeroRateIsComplete) {
  EXPECT_TRUE(random_mask(50, 3, 0.0, 1).all_present());
}

TEST(ComputeMr, HandCounts) {
  PresenceMask m(4, 3, false);
  const int counts[4] = {3, 2, 1, 2};
  for (std::size_t i = 0; i < 4; ++i)
    for (int j = 0; j < counts[i]; ++j) m.set(i, j, true);
  EXPECT_DOUBLE_EQ(compute_mr(m), 1.0 / 3.0);
}

TEST(RandomMask, AchievedRateWithinOneCount) {
  for (double target : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 2.0 / 3.0}) {
    PresenceMask m = random_mask(1000, 3, target, 42);
    EXPECT_LE(std::abs(compute_mr(m) - target), 1.0 / 3000 + 1e-15) << target;
    EXPECT_NO_THROW(m.validate());
  }
}

TEST(RandomMask, InfeasibleTargetNamesBound) {
  try {
    random_mask(1000, 3, 0.7, 1);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("0.666667"), std::string::npos) << e.what();
  }
  PresenceMask clamped = random_mask_clamped(1000, 3, 0.7, 1);
  EXPECT_DOUBLE_EQ(compute_mr(clamped), 2.0 / 3.0);
}

TEST(RandomMask, DeterministicUnderSeed) {
  PresenceMask a = random_mask(200, 4, 0.4, 9), b = random_mask(200, 4, 0.4, 9),
               c = random_mask(200, 4, 0.4, 10);
  bool same = true, differ = false;
  for (std::size_t i = 0; i < 200; ++i)
    for (int m = 0; m < 4; ++m) {
      same = same && a.present(i, m) == b.present(i, m);
      differ = differ || a.present(i, m) != c.present(i, m);
    }
  EXPECT_TRUE(same);
  EXPECT_TRUE(differ);
}

TEST(RandomMask, UsesEveryModalityAndCountPattern) {
  PresenceMask m = random_mask(3000, 3, 0.4, 3);
  std::set<int> counts;
  for (std::size_t i = 0; i < 3000; ++i) counts.insert(m.row_count(i));
  EXPECT_EQ(counts, (std::set<int>{1, 2, 3}));
  for (int u = 0; u < 3; ++u) {
    const auto col = m.column(u);
    const double frac = std::count(col.begin(), col.end(), true) / 3000.0;
    EXPECT_NEAR(frac, 0.6, 0.05) << u;
  }
}

Batch ones_batch(int n, int l) {
  Batch b;
  b.seq_len = l;
  b.labels.values = Vector::Zero(n);
  b.inputs = {Matrix::Ones(n * l, 2), Matrix::Ones(n * l, 3)};
  return b;
}

TEST(ApplyMask, ZeroesMissingOnly) {
  Batch b = ones_batch(3, 2);
  EXPECT_EQ(apply_mask(b, PresenceMask(3, 2)).inputs[0], b.inputs[0]);
  PresenceMask none1(3, 2);
  for (std::size_t i = 0; i < 3; ++i) none1.set(i, 1, false);
  EXPECT_EQ(apply_mask(b, none1).inputs[1].norm(), 0.0);

  PresenceMask mixed = random_mask(3, 2, 0.5, 4);
  Batch masked = apply_mask(b, mixed);
  for (int m = 0; m < 2; ++m)
    for (ag::Index r = 0; r < masked.inputs[m].rows(); ++r)
      for (ag::Index c = 0; c < masked.inputs[m].cols(); ++c)
        EXPECT_EQ(masked.inputs[m](r, c) != 0.0, mixed.present(static_cast<std::size_t>(r / 2), m));
  EXPECT_THROW(apply_mask(b, PresenceMask(4, 2)), DimensionError);
}

TEST(MaskCsv, Format) {
  PresenceMask m = fixed_mask(2, {1}, 3);
  std::ostringstream out;
  std::vector<std::uint64_t> ids{7, 9};
  write_mask_csv(out, m, ids);
  EXPECT_EQ(out.str(), "sample_id,m0,m1,m2\n7,0,1,0\n9,0,1,0\n");
}

TEST(ProtocolParse, Forms) {
  EXPECT_EQ(Protocol::parse("complete").kind, ProtocolKind::Complete);
  Protocol f = Protocol::parse("fixed:l,v");
  EXPECT_EQ(f.present, (std::vector<int>{0, 2}));
  EXPECT_EQ(f.to_string(), "fixed:0,2");
  EXPECT_EQ(Protocol::parse("fixed:2,0").present, (std::vector<int>{0, 2}));
  Protocol r = Protocol::parse("random:0.3");
  EXPECT_DOUBLE_EQ(r.missing_rate, 0.3);
  EXPECT_EQ(r.to_string(), "random:0.3");
  for (const char* bad : {"", "partial", "fixed:", "fixed:x", "fixed:0,0", "random:abc", "random:1.5"})
    EXPECT_THROW(Protocol::parse(bad), ProtocolError) << bad;
  EXPECT_THROW(Protocol::parse("fixed:3").validate(3), ProtocolError);
}

TEST(ProtocolParse, RandomZeroEqualsComplete) {
  PresenceMask a = Protocol::parse("random:0.0").make_mask(30, 3, 5);
  EXPECT_TRUE(a.all_present());
}

TEST(ProtocolParse, Sweep) {
  auto sweep = expand_sweep("random:0.1..0.7:0.1");
  ASSERT_EQ(sweep.size(), 7u);
  EXPECT_EQ(sweep.front().to_string(), "random:0.1");
  EXPECT_EQ(sweep[2].to_string(), "random:0.3");
  EXPECT_EQ(sweep.back().to_string(), "random:0.7");
  EXPECT_EQ(expand_sweep("complete").size(), 1u);
  EXPECT_THROW(expand_sweep("fixed:0..1:1"), ProtocolError);
}

}  // namespace
}  // namespace cyin
