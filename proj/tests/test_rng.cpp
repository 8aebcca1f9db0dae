// Copyright 2026 The graphleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "graphleak/rng.hpp"

namespace graphleak {
namespace {

TEST(RngStream, MatchesReferenceSplitMix64) {
  RngStream zero(0);
  EXPECT_EQ(zero.NextU64(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(zero.NextU64(), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(zero.NextU64(), 0x06C45D188009454Full);
  RngStream r(1234567);
  const std::uint64_t expected[] = {6457827717110365317ull, 3203168211198807973ull,
                                    9817491932198370423ull, 4593380528125082431ull,
                                    16408922859458223821ull};
  for (std::uint64_t e : expected) EXPECT_EQ(r.NextU64(), e);
}

TEST(RngStream, SameKeySameSequence) {
  RngStream a(99, 5);
  RngStream b(99, 5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
  RngStream c(99, 6);
  EXPECT_NE(RngStream(99, 5).NextU64(), c.NextU64());
}

TEST(RngStream, DeriveLeavesParentUntouched) {
  RngStream parent(3);
  parent.NextU64();
  const std::uint64_t before = parent.counter();
  RngStream child = parent.Derive(4);
  EXPECT_EQ(parent.counter(), before);
  EXPECT_NE(child.key(), parent.key());
  EXPECT_EQ(parent.Derive(4).key(), child.key());
  EXPECT_NE(parent.Derive(5).key(), child.key());
}

TEST(RngStream, DrawRanges) {
  RngStream r(11);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = r.Normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(r.Below(7), 7u);
}

TEST(RngStream, GeometricMean) {
  RngStream r(12);
  const double p = 0.2;
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(r.Geometric(p));
  // Mean (1 - p) / p = 4, stddev sqrt(1 - p) / p ~ 4.5.
  EXPECT_NEAR(sum / n, 4.0, 5 * 4.5 / std::sqrt(n));
  EXPECT_EQ(r.Geometric(1.0), 0u);
}

TEST(RngStream, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  RngStream r(13);
  r.Shuffle(v.begin(), v.end());
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
  bool moved = false;
  for (int i = 0; i < 50; ++i) moved = moved || v[static_cast<std::size_t>(i)] != i;
  EXPECT_TRUE(moved);
}

}  // namespace
}  // namespace graphleak
