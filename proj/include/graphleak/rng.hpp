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

#ifndef GRAPHLEAK_RNG_HPP_
#define GRAPHLEAK_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <utility>

namespace graphleak {

/// Counter-based random stream built on the SplitMix64 finalizer.
///
/// Draw k of a stream with key K is mix(K + (k + 1) * gamma), so the sequence
/// depends only on the key and never on platform or library state. A stream
/// constructed from seed s with no stream index reproduces the reference
/// SplitMix64 sequence seeded with s. Independent sub-streams are derived
/// from (key, index) without advancing the parent.
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), key_(seed) {}
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), key_(Mix(seed ^ Mix(stream + kGamma))) {}

  static constexpr std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t NextU64() {
    ++counter_;
    return Mix(key_ + counter_ * kGamma);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1]; safe argument for log.
  double UniformOpen() { return 1.0 - Uniform(); }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t Below(std::uint64_t n) {
    // Rejection on the top of the range keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = NextU64();
    while (x >= limit) x = NextU64();
    return x % n;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(UniformOpen()));
    const double t = 2.0 * std::numbers::pi * Uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  /// Number of failures before the first success of a Bernoulli(p) process.
  std::uint64_t Geometric(double p) {
    if (p >= 1.0) return 0;
    const double g = std::floor(std::log(UniformOpen()) / std::log1p(-p));
    return g > 9.0e18 ? ~std::uint64_t{0} : static_cast<std::uint64_t>(g);
  }

  /// Independent stream keyed by (this key, index).
  RngStream Derive(std::uint64_t index) const {
    RngStream child;
    child.seed_ = seed_;
    child.key_ = Mix(key_ ^ Mix(index + kGamma));
    return child;
  }

  template <typename RandomIt>
  void Shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = Below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace graphleak

#endif  // GRAPHLEAK_RNG_HPP_
