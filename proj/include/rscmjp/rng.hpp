// Copyright 2026 The rscmjp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RSCMJP_RNG_HPP_
#define RSCMJP_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>

namespace rscmjp {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator.
///
/// Draw number c of the stream with key k is mix64(k + c * gamma), where
/// gamma is the 64-bit golden-ratio increment. This is SplitMix64 written as a
/// pure function of (key, counter), so a stream can be positioned or split
/// without sequential state. Substreams get their key from
/// substream_key(seed, index), which makes per-path output independent of
/// generation order and thread count.
///
/// Satisfies UniformRandomBitGenerator, but the library only uses the
/// explicit uniform()/exponential() helpers below, whose results are
/// identical on every platform.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  /// Stream for item `index` under a master seed.
  static constexpr CounterRng substream(std::uint64_t seed, std::uint64_t index) {
    return CounterRng(substream_key(seed, index));
  }

  static constexpr std::uint64_t substream_key(std::uint64_t seed,
                                               std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate by inversion: -log(1 - U) / rate.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace rscmjp

#endif  // RSCMJP_RNG_HPP_
