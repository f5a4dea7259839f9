// Copyright 2026 The Flatmeter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLATMETER_COMMON_RANDOM_HPP_
#define FLATMETER_COMMON_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace flatmeter {

// SplitMix64 finalizer. All randomness in the library is derived from it so
// streams are identical across platforms and standard library versions.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t DeriveSeed(std::uint64_t base,
                                   std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = Mix64(base);
  for (std::uint64_t k : keys) h = Mix64(h ^ Mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// Counter-based draw: the value depends only on (seed, stream, index), so
// probes can be generated in any order or in parallel.
constexpr std::uint64_t CounterBits(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index) {
  return Mix64(Mix64(seed ^ Mix64(stream)) + index * 0xd1b54a32d192ed03ULL);
}

inline double BitsToUnit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double CounterRademacher(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t index) {
  return (CounterBits(seed, stream, index) >> 63) ? 1.0 : -1.0;
}

// Sequential stream over the counter generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t NextBits() { return CounterBits(seed_, stream_, counter_++); }

  // Uniform in [0, 1).
  double Uniform() { return BitsToUnit(NextBits()); }

  // Uniform in [lo, hi]; a point interval returns lo exactly.
  double Uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return lo + (hi - lo) * Uniform();
  }

  // Uniform in the open interval (lo, hi).
  double UniformOpen(double lo, double hi) {
    double u;
    do {
      u = Uniform();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = Uniform();
    } while (u1 <= 0.0);
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = NextBits();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flatmeter

#endif  // FLATMETER_COMMON_RANDOM_HPP_
