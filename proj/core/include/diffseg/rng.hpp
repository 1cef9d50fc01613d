// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "diffseg/matrix.hpp"

namespace diffseg {

/// Deterministic random source. All sampling goes through explicit methods so
/// the complete generator state is the mt19937_64 engine state: it serializes
/// losslessly for checkpoint/resume, and a normal draw always consumes exactly
/// two engine words (Box-Muller without the cached second value).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal draw.
  double normal();

  /// Uniform integer in [lo, hi], both inclusive.
  int uniform_int(int lo, int hi);

  Matrix normal_matrix(int rows, int cols);

  /// Fisher-Yates shuffle of an index vector.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = uniform_int(0, i);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  std::string save_state() const;
  void restore_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a over bytes; used to derive stable per-video seeds from string ids.
std::uint64_t fnv1a64(std::string_view bytes);

/// Combine a global seed with a stream tag into an independent stream seed.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

}  // namespace diffseg
