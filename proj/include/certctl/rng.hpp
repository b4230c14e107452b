// Copyright 2026 The certctl Authors
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

#ifndef CERTCTL_RNG_HPP
#define CERTCTL_RNG_HPP

#include <cmath>
#include <cstdint>

#include "certctl/matrix.hpp"

namespace certctl {

namespace detail {
// 64-bit finalizer from splitmix64; full-period mixing of key ^ counter
// streams gives counter-based generation: value = mix(key, ctr).
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based random stream. All randomness in the project flows through
/// streams derived (by split) from a single master seed, so every experiment
/// is bit-reproducible and parallel workers can draw independently.
class RngStream {
public:
  explicit RngStream(uint64_t key) : key_(key), ctr_(0) {}

  /// Derive an independent child stream; deterministic in (key, tag).
  RngStream split(uint64_t tag) const {
    return RngStream(detail::mix64(key_ ^ detail::mix64(tag + 0x632be59bd9b4e019ULL)));
  }

  uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(ctr_++)); }

  /// Uniform in (0, 1); never returns exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached state).
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  uint64_t key() const { return key_; }

private:
  uint64_t key_;
  uint64_t ctr_;
};

/// Deterministic rows x cols sample matrix with independent N(0, scale_diag_j^2)
/// columns. scale_diag holds per-column standard deviations.
inline RealMatrix seeded_gaussian(uint64_t seed, int rows, int cols, const Vec& scale_diag) {
  if (static_cast<int>(scale_diag.size()) != cols)
    throw NumericError("seeded_gaussian: scale size mismatch");
  for (double s : scale_diag)
    if (!(s > 0.0)) throw NumericError("seeded_gaussian: scales must be > 0");
  RngStream rng = RngStream(seed).split(0x5eedULL);
  RealMatrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = scale_diag[j] * rng.gaussian();
  return M;
}

/// Halton low-discrepancy point in [0,1)^dim for index i >= 0.
inline Vec halton_point(uint64_t i, int dim) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (dim > 12) throw NumericError("halton_point: dim > 12 unsupported");
  Vec p(dim, 0.0);
  for (int d = 0; d < dim; ++d) {
    const uint64_t b = primes[d];
    double f = 1.0, r = 0.0;
    uint64_t k = i + 1;  // skip the all-zeros point
    while (k > 0) {
      f /= static_cast<double>(b);
      r += f * static_cast<double>(k % b);
      k /= b;
    }
    p[d] = r;
  }
  return p;
}

}  // namespace certctl

#endif  // CERTCTL_RNG_HPP
