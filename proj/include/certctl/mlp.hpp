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

#ifndef CERTCTL_MLP_HPP
#define CERTCTL_MLP_HPP

#include <cmath>
#include <vector>

#include "certctl/matrix.hpp"
#include "certctl/rng.hpp"

namespace certctl {

/// Fully-connected network with tanh hidden activations. widths lists the
/// layer sizes from input to output; the output layer is linear unless
/// tanh_output is set. Parameters live in a caller-owned flat vector with
/// deterministic layout: per layer, W row-major then b.
struct MlpSpec {
  std::vector<int> widths;  // [in, h..., out]
  bool tanh_output = false;

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }

  int param_count() const {
    int c = 0;
    for (int l = 0; l < layers(); ++l) c += widths[l + 1] * widths[l] + widths[l + 1];
    return c;
  }
};

/// Per-call forward intermediates needed by the backward pass.
struct MlpCache {
  std::vector<Vec> act;  // act[0] = input, act[l+1] = layer l output
};

inline Vec mlp_forward(const MlpSpec& spec, const double* theta, const Vec& in,
                       MlpCache* cache = nullptr) {
  Vec a = in;
  if (cache) {
    cache->act.clear();
    cache->act.push_back(a);
  }
  int off = 0;
  for (int l = 0; l < spec.layers(); ++l) {
    const int ni = spec.widths[l];
    const int no = spec.widths[l + 1];
    Vec out(no);
    for (int o = 0; o < no; ++o) {
      double s = theta[off + no * ni + o];  // bias
      const double* wrow = theta + off + o * ni;
      for (int i = 0; i < ni; ++i) s += wrow[i] * a[i];
      out[o] = s;
    }
    const bool squash = (l + 1 < spec.layers()) || spec.tanh_output;
    if (squash)
      for (double& v : out) v = std::tanh(v);
    off += no * ni + no;
    a = std::move(out);
    if (cache) cache->act.push_back(a);
  }
  return a;
}

/// Reverse pass: accumulates dL/dtheta into grad (same layout as theta) and
/// returns dL/dinput. cache must come from a forward call on the same input.
inline Vec mlp_backward(const MlpSpec& spec, const double* theta, const MlpCache& cache,
                        const Vec& dout, double* grad) {
  Vec d = dout;
  // offsets per layer
  std::vector<int> offs(spec.layers());
  {
    int off = 0;
    for (int l = 0; l < spec.layers(); ++l) {
      offs[l] = off;
      off += spec.widths[l + 1] * spec.widths[l] + spec.widths[l + 1];
    }
  }
  for (int l = spec.layers() - 1; l >= 0; --l) {
    const int ni = spec.widths[l];
    const int no = spec.widths[l + 1];
    const Vec& a_in = cache.act[l];
    const Vec& a_out = cache.act[l + 1];
    const bool squash = (l + 1 < spec.layers()) || spec.tanh_output;

    Vec dpre = d;
    if (squash)
      for (int o = 0; o < no; ++o) dpre[o] *= 1.0 - a_out[o] * a_out[o];

    Vec dprev(ni, 0.0);
    const int off = offs[l];
    for (int o = 0; o < no; ++o) {
      const double g = dpre[o];
      grad[off + no * ni + o] += g;  // bias
      double* gw = grad + off + o * ni;
      const double* w = theta + off + o * ni;
      for (int i = 0; i < ni; ++i) {
        gw[i] += g * a_in[i];
        dprev[i] += g * w[i];
      }
    }
    d = std::move(dprev);
  }
  return d;
}

/// Xavier-style init; output layer scaled down so networks start near zero.
inline void mlp_init(const MlpSpec& spec, double* theta, RngStream& rng,
                     double out_scale = 0.1) {
  int off = 0;
  for (int l = 0; l < spec.layers(); ++l) {
    const int ni = spec.widths[l];
    const int no = spec.widths[l + 1];
    const bool last = (l + 1 == spec.layers());
    const double scale = (last ? out_scale : 1.0) / std::sqrt(static_cast<double>(ni));
    for (int i = 0; i < no * ni; ++i) theta[off + i] = scale * rng.gaussian();
    for (int i = 0; i < no; ++i) theta[off + no * ni + i] = 0.0;
    off += no * ni + no;
  }
}

/// Affine [in -> out] identity initialization: W is the zero-padded identity
/// and b = 0, so the map embeds (or projects) coordinates exactly. Requires a
/// single linear layer.
inline void mlp_init_identity(const MlpSpec& spec, double* theta) {
  if (spec.layers() != 1 || spec.tanh_output)
    throw NumericError("mlp_init_identity: needs a single linear layer");
  const int ni = spec.widths[0];
  const int no = spec.widths[1];
  for (int i = 0; i < no * ni + no; ++i) theta[i] = 0.0;
  for (int o = 0; o < no && o < ni; ++o) theta[o * ni + o] = 1.0;
}

}  // namespace certctl

#endif  // CERTCTL_MLP_HPP
