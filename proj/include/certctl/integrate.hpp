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

#ifndef CERTCTL_INTEGRATE_HPP
#define CERTCTL_INTEGRATE_HPP

#include <cmath>
#include <functional>

#include "certctl/matrix.hpp"

namespace certctl {

/// Fixed-step integrator settings. step_h must not exceed the scenario dt;
/// sub-stepping below it is allowed.
struct Rk4Config {
  double step_h = 0.02;  // seconds
};

using VectorField = std::function<Vec(double t, const Vec& x)>;

namespace detail {
inline void check_deriv_finite(const Vec& dx, const char* stage) {
  for (size_t i = 0; i < dx.size(); ++i) {
    if (!std::isfinite(dx[i]))
      throw NumericError(std::string("rk4_step: non-finite derivative in component ") +
                             std::to_string(i) + " at " + stage,
                         static_cast<int>(i));
  }
}
}  // namespace detail

/// Classical 4th-order Runge-Kutta update.
inline Vec rk4_step(const VectorField& f, const Vec& x, double t, double h) {
  if (!(h > 0.0)) throw NumericError("rk4_step: h must be > 0");
  const size_t n = x.size();

  Vec k1 = f(t, x);
  detail::check_deriv_finite(k1, "k1");
  Vec x2(n);
  for (size_t i = 0; i < n; ++i) x2[i] = x[i] + 0.5 * h * k1[i];
  Vec k2 = f(t + 0.5 * h, x2);
  detail::check_deriv_finite(k2, "k2");
  Vec x3(n);
  for (size_t i = 0; i < n; ++i) x3[i] = x[i] + 0.5 * h * k2[i];
  Vec k3 = f(t + 0.5 * h, x3);
  detail::check_deriv_finite(k3, "k3");
  Vec x4(n);
  for (size_t i = 0; i < n; ++i) x4[i] = x[i] + h * k3[i];
  Vec k4 = f(t + h, x4);
  detail::check_deriv_finite(k4, "k4");

  Vec out(n);
  for (size_t i = 0; i < n; ++i)
    out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

/// Integrate over [t, t+dt] with sub-steps of at most cfg.step_h.
inline Vec rk4_span(const VectorField& f, Vec x, double t, double dt, const Rk4Config& cfg) {
  const int substeps = std::max(1, static_cast<int>(std::ceil(dt / cfg.step_h - 1e-12)));
  const double h = dt / substeps;
  for (int s = 0; s < substeps; ++s) {
    x = rk4_step(f, x, t + s * h, h);
  }
  return x;
}

}  // namespace certctl

#endif  // CERTCTL_INTEGRATE_HPP
