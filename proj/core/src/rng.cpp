// Copyright 2026 dpmc Authors
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

#include "dpmc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Rng::Rng(RngStream stream)
    : stream_(stream),
      engine_(detail::splitmix64(stream.seed ^
                                 detail::splitmix64(stream.stream_id))) {}

double Rng::uniform() {
  // (x >> 11) in [0, 2^53); the half-step offset keeps the endpoints open.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double laplace_inverse_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::domain_error("laplace_inverse_cdf: u must lie in (0, 1)");
  }
  if (u < 0.5) return std::log(2.0 * u);
  return -std::log(2.0 * (1.0 - u));
}

double Rng::laplace() { return laplace_inverse_cdf(uniform()); }

double Rng::standard_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = kTwoPi * uniform();
  cached_normal_ = r * std::sin(t);
  has_cached_normal_ = true;
  return r * std::cos(t);
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("gamma: shape and rate must be positive");
  }
  if (shape < 1.0) {
    // Boost: X ~ Gamma(shape+1), X * U^{1/shape} ~ Gamma(shape).
    const double g = gamma(shape + 1.0, rate);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return d * v / rate;
    }
  }
}

std::int64_t Rng::poisson(double mean) {
  if (mean < 0.0) throw std::domain_error("poisson: mean must be nonnegative");
  if (mean == 0.0) return 0;
  if (mean < kPoissonMethodSwitch) {
    // Multiply uniforms until the product drops below e^{-mean}.
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }
  // PTRS transformed rejection (Hoermann, 1993).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + kf * loglam - std::lgamma(kf + 1.0)) {
      return static_cast<std::int64_t>(kf);
    }
  }
}

Eigen::VectorXd sample_standard_laplace(Rng& rng, int p) {
  if (p < 1) throw std::invalid_argument("sample_standard_laplace: p >= 1 required");
  Eigen::VectorXd out(p);
  for (int i = 0; i < p; ++i) out[i] = rng.laplace();
  return out;
}

Eigen::VectorXd sample_standard_normal(Rng& rng, int p) {
  if (p < 1) throw std::invalid_argument("sample_standard_normal: p >= 1 required");
  Eigen::VectorXd out(p);
  for (int i = 0; i < p; ++i) out[i] = rng.standard_normal();
  return out;
}

double sample_gamma(Rng& rng, double shape, double rate) {
  return rng.gamma(shape, rate);
}

std::int64_t sample_poisson(Rng& rng, double mean) { return rng.poisson(mean); }

}  // namespace dpmc
