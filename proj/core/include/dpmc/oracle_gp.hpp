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

#ifndef DPMC_ORACLE_GP_HPP_
#define DPMC_ORACLE_GP_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dpmc::gp {

/// Gamma(alpha, beta) prior, Poisson likelihood, eps-Laplace mechanism with
/// h = 1/epsilon. s_obs may be negative: Laplace noise can push a privatized
/// count below zero and the oracle must not reject it.
struct GpSetting {
  double alpha = 25.0;
  double beta = 1.0;
  double epsilon = 0.2;
  double s_obs = 37.4;

  double bandwidth() const { return 1.0 / epsilon; }
};

/// Regularized upper incomplete gamma Q(n, x) for integer shape, via the
/// exact finite sum e^{-x} sum_{k<n} x^k / k! accumulated in log space.
double upper_incomplete_gamma_int(int n, double x);

/// Log of the closed-form unnormalized posterior density. The raw bracket
/// contains e^{theta e^eps}, which overflows; the exponentials are folded
/// into the incomplete-gamma finite sums analytically, leaving
///   (alpha-1) log theta - (beta+1) theta
///     + log[ e^{-eps s_obs} sum_{k<n} tp^k/k! + e^{eps s_obs} sum_{k>=n} tm^k/k! ]
/// with tp = theta e^eps, tm = theta e^{-eps}, n = ceil(s_obs). For n <= 0
/// the first sum is empty and the second runs over all k >= 0.
double log_posterior_unnorm_closed_form(const GpSetting& setting, double theta);
double posterior_unnorm_closed_form(const GpSetting& setting, double theta);

/// Brute-force oracle: log of prior density times
/// sum_{s=0}^{S_max} Pois(s|theta) (eps/2) e^{-eps |s_obs - s|}, with S_max
/// chosen so the omitted Poisson tail mass is below 1e-12.
double log_brute_force_unnorm(const GpSetting& setting, double theta);
double brute_force_unnorm(const GpSetting& setting, double theta);

/// Trapezoid-normalized density on a strictly increasing grid, with CDF and
/// inverse-CDF lookup for oracle sampling and KS testing.
struct DensityGrid {
  std::vector<double> theta;
  std::vector<double> pdf;
  std::vector<double> cdf;
  bool normalized = false;
  std::string label;

  double mean() const;
  double variance() const;
  double pdf_at(double t) const;
  double cdf_at(double t) const;
  double quantile(double u) const;
};

DensityGrid normalize_on_grid(const std::function<double(double)>& f, double lo,
                              double hi, int n_points, std::string label = "");
/// Same, but takes log f and exponentiates relative to the grid maximum.
DensityGrid normalize_log_on_grid(const std::function<double(double)>& log_f,
                                  double lo, double hi, int n_points,
                                  std::string label = "");

struct GammaLaw {
  double shape = 0.0;
  double rate = 0.0;
  double mean() const { return shape / rate; }
  double variance() const { return shape / (rate * rate); }
};

/// The incorrect posterior treating s_obs as a noiseless count:
/// Gamma(alpha + s_obs, beta + 1), Poisson kernel extended continuously in
/// s_obs.
GammaLaw naive_conjugate_posterior(const GpSetting& setting);

/// log pi(s_obs | theta) = log sum_s Pois(s|theta) (eps/2) e^{-eps|s_obs-s|},
/// a proper density in s_obs.
double marginal_loglik(const GpSetting& setting, double theta);
/// Central differences with step 1e-4 * theta.
double marginal_loglik_deriv(const GpSetting& setting, double theta);
double marginal_loglik_second_deriv(const GpSetting& setting, double theta);

/// Marginal maximum likelihood location by golden-section search.
double marginal_mle(const GpSetting& setting, double lo = 1.0, double hi = 100.0,
                    double tol = 1e-8);

/// Model evidence pi(s_obs) = int prior(theta) pi(s_obs|theta) dtheta by
/// trapezoid quadrature on the default grid.
double evidence(const GpSetting& setting);

/// E_{s|theta}(eta_obs^2(s_obs|s)), proper-density convention; pairs with
/// marginal_loglik in the theoretical ESS formula.
double eta_obs_second_moment(const GpSetting& setting, double theta);

/// Default evaluation range: prior quantiles [q_1e-4, q_0.9999] padded by
/// 20% of their spread, floored at 1e-6.
std::pair<double, double> default_grid_range(const GpSetting& setting);
inline constexpr int kDefaultGridPoints = 20001;

DensityGrid prior_grid(const GpSetting& setting, int n_points = kDefaultGridPoints);
DensityGrid naive_posterior_grid(const GpSetting& setting,
                                 int n_points = kDefaultGridPoints);
DensityGrid true_posterior_grid(const GpSetting& setting,
                                int n_points = kDefaultGridPoints);

}  // namespace dpmc::gp

#endif  // DPMC_ORACLE_GP_HPP_
