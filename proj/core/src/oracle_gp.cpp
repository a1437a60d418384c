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

#include "dpmc/oracle_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpmc/stats.hpp"

namespace dpmc::gp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_setting(const GpSetting& s) {
  if (!(s.alpha > 0.0) || !(s.beta > 0.0) || !(s.epsilon > 0.0)) {
    throw std::domain_error("GpSetting: alpha, beta, epsilon > 0 required");
  }
}

// log sum_{k=k0}^{inf} x^k / k!, truncated once terms are negligible
// relative to the running maximum. Returns -inf for x = 0 with k0 > 0.
double log_tail_sum(double x, int k0) {
  if (x < 0.0) throw std::domain_error("log_tail_sum: x >= 0 required");
  if (x == 0.0) return k0 == 0 ? 0.0 : kNegInf;
  const double log_x = std::log(x);
  double max_term = kNegInf;
  double acc = 0.0;  // sum exp(term - max_term), rebuilt when max moves
  int k = k0;
  for (;;) {
    const double term = k * log_x - std::lgamma(k + 1.0);
    if (term > max_term) {
      acc = acc * std::exp(max_term - term) + 1.0;
      max_term = term;
    } else {
      acc += std::exp(term - max_term);
      if (k > x && term < max_term - 45.0) break;
    }
    ++k;
  }
  return max_term + std::log(acc);
}

// log sum_{k=0}^{n-1} x^k / k!; -inf for an empty sum.
double log_head_sum(double x, int n) {
  if (n <= 0) return kNegInf;
  if (x < 0.0) throw std::domain_error("log_head_sum: x >= 0 required");
  if (x == 0.0) return 0.0;  // k = 0 term
  const double log_x = std::log(x);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    terms.push_back(k * log_x - std::lgamma(k + 1.0));
  }
  return stats::log_sum_exp(terms);
}

double log1p_exp(double x) {  // log(1 + e^x)
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return std::max(a, b) + log1p_exp(-std::fabs(a - b));
}

double log_gamma_prior(const GpSetting& s, double theta) {
  return s.alpha * std::log(s.beta) + (s.alpha - 1.0) * std::log(theta) -
         s.beta * theta - std::lgamma(s.alpha);
}

}  // namespace

double upper_incomplete_gamma_int(int n, double x) {
  if (n < 1) throw std::domain_error("upper_incomplete_gamma_int: n >= 1 required");
  if (x < 0.0) throw std::domain_error("upper_incomplete_gamma_int: x >= 0 required");
  if (x == 0.0) return 1.0;
  return std::exp(log_head_sum(x, n) - x);
}

double log_posterior_unnorm_closed_form(const GpSetting& setting, double theta) {
  check_setting(setting);
  if (!(theta > 0.0)) {
    throw std::domain_error("log_posterior_unnorm_closed_form: theta > 0 required");
  }
  const int n = static_cast<int>(std::ceil(setting.s_obs));
  const double tp = theta * std::exp(setting.epsilon);
  const double tm = theta * std::exp(-setting.epsilon);
  const double eps_s = setting.epsilon * setting.s_obs;
  const double term_upper = -eps_s + log_head_sum(tp, n);
  const double term_lower = eps_s + log_tail_sum(tm, std::max(n, 0));
  const double bracket = log_add_exp(term_upper, term_lower);
  const double value = (setting.alpha - 1.0) * std::log(theta) -
                       (setting.beta + 1.0) * theta + bracket;
  if (!std::isfinite(value)) {
    throw std::runtime_error(
        "log_posterior_unnorm_closed_form: non-finite value at theta = " +
        std::to_string(theta));
  }
  return value;
}

double posterior_unnorm_closed_form(const GpSetting& setting, double theta) {
  return std::exp(log_posterior_unnorm_closed_form(setting, theta));
}

namespace {
// Shared truncated-sum core of the brute-force posterior and the marginal
// likelihood: log sum_{s=0}^{S_max} Pois(s|theta) (eps/2) e^{-eps|s_obs-s|}.
double log_noisy_likelihood_sum(const GpSetting& setting, double theta) {
  const int s_max =
      static_cast<int>(std::ceil(theta + 12.0 * std::sqrt(theta) + 50.0));
  const double log_theta = std::log(theta);
  const double log_half_eps = std::log(0.5 * setting.epsilon);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(s_max) + 1);
  for (int s = 0; s <= s_max; ++s) {
    terms.push_back(s * log_theta - theta - std::lgamma(s + 1.0) + log_half_eps -
                    setting.epsilon * std::fabs(setting.s_obs - s));
  }
  return stats::log_sum_exp(terms);
}
}  // namespace

double log_brute_force_unnorm(const GpSetting& setting, double theta) {
  check_setting(setting);
  if (!(theta > 0.0)) {
    throw std::domain_error("log_brute_force_unnorm: theta > 0 required");
  }
  return log_gamma_prior(setting, theta) + log_noisy_likelihood_sum(setting, theta);
}

double brute_force_unnorm(const GpSetting& setting, double theta) {
  return std::exp(log_brute_force_unnorm(setting, theta));
}

double DensityGrid::mean() const {
  double acc = 0.0;
  for (std::size_t i = 1; i < theta.size(); ++i) {
    acc += 0.5 * (theta[i] - theta[i - 1]) *
           (theta[i] * pdf[i] + theta[i - 1] * pdf[i - 1]);
  }
  return acc;
}

double DensityGrid::variance() const {
  const double m = mean();
  double acc = 0.0;
  for (std::size_t i = 1; i < theta.size(); ++i) {
    const double a = (theta[i - 1] - m) * (theta[i - 1] - m) * pdf[i - 1];
    const double b = (theta[i] - m) * (theta[i] - m) * pdf[i];
    acc += 0.5 * (theta[i] - theta[i - 1]) * (a + b);
  }
  return acc;
}

double DensityGrid::pdf_at(double t) const {
  if (t <= theta.front() || t >= theta.back()) return 0.0;
  const auto it = std::upper_bound(theta.begin(), theta.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - theta.begin());
  const double w = (t - theta[i - 1]) / (theta[i] - theta[i - 1]);
  return pdf[i - 1] + w * (pdf[i] - pdf[i - 1]);
}

double DensityGrid::cdf_at(double t) const {
  if (t <= theta.front()) return 0.0;
  if (t >= theta.back()) return 1.0;
  const auto it = std::upper_bound(theta.begin(), theta.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - theta.begin());
  const double w = (t - theta[i - 1]) / (theta[i] - theta[i - 1]);
  return cdf[i - 1] + w * (cdf[i] - cdf[i - 1]);
}

double DensityGrid::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw std::domain_error("DensityGrid::quantile: u in [0, 1] required");
  }
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.begin()) return theta.front();
  if (it == cdf.end()) return theta.back();
  const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  const double denom = cdf[i] - cdf[i - 1];
  if (denom <= 0.0) return theta[i];
  const double w = (u - cdf[i - 1]) / denom;
  return theta[i - 1] + w * (theta[i] - theta[i - 1]);
}

namespace {
DensityGrid finalize_grid(std::vector<double> thetas, std::vector<double> values,
                          std::string label) {
  DensityGrid grid;
  grid.theta = std::move(thetas);
  grid.pdf = std::move(values);
  grid.label = std::move(label);
  double mass = 0.0;
  for (std::size_t i = 1; i < grid.theta.size(); ++i) {
    mass += 0.5 * (grid.theta[i] - grid.theta[i - 1]) * (grid.pdf[i] + grid.pdf[i - 1]);
  }
  if (!(mass > 0.0)) {
    throw std::runtime_error("normalize_on_grid: zero integral, degenerate density");
  }
  grid.cdf.resize(grid.theta.size(), 0.0);
  for (std::size_t i = 0; i < grid.pdf.size(); ++i) grid.pdf[i] /= mass;
  for (std::size_t i = 1; i < grid.theta.size(); ++i) {
    grid.cdf[i] = grid.cdf[i - 1] + 0.5 * (grid.theta[i] - grid.theta[i - 1]) *
                                        (grid.pdf[i] + grid.pdf[i - 1]);
  }
  grid.cdf.back() = 1.0;
  grid.normalized = true;
  return grid;
}

std::vector<double> make_grid(double lo, double hi, int n_points) {
  if (!(lo < hi) || n_points < 2) {
    throw std::invalid_argument("normalize_on_grid: lo < hi and n_points >= 2");
  }
  std::vector<double> t(static_cast<std::size_t>(n_points));
  const double step = (hi - lo) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) t[static_cast<std::size_t>(i)] = lo + i * step;
  t.back() = hi;
  return t;
}
}  // namespace

DensityGrid normalize_on_grid(const std::function<double(double)>& f, double lo,
                              double hi, int n_points, std::string label) {
  std::vector<double> thetas = make_grid(lo, hi, n_points);
  std::vector<double> values(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    values[i] = f(thetas[i]);
    if (values[i] < 0.0) {
      throw std::domain_error("normalize_on_grid: negative density value");
    }
  }
  return finalize_grid(std::move(thetas), std::move(values), std::move(label));
}

DensityGrid normalize_log_on_grid(const std::function<double(double)>& log_f,
                                  double lo, double hi, int n_points,
                                  std::string label) {
  std::vector<double> thetas = make_grid(lo, hi, n_points);
  std::vector<double> logs(thetas.size());
  double max_log = kNegInf;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    logs[i] = log_f(thetas[i]);
    max_log = std::max(max_log, logs[i]);
  }
  if (max_log == kNegInf) {
    throw std::runtime_error("normalize_log_on_grid: density vanishes on grid");
  }
  std::vector<double> values(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    values[i] = std::exp(logs[i] - max_log);
  }
  return finalize_grid(std::move(thetas), std::move(values), std::move(label));
}

GammaLaw naive_conjugate_posterior(const GpSetting& setting) {
  check_setting(setting);
  if (!(setting.alpha + setting.s_obs > 0.0)) {
    throw std::domain_error("naive_conjugate_posterior: alpha + s_obs <= 0");
  }
  return GammaLaw{setting.alpha + setting.s_obs, setting.beta + 1.0};
}

double marginal_loglik(const GpSetting& setting, double theta) {
  check_setting(setting);
  if (!(theta > 0.0)) throw std::domain_error("marginal_loglik: theta > 0 required");
  return log_noisy_likelihood_sum(setting, theta);
}

double marginal_loglik_deriv(const GpSetting& setting, double theta) {
  const double h = 1e-4 * theta;
  return (marginal_loglik(setting, theta + h) -
          marginal_loglik(setting, theta - h)) /
         (2.0 * h);
}

double marginal_loglik_second_deriv(const GpSetting& setting, double theta) {
  const double h = 1e-4 * theta;
  return (marginal_loglik(setting, theta + h) -
          2.0 * marginal_loglik(setting, theta) +
          marginal_loglik(setting, theta - h)) /
         (h * h);
}

double marginal_mle(const GpSetting& setting, double lo, double hi, double tol) {
  return stats::golden_section_max(
      [&](double theta) { return marginal_loglik(setting, theta); }, lo, hi, tol);
}

std::pair<double, double> default_grid_range(const GpSetting& setting) {
  check_setting(setting);
  const double q_lo = stats::gamma_quantile(1e-4, setting.alpha, setting.beta);
  const double q_hi = stats::gamma_quantile(0.9999, setting.alpha, setting.beta);
  const double pad = 0.2 * (q_hi - q_lo);
  return {std::max(1e-6, q_lo - pad), q_hi + pad};
}

double evidence(const GpSetting& setting) {
  const auto [lo, hi] = default_grid_range(setting);
  const std::vector<double> thetas = make_grid(lo, hi, kDefaultGridPoints);
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double v = std::exp(log_gamma_prior(setting, thetas[i]) +
                              marginal_loglik(setting, thetas[i]));
    if (i > 0) acc += 0.5 * (thetas[i] - thetas[i - 1]) * (v + prev);
    prev = v;
  }
  return acc;
}

double eta_obs_second_moment(const GpSetting& setting, double theta) {
  check_setting(setting);
  if (!(theta > 0.0)) {
    throw std::domain_error("eta_obs_second_moment: theta > 0 required");
  }
  const int s_max =
      static_cast<int>(std::ceil(theta + 12.0 * std::sqrt(theta) + 50.0));
  const double log_theta = std::log(theta);
  const double log_half_eps = std::log(0.5 * setting.epsilon);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(s_max) + 1);
  for (int s = 0; s <= s_max; ++s) {
    terms.push_back(s * log_theta - theta - std::lgamma(s + 1.0) +
                    2.0 * (log_half_eps -
                           setting.epsilon * std::fabs(setting.s_obs - s)));
  }
  return std::exp(stats::log_sum_exp(terms));
}

DensityGrid prior_grid(const GpSetting& setting, int n_points) {
  const auto [lo, hi] = default_grid_range(setting);
  return normalize_log_on_grid(
      [&](double theta) { return log_gamma_prior(setting, theta); }, lo, hi,
      n_points, "prior");
}

DensityGrid naive_posterior_grid(const GpSetting& setting, int n_points) {
  const GammaLaw law = naive_conjugate_posterior(setting);
  const auto [lo, hi] = default_grid_range(setting);
  return normalize_log_on_grid(
      [&](double theta) {
        return (law.shape - 1.0) * std::log(theta) - law.rate * theta;
      },
      lo, hi, n_points, "naive");
}

DensityGrid true_posterior_grid(const GpSetting& setting, int n_points) {
  const auto [lo, hi] = default_grid_range(setting);
  return normalize_log_on_grid(
      [&](double theta) { return log_posterior_unnorm_closed_form(setting, theta); },
      lo, hi, n_points, "true_posterior");
}

}  // namespace dpmc::gp
