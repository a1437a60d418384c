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

#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "dpmc/oracle_gp.hpp"
#include "dpmc/stats.hpp"

using namespace dpmc;
using gp::GpSetting;

namespace {

// coefficient of variation of closed-form / brute-force over a theta grid;
// the two must agree up to a theta-independent constant
double ratio_cv(const GpSetting& setting, const std::vector<double>& thetas) {
  std::vector<double> log_ratio;
  for (double t : thetas) {
    log_ratio.push_back(gp::log_posterior_unnorm_closed_form(setting, t) -
                        gp::log_brute_force_unnorm(setting, t));
  }
  std::vector<double> ratio;
  for (double lr : log_ratio) ratio.push_back(std::exp(lr - log_ratio[0]));
  return std::sqrt(stats::variance(ratio)) / stats::mean(ratio);
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("integer-shape upper incomplete gamma") {
  CHECK(gp::upper_incomplete_gamma_int(1, 2.0) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(gp::upper_incomplete_gamma_int(5, 0.0) == 1.0);
  CHECK_THROWS_AS(gp::upper_incomplete_gamma_int(0, 1.0), std::domain_error);
  CHECK_THROWS_AS(gp::upper_incomplete_gamma_int(3, -1.0), std::domain_error);
  // against the general continued-fraction implementation
  const double x = 37.4 * std::exp(0.2);
  CHECK(gp::upper_incomplete_gamma_int(38, x) ==
        doctest::Approx(stats::regularized_gamma_q(38.0, x)).epsilon(1e-10));
  // large shape and argument stay finite and in [0, 1]
  const double q = gp::upper_incomplete_gamma_int(500, 480.0);
  CHECK(q > 0.0);
  CHECK(q < 1.0);
}

TEST_CASE("closed form equals brute force up to a constant") {
  const GpSetting setting;  // alpha 25, beta 1, eps 0.2, s_obs 37.4
  CHECK(ratio_cv(setting, {5.0, 15.0, 25.0, 35.0, 45.0, 60.0}) < 1e-8);
}

TEST_CASE("closed form handles non-default and negative observations") {
  GpSetting s1;
  s1.s_obs = 2.3;
  s1.alpha = 3.0;
  CHECK(ratio_cv(s1, {0.5, 1.0, 3.0, 6.0, 10.0, 15.0}) < 1e-8);

  GpSetting s2;
  s2.s_obs = -2.5;  // laplace noise can push the count negative
  s2.alpha = 2.0;
  CHECK(ratio_cv(s2, {0.2, 0.5, 1.0, 2.0, 4.0, 8.0}) < 1e-8);

  GpSetting s3;
  s3.epsilon = 2.0;
  CHECK(ratio_cv(s3, {20.0, 30.0, 35.0, 40.0, 45.0, 55.0}) < 1e-8);
}

TEST_CASE("density grids normalize with usable cdf and quantile") {
  const GpSetting setting;
  const auto prior = gp::prior_grid(setting, 4001);
  CHECK(prior.cdf.back() == 1.0);
  CHECK(prior.mean() == doctest::Approx(25.0).epsilon(1e-4));
  CHECK(prior.variance() == doctest::Approx(25.0).epsilon(1e-3));
  const double q = prior.quantile(0.75);
  CHECK(prior.cdf_at(q) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK_THROWS_AS(prior.quantile(1.5), std::domain_error);
}

TEST_CASE("naive conjugate posterior ignores the noise") {
  const GpSetting setting;
  const auto law = gp::naive_conjugate_posterior(setting);
  CHECK(law.shape == doctest::Approx(62.4).epsilon(1e-14));
  CHECK(law.rate == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(law.mean() == doctest::Approx(31.2).epsilon(1e-14));
  CHECK(law.variance() == doctest::Approx(15.6).epsilon(1e-14));
  // the noise-aware posterior is wider
  const auto post = gp::true_posterior_grid(setting, 8001);
  CHECK(post.variance() > law.variance());
  CHECK(post.mean() == doctest::Approx(28.5763).epsilon(1e-3));
}

TEST_CASE("marginal likelihood argmax and curvature at the default setting") {
  const GpSetting setting;
  const double mle = gp::marginal_mle(setting);
  CHECK(mle == doctest::Approx(37.237273).epsilon(3e-5));
  CHECK(-gp::marginal_loglik_second_deriv(setting, mle) ==
        doctest::Approx(1.582061e-2).epsilon(0.02));
  // first derivative brackets the root
  CHECK(gp::marginal_loglik_deriv(setting, mle - 0.5) > 0.0);
  CHECK(gp::marginal_loglik_deriv(setting, mle + 0.5) < 0.0);
}

TEST_CASE("near-noiseless surrogate concentrates on the integer grid") {
  GpSetting surrogate;
  surrogate.epsilon = 20.0;
  // with eps = 20 the marginal is dominated by the count s = 37, so the
  // argmax sits at 37.0175, not at s_obs = 37.4
  const double mle = gp::marginal_mle(surrogate);
  CHECK(mle == doctest::Approx(37.017530).epsilon(3e-5));
  // curvature at the plug-in point 37.4 approximates the poisson information
  // 1/37.4 = 2.674e-2
  CHECK(-gp::marginal_loglik_second_deriv(surrogate, 37.4) ==
        doctest::Approx(2.674e-2).epsilon(0.02));
}

TEST_CASE("evidence and eta second moment are positive and consistent") {
  const GpSetting setting;
  const double ev = gp::evidence(setting);
  CHECK(ev == doctest::Approx(1.616117e-2).epsilon(1e-4));
  // evidence = integral of prior * exp(marginal loglik); spot check at a
  // coarser grid for stability of the quadrature
  const double second = gp::eta_obs_second_moment(setting, 37.4);
  const double ev_at = std::exp(gp::marginal_loglik(setting, 37.4));
  // jensen: E eta^2 >= (E eta)^2 where E eta = pi(s_obs | theta)
  CHECK(second >= ev_at * ev_at);
  CHECK(second <= 0.1 * ev_at);  // bounded by sup eta * E eta, sup = eps/2 = 0.1
}

}  // TEST_SUITE
