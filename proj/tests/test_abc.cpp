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

#include "dpmc/abc.hpp"
#include "dpmc/oracle_gp.hpp"
#include "dpmc/stats.hpp"

using namespace dpmc;

namespace {

struct Fixture {
  BayesModel model = gamma_poisson_model(25.0, 1.0);
  AdditiveMechanism mech = make_epsilon_laplace({0.2, 0.0}, 1.0, 1);
  PrivatizedQuery q;

  Fixture() {
    q.value = Eigen::VectorXd::Constant(1, 37.4);
    q.mechanism_descriptor = mech.descriptor();
  }
};

std::vector<double> flat(const std::vector<Theta>& ts) {
  std::vector<double> v;
  v.reserve(ts.size());
  for (const auto& t : ts) v.push_back(t[0]);
  return v;
}

}  // namespace

TEST_SUITE("abc") {

TEST_CASE("rejection sampler matches the quadrature posterior") {
  Fixture f;
  const auto res = rejection_abc(f.model, f.q, f.mech, 20000, RngStream{1, 0});
  CHECK(res.samples.size() == 20000);
  CHECK(res.attempts > 20000);
  const auto post = gp::true_posterior_grid({}, 8001);
  const double d = stats::ks_statistic(
      flat(res.samples), [&](double t) { return post.cdf_at(t); });
  CHECK(stats::ks_pvalue(d, res.samples.size()) > 1e-3);
  // and decisively rejects the naive conjugate posterior
  const auto naive = gp::naive_conjugate_posterior({});
  const double d_naive = stats::ks_statistic(flat(res.samples), [&](double t) {
    return stats::gamma_cdf(t, naive.shape, naive.rate);
  });
  CHECK(d_naive > 0.05);
}

TEST_CASE("additive and general samplers agree draw for draw") {
  Fixture f;
  const auto a = rejection_abc(f.model, f.q, f.mech, 3000, RngStream{2, 0});
  const auto b = rejection_abc_general(f.model, f.q, as_general(f.mech), 3000,
                                       RngStream{2, 0});
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.attempts == b.attempts);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i][0] == b.samples[i][0]);
  }
  // inflating the asserted bound M by 10 scales the acceptance rate down 10x
  auto gen = as_general(f.mech);
  gen.density_bound *= 10.0;
  const auto c = rejection_abc_general(f.model, f.q, gen, 3000, RngStream{2, 0});
  CHECK(c.acceptance_rate ==
        doctest::Approx(b.acceptance_rate / 10.0).epsilon(0.1));
}

TEST_CASE("mechanism descriptor mismatch is rejected") {
  Fixture f;
  PrivatizedQuery other = f.q;
  other.mechanism_descriptor =
      make_epsilon_laplace({1.0, 0.0}, 1.0, 1).descriptor();
  CHECK_THROWS_AS(rejection_abc(f.model, other, f.mech, 10, RngStream{0, 0}),
                  std::invalid_argument);
  PrivatizedQuery wrong_dim = f.q;
  wrong_dim.value = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(rejection_abc(f.model, wrong_dim, f.mech, 10, RngStream{0, 0}),
                  std::invalid_argument);
}

TEST_CASE("attempt budget exhaustion carries partial diagnostics") {
  Fixture f;
  AbcOptions opts;
  opts.max_attempts = 200;  // far too small for 1e6 acceptances
  try {
    rejection_abc(f.model, f.q, f.mech, 1000000, RngStream{3, 0}, opts);
    FAIL("expected AbcBudgetExhausted");
  } catch (const AbcBudgetExhausted& e) {
    CHECK(e.partial.attempts <= 200 + 4096);
    CHECK(e.partial.samples.size() < 1000000);
  }
}

TEST_CASE("results are independent of the thread count") {
  Fixture f;
  AbcOptions one;
  one.threads = 1;
  AbcOptions many;
  many.threads = 4;
  const auto a = rejection_abc(f.model, f.q, f.mech, 5000, RngStream{4, 0}, one);
  const auto b = rejection_abc(f.model, f.q, f.mech, 5000, RngStream{4, 0}, many);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.attempts == b.attempts);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i][0] == b.samples[i][0]);
  }
}

TEST_CASE("bandwidth shrinks the noise-aware posterior toward the naive one") {
  // h = 1/eps: larger budget, smaller bandwidth, posterior mean approaches
  // the conjugate mean 31.2 from below
  std::vector<double> means;
  for (double eps : {0.2, 1.0, 5.0}) {
    const auto mech = make_epsilon_laplace({eps, 0.0}, 1.0, 1);
    PrivatizedQuery q;
    q.value = Eigen::VectorXd::Constant(1, 37.4);
    q.mechanism_descriptor = mech.descriptor();
    const auto model = gamma_poisson_model(25.0, 1.0);
    const auto res = rejection_abc(model, q, mech, 20000, RngStream{5, 0});
    means.push_back(stats::mean(flat(res.samples)));
  }
  CHECK(means[0] < means[1]);
  CHECK(means[1] < means[2]);
  CHECK(means[2] == doctest::Approx(31.2).epsilon(0.01));
}

TEST_CASE("importance sampling with prior proposal is consistent") {
  Fixture f;
  const auto ws = importance_abc(f.model, f.q, f.mech, f.model.prior_sampler,
                                 f.model.prior_density, 200000, RngStream{6, 0});
  const auto est = weighted_estimate(ws, [](const Theta& t) { return t[0]; });
  const auto post = gp::true_posterior_grid({}, 8001);
  CHECK(std::fabs(est.value - post.mean()) < 3.0 * est.std_error);
  CHECK(est.ess > 0.0);
  CHECK(est.ess < 200000.0);

  // weight rescaling leaves the self-normalized estimate unchanged
  WeightedSample scaled = ws;
  for (auto& w : scaled.weights) w *= 1e6;
  const auto est2 = weighted_estimate(scaled, [](const Theta& t) { return t[0]; });
  CHECK(est2.value == doctest::Approx(est.value).epsilon(1e-12));
  CHECK(est2.ess == doctest::Approx(est.ess).epsilon(1e-12));
}

TEST_CASE("importance sampling guards the proposal support") {
  Fixture f;
  CHECK_THROWS_AS(
      importance_abc(f.model, f.q, f.mech, f.model.prior_sampler,
                     [](const Theta&) { return 0.0; }, 100, RngStream{7, 0}),
      std::invalid_argument);
}

TEST_CASE("weighted estimate degenerate and trivial cases") {
  WeightedSample ws;
  for (int i = 1; i <= 4; ++i) {
    ws.thetas.push_back(Theta::Constant(1, static_cast<double>(i)));
    ws.weights.push_back(1.0);
  }
  const auto est = weighted_estimate(ws, [](const Theta& t) { return t[0]; });
  CHECK(est.value == 2.5);
  CHECK(est.ess == doctest::Approx(4.0).epsilon(1e-14));

  WeightedSample zero = ws;
  for (auto& w : zero.weights) w = 0.0;
  CHECK_THROWS_AS(weighted_estimate(zero, [](const Theta& t) { return t[0]; }),
                  std::runtime_error);
  WeightedSample neg = ws;
  neg.weights[0] = -1.0;
  CHECK_THROWS_AS(weighted_estimate(neg, [](const Theta& t) { return t[0]; }),
                  std::invalid_argument);
}

TEST_CASE("acceptance rate identity against the quadrature evidence") {
  Fixture f;
  const double ev = gp::evidence({});
  const double rate =
      theoretical_acceptance_rate(ev, f.mech.kernel, f.mech.bandwidth);
  // evidence * h / mode: 1.616e-2 * 5 / 0.5
  CHECK(rate == doctest::Approx(ev * 10.0).epsilon(1e-12));
  const auto res = rejection_abc(f.model, f.q, f.mech, 20000, RngStream{8, 0});
  const double se = std::sqrt(rate * (1.0 - rate) / res.attempts);
  CHECK(std::fabs(res.acceptance_rate - rate) < 4.0 * se);
  CHECK_THROWS_AS(theoretical_acceptance_rate(-1.0, f.mech.kernel, 1.0),
                  std::domain_error);
}

}  // TEST_SUITE
