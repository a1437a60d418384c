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

#include <benchmark/benchmark.h>

#include "dpmc/abc.hpp"
#include "dpmc/mcem.hpp"
#include "dpmc/mechanisms.hpp"
#include "dpmc/model.hpp"
#include "dpmc/oracle_gp.hpp"
#include "dpmc/rng.hpp"

namespace {

using namespace dpmc;

void BM_Uniform(benchmark::State& state) {
  Rng rng(RngStream{1, 0});
  for (auto _ : state) benchmark::DoNotOptimize(rng.uniform());
}
BENCHMARK(BM_Uniform);

void BM_Laplace(benchmark::State& state) {
  Rng rng(RngStream{1, 1});
  for (auto _ : state) benchmark::DoNotOptimize(rng.laplace());
}
BENCHMARK(BM_Laplace);

void BM_Gamma25(benchmark::State& state) {
  Rng rng(RngStream{1, 2});
  for (auto _ : state) benchmark::DoNotOptimize(rng.gamma(25.0, 1.0));
}
BENCHMARK(BM_Gamma25);

void BM_PoissonSmallMean(benchmark::State& state) {
  Rng rng(RngStream{1, 3});
  for (auto _ : state) benchmark::DoNotOptimize(rng.poisson(3.0));
}
BENCHMARK(BM_PoissonSmallMean);

void BM_PoissonLargeMean(benchmark::State& state) {
  Rng rng(RngStream{1, 4});
  for (auto _ : state) benchmark::DoNotOptimize(rng.poisson(37.4));
}
BENCHMARK(BM_PoissonLargeMean);

void BM_RejectionAbc(benchmark::State& state) {
  const auto model = gamma_poisson_model(25.0, 1.0);
  const auto mech = make_epsilon_laplace({0.2, 0.0}, 1.0, 1);
  PrivatizedQuery q;
  q.value = Eigen::VectorXd::Constant(1, 37.4);
  q.mechanism_descriptor = mech.descriptor();
  AbcOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  const std::int64_t n = 20000;
  for (auto _ : state) {
    const auto res = rejection_abc(model, q, mech, n, RngStream{7, 0}, opts);
    benchmark::DoNotOptimize(res.attempts);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RejectionAbc)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_EStep(benchmark::State& state) {
  const auto model = gamma_poisson_model(25.0, 1.0);
  const auto mech = make_epsilon_laplace({0.2, 0.0}, 1.0, 1);
  PrivatizedQuery q;
  q.value = Eigen::VectorXd::Constant(1, 37.4);
  q.mechanism_descriptor = mech.descriptor();
  const std::int64_t n = 100000;
  const Theta theta = Theta::Constant(1, 37.0);
  for (auto _ : state) {
    const auto r = e_step_is(model, q, mech, theta, n, RngStream{8, 0},
                             static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(r.sum_weights);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EStep)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_ClosedFormPosterior(benchmark::State& state) {
  const gp::GpSetting setting;
  double theta = 20.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::log_posterior_unnorm_closed_form(setting, theta));
    theta = theta < 50.0 ? theta + 0.1 : 20.0;
  }
}
BENCHMARK(BM_ClosedFormPosterior);

void BM_MarginalLoglik(benchmark::State& state) {
  const gp::GpSetting setting;
  double theta = 20.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::marginal_loglik(setting, theta));
    theta = theta < 50.0 ? theta + 0.1 : 20.0;
  }
}
BENCHMARK(BM_MarginalLoglik);

}  // namespace

BENCHMARK_MAIN();
