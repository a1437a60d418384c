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

#ifndef DPMC_ABC_HPP_
#define DPMC_ABC_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpmc/mechanisms.hpp"
#include "dpmc/model.hpp"

namespace dpmc {

struct AbcOptions {
  /// Total step-1 budget; 0 means 1000 * n. Unbounded loops are forbidden:
  /// rejection can be frequent when model evidence is low.
  std::int64_t max_attempts = 0;
  /// Accepted samples are produced in fixed-size chunks, one substream per
  /// chunk, so parallel and serial runs with equal seeds agree.
  int chunk_size = 4096;
  int threads = 0;  // 0 -> hardware concurrency
};

struct AbcResult {
  std::vector<Theta> samples;
  std::vector<int> chunk;  // chunk id per sample, part of output metadata
  std::vector<int> index;  // index within chunk
  std::int64_t attempts = 0;
  double acceptance_rate = 0.0;
  RngStream stream;
  int chunk_size = 0;
};

/// Attempt budget exhausted before n acceptances; carries partial
/// diagnostics.
class AbcBudgetExhausted : public std::runtime_error {
 public:
  AbcBudgetExhausted(const std::string& what, AbcResult partial_result)
      : std::runtime_error(what), partial(std::move(partial_result)) {}
  AbcResult partial;
};

/// A simulated eta_obs density exceeded the caller-asserted bound M, which
/// invalidates the rejection sampler's correctness.
class BoundViolation : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mechanism-matched rejection sampler: acceptance probability at step 3 is
/// c * eta((s_obs - s_i)/h) with c^{-1} = max eta, which yields n iid draws
/// from the true posterior given s_obs. The mechanism must match the query's
/// descriptor exactly.
AbcResult rejection_abc(const BayesModel& model, const PrivatizedQuery& q,
                        const AdditiveMechanism& mech, std::int64_t n,
                        RngStream stream, const AbcOptions& opts = {});

/// Generalized non-additive variant: acceptance probability
/// eta_obs(s_obs | s_i) / M.
AbcResult rejection_abc_general(const BayesModel& model,
                                const PrivatizedQuery& q,
                                const GeneralMechanism& mech, std::int64_t n,
                                RngStream stream, const AbcOptions& opts = {});

struct WeightedSample {
  std::vector<Theta> thetas;
  std::vector<double> weights;
  std::string proposal;
};

/// Importance-sampling variant: theta_i ~ g, weight
/// omega_i = eta((s_obs - s_i)/h) * pi0(theta_i) / g(theta_i). No rejection.
WeightedSample importance_abc(
    const BayesModel& model, const PrivatizedQuery& q,
    const AdditiveMechanism& mech,
    const std::function<Theta(Rng&)>& proposal_sampler,
    const std::function<double(const Theta&)>& proposal_density, std::int64_t n,
    RngStream stream, const AbcOptions& opts = {});

struct WeightedEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
};

/// Self-normalized estimator sum(w a) / sum(w) with delta-method standard
/// error; ESS = (sum w)^2 / sum w^2.
WeightedEstimate weighted_estimate(const WeightedSample& ws,
                                   const std::function<double(const Theta&)>& a);

/// Overall acceptance probability identity: evidence / max eta_obs. Both
/// sides use the proper-density convention, so the kernel mode is rescaled
/// by the Jacobian h^p.
double theoretical_acceptance_rate(double evidence, const NoiseKernel& kernel,
                                   double bandwidth = 1.0);

}  // namespace dpmc

#endif  // DPMC_ABC_HPP_
