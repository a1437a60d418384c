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

#ifndef DPMC_MCEM_HPP_
#define DPMC_MCEM_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpmc/abc.hpp"
#include "dpmc/mechanisms.hpp"
#include "dpmc/model.hpp"

namespace dpmc {

/// Importance-sampled estimate of E(b(s) | s_obs, theta): s_i drawn from the
/// likelihood at theta, weighted by eta_obs(s_obs | s_i).
struct EStepResult {
  Eigen::VectorXd estimate;
  double sum_weights = 0.0;
  double ess = 0.0;  // empirical, (sum w)^2 / sum w^2
  std::int64_t n = 0;
};

EStepResult e_step_is(const BayesModel& model, const PrivatizedQuery& q,
                      const AdditiveMechanism& mech, const Theta& theta,
                      std::int64_t n, RngStream stream, int threads = 0);

/// Poisson M-step in closed form: argmax of E[s] log(theta) - theta.
double m_step_exact_poisson(double e_estimate);

/// Generic 1-D M-step: maximize sum_i w_i log pi(s_i | theta) on
/// [lo, hi]. Uses the weighted score root (bisection) when the model ships a
/// score, golden-section search otherwise; the bracket is expanded before
/// giving up on an interior maximizer.
double m_step_generic(const std::vector<Summary>& samples,
                      const std::vector<double>& weights,
                      const BayesModel& model, double lo, double hi,
                      double tol = 1e-8);

struct McemStage {
  double tolerance = 0.0;
  std::int64_t n = 0;
};

/// Staged schedule: tolerances strictly decreasing, Monte Carlo sizes
/// nondecreasing. Each stage starts from the previous stage's maximizer.
struct McemSchedule {
  std::vector<McemStage> stages;
  double theta_init = 1.0;

  void validate() const;
};

/// Parses "1e-3:1000,1e-4:100000,1e-5:1000000".
McemSchedule parse_schedule(const std::string& text, double theta_init = 1.0);

struct McemOptions {
  int max_iterations_per_stage = 500;
  int threads = 0;
  /// Exponential-family shortcut for the Poisson instance; the generic
  /// Q-hat maximizer is used when false.
  bool exact_poisson_m_step = true;
  double m_step_lo = 1e-9;
  double m_step_hi = 1e9;
  /// Fixed-point damping; 1 = undamped.
  double damping = 1.0;
};

struct McemIterationRecord {
  int t = 0;
  int stage = 0;
  double theta = 0.0;
  double e_estimate = 0.0;
  double ess = 0.0;
  std::int64_t n = 0;
  double delta = 0.0;  // |theta_t - theta_{t-1}|
};

struct McemTrace {
  std::vector<McemIterationRecord> iterations;
  double theta_hat = 0.0;
  Eigen::MatrixXd observed_info;
  Eigen::VectorXd score_at_hat;
  bool converged = false;
  RngStream stream;
};

class McemNonConvergence : public std::runtime_error {
 public:
  McemNonConvergence(const std::string& what, McemTrace partial_trace)
      : std::runtime_error(what), trace(std::move(partial_trace)) {}
  McemTrace trace;
};

/// Staged E/M iteration. Within a stage the E-step reuses one substream
/// (common random numbers), which makes the fixed-point map deterministic in
/// theta so that sub-Monte-Carlo tolerances such as 1e-5 are reachable.
/// The final trace carries the observed score and Fisher information at
/// theta_hat, estimated with the last stage's sample size on a fresh
/// substream.
McemTrace run_mcem(const BayesModel& model, const PrivatizedQuery& q,
                   const AdditiveMechanism& mech, const McemSchedule& schedule,
                   RngStream stream, const McemOptions& opts = {});

/// ESS formula N pi^2(s_obs | theta) / E(eta_obs^2), proper-density
/// convention on both inputs.
double ess_theoretical(double evidence_at_theta, double second_moment_eta,
                       std::int64_t n);

/// Weighted draws from the likelihood at theta with mechanism weights;
/// feeds the score / information estimators and the generic M-step.
struct WeightedSummaries {
  std::vector<Summary> summaries;
  std::vector<double> weights;
};

WeightedSummaries simulate_weighted_summaries(const BayesModel& model,
                                              const PrivatizedQuery& q,
                                              const AdditiveMechanism& mech,
                                              const Theta& theta, std::int64_t n,
                                              RngStream stream, int threads = 0);

/// m sum_i w_i lambda_theta(s_i), m^{-1} = sum w.
Eigen::VectorXd observed_score(const std::vector<Summary>& samples,
                               const std::vector<double>& weights,
                               const BayesModel& model, const Theta& theta);

/// Observed Fisher information. The double sum over weighted score outer
/// products factors into the outer product of the weighted mean score, so
/// the computation is linear in N.
Eigen::MatrixXd observed_information(const std::vector<Summary>& samples,
                                     const std::vector<double>& weights,
                                     const BayesModel& model,
                                     const Theta& theta);

}  // namespace dpmc

#endif  // DPMC_MCEM_HPP_
