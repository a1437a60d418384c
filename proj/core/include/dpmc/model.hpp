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

#ifndef DPMC_MODEL_HPP_
#define DPMC_MODEL_HPP_

#include <functional>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dpmc/rng.hpp"

namespace dpmc {

using Theta = Eigen::VectorXd;
using Summary = Eigen::VectorXd;

/// Bayesian model bundle. Only the prior sampler/density and the likelihood
/// simulator are required; the remaining accessors are optional (empty
/// std::function) and unlock the exponential-family E-step, the generic
/// M-step, and the score / information estimators. The likelihood is stored
/// in log form: the Poisson pmf underflows at large counts.
struct BayesModel {
  std::function<Theta(Rng&)> prior_sampler;
  std::function<double(const Theta&)> prior_density;
  std::function<Summary(const Theta&, Rng&)> likelihood_simulator;
  std::function<double(const Summary&, const Theta&)> likelihood_log_density;
  std::function<Eigen::VectorXd(const Summary&)> sufficient_stat;
  /// Score lambda_theta(s) = grad_theta log pi(s | theta).
  std::function<Eigen::VectorXd(const Summary&, const Theta&)> score;
  std::function<Eigen::MatrixXd(const Summary&, const Theta&)> score_jacobian;
};

/// Conjugate count model of the shipped experiments:
/// theta ~ Gamma(alpha, beta), s | theta ~ Poisson(theta).
/// All optional fields are populated: b(s) = s, lambda = s/theta - 1,
/// d lambda / d theta = -s/theta^2.
BayesModel gamma_poisson_model(double alpha, double beta);

/// One joint draw (theta, s) from prior times likelihood.
std::pair<Theta, Summary> simulate_pair(const BayesModel& model, Rng& rng);

/// The privatized observation plus the mechanism descriptor that produced
/// it; the descriptor is matched against the mechanism handed to the
/// samplers, which is the central correctness hazard.
struct PrivatizedQuery {
  Eigen::VectorXd value;
  nlohmann::json mechanism_descriptor;
};

}  // namespace dpmc

#endif  // DPMC_MODEL_HPP_
