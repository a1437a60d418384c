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

#include "dpmc/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmc {

BayesModel gamma_poisson_model(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::domain_error("gamma_poisson_model: alpha, beta > 0 required");
  }
  BayesModel m;
  m.prior_sampler = [alpha, beta](Rng& rng) {
    Theta t(1);
    t[0] = rng.gamma(alpha, beta);
    return t;
  };
  m.prior_density = [alpha, beta](const Theta& t) {
    const double theta = t[0];
    if (theta <= 0.0) return 0.0;
    return std::exp(alpha * std::log(beta) + (alpha - 1.0) * std::log(theta) -
                    beta * theta - std::lgamma(alpha));
  };
  m.likelihood_simulator = [](const Theta& t, Rng& rng) {
    Summary s(1);
    s[0] = static_cast<double>(rng.poisson(t[0]));
    return s;
  };
  // Continuous extension in s; exact for integer counts.
  m.likelihood_log_density = [](const Summary& s, const Theta& t) {
    const double theta = t[0];
    if (theta <= 0.0) throw std::domain_error("poisson log density: theta > 0");
    return s[0] * std::log(theta) - theta - std::lgamma(s[0] + 1.0);
  };
  m.sufficient_stat = [](const Summary& s) { return s; };
  m.score = [](const Summary& s, const Theta& t) {
    Eigen::VectorXd g(1);
    g[0] = s[0] / t[0] - 1.0;
    return g;
  };
  m.score_jacobian = [](const Summary& s, const Theta& t) {
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = -s[0] / (t[0] * t[0]);
    return j;
  };
  return m;
}

std::pair<Theta, Summary> simulate_pair(const BayesModel& model, Rng& rng) {
  Theta theta = model.prior_sampler(rng);
  Summary s = model.likelihood_simulator(theta, rng);
  return {std::move(theta), std::move(s)};
}

}  // namespace dpmc
