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

#ifndef DPMC_MECHANISMS_HPP_
#define DPMC_MECHANISMS_HPP_

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dpmc/rng.hpp"

namespace dpmc {

/// (epsilon, delta) privacy loss parameters; delta = 0 denotes pure
/// epsilon-DP.
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  void validate() const;
};

/// Sensitivity calculus inputs for a query. `radius_max(k)` is the caller's
/// upper bound on local sensitivity over datasets at Hamming distance k;
/// a negative or NaN return marks the profile as undefined at that radius.
struct SensitivityProfile {
  double global = 0.0;
  std::function<double(int)> radius_max;
  /// Optional local sensitivity at a named dataset; only consulted by
  /// callers, never by the mechanism constructors.
  std::function<double(const std::string&)> local_at;
};

struct SmoothSensitivity {
  double value = 0.0;
  /// True when exp(-xi * k_max) * global <= value, i.e. no term beyond the
  /// truncation radius can exceed the reported maximum.
  bool truncation_valid = false;
};

/// max over k in 0..k_max of exp(-xi k) * radius_max(k).
SmoothSensitivity smooth_sensitivity(const SensitivityProfile& profile,
                                     double xi, int k_max);

/// xi = epsilon / (4 (d + log(2/delta))). The literature leaves the symbol d
/// ambiguous; this library reads it as the query dimension p, and callers
/// can override it in one place via this function's argument.
double smooth_xi(double epsilon, double delta, int d);

/// Noise law eta of the additive construction: p iid standard coordinates.
struct NoiseKernel {
  std::function<double(const Eigen::VectorXd&)> density;
  std::function<double(const Eigen::VectorXd&)> log_density;
  double mode_density = 0.0;  // max eta = c^{-1}
  std::function<Eigen::VectorXd(Rng&, int)> sampler;
  int dimension = 0;
};

NoiseKernel laplace_kernel(int p);
NoiseKernel gaussian_kernel(int p);

/// S(x) = s(x) + h u with u ~ kernel. Immutable after construction.
struct AdditiveMechanism {
  NoiseKernel kernel;
  double bandwidth = 0.0;
  PrivacyBudget budget;
  std::string label;
  /// "laplace-eps" | "laplace-smooth" | "gaussian"
  std::string kind;
  /// The sensitivity scale the bandwidth was derived from (global
  /// sensitivity for the pure mechanism, smooth sensitivity otherwise).
  double sensitivity = 0.0;

  /// {"kind", "epsilon", "delta", "gs", "p"}; embedded in every output file
  /// so downstream inference is self-describing.
  nlohmann::json descriptor() const;
  static AdditiveMechanism from_descriptor(const nlohmann::json& j);
};

AdditiveMechanism make_epsilon_laplace(PrivacyBudget budget, double gs, int p);
AdditiveMechanism make_smooth_laplace(PrivacyBudget budget,
                                      const SensitivityProfile& profile, int p,
                                      int k_max, int d_override = -1);
AdditiveMechanism make_gaussian(PrivacyBudget budget,
                                const SensitivityProfile& profile, int p,
                                int k_max, int d_override = -1);

Eigen::VectorXd perturb(const AdditiveMechanism& mech, const Eigen::VectorXd& s,
                        Rng& rng);

struct DpBoundReport {
  bool pass = false;
  double max_ratio = 0.0;
};

/// 1-D density-ratio check of the DP inequality (delta = 0 case): for the
/// worst-case neighboring outputs |s - s'| = gs, evaluates
/// eta((t - s')/h) / eta((t - s)/h) over the grid and compares against
/// e^epsilon. Reports failure rather than throwing.
DpBoundReport verify_dp_bound(const AdditiveMechanism& mech, double gs,
                              const std::vector<double>& grid);

/// Non-additive perturbation law eta_obs(s_obs | s) with a caller-asserted
/// density bound M >= sup eta_obs. conditional_density is a proper density
/// in its first argument.
struct GeneralMechanism {
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      conditional_density;
  double density_bound = 0.0;
  std::function<Eigen::VectorXd(Rng&, const Eigen::VectorXd&)> sampler;
};

/// Wraps an additive mechanism: eta_obs(s_obs|s) = eta((s_obs-s)/h)/h^p with
/// M = mode_density/h^p, so the acceptance ratio matches the additive
/// sampler draw for draw.
GeneralMechanism as_general(const AdditiveMechanism& mech);

}  // namespace dpmc

#endif  // DPMC_MECHANISMS_HPP_
