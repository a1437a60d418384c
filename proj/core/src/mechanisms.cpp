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

#include "dpmc/mechanisms.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

void PrivacyBudget::validate() const {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("PrivacyBudget: epsilon > 0 required");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::invalid_argument("PrivacyBudget: delta in [0, 1) required");
  }
}

SmoothSensitivity smooth_sensitivity(const SensitivityProfile& profile,
                                     double xi, int k_max) {
  if (!(xi > 0.0)) throw std::invalid_argument("smooth_sensitivity: xi > 0 required");
  if (k_max < 1) throw std::invalid_argument("smooth_sensitivity: k_max >= 1 required");
  if (!profile.radius_max) {
    throw std::invalid_argument("smooth_sensitivity: radius_max not supplied");
  }
  double best = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    const double a = profile.radius_max(k);
    if (std::isnan(a) || a < 0.0) {
      throw std::invalid_argument(
          "smooth_sensitivity: radius_max undefined at k = " + std::to_string(k));
    }
    best = std::max(best, std::exp(-xi * k) * a);
  }
  SmoothSensitivity out;
  out.value = best;
  out.truncation_valid = std::exp(-xi * k_max) * profile.global <= best;
  return out;
}

double smooth_xi(double epsilon, double delta, int d) {
  if (!(delta > 0.0)) throw std::invalid_argument("smooth_xi: delta > 0 required");
  return epsilon / (4.0 * (d + std::log(2.0 / delta)));
}

NoiseKernel laplace_kernel(int p) {
  if (p < 1) throw std::invalid_argument("laplace_kernel: p >= 1 required");
  NoiseKernel k;
  k.dimension = p;
  k.mode_density = std::pow(0.5, p);
  k.log_density = [p](const Eigen::VectorXd& u) {
    return -u.lpNorm<1>() - p * std::log(2.0);
  };
  k.density = [log_d = k.log_density](const Eigen::VectorXd& u) {
    return std::exp(log_d(u));
  };
  k.sampler = [](Rng& rng, int dim) { return sample_standard_laplace(rng, dim); };
  return k;
}

NoiseKernel gaussian_kernel(int p) {
  if (p < 1) throw std::invalid_argument("gaussian_kernel: p >= 1 required");
  NoiseKernel k;
  k.dimension = p;
  k.mode_density = std::exp(-0.5 * p * kLog2Pi);
  k.log_density = [p](const Eigen::VectorXd& u) {
    return -0.5 * u.squaredNorm() - 0.5 * p * kLog2Pi;
  };
  k.density = [log_d = k.log_density](const Eigen::VectorXd& u) {
    return std::exp(log_d(u));
  };
  k.sampler = [](Rng& rng, int dim) { return sample_standard_normal(rng, dim); };
  return k;
}

nlohmann::json AdditiveMechanism::descriptor() const {
  return nlohmann::json{{"kind", kind},
                        {"epsilon", budget.epsilon},
                        {"delta", budget.delta},
                        {"gs", sensitivity},
                        {"p", kernel.dimension}};
}

AdditiveMechanism AdditiveMechanism::from_descriptor(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  PrivacyBudget budget{j.at("epsilon").get<double>(), j.at("delta").get<double>()};
  const double gs = j.at("gs").get<double>();
  const int p = j.at("p").get<int>();
  if (kind == "laplace-eps") return make_epsilon_laplace(budget, gs, p);
  // For the smooth variants the descriptor carries the smooth sensitivity
  // already resolved, so the bandwidth is reconstructed directly.
  budget.validate();
  if (!(gs > 0.0)) {
    throw std::domain_error("from_descriptor: positive sensitivity required");
  }
  AdditiveMechanism mech;
  mech.budget = budget;
  mech.sensitivity = gs;
  mech.kind = kind;
  if (kind == "laplace-smooth") {
    mech.kernel = laplace_kernel(p);
    mech.bandwidth = gs / budget.epsilon;
    mech.label = "(eps,delta)-Laplace mechanism";
  } else if (kind == "gaussian") {
    mech.kernel = gaussian_kernel(p);
    mech.bandwidth =
        5.0 * std::sqrt(2.0 * std::log(2.0 / budget.delta)) * gs / budget.epsilon;
    mech.label = "Gaussian mechanism";
  } else {
    throw std::invalid_argument("from_descriptor: unknown kind '" + kind + "'");
  }
  return mech;
}

AdditiveMechanism make_epsilon_laplace(PrivacyBudget budget, double gs, int p) {
  budget.validate();
  if (budget.delta != 0.0) {
    throw std::invalid_argument(
        "make_epsilon_laplace: pure mechanism requires delta = 0");
  }
  if (!(gs > 0.0)) {
    throw std::domain_error("make_epsilon_laplace: gs > 0 required");
  }
  AdditiveMechanism mech;
  mech.kernel = laplace_kernel(p);
  mech.bandwidth = gs / budget.epsilon;
  mech.budget = budget;
  mech.label = "eps-Laplace mechanism";
  mech.kind = "laplace-eps";
  mech.sensitivity = gs;
  return mech;
}

namespace {
double resolve_smooth_sensitivity(const PrivacyBudget& budget,
                                  const SensitivityProfile& profile, int p,
                                  int k_max, int d_override) {
  budget.validate();
  if (!(budget.delta > 0.0)) {
    throw std::invalid_argument("smooth mechanism requires delta > 0");
  }
  const int d = d_override >= 0 ? d_override : p;
  const double xi = smooth_xi(budget.epsilon, budget.delta, d);
  const SmoothSensitivity ss = smooth_sensitivity(profile, xi, k_max);
  if (!ss.truncation_valid) {
    throw std::runtime_error(
        "smooth mechanism: sensitivity truncation unverifiable at k_max");
  }
  if (!(ss.value > 0.0)) {
    throw std::domain_error("smooth mechanism: degenerate zero sensitivity");
  }
  return ss.value;
}
}  // namespace

AdditiveMechanism make_smooth_laplace(PrivacyBudget budget,
                                      const SensitivityProfile& profile, int p,
                                      int k_max, int d_override) {
  const double ss = resolve_smooth_sensitivity(budget, profile, p, k_max, d_override);
  AdditiveMechanism mech;
  mech.kernel = laplace_kernel(p);
  mech.bandwidth = ss / budget.epsilon;
  mech.budget = budget;
  mech.label = "(eps,delta)-Laplace mechanism";
  mech.kind = "laplace-smooth";
  mech.sensitivity = ss;
  return mech;
}

AdditiveMechanism make_gaussian(PrivacyBudget budget,
                                const SensitivityProfile& profile, int p,
                                int k_max, int d_override) {
  const double ss = resolve_smooth_sensitivity(budget, profile, p, k_max, d_override);
  AdditiveMechanism mech;
  mech.kernel = gaussian_kernel(p);
  mech.bandwidth =
      5.0 * std::sqrt(2.0 * std::log(2.0 / budget.delta)) * ss / budget.epsilon;
  mech.budget = budget;
  mech.label = "Gaussian mechanism";
  mech.kind = "gaussian";
  mech.sensitivity = ss;
  return mech;
}

Eigen::VectorXd perturb(const AdditiveMechanism& mech, const Eigen::VectorXd& s,
                        Rng& rng) {
  if (s.size() != mech.kernel.dimension) {
    throw std::invalid_argument("perturb: query dimension mismatch");
  }
  return s + mech.bandwidth * mech.kernel.sampler(rng, mech.kernel.dimension);
}

DpBoundReport verify_dp_bound(const AdditiveMechanism& mech, double gs,
                              const std::vector<double>& grid) {
  if (mech.kernel.dimension != 1) {
    throw std::invalid_argument("verify_dp_bound: 1-D verifier only");
  }
  const double h = mech.bandwidth;
  Eigen::VectorXd u(1);
  double max_ratio = 0.0;
  for (double t : grid) {
    u[0] = (t - gs) / h;
    const double l1 = mech.kernel.log_density(u);
    u[0] = t / h;
    const double l0 = mech.kernel.log_density(u);
    max_ratio = std::max(max_ratio, std::exp(l1 - l0));
  }
  DpBoundReport report;
  report.max_ratio = max_ratio;
  report.pass = max_ratio <= std::exp(mech.budget.epsilon) * (1.0 + 1e-12);
  return report;
}

GeneralMechanism as_general(const AdditiveMechanism& mech) {
  const int p = mech.kernel.dimension;
  const double h = mech.bandwidth;
  const double jac = std::pow(h, p);
  GeneralMechanism g;
  g.conditional_density = [kernel = mech.kernel, h, jac](
                              const Eigen::VectorXd& s_obs,
                              const Eigen::VectorXd& s) {
    return kernel.density((s_obs - s) / h) / jac;
  };
  g.density_bound = mech.kernel.mode_density / jac;
  g.sampler = [kernel = mech.kernel, h, p](Rng& rng, const Eigen::VectorXd& s) {
    return (s + h * kernel.sampler(rng, p)).eval();
  };
  return g;
}

}  // namespace dpmc
