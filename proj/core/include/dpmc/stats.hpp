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

#ifndef DPMC_STATS_HPP_
#define DPMC_STATS_HPP_

#include <cstddef>
#include <functional>
#include <vector>

namespace dpmc::stats {

/// log(sum(exp(v))) with max-shift; -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& v);

/// Regularized lower incomplete gamma P(a, x), series / continued fraction.
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

double gamma_cdf(double x, double shape, double rate);
/// Quantile by bisection on gamma_cdf.
double gamma_quantile(double u, double shape, double rate);

double normal_cdf(double x);
double laplace_cdf(double x);

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

/// Asymptotic one-sample KS p-value (Kolmogorov distribution with the
/// usual finite-n correction).
double ks_pvalue(double d, std::size_t n);
double ks_two_sample_pvalue(double d, std::size_t n, std::size_t m);
/// Critical KS statistic at significance alpha for sample size n.
double ks_critical_value(std::size_t n, double alpha);

/// Upper-tail chi-square p-value, Q(df/2, stat/2).
double chi_square_pvalue(double stat, int df);

/// Maximize a unimodal function on [lo, hi]; returns the abscissa once the
/// bracket width drops below tol.
double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);

}  // namespace dpmc::stats

#endif  // DPMC_STATS_HPP_
