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

#include "dpmc/mcem.hpp"

#include "dpmc/stats.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace dpmc {

namespace {

constexpr int kEStepChunk = 65536;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

struct EStepChunkSums {
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  Eigen::VectorXd sum_wb;
  std::exception_ptr error;
};

// Chunked parallel map with a fixed chunk layout; reductions happen in chunk
// order afterwards so the result is independent of the thread count.
template <typename ChunkFn>
void for_each_chunk(std::int64_t n, int chunk_size, int threads, ChunkFn&& fn) {
  const int n_chunks = static_cast<int>((n + chunk_size - 1) / chunk_size);
  const int workers = std::min(resolve_threads(threads), n_chunks);
  if (workers <= 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

EStepResult e_step_is(const BayesModel& model, const PrivatizedQuery& q,
                      const AdditiveMechanism& mech, const Theta& theta,
                      std::int64_t n, RngStream stream, int threads) {
  if (!model.sufficient_stat) {
    throw std::invalid_argument("e_step_is: model has no sufficient statistic");
  }
  if (n < 1) throw std::invalid_argument("e_step_is: n >= 1 required");
  const double h = mech.bandwidth;
  const int n_chunks = static_cast<int>((n + kEStepChunk - 1) / kEStepChunk);
  std::vector<EStepChunkSums> sums(static_cast<std::size_t>(n_chunks));

  for_each_chunk(n, kEStepChunk, threads, [&](int c) {
    EStepChunkSums& out = sums[static_cast<std::size_t>(c)];
    try {
      const std::int64_t quota = std::min<std::int64_t>(
          kEStepChunk, n - static_cast<std::int64_t>(c) * kEStepChunk);
      Rng rng(stream.substream(static_cast<std::uint64_t>(c)));
      for (std::int64_t i = 0; i < quota; ++i) {
        const Summary s = model.likelihood_simulator(theta, rng);
        // Weight scale is inconsequential to the self-normalized estimate,
        // so the 1/h^p Jacobian is dropped here.
        const double w = mech.kernel.density((q.value - s) / h);
        const Eigen::VectorXd b = model.sufficient_stat(s);
        if (out.sum_wb.size() == 0) out.sum_wb = Eigen::VectorXd::Zero(b.size());
        out.sum_w += w;
        out.sum_w2 += w * w;
        out.sum_wb += w * b;
      }
    } catch (...) {
      out.error = std::current_exception();
    }
  });

  double sum_w = 0.0;
  double sum_w2 = 0.0;
  Eigen::VectorXd sum_wb;
  for (const auto& chunk : sums) {
    if (chunk.error) std::rethrow_exception(chunk.error);
    if (sum_wb.size() == 0) sum_wb = Eigen::VectorXd::Zero(chunk.sum_wb.size());
    sum_w += chunk.sum_w;
    sum_w2 += chunk.sum_w2;
    sum_wb += chunk.sum_wb;
  }
  if (!(sum_w > 0.0)) {
    throw std::runtime_error(
        "e_step_is: all weights zero; s_obs lies far outside the simulated range");
  }
  EStepResult result;
  result.estimate = sum_wb / sum_w;
  result.sum_weights = sum_w;
  result.ess = sum_w * sum_w / sum_w2;
  result.n = n;
  return result;
}

double m_step_exact_poisson(double e_estimate) {
  if (!(e_estimate > 0.0)) {
    throw std::domain_error("m_step_exact_poisson: positive E-step estimate required");
  }
  return e_estimate;
}

namespace {

double weighted_log_lik(const std::vector<Summary>& samples,
                        const std::vector<double>& weights,
                        const BayesModel& model, double theta) {
  Theta t(1);
  t[0] = theta;
  double q = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    q += weights[i] * model.likelihood_log_density(samples[i], t);
  }
  return q;
}

double weighted_score_1d(const std::vector<Summary>& samples,
                         const std::vector<double>& weights,
                         const BayesModel& model, double theta) {
  Theta t(1);
  t[0] = theta;
  double g = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    g += weights[i] * model.score(samples[i], t)[0];
  }
  return g;
}

}  // namespace

double m_step_generic(const std::vector<Summary>& samples,
                      const std::vector<double>& weights,
                      const BayesModel& model, double lo, double hi,
                      double tol) {
  if (!model.likelihood_log_density) {
    throw std::invalid_argument("m_step_generic: likelihood log density required");
  }
  if (samples.size() != weights.size() || samples.empty()) {
    throw std::invalid_argument("m_step_generic: malformed weighted sample");
  }
  double sum_w = 0.0;
  for (double w : weights) sum_w += w;
  if (!(sum_w > 0.0)) {
    throw std::runtime_error("m_step_generic: degenerate all-zero weights");
  }

  if (model.score) {
    // The weighted score is the exact derivative of Q-hat; find its root.
    double a = lo;
    double b = hi;
    double ga = weighted_score_1d(samples, weights, model, a);
    double gb = weighted_score_1d(samples, weights, model, b);
    for (int grow = 0; grow < 60 && ga * gb > 0.0; ++grow) {
      // score still of one sign: expand upward (count likelihoods decay
      // toward theta -> 0, so the root escapes through the upper end).
      b *= 2.0;
      gb = weighted_score_1d(samples, weights, model, b);
    }
    if (ga * gb > 0.0) {
      throw std::runtime_error("m_step_generic: no interior maximizer in bracket");
    }
    for (int i = 0; i < 200 && b - a > tol * 1e-4; ++i) {
      const double mid = 0.5 * (a + b);
      const double gm = weighted_score_1d(samples, weights, model, mid);
      if (ga * gm <= 0.0) {
        b = mid;
        gb = gm;
      } else {
        a = mid;
        ga = gm;
      }
    }
    return 0.5 * (a + b);
  }

  const double x = stats::golden_section_max(
      [&](double theta) { return weighted_log_lik(samples, weights, model, theta); },
      lo, hi, tol);
  if (x - lo < 2.0 * tol || hi - x < 2.0 * tol) {
    throw std::runtime_error("m_step_generic: maximizer pinned to bracket boundary");
  }
  return x;
}

void McemSchedule::validate() const {
  if (stages.empty()) throw std::invalid_argument("McemSchedule: at least one stage");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!(stages[i].tolerance > 0.0) || stages[i].n < 1) {
      throw std::invalid_argument("McemSchedule: positive tolerance and n required");
    }
    if (i > 0 && (stages[i].tolerance >= stages[i - 1].tolerance ||
                  stages[i].n < stages[i - 1].n)) {
      throw std::invalid_argument(
          "McemSchedule: tolerances must decrease and n must not decrease");
    }
  }
}

McemSchedule parse_schedule(const std::string& text, double theta_init) {
  McemSchedule schedule;
  schedule.theta_init = theta_init;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("parse_schedule: expected tol:n, got '" + item + "'");
    }
    McemStage stage;
    stage.tolerance = std::stod(item.substr(0, colon));
    stage.n = static_cast<std::int64_t>(std::stod(item.substr(colon + 1)));
    schedule.stages.push_back(stage);
  }
  schedule.validate();
  return schedule;
}

McemTrace run_mcem(const BayesModel& model, const PrivatizedQuery& q,
                   const AdditiveMechanism& mech, const McemSchedule& schedule,
                   RngStream stream, const McemOptions& opts) {
  schedule.validate();
  if (!model.likelihood_log_density || !model.sufficient_stat) {
    throw std::invalid_argument(
        "run_mcem: likelihood log density and sufficient statistic required");
  }
  McemTrace trace;
  trace.stream = stream;
  double theta = schedule.theta_init;
  int t = 0;

  for (std::size_t stage_idx = 0; stage_idx < schedule.stages.size(); ++stage_idx) {
    const McemStage& stage = schedule.stages[stage_idx];
    // One Monte Carlo sample per anchor, reused across iterations with
    // likelihood-ratio reweighting toward the current theta. Redrawing at
    // every iterate would make the fixed-point map a step function of theta
    // (counting draws jump at isolated theta values), which locks the
    // iteration into limit cycles above fine tolerances; the anchored map is
    // smooth in theta and contracts to its fixed point at machine precision.
    // The anchor sample is refreshed when theta has drifted far enough to
    // degrade the reweighting ESS.
    const RngStream stage_stream = stream.substream(0xE5 + stage_idx);
    bool stage_converged = false;
    int anchor_id = -1;
    double theta_anchor = 0.0;
    WeightedSummaries base;            // summaries + eta weights at the anchor
    std::vector<double> ll_anchor;     // log likelihood of each draw at anchor
    std::vector<double> w(static_cast<std::size_t>(stage.n));
    const auto re_anchor = [&](double at) {
      ++anchor_id;
      theta_anchor = at;
      base = simulate_weighted_summaries(
          model, q, mech, Theta::Constant(1, at), stage.n,
          stage_stream.substream(static_cast<std::uint64_t>(anchor_id)),
          opts.threads);
      ll_anchor.resize(base.summaries.size());
      for (std::size_t i = 0; i < base.summaries.size(); ++i) {
        ll_anchor[i] = model.likelihood_log_density(base.summaries[i],
                                                    Theta::Constant(1, at));
      }
    };
    re_anchor(theta);
    for (int it = 0; it < opts.max_iterations_per_stage; ++it) {
      const Theta at = Theta::Constant(1, theta);
      double sum_w = 0.0, sum_w2 = 0.0, sum_wb = 0.0;
      for (std::size_t i = 0; i < base.summaries.size(); ++i) {
        const double lr =
            theta == theta_anchor
                ? 0.0
                : model.likelihood_log_density(base.summaries[i], at) -
                      ll_anchor[i];
        w[i] = base.weights[i] * std::exp(lr);
        sum_w += w[i];
        sum_w2 += w[i] * w[i];
        sum_wb += w[i] * model.sufficient_stat(base.summaries[i])[0];
      }
      if (!(sum_w > 0.0)) {
        if (theta == theta_anchor) {
          trace.theta_hat = theta;
          throw McemNonConvergence(
              "run_mcem: all weights vanished at theta = " + std::to_string(theta),
              std::move(trace));
        }
        re_anchor(theta);
        --it;
        continue;
      }
      const double ess = sum_w * sum_w / sum_w2;
      if (theta != theta_anchor && ess < static_cast<double>(stage.n) / 3.0) {
        re_anchor(theta);
        --it;
        continue;
      }
      const double e_estimate = sum_wb / sum_w;
      double theta_new;
      if (opts.exact_poisson_m_step) {
        theta_new = m_step_exact_poisson(e_estimate);
      } else {
        theta_new = m_step_generic(base.summaries, w, model, opts.m_step_lo,
                                   opts.m_step_hi);
      }
      theta_new = theta + opts.damping * (theta_new - theta);
      const double delta = std::fabs(theta_new - theta);
      ++t;
      trace.iterations.push_back({t, static_cast<int>(stage_idx), theta_new,
                                  e_estimate, ess, stage.n, delta});
      theta = theta_new;
      if (delta < stage.tolerance) {
        stage_converged = true;
        break;
      }
    }
    if (!stage_converged) {
      trace.theta_hat = theta;
      throw McemNonConvergence(
          "run_mcem: stage " + std::to_string(stage_idx) + " exceeded " +
              std::to_string(opts.max_iterations_per_stage) + " iterations",
          std::move(trace));
    }
  }

  trace.theta_hat = theta;
  trace.converged = true;
  const std::int64_t n_final = schedule.stages.back().n;
  const WeightedSummaries ws =
      simulate_weighted_summaries(model, q, mech, Theta::Constant(1, theta),
                                  n_final, stream.substream(0xF15E), opts.threads);
  if (model.score && model.score_jacobian) {
    trace.observed_info = observed_information(ws.summaries, ws.weights, model,
                                               Theta::Constant(1, theta));
    trace.score_at_hat =
        observed_score(ws.summaries, ws.weights, model, Theta::Constant(1, theta));
  }
  return trace;
}

double ess_theoretical(double evidence_at_theta, double second_moment_eta,
                       std::int64_t n) {
  if (!(evidence_at_theta > 0.0)) {
    throw std::domain_error("ess_theoretical: positive evidence required");
  }
  if (!(second_moment_eta > 0.0)) {
    throw std::domain_error("ess_theoretical: degenerate zero second moment");
  }
  return static_cast<double>(n) * evidence_at_theta * evidence_at_theta /
         second_moment_eta;
}

WeightedSummaries simulate_weighted_summaries(const BayesModel& model,
                                              const PrivatizedQuery& q,
                                              const AdditiveMechanism& mech,
                                              const Theta& theta, std::int64_t n,
                                              RngStream stream, int threads) {
  if (n < 1) throw std::invalid_argument("simulate_weighted_summaries: n >= 1");
  const double h = mech.bandwidth;
  const int n_chunks = static_cast<int>((n + kEStepChunk - 1) / kEStepChunk);
  struct Chunk {
    std::vector<Summary> summaries;
    std::vector<double> weights;
    std::exception_ptr error;
  };
  std::vector<Chunk> chunks(static_cast<std::size_t>(n_chunks));
  for_each_chunk(n, kEStepChunk, threads, [&](int c) {
    Chunk& out = chunks[static_cast<std::size_t>(c)];
    try {
      const std::int64_t quota = std::min<std::int64_t>(
          kEStepChunk, n - static_cast<std::int64_t>(c) * kEStepChunk);
      Rng rng(stream.substream(static_cast<std::uint64_t>(c)));
      out.summaries.reserve(static_cast<std::size_t>(quota));
      out.weights.reserve(static_cast<std::size_t>(quota));
      for (std::int64_t i = 0; i < quota; ++i) {
        Summary s = model.likelihood_simulator(theta, rng);
        out.weights.push_back(mech.kernel.density((q.value - s) / h));
        out.summaries.push_back(std::move(s));
      }
    } catch (...) {
      out.error = std::current_exception();
    }
  });
  WeightedSummaries ws;
  ws.summaries.reserve(static_cast<std::size_t>(n));
  ws.weights.reserve(static_cast<std::size_t>(n));
  for (auto& chunk : chunks) {
    if (chunk.error) std::rethrow_exception(chunk.error);
    for (std::size_t i = 0; i < chunk.summaries.size(); ++i) {
      ws.summaries.push_back(std::move(chunk.summaries[i]));
      ws.weights.push_back(chunk.weights[i]);
    }
  }
  return ws;
}

namespace {
double checked_sum_weights(const std::vector<Summary>& samples,
                           const std::vector<double>& weights) {
  if (samples.size() != weights.size() || samples.empty()) {
    throw std::invalid_argument("observed score/information: malformed sample");
  }
  double sum_w = 0.0;
  for (double w : weights) sum_w += w;
  if (!(sum_w > 0.0)) {
    throw std::runtime_error("observed score/information: degenerate weights");
  }
  return sum_w;
}
}  // namespace

Eigen::VectorXd observed_score(const std::vector<Summary>& samples,
                               const std::vector<double>& weights,
                               const BayesModel& model, const Theta& theta) {
  if (!model.score) throw std::invalid_argument("observed_score: model.score required");
  const double sum_w = checked_sum_weights(samples, weights);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    acc += weights[i] * model.score(samples[i], theta);
  }
  return acc / sum_w;
}

Eigen::MatrixXd observed_information(const std::vector<Summary>& samples,
                                     const std::vector<double>& weights,
                                     const BayesModel& model,
                                     const Theta& theta) {
  if (!model.score || !model.score_jacobian) {
    throw std::invalid_argument(
        "observed_information: model.score and score_jacobian required");
  }
  const double sum_w = checked_sum_weights(samples, weights);
  const auto d = theta.size();
  Eigen::MatrixXd curvature = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mean_score = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd lam = model.score(samples[i], theta);
    curvature += weights[i] * (-model.score_jacobian(samples[i], theta) -
                               lam * lam.transpose());
    mean_score += weights[i] * lam;
  }
  curvature /= sum_w;
  mean_score /= sum_w;
  return curvature + mean_score * mean_score.transpose();
}

}  // namespace dpmc
