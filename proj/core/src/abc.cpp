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

#include "dpmc/abc.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace dpmc {

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

struct ChunkOutcome {
  std::vector<Theta> samples;
  std::int64_t attempts = 0;
  bool exhausted = false;
  std::exception_ptr error;
};

// Shared rejection core. `accept_prob` maps a simulated summary to the
// step-3 acceptance probability; both sampler variants consume uniforms in
// the same order (theta, s, accept), so they agree draw for draw under a
// shared stream.
AbcResult rejection_core(
    const BayesModel& model, std::int64_t n, RngStream stream,
    const AbcOptions& opts,
    const std::function<double(const Summary&)>& accept_prob) {
  if (n < 1) throw std::invalid_argument("rejection_abc: n >= 1 required");
  const std::int64_t max_attempts =
      opts.max_attempts > 0 ? opts.max_attempts : 1000 * n;
  const int chunk_size = opts.chunk_size > 0 ? opts.chunk_size : 4096;
  const int n_chunks =
      static_cast<int>((n + chunk_size - 1) / chunk_size);

  std::vector<ChunkOutcome> outcomes(n_chunks);
  std::atomic<int> next_chunk{0};

  auto run_chunk = [&](int c) {
    ChunkOutcome& out = outcomes[c];
    try {
      const std::int64_t quota =
          std::min<std::int64_t>(chunk_size, n - static_cast<std::int64_t>(c) * chunk_size);
      // Proportional share of the global attempt budget.
      const std::int64_t attempt_cap =
          (max_attempts * quota + n - 1) / n;
      Rng rng(stream.substream(static_cast<std::uint64_t>(c)));
      out.samples.reserve(static_cast<std::size_t>(quota));
      while (static_cast<std::int64_t>(out.samples.size()) < quota) {
        if (out.attempts >= attempt_cap) {
          out.exhausted = true;
          return;
        }
        ++out.attempts;
        Theta theta = model.prior_sampler(rng);
        const Summary s = model.likelihood_simulator(theta, rng);
        const double p = accept_prob(s);
        if (p > 1.0 + 1e-12) {
          throw BoundViolation(
              "rejection_abc: acceptance probability " + std::to_string(p) +
              " exceeds 1; density bound violated");
        }
        if (rng.uniform() < p) out.samples.push_back(std::move(theta));
      }
    } catch (...) {
      out.error = std::current_exception();
    }
  };

  const int threads = std::min(resolve_threads(opts.threads), n_chunks);
  if (threads <= 1) {
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int c = next_chunk.fetch_add(1); c < n_chunks;
             c = next_chunk.fetch_add(1)) {
          run_chunk(c);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  AbcResult result;
  result.stream = stream;
  result.chunk_size = chunk_size;
  bool exhausted = false;
  for (int c = 0; c < n_chunks; ++c) {
    if (outcomes[c].error) std::rethrow_exception(outcomes[c].error);
    exhausted = exhausted || outcomes[c].exhausted;
    result.attempts += outcomes[c].attempts;
    int idx = 0;
    for (auto& th : outcomes[c].samples) {
      result.samples.push_back(std::move(th));
      result.chunk.push_back(c);
      result.index.push_back(idx++);
    }
  }
  result.acceptance_rate =
      result.attempts > 0
          ? static_cast<double>(result.samples.size()) /
                static_cast<double>(result.attempts)
          : 0.0;
  if (exhausted) {
    throw AbcBudgetExhausted(
        "rejection_abc: attempt budget " + std::to_string(max_attempts) +
        " exhausted with " + std::to_string(result.samples.size()) + " of " +
        std::to_string(n) + " acceptances",
        std::move(result));
  }
  return result;
}

void check_mechanism_match(const PrivatizedQuery& q,
                           const AdditiveMechanism& mech) {
  if (!q.mechanism_descriptor.is_null() &&
      q.mechanism_descriptor != mech.descriptor()) {
    throw std::invalid_argument(
        "rejection_abc: mechanism does not match the query descriptor: " +
        q.mechanism_descriptor.dump() + " vs " + mech.descriptor().dump());
  }
  if (q.value.size() != mech.kernel.dimension) {
    throw std::invalid_argument("rejection_abc: query dimension mismatch");
  }
}

}  // namespace

AbcResult rejection_abc(const BayesModel& model, const PrivatizedQuery& q,
                        const AdditiveMechanism& mech, std::int64_t n,
                        RngStream stream, const AbcOptions& opts) {
  check_mechanism_match(q, mech);
  const double h = mech.bandwidth;
  const double log_mode = std::log(mech.kernel.mode_density);
  auto accept = [&, s_obs = q.value](const Summary& s) {
    return std::exp(mech.kernel.log_density((s_obs - s) / h) - log_mode);
  };
  return rejection_core(model, n, stream, opts, accept);
}

AbcResult rejection_abc_general(const BayesModel& model,
                                const PrivatizedQuery& q,
                                const GeneralMechanism& mech, std::int64_t n,
                                RngStream stream, const AbcOptions& opts) {
  if (!(mech.density_bound > 0.0)) {
    throw std::invalid_argument("rejection_abc_general: positive density bound required");
  }
  auto accept = [&, s_obs = q.value](const Summary& s) {
    return mech.conditional_density(s_obs, s) / mech.density_bound;
  };
  return rejection_core(model, n, stream, opts, accept);
}

WeightedSample importance_abc(
    const BayesModel& model, const PrivatizedQuery& q,
    const AdditiveMechanism& mech,
    const std::function<Theta(Rng&)>& proposal_sampler,
    const std::function<double(const Theta&)>& proposal_density, std::int64_t n,
    RngStream stream, const AbcOptions& opts) {
  check_mechanism_match(q, mech);
  if (n < 1) throw std::invalid_argument("importance_abc: n >= 1 required");
  const int chunk_size = opts.chunk_size > 0 ? opts.chunk_size : 4096;
  const int n_chunks = static_cast<int>((n + chunk_size - 1) / chunk_size);
  const double h = mech.bandwidth;

  struct IsChunk {
    std::vector<Theta> thetas;
    std::vector<double> weights;
    std::exception_ptr error;
  };
  std::vector<IsChunk> chunks(static_cast<std::size_t>(n_chunks));
  std::atomic<int> next_chunk{0};

  auto run_chunk = [&](int c) {
    IsChunk& out = chunks[static_cast<std::size_t>(c)];
    try {
      const std::int64_t quota =
          std::min<std::int64_t>(chunk_size, n - static_cast<std::int64_t>(c) * chunk_size);
      Rng rng(stream.substream(static_cast<std::uint64_t>(c)));
      out.thetas.reserve(static_cast<std::size_t>(quota));
      out.weights.reserve(static_cast<std::size_t>(quota));
      for (std::int64_t i = 0; i < quota; ++i) {
        Theta theta = proposal_sampler(rng);
        const double g = proposal_density(theta);
        if (!(g > 0.0)) {
          throw std::invalid_argument(
              "importance_abc: proposal density vanished at a drawn theta");
        }
        const Summary s = model.likelihood_simulator(theta, rng);
        const double w =
            mech.kernel.density((q.value - s) / h) * model.prior_density(theta) / g;
        if (!std::isfinite(w)) {
          throw std::runtime_error("importance_abc: non-finite weight");
        }
        out.thetas.push_back(std::move(theta));
        out.weights.push_back(w);
      }
    } catch (...) {
      out.error = std::current_exception();
    }
  };

  const int threads = std::min(resolve_threads(opts.threads), n_chunks);
  if (threads <= 1) {
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int c = next_chunk.fetch_add(1); c < n_chunks;
             c = next_chunk.fetch_add(1)) {
          run_chunk(c);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  WeightedSample ws;
  ws.proposal = "user";
  ws.thetas.reserve(static_cast<std::size_t>(n));
  ws.weights.reserve(static_cast<std::size_t>(n));
  for (auto& chunk : chunks) {
    if (chunk.error) std::rethrow_exception(chunk.error);
    for (std::size_t i = 0; i < chunk.thetas.size(); ++i) {
      ws.thetas.push_back(std::move(chunk.thetas[i]));
      ws.weights.push_back(chunk.weights[i]);
    }
  }
  return ws;
}

WeightedEstimate weighted_estimate(const WeightedSample& ws,
                                   const std::function<double(const Theta&)>& a) {
  if (ws.thetas.size() != ws.weights.size() || ws.thetas.empty()) {
    throw std::invalid_argument("weighted_estimate: malformed weighted sample");
  }
  // Compensated sums: the estimate must be invariant to a common rescaling
  // of the weights beyond a handful of ulps, which plain sequential
  // accumulation over ~1e6 terms does not deliver.
  struct Kahan {
    double sum = 0.0, c = 0.0;
    void add(double x) {
      const double y = x - c;
      const double t = sum + y;
      c = (t - sum) - y;
      sum = t;
    }
  };
  Kahan sw, sw2, swa;
  for (std::size_t i = 0; i < ws.weights.size(); ++i) {
    const double w = ws.weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weighted_estimate: weights must be finite and nonnegative");
    }
    sw.add(w);
    sw2.add(w * w);
    swa.add(w * a(ws.thetas[i]));
  }
  const double sum_w = sw.sum;
  const double sum_w2 = sw2.sum;
  const double sum_wa = swa.sum;
  if (!(sum_w > 0.0)) {
    throw std::runtime_error("weighted_estimate: degenerate all-zero weights");
  }
  WeightedEstimate est;
  est.value = sum_wa / sum_w;
  est.ess = sum_w * sum_w / sum_w2;
  // Delta-method variance of the self-normalized ratio.
  double sum_dev = 0.0;
  for (std::size_t i = 0; i < ws.weights.size(); ++i) {
    const double d = ws.weights[i] * (a(ws.thetas[i]) - est.value);
    sum_dev += d * d;
  }
  est.std_error = std::sqrt(sum_dev) / sum_w;
  return est;
}

double theoretical_acceptance_rate(double evidence, const NoiseKernel& kernel,
                                   double bandwidth) {
  if (evidence < 0.0) {
    throw std::domain_error("theoretical_acceptance_rate: evidence >= 0 required");
  }
  const double mode_obs =
      kernel.mode_density / std::pow(bandwidth, kernel.dimension);
  return evidence / mode_obs;
}

}  // namespace dpmc
