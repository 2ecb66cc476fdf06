// Copyright 2026 The rscmjp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RSCMJP_SIMULATOR_HPP_
#define RSCMJP_SIMULATOR_HPP_

#include <cstdint>
#include <vector>

#include "rscmjp/error.hpp"
#include "rscmjp/model.hpp"
#include "rscmjp/parallel.hpp"
#include "rscmjp/rng.hpp"

namespace rscmjp {

/// Entry of a path into `state` at `time`.
struct PathEvent {
  int state;
  double time;

  friend bool operator==(const PathEvent&, const PathEvent&) = default;
};

/// A simulated trajectory on [0, horizon]. `regime` is the hidden label and
/// exists only for test oracles; estimators consume PathStats.
struct Path {
  std::vector<PathEvent> events;
  int regime = 0;
  double horizon = 0.0;

  friend bool operator==(const Path&, const Path&) = default;
};

struct SimConfig {
  std::size_t n_paths = 1;
  double horizon = 10.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

inline int draw_categorical(CounterRng& rng, const auto& probs, int size) {
  const double u = rng.uniform();
  double cum = 0.0;
  int last_positive = 0;
  for (int i = 0; i < size; ++i) {
    if (probs(i) <= 0.0) continue;
    last_positive = i;
    cum += probs(i);
    if (u < cum) return i;
  }
  return last_positive;  // u fell in the round-off gap above the final sum
}

}  // namespace detail

/// Simulates one path: X_0 ~ alpha, regime ~ phi(X_0, .), then a Markov jump
/// process under Q_regime, censored at the horizon. Holding times use
/// inversion of a uniform draw; the next state is drawn from the jump chain
/// q_xy / (-q_xx).
inline Path simulate_path(const ModelParams& theta, double horizon, CounterRng& rng) {
  if (!(horizon > 0.0)) throw ValidationError({"horizon must be positive"});
  Path path;
  path.horizon = horizon;
  int x = detail::draw_categorical(rng, theta.alpha, theta.p);
  path.regime = detail::draw_categorical(rng, theta.phi.row(x), theta.M);
  const Eigen::MatrixXd& Q = theta.q[static_cast<std::size_t>(path.regime)];
  path.events.push_back({x, 0.0});
  double t = 0.0;
  Eigen::VectorXd jump(theta.p);
  for (;;) {
    const double rate = -Q(x, x);
    t += rng.exponential(rate);
    if (!(t < horizon)) break;
    for (int y = 0; y < theta.p; ++y) jump(y) = y == x ? 0.0 : Q(x, y) / rate;
    x = detail::draw_categorical(rng, jump, theta.p);
    path.events.push_back({x, t});
  }
  return path;
}

/// Simulates config.n_paths independent paths; path i uses substream
/// (config.seed, i), so the result does not depend on config.threads.
inline std::vector<Path> simulate_sample(const ModelParams& theta, const SimConfig& config) {
  require_valid(theta);
  if (config.n_paths < 1) throw ValidationError({"n_paths must be >= 1"});
  if (!(config.horizon > 0.0)) throw ValidationError({"horizon must be positive"});
  std::vector<Path> paths(config.n_paths);
  parallel_for(config.n_paths, config.threads, [&](std::size_t i) {
    auto rng = CounterRng::substream(config.seed, i);
    paths[i] = simulate_path(theta, config.horizon, rng);
  });
  return paths;
}

/// Reduces a path to (B, N, T). The final sojourn is censored at the horizon.
inline PathStats path_stats(const Path& path, int p) {
  PathStats s;
  s.initial_state = path.events.front().state;
  s.N = Eigen::MatrixXi::Zero(p, p);
  s.T = Eigen::VectorXd::Zero(p);
  s.horizon = path.horizon;
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    const auto& e = path.events[i];
    const double end = i + 1 < path.events.size() ? path.events[i + 1].time : path.horizon;
    s.T(e.state) += end - e.time;
    if (i + 1 < path.events.size()) ++s.N(e.state, path.events[i + 1].state);
  }
  return s;
}

inline Sample sample_stats(const std::vector<Path>& paths, int p) {
  Sample out;
  out.reserve(paths.size());
  for (const auto& path : paths) out.push_back(path_stats(path, p));
  return out;
}

/// Convenience: simulate and reduce in one go.
inline Sample simulate_stats(const ModelParams& theta, const SimConfig& config) {
  return sample_stats(simulate_sample(theta, config), theta.p);
}

}  // namespace rscmjp

#endif  // RSCMJP_SIMULATOR_HPP_
