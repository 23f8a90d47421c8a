#pragma once

// Reference computations written independently of the library code paths
// they check: enumeration, rollouts and finite differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "semnav/irl.hpp"
#include "semnav/mlp.hpp"
#include "semnav/planner.hpp"
#include "semnav/rng.hpp"

namespace oracle {

using semnav::Cell;

inline std::vector<Cell> king_neighbors(Cell c, int width, int height) {
  std::vector<Cell> out;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const Cell n{c.row + dr, c.col + dc};
      if (n.row >= 0 && n.col >= 0 && n.row < height && n.col < width) out.push_back(n);
    }
  return out;
}

/// Sum over every state sequence that first reaches the goal within
/// `horizon` moves of exp(sum of rewards of the cells it leaves).
inline double brute_force_partition(const semnav::GridMdp& mdp, const Eigen::VectorXd& reward, Cell start) {
  double total = 0.0;
  std::function<void(Cell, int, double)> walk = [&](Cell at, int left, double acc) {
    if (at == mdp.goal) {
      total += std::exp(acc);
      return;
    }
    if (left == 0) return;
    const double r = reward(Eigen::Index(mdp.index(at)));
    for (Cell n : king_neighbors(at, mdp.width, mdp.height)) walk(n, left - 1, acc + r);
  };
  walk(start, mdp.horizon, 0.0);
  return total;
}

/// Visitation counts summed over t = 0..H from sampled rollouts, with the
/// action distribution rebuilt from the value table.
inline Eigen::VectorXd monte_carlo_svf(const semnav::GridMdp& mdp, const semnav::SoftPolicy& policy, Cell start,
                                       int rollouts, std::uint64_t seed) {
  const int horizon = policy.horizon();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(Eigen::Index(mdp.cells()));
  semnav::SplitMix64 rng(seed);
  const std::size_t goal = mdp.index(mdp.goal);
  for (int n = 0; n < rollouts; ++n) {
    Cell at = start;
    counts(Eigen::Index(mdp.index(at))) += 1.0;
    for (int t = 0; t < horizon; ++t) {
      const std::size_t s = mdp.index(at);
      if (s != goal) {
        const auto next = king_neighbors(at, mdp.width, mdp.height);
        const int budget = horizon - t;
        const double vs = policy.value(budget, s);
        std::vector<double> p(next.size());
        for (std::size_t a = 0; a < next.size(); ++a)
          p[a] = std::isinf(vs) ? 1.0 / double(next.size())
                                : std::exp(policy.reward()(Eigen::Index(s)) + policy.value(budget - 1, mdp.index(next[a])) - vs);
        double u = rng.uniform() * std::accumulate(p.begin(), p.end(), 0.0);
        std::size_t pick = 0;
        while (pick + 1 < p.size() && u >= p[pick]) u -= p[pick++];
        at = next[pick];
      }
      counts(Eigen::Index(mdp.index(at))) += 1.0;
    }
  }
  return counts / double(rollouts);
}

/// Central differences of f at w, step h.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& w,
                                         double h) {
  Eigen::VectorXd g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Eigen::VectorXd hi = w, lo = w;
    hi(i) += h;
    lo(i) -= h;
    g(i) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

/// Minimum over all simple 8-connected paths of the blended edge cost,
/// via depth-first enumeration with branch-and-bound on the running cost.
inline double brute_force_route_cost(const semnav::CostMap& costs, Cell start, Cell goal, double lambda) {
  const int w = costs.width, h = costs.height;
  std::vector<char> seen(std::size_t(w) * h, 0);
  double best = std::numeric_limits<double>::infinity();
  auto edge = [&](Cell a, Cell b) {
    const double len = (a.row != b.row && a.col != b.col) ? std::sqrt(2.0) : 1.0;
    return len * (lambda * (costs(a.row, a.col) + costs(b.row, b.col)) / 2.0 + (1.0 - lambda));
  };
  std::function<void(Cell, double)> walk = [&](Cell at, double acc) {
    if (acc >= best) return;
    if (at == goal) {
      best = acc;
      return;
    }
    for (Cell n : king_neighbors(at, w, h)) {
      const std::size_t i = std::size_t(n.row) * w + n.col;
      if (seen[i]) continue;
      seen[i] = 1;
      walk(n, acc + edge(at, n));
      seen[i] = 0;
    }
  };
  seen[std::size_t(start.row) * w + start.col] = 1;
  walk(start, 0.0);
  return best;
}

/// Every parameter gradient of L = sum(upstream .* logits) against central
/// differences. Returns the worst |a-b| / max(|a|, |b|, floor).
inline double mlp_gradient_error(semnav::MlpModel model, const Eigen::MatrixXd& batch, const Eigen::MatrixXd& upstream,
                                 double step = 1e-5, double floor = 1e-6) {
  auto loss = [&] { return (semnav::mlp_forward_batch(model, batch).array() * upstream.array()).sum(); };
  const auto grads = semnav::mlp_backward_tape(model, semnav::mlp_forward_tape(model, batch), upstream);
  double worst = 0.0;
  auto check = [&](double analytic, double& param) {
    const double keep = param;
    param = keep + step;
    const double up = loss();
    param = keep - step;
    const double down = loss();
    param = keep;
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor}));
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) check(grads.layers[l].weight(r, c), layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) check(grads.layers[l].bias(r), layer.bias(r));
  }
  return worst;
}

}  // namespace oracle
