#include "semnav/irl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semnav/error.hpp"

namespace semnav {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// CSR successor table.
struct Transitions {
  std::vector<std::uint32_t> offset;
  std::vector<std::uint32_t> next;

  explicit Transitions(const GridMdp& mdp) {
    offset.reserve(mdp.cells() + 1);
    offset.push_back(0);
    for (std::size_t s = 0; s < mdp.cells(); ++s) {
      for (std::size_t n : mdp.successors(s)) next.push_back(std::uint32_t(n));
      offset.push_back(std::uint32_t(next.size()));
    }
  }
};

bool adjacent(Cell a, Cell b) {
  const int dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
  return std::max(dr, dc) == 1;
}

std::string cell_text(Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

}  // namespace

std::vector<std::size_t> GridMdp::successors(std::size_t s) const {
  if (s == index(goal)) return {s};
  const Cell c = cell(s);
  std::vector<std::size_t> out;
  out.reserve(8);
  for (const Cell& m : kKingMoves) {
    const Cell n{c.row + m.row, c.col + m.col};
    if (contains(n)) out.push_back(index(n));
  }
  return out;
}

void GridMdp::validate() const {
  if (width <= 0 || height <= 0) fail(ErrorKind::InvalidArgument, "mdp grid must have positive dimensions");
  if (features.rows() != Eigen::Index(cells())) fail(ErrorKind::DimensionMismatch, "one feature row per cell is required");
  if (!contains(goal)) fail(ErrorKind::InvalidArgument, "goal " + cell_text(goal) + " is out of bounds");
  if (horizon < 1) fail(ErrorKind::InvalidArgument, "horizon must be at least 1");
  if (!features.allFinite()) fail(ErrorKind::InvalidArgument, "mdp features must be finite");
}

int default_horizon(int width, int height) { return 4 * (width + height); }

FeatureMatrix semantic_features(const SemanticRaster& semantic, std::size_t class_count, const FeatureVolume* extra) {
  const Eigen::Index extra_dim = extra ? extra->dim() : 0;
  if (extra && (extra->width != semantic.width || extra->height != semantic.height))
    fail(ErrorKind::DimensionMismatch, "extractor features do not match the semantic raster");
  FeatureMatrix phi = FeatureMatrix::Zero(Eigen::Index(semantic.size()), Eigen::Index(class_count) + extra_dim);
  for (std::size_t s = 0; s < semantic.size(); ++s) {
    const auto c = semantic.data[s];
    if (c >= class_count) fail(ErrorKind::LabelDomain, "semantic value " + std::to_string(c) + " at cell " + std::to_string(s) + " exceeds class count");
    phi(Eigen::Index(s), c) = 1.0;
  }
  if (extra) phi.rightCols(extra_dim) = extra->data;
  return phi;
}

GridMdp make_grid_mdp(const SemanticRaster& semantic, std::size_t class_count, Cell goal, int horizon,
                      const FeatureVolume* extra) {
  GridMdp mdp;
  mdp.width = semantic.width;
  mdp.height = semantic.height;
  mdp.features = semantic_features(semantic, class_count, extra);
  mdp.goal = goal;
  mdp.horizon = horizon > 0 ? horizon : default_horizon(semantic.width, semantic.height);
  mdp.validate();
  return mdp;
}

Eigen::VectorXd rewards(const GridMdp& mdp, const RewardWeights& weights) {
  if (weights.w.size() != mdp.feature_dim())
    fail(ErrorKind::DimensionMismatch, "reward weights have " + std::to_string(weights.w.size()) + " entries, features have " +
                                           std::to_string(mdp.feature_dim()));
  return mdp.features * weights.w;
}

SoftPolicy::SoftPolicy(const GridMdp& mdp, Eigen::VectorXd reward, ValueTable values)
    : mdp_(&mdp), reward_(std::move(reward)), values_(std::move(values)) {}

std::vector<double> SoftPolicy::step_probs(int step, std::size_t s) const {
  const auto next = mdp_->successors(s);
  if (s == mdp_->index(mdp_->goal)) return {1.0};
  const int budget = horizon() - step;
  std::vector<double> probs(next.size(), 1.0 / double(next.size()));
  if (budget < 1) return probs;
  const double vs = values_(budget, Eigen::Index(s));
  if (vs == kNegInf) return probs;
  for (std::size_t a = 0; a < next.size(); ++a)
    probs[a] = std::exp(reward_(Eigen::Index(s)) + values_(budget - 1, Eigen::Index(next[a])) - vs);
  return probs;
}

SoftPolicy soft_value_iteration(const GridMdp& mdp, const RewardWeights& weights) {
  mdp.validate();
  Eigen::VectorXd r = rewards(mdp, weights);
  if (!r.allFinite()) fail(ErrorKind::Divergence, "non-finite rewards");
  const Transitions tr(mdp);
  const std::size_t n = mdp.cells();
  const std::size_t goal = mdp.index(mdp.goal);
  SoftPolicy::ValueTable v(mdp.horizon + 1, Eigen::Index(n));
  v.row(0).setConstant(kNegInf);
  v(0, Eigen::Index(goal)) = 0.0;
  for (int t = 0; t < mdp.horizon; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      if (s == goal) {
        v(t + 1, Eigen::Index(s)) = 0.0;
        continue;
      }
      double peak = kNegInf;
      for (auto k = tr.offset[s]; k < tr.offset[s + 1]; ++k) peak = std::max(peak, v(t, Eigen::Index(tr.next[k])));
      if (peak == kNegInf) {
        v(t + 1, Eigen::Index(s)) = kNegInf;
        continue;
      }
      double acc = 0.0;
      for (auto k = tr.offset[s]; k < tr.offset[s + 1]; ++k) acc += std::exp(v(t, Eigen::Index(tr.next[k])) - peak);
      v(t + 1, Eigen::Index(s)) = r(Eigen::Index(s)) + peak + std::log(acc);
    }
  }
  return SoftPolicy(mdp, std::move(r), std::move(v));
}

StateVisitation expected_svf(const GridMdp& mdp, const SoftPolicy& policy, const Eigen::VectorXd& start_distribution) {
  const std::size_t n = mdp.cells();
  if (start_distribution.size() != Eigen::Index(n))
    fail(ErrorKind::DimensionMismatch, "start distribution must have one entry per cell");
  const Transitions tr(mdp);
  const std::size_t goal = mdp.index(mdp.goal);
  const int horizon = policy.horizon();
  const Eigen::VectorXd& r = policy.reward();

  StateVisitation out;
  Eigen::VectorXd d = start_distribution;
  out.total = d;
  out.step_mass.push_back(d.sum());
  Eigen::VectorXd next_d = Eigen::VectorXd::Zero(Eigen::Index(n));
  for (int t = 0; t < horizon; ++t) {
    next_d.setZero();
    const int budget = horizon - t;
    for (std::size_t s = 0; s < n; ++s) {
      const double mass = d(Eigen::Index(s));
      if (mass == 0.0) continue;
      if (s == goal) {
        next_d(Eigen::Index(s)) += mass;
        continue;
      }
      const auto begin = tr.offset[s], end = tr.offset[s + 1];
      const double vs = policy.value(budget, s);
      if (vs == kNegInf) {
        const double share = mass / double(end - begin);
        for (auto k = begin; k < end; ++k) next_d(Eigen::Index(tr.next[k])) += share;
        continue;
      }
      for (auto k = begin; k < end; ++k) {
        const double p = std::exp(r(Eigen::Index(s)) + policy.value(budget - 1, tr.next[k]) - vs);
        next_d(Eigen::Index(tr.next[k])) += mass * p;
      }
    }
    d.swap(next_d);
    out.total += d;
    out.step_mass.push_back(d.sum());
  }
  out.arrived_mass = d(Eigen::Index(goal));
  return out;
}

Eigen::VectorXd expected_feature_counts(const GridMdp& mdp, const StateVisitation& svf) {
  const auto goal = Eigen::Index(mdp.index(mdp.goal));
  Eigen::VectorXd visits = svf.total;
  visits(goal) = svf.arrived_mass;
  return mdp.features.transpose() * visits;
}

void validate_demonstration(const GridMdp& mdp, const Demonstration& demo) {
  if (demo.path.empty()) fail(ErrorKind::Demonstration, "demonstration path is empty");
  for (std::size_t i = 0; i < demo.path.size(); ++i) {
    if (!mdp.contains(demo.path[i]))
      fail(ErrorKind::Demonstration, "step " + std::to_string(i) + ": cell " + cell_text(demo.path[i]) + " is out of bounds");
    if (i > 0 && !adjacent(demo.path[i - 1], demo.path[i]))
      fail(ErrorKind::Demonstration, "step " + std::to_string(i) + ": " + cell_text(demo.path[i - 1]) + " -> " +
                                         cell_text(demo.path[i]) + " is not an 8-adjacent move");
    if (i + 1 < demo.path.size() && demo.path[i] == mdp.goal)
      fail(ErrorKind::Demonstration, "step " + std::to_string(i) + ": path passes the goal before its end");
  }
  if (demo.path.back() != mdp.goal)
    fail(ErrorKind::Demonstration, "step " + std::to_string(demo.path.size() - 1) + ": final cell " +
                                       cell_text(demo.path.back()) + " is not the goal " + cell_text(mdp.goal));
  if (int(demo.path.size()) - 1 > mdp.horizon)
    fail(ErrorKind::Demonstration, "path takes " + std::to_string(demo.path.size() - 1) + " steps, horizon is " +
                                       std::to_string(mdp.horizon));
}

Eigen::VectorXd demo_feature_expectations(const std::vector<Demonstration>& demos, const GridMdp& mdp) {
  if (demos.empty()) fail(ErrorKind::Demonstration, "at least one demonstration is required");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(mdp.feature_dim());
  for (const auto& demo : demos) {
    validate_demonstration(mdp, demo);
    for (const Cell& c : demo.path) mu += mdp.features.row(Eigen::Index(mdp.index(c))).transpose();
  }
  return mu / double(demos.size());
}

Eigen::VectorXd start_distribution(const std::vector<Demonstration>& demos, const GridMdp& mdp) {
  if (demos.empty()) fail(ErrorKind::Demonstration, "at least one demonstration is required");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(Eigen::Index(mdp.cells()));
  for (const auto& demo : demos) p(Eigen::Index(mdp.index(demo.path.front()))) += 1.0;
  return p / double(demos.size());
}

double log_likelihood(const GridMdp& mdp, const std::vector<Demonstration>& demos, const RewardWeights& weights, double l2) {
  if (demos.empty()) fail(ErrorKind::Demonstration, "at least one demonstration is required");
  const auto policy = soft_value_iteration(mdp, weights);
  double total = 0.0;
  for (const auto& demo : demos) {
    validate_demonstration(mdp, demo);
    double path_reward = 0.0;
    for (std::size_t i = 0; i + 1 < demo.path.size(); ++i) path_reward += policy.reward()(Eigen::Index(mdp.index(demo.path[i])));
    total += path_reward - policy.value(mdp.index(demo.path.front()));
  }
  return total / double(demos.size()) - 0.5 * l2 * weights.w.squaredNorm();
}

Eigen::VectorXd irl_gradient(const GridMdp& mdp, const std::vector<Demonstration>& demos, const RewardWeights& weights,
                             double l2) {
  const Eigen::VectorXd mu = demo_feature_expectations(demos, mdp);
  const auto policy = soft_value_iteration(mdp, weights);
  const auto svf = expected_svf(mdp, policy, start_distribution(demos, mdp));
  return mu - expected_feature_counts(mdp, svf) - l2 * weights.w;
}

void IrlConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidArgument, "IRL learning_rate must be positive");
  if (iterations < 0) fail(ErrorKind::InvalidArgument, "IRL iterations must be nonnegative");
  if (!(l2 >= 0.0)) fail(ErrorKind::InvalidArgument, "IRL l2 must be nonnegative");
  if (horizon < 0) fail(ErrorKind::InvalidArgument, "IRL horizon must be positive");
}

IrlTrainResult irl_train(const GridMdp& mdp, const std::vector<Demonstration>& demos, const IrlConfig& config) {
  config.validate();
  mdp.validate();
  const Eigen::VectorXd mu = demo_feature_expectations(demos, mdp);
  const Eigen::VectorXd starts = start_distribution(demos, mdp);
  IrlTrainResult result;
  result.weights.w = Eigen::VectorXd::Zero(mdp.feature_dim());
  // Adam: feature counts scale with path length, so a fixed step on the raw
  // gradient either crawls on short paths or oscillates on long ones.
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mdp.feature_dim());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.feature_dim());
  for (int it = 0; it < config.iterations; ++it) {
    const auto policy = soft_value_iteration(mdp, result.weights);
    const auto svf = expected_svf(mdp, policy, starts);
    const Eigen::VectorXd moments = mu - expected_feature_counts(mdp, svf);
    const Eigen::VectorXd grad = moments - config.l2 * result.weights.w;
    if (!grad.allFinite())
      fail(ErrorKind::Divergence, "non-finite IRL gradient at iteration " + std::to_string(it + 1));
    result.gradient_norms.push_back(grad.norm());
    result.moment_gaps.push_back(moments.cwiseAbs().maxCoeff());
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, it + 1), c2 = 1.0 - std::pow(beta2, it + 1);
    result.weights.w.array() += config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
  return result;
}

CostMap cost_map(const GridMdp& mdp, const RewardWeights& weights) {
  const Eigen::VectorXd r = rewards(mdp, weights);
  const double peak = r.maxCoeff();
  CostMap out(mdp.width, mdp.height);
  for (std::size_t s = 0; s < mdp.cells(); ++s) out.data[s] = (peak - r(Eigen::Index(s))) + kCostFloor;
  return out;
}

Demonstration sample_path(const GridMdp& mdp, const SoftPolicy& policy, Cell start, SplitMix64& rng) {
  if (!mdp.contains(start)) fail(ErrorKind::InvalidArgument, "start " + cell_text(start) + " is out of bounds");
  Demonstration demo;
  demo.path.push_back(start);
  std::size_t cur = mdp.index(start);
  const std::size_t goal = mdp.index(mdp.goal);
  for (int step = 0; step < policy.horizon() && cur != goal; ++step) {
    const auto next = mdp.successors(cur);
    const auto probs = policy.step_probs(step, cur);
    double u = rng.uniform();
    std::size_t pick = 0;
    for (std::size_t a = 0; a < next.size(); ++a)
      if (probs[a] > 0.0) pick = a;
    for (std::size_t a = 0; a < next.size(); ++a) {
      if (u < probs[a]) {
        pick = a;
        break;
      }
      u -= probs[a];
    }
    cur = next[pick];
    demo.path.push_back(mdp.cell(cur));
  }
  return demo;
}

}  // namespace semnav
