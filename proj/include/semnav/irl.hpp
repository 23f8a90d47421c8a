#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "semnav/features.hpp"
#include "semnav/raster.hpp"
#include "semnav/rng.hpp"

namespace semnav {

/// King moves in fixed order; the goal only has STAY.
inline constexpr std::array<Cell, 8> kKingMoves = {
    Cell{-1, -1}, Cell{-1, 0}, Cell{-1, 1}, Cell{0, -1}, Cell{0, 1}, Cell{1, -1}, Cell{1, 0}, Cell{1, 1}};

/// Deterministic grid MDP with per-cell features and an absorbing goal.
struct GridMdp {
  int width = 0;
  int height = 0;
  FeatureMatrix features;  // (width*height) x F
  Cell goal;
  int horizon = 1;

  std::size_t cells() const { return std::size_t(width) * std::size_t(height); }
  std::size_t index(Cell c) const { return std::size_t(c.row) * std::size_t(width) + std::size_t(c.col); }
  Cell cell(std::size_t i) const { return {int(i / std::size_t(width)), int(i % std::size_t(width))}; }
  bool contains(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width; }
  Eigen::Index feature_dim() const { return features.cols(); }

  /// Successor indices: in-bounds king moves, or {goal} at the goal.
  std::vector<std::size_t> successors(std::size_t s) const;
  void validate() const;
};

int default_horizon(int width, int height);

/// One-hot class features, optionally followed by extractor features.
FeatureMatrix semantic_features(const SemanticRaster& semantic, std::size_t class_count,
                                const FeatureVolume* extra = nullptr);

GridMdp make_grid_mdp(const SemanticRaster& semantic, std::size_t class_count, Cell goal, int horizon,
                      const FeatureVolume* extra = nullptr);

struct Demonstration {
  std::vector<Cell> path;
};

struct RewardWeights {
  Eigen::VectorXd w;
};

Eigen::VectorXd rewards(const GridMdp& mdp, const RewardWeights& weights);

/// Soft values for every remaining-step budget. values(t, s) = V_t(s) with
/// V_0 = 0 at the goal and -inf elsewhere:
///   V_{t+1}(s) = logsumexp_a [ r(s) + V_t(next(s, a)) ],  V_t(goal) = 0.
/// step_probs(k, s) is the MaxEnt action distribution at time k (H-k steps
/// left): pi_k(a|s) ∝ exp(r(s) + V_{H-k-1}(next(s, a))). Step 0 is the
/// policy of the final backward pass.
class SoftPolicy {
public:
  using ValueTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SoftPolicy(const GridMdp& mdp, Eigen::VectorXd reward, ValueTable values);

  int horizon() const { return int(values_.rows()) - 1; }
  double value(std::size_t s) const { return values_(horizon(), Eigen::Index(s)); }
  double value(int budget, std::size_t s) const { return values_(budget, Eigen::Index(s)); }
  const Eigen::VectorXd& reward() const { return reward_; }

  /// Probabilities aligned with mdp.successors(s). Cells that cannot reach
  /// the goal in the remaining budget get a uniform distribution.
  std::vector<double> step_probs(int step, std::size_t s) const;
  std::vector<double> final_pass_probs(std::size_t s) const { return step_probs(0, s); }

  const GridMdp& mdp() const { return *mdp_; }

private:
  const GridMdp* mdp_;
  Eigen::VectorXd reward_;
  ValueTable values_;  // (H+1) x cells
};

SoftPolicy soft_value_iteration(const GridMdp& mdp, const RewardWeights& weights);

struct StateVisitation {
  Eigen::VectorXd total;        // sum_{t=0..H} D_t
  double arrived_mass = 0.0;    // D_H(goal)
  std::vector<double> step_mass;  // sum_s D_t(s) per t, for conservation checks
};

/// Forward propagation of start mass through the time-indexed policy.
StateVisitation expected_svf(const GridMdp& mdp, const SoftPolicy& policy, const Eigen::VectorXd& start_distribution);

/// Feature counts of the visitation with the goal counted once on arrival,
/// matching how demonstrations count their final cell.
Eigen::VectorXd expected_feature_counts(const GridMdp& mdp, const StateVisitation& svf);

void validate_demonstration(const GridMdp& mdp, const Demonstration& demo);

/// mean over demos of sum over every path cell of phi(cell).
Eigen::VectorXd demo_feature_expectations(const std::vector<Demonstration>& demos, const GridMdp& mdp);

Eigen::VectorXd start_distribution(const std::vector<Demonstration>& demos, const GridMdp& mdp);

/// mean_n [ sum_{departed cells} r - V_H(start_n) ] - l2/2 |w|^2
double log_likelihood(const GridMdp& mdp, const std::vector<Demonstration>& demos, const RewardWeights& weights, double l2);

/// mu_hat - expected feature counts - l2 * w
Eigen::VectorXd irl_gradient(const GridMdp& mdp, const std::vector<Demonstration>& demos, const RewardWeights& weights,
                             double l2);

struct IrlConfig {
  double learning_rate = 0.1;
  int iterations = 100;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  int horizon = 0;  // 0: default_horizon(width, height)

  void validate() const;
};

struct IrlTrainResult {
  RewardWeights weights;
  std::vector<double> gradient_norms;
  std::vector<double> moment_gaps;  // |mu_hat - expected counts|_inf per iteration
};

/// Adam ascent on the log-likelihood from w = 0.
IrlTrainResult irl_train(const GridMdp& mdp, const std::vector<Demonstration>& demos, const IrlConfig& config);

inline constexpr double kCostFloor = 1e-3;

struct CostMap : Grid<double> {
  using Grid::Grid;
};

/// cost(s) = max r - r(s) + 1e-3.
CostMap cost_map(const GridMdp& mdp, const RewardWeights& weights);

/// Rolls out the time-indexed policy from `start` until the goal or horizon.
Demonstration sample_path(const GridMdp& mdp, const SoftPolicy& policy, Cell start, SplitMix64& rng);

}  // namespace semnav
