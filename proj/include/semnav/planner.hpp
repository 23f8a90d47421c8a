#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semnav/irl.hpp"
#include "semnav/raster.hpp"

namespace semnav {

/// Cost-map entries equal to +inf are forbidden cells.
struct RouteQuery {
  Cell start;
  Cell goal;
  std::string profile = "safe";
  double lambda = 1.0;  // 1: learned cost only, 0: distance only

  void validate(int width, int height) const;
};

struct RoutePlan {
  std::vector<Cell> path;
  double total_cost = 0.0;
  double total_distance = 0.0;

  friend bool operator==(const RoutePlan&, const RoutePlan&) = default;
};

/// Blend defaults for named profiles: "safe" -> 1.0, "fast" -> 0.25.
double profile_lambda(const std::string& profile);

double step_length(Cell a, Cell b);

/// len(a,b) * [lambda * (cost(a) + cost(b)) / 2 + (1 - lambda)]
double edge_cost(const CostMap& costs, Cell a, Cell b, double lambda);

/// Dijkstra on the 8-connected grid. Equal-cost labels (relative 1e-12) are
/// ordered by step count, then by the predecessor's row-major index.
RoutePlan plan(const CostMap& costs, const RouteQuery& query);

/// plan() with lambda = 0.
RoutePlan shortest_distance_path(int width, int height, const RouteQuery& query);

/// Picks the goal with the lowest planned cost (first listed on ties).
RoutePlan plan_to_nearest(const CostMap& costs, const RouteQuery& query, const std::vector<Cell>& goals);

/// Re-costs a path under a cost map; checks adjacency.
RoutePlan evaluate_path(const CostMap& costs, const std::vector<Cell>& path, double lambda);

struct ClassAttribution {
  std::uint8_t class_id = 0;
  std::string name;
  int cells_on_alternative = 0;
  double cost_share_alternative = 0.0;
  int cells_on_chosen = 0;
  double cost_share_chosen = 0.0;
};

struct Explanation {
  RoutePlan chosen;
  RoutePlan alternative;
  std::vector<ClassAttribution> per_class;  // one entry per palette class, id order
  std::optional<std::uint8_t> top_class;     // absent when chosen == alternative
  std::string summary;
};

/// Half-edge attribution: each edge's cost is split evenly between its two
/// endpoint cells, and each half goes to that cell's class.
std::vector<double> attribute_path(const CostMap& costs, const std::vector<Cell>& path, double lambda,
                                   const SemanticRaster& semantic, std::size_t class_count);

Explanation explain(const RoutePlan& chosen, const RoutePlan& alternative, const CostMap& costs, double lambda,
                    const SemanticRaster& semantic, const LabelPalette& palette);

}  // namespace semnav
