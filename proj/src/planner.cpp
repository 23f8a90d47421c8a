#include "semnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <queue>
#include <set>
#include <tuple>

#include "semnav/error.hpp"

namespace semnav {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::string cell_text(Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

bool near_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

void RouteQuery::validate(int width, int height) const {
  auto inside = [&](Cell c) { return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width; };
  if (!inside(start)) fail(ErrorKind::InvalidArgument, "start " + cell_text(start) + " is out of bounds");
  if (!inside(goal)) fail(ErrorKind::InvalidArgument, "goal " + cell_text(goal) + " is out of bounds");
  if (start == goal) fail(ErrorKind::InvalidArgument, "start and goal must differ");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::InvalidArgument, "lambda must lie in [0, 1]");
}

double profile_lambda(const std::string& profile) {
  if (profile == "fast") return 0.25;
  return 1.0;
}

double step_length(Cell a, Cell b) { return (a.row != b.row && a.col != b.col) ? std::numbers::sqrt2 : 1.0; }

double edge_cost(const CostMap& costs, Cell a, Cell b, double lambda) {
  const double blended = lambda == 0.0 ? 1.0 : lambda * (costs(a.row, a.col) + costs(b.row, b.col)) / 2.0 + (1.0 - lambda);
  return step_length(a, b) * blended;
}

RoutePlan plan(const CostMap& costs, const RouteQuery& query) {
  query.validate(costs.width, costs.height);
  const std::size_t n = costs.size();
  const std::size_t source = costs.index(query.start), target = costs.index(query.goal);
  std::vector<double> dist(n, kInf);
  std::vector<int> steps(n, std::numeric_limits<int>::max());
  std::vector<std::size_t> pred(n, kNone);
  std::vector<bool> settled(n, false);

  using Label = std::tuple<double, int, std::size_t>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> open;
  dist[source] = 0.0;
  steps[source] = 0;
  open.emplace(0.0, 0, source);
  const bool blocked_start = query.lambda > 0.0 && !std::isfinite(costs.data[source]);
  if (blocked_start) fail(ErrorKind::NoRoute, "start " + cell_text(query.start) + " is a forbidden cell");

  while (!open.empty()) {
    const auto [d, k, u] = open.top();
    open.pop();
    if (settled[u] || d != dist[u] || k != steps[u]) continue;
    settled[u] = true;
    if (u == target) break;
    const Cell cu = costs.cell(u);
    for (const Cell& m : kKingMoves) {
      const Cell cv{cu.row + m.row, cu.col + m.col};
      if (!costs.contains(cv)) continue;
      const std::size_t v = costs.index(cv);
      if (settled[v]) continue;
      const double w = edge_cost(costs, cu, cv, query.lambda);
      if (!std::isfinite(w)) continue;
      const double nd = d + w;
      const int nk = k + 1;
      bool better = false;
      if (dist[v] == kInf || (nd < dist[v] && !near_equal(nd, dist[v]))) {
        better = true;
      } else if (near_equal(nd, dist[v])) {
        better = nk < steps[v] || (nk == steps[v] && u < pred[v]);
      }
      if (better) {
        dist[v] = nd;
        steps[v] = nk;
        pred[v] = u;
        open.emplace(nd, nk, v);
      }
    }
  }
  if (!settled[target])
    fail(ErrorKind::NoRoute, "no route from " + cell_text(query.start) + " to " + cell_text(query.goal));

  RoutePlan out;
  for (std::size_t at = target; at != kNone; at = pred[at]) out.path.push_back(costs.cell(at));
  std::reverse(out.path.begin(), out.path.end());
  out.total_cost = dist[target];
  for (std::size_t i = 1; i < out.path.size(); ++i) out.total_distance += step_length(out.path[i - 1], out.path[i]);
  return out;
}

RoutePlan shortest_distance_path(int width, int height, const RouteQuery& query) {
  RouteQuery q = query;
  q.lambda = 0.0;
  const CostMap unit(width, height, 1.0);
  return plan(unit, q);
}

RoutePlan plan_to_nearest(const CostMap& costs, const RouteQuery& query, const std::vector<Cell>& goals) {
  if (goals.empty()) fail(ErrorKind::InvalidArgument, "at least one goal is required");
  std::optional<RoutePlan> best;
  for (const Cell& g : goals) {
    RouteQuery q = query;
    q.goal = g;
    RoutePlan candidate;
    try {
      candidate = plan(costs, q);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NoRoute) continue;
      throw;
    }
    if (!best || candidate.total_cost < best->total_cost) best = std::move(candidate);
  }
  if (!best) fail(ErrorKind::NoRoute, "no candidate goal is reachable from " + cell_text(query.start));
  return *best;
}

RoutePlan evaluate_path(const CostMap& costs, const std::vector<Cell>& path, double lambda) {
  if (path.empty()) fail(ErrorKind::InvalidArgument, "path is empty");
  RoutePlan out;
  out.path = path;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!costs.contains(path[i])) fail(ErrorKind::InvalidArgument, "path cell " + cell_text(path[i]) + " is out of bounds");
    if (i == 0) continue;
    const int dr = std::abs(path[i].row - path[i - 1].row), dc = std::abs(path[i].col - path[i - 1].col);
    if (std::max(dr, dc) != 1)
      fail(ErrorKind::InvalidArgument, "path step " + std::to_string(i) + " is not an 8-adjacent move");
    out.total_cost += edge_cost(costs, path[i - 1], path[i], lambda);
    out.total_distance += step_length(path[i - 1], path[i]);
  }
  return out;
}

std::vector<double> attribute_path(const CostMap& costs, const std::vector<Cell>& path, double lambda,
                                   const SemanticRaster& semantic, std::size_t class_count) {
  std::vector<double> shares(class_count, 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Cell a = path[i - 1], b = path[i];
    const double len = step_length(a, b);
    const double half_a = lambda == 0.0 ? len / 2.0 : len * (lambda * costs(a.row, a.col) + (1.0 - lambda)) / 2.0;
    const double half_b = lambda == 0.0 ? len / 2.0 : len * (lambda * costs(b.row, b.col) + (1.0 - lambda)) / 2.0;
    shares.at(semantic(a.row, a.col)) += half_a;
    shares.at(semantic(b.row, b.col)) += half_b;
  }
  return shares;
}

Explanation explain(const RoutePlan& chosen, const RoutePlan& alternative, const CostMap& costs, double lambda,
                    const SemanticRaster& semantic, const LabelPalette& palette) {
  if (chosen.path.empty() || alternative.path.empty()) fail(ErrorKind::InvalidArgument, "plans must be nonempty");
  if (chosen.path.front() != alternative.path.front() || chosen.path.back() != alternative.path.back())
    fail(ErrorKind::InvalidArgument, "chosen and alternative routes do not share endpoints");
  if (semantic.width != costs.width || semantic.height != costs.height)
    fail(ErrorKind::DimensionMismatch, "semantic raster and cost map differ in size");
  validate(semantic, palette);

  Explanation out;
  out.chosen = chosen;
  out.alternative = alternative;
  const auto share_chosen = attribute_path(costs, chosen.path, lambda, semantic, palette.size());
  const auto share_alt = attribute_path(costs, alternative.path, lambda, semantic, palette.size());
  const std::set<Cell> chosen_cells(chosen.path.begin(), chosen.path.end());
  std::vector<int> avoided(palette.size(), 0);
  for (const auto& cls : palette.classes()) out.per_class.push_back({cls.id, cls.name, 0, share_alt[cls.id], 0, share_chosen[cls.id]});
  for (const Cell& c : alternative.path) {
    ++out.per_class[semantic(c.row, c.col)].cells_on_alternative;
    if (!chosen_cells.count(c)) ++avoided[semantic(c.row, c.col)];
  }
  for (const Cell& c : chosen.path) ++out.per_class[semantic(c.row, c.col)].cells_on_chosen;

  if (chosen.path == alternative.path) {
    out.summary = "The shortest route is also the lowest-cost route.";
    return out;
  }
  std::size_t top = 0;
  for (std::size_t c = 1; c < out.per_class.size(); ++c) {
    const double gap = out.per_class[c].cost_share_alternative - out.per_class[c].cost_share_chosen;
    const double best = out.per_class[top].cost_share_alternative - out.per_class[top].cost_share_chosen;
    if (gap > best) top = c;
  }
  out.top_class = std::uint8_t(top);
  const auto& t = out.per_class[top];
  const double percent = alternative.total_cost > 0.0 ? 100.0 * t.cost_share_alternative / alternative.total_cost : 0.0;
  char buffer[512];
  std::snprintf(buffer, sizeof buffer,
                "Route avoids %d cells of '%s', which contribute %.1f%% of the alternative's cost; chosen route is %.2f "
                "steps longer and %.2f cheaper.",
                avoided[top], t.name.c_str(), percent, chosen.total_distance - alternative.total_distance,
                alternative.total_cost - chosen.total_cost);
  out.summary = buffer;
  return out;
}

}  // namespace semnav
