#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "semnav/planner.hpp"

using namespace semnav;

namespace {

CostMap random_costs(int w, int h, SplitMix64& rng) {
  CostMap c(w, h);
  for (auto& v : c.data) v = 0.1 + 5.0 * rng.uniform();
  return c;
}

RouteQuery query(Cell s, Cell g, double lambda = 1.0) {
  RouteQuery q;
  q.start = s;
  q.goal = g;
  q.lambda = lambda;
  return q;
}

}  // namespace

TEST_CASE("uniform map, same row: straight line") {
  const CostMap c(6, 4, 2.0);
  const auto p = plan(c, query({1, 0}, {1, 5}));
  CHECK(p.path.size() == 6);
  for (const auto& cell : p.path) CHECK(cell.row == 1);
  CHECK(p.total_distance == 5.0);
  CHECK(p.total_cost == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("shortest distance path") {
  CHECK(shortest_distance_path(5, 5, query({0, 0}, {0, 1})).path.size() == 2);
  CHECK(shortest_distance_path(5, 5, query({0, 0}, {0, 1})).total_distance == 1.0);
  CHECK(shortest_distance_path(5, 5, query({0, 0}, {3, 3})).total_distance == doctest::Approx(3 * std::sqrt(2.0)));
}

TEST_CASE("dijkstra equals exhaustive enumeration") {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = 2 + int(rng.uniform_index(3)), h = 2 + int(rng.uniform_index(3));
    const auto costs = random_costs(w, h, rng);
    Cell s{int(rng.uniform_index(std::uint64_t(h))), int(rng.uniform_index(std::uint64_t(w)))};
    Cell g = s;
    while (g == s) g = {int(rng.uniform_index(std::uint64_t(h))), int(rng.uniform_index(std::uint64_t(w)))};
    const double lambda = trial % 3 == 0 ? 0.5 : 1.0;
    const auto p = plan(costs, query(s, g, lambda));
    CHECK(p.total_cost == doctest::Approx(oracle::brute_force_route_cost(costs, s, g, lambda)).epsilon(1e-12));
    CHECK(p.path.front() == s);
    CHECK(p.path.back() == g);
    CHECK(evaluate_path(costs, p.path, lambda).total_cost == doctest::Approx(p.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("lambda 0 ignores the cost map") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto costs = random_costs(7, 6, rng);
    const auto q = query({int(rng.uniform_index(6)), 0}, {int(rng.uniform_index(6)), 6}, 0.0);
    const auto a = plan(costs, q);
    const auto b = shortest_distance_path(7, 6, q);
    CHECK(a.path == b.path);
    CHECK(a.total_distance == doctest::Approx(b.total_distance));
  }
}

TEST_CASE("forbidden cells") {
  CostMap c(3, 3, 1.0);
  for (int r = 0; r < 3; ++r) c(r, 1) = INFINITY;
  CHECK_THROWS_AS(plan(c, query({0, 0}, {0, 2})), Error);
}

TEST_CASE("query validation") {
  const CostMap c(3, 3, 1.0);
  CHECK_THROWS_AS(plan(c, query({0, 0}, {0, 0})), Error);
  CHECK_THROWS_AS(plan(c, query({0, 0}, {3, 0})), Error);
}

TEST_CASE("nearest of several goals") {
  CostMap c(5, 1, 1.0);
  const auto q = query({0, 2}, {0, 0});
  const auto p = plan_to_nearest(c, q, {{0, 0}, {0, 3}});
  CHECK(p.path.back() == Cell{0, 3});
}

TEST_CASE("explanation") {
  const auto palette = LabelPalette({{0, "road", {128, 128, 128}}, {1, "flooded", {0, 0, 255}}});
  SUBCASE("5x5 flooded band on the straight line") {
    // Straight route (2,0)->(2,4) crosses flooded cells (2,1),(2,2),(2,3) of
    // cost 10; every other cell costs 1. Half-edge shares on the straight
    // route: endpoints 0.5 each, interior cells 10 each -> 30 of 31.
    SemanticRaster sem(5, 5, 0);
    CostMap c(5, 5, 1.0);
    for (int col = 1; col <= 3; ++col) {
      sem(2, col) = 1;
      c(2, col) = 10.0;
    }
    const auto q = query({2, 0}, {2, 4});
    const auto chosen = plan(c, q);
    const auto alt = evaluate_path(c, shortest_distance_path(5, 5, q).path, 1.0);
    CHECK(alt.total_cost == 31.0);
    // detour via row 1 or 3: two diagonals and two straight steps of cost 1
    CHECK(chosen.total_cost == doctest::Approx(2.0 + 2.0 * std::sqrt(2.0)).epsilon(1e-14));
    const auto ex = explain(chosen, alt, c, 1.0, sem, palette);
    REQUIRE(ex.top_class.has_value());
    CHECK(*ex.top_class == 1);
    CHECK(ex.per_class[1].cost_share_alternative == 30.0);
    CHECK(ex.per_class[1].cost_share_alternative / alt.total_cost == 30.0 / 31.0);
    CHECK(ex.per_class[1].cells_on_alternative == 3);
    CHECK(ex.per_class[1].cells_on_chosen == 0);
    CHECK(ex.summary ==
          "Route avoids 3 cells of 'flooded', which contribute 96.8% of the alternative's cost; chosen route is 0.83 "
          "steps longer and 26.17 cheaper.");
  }
  SUBCASE("identical routes") {
    SemanticRaster sem(4, 1, 0);
    const CostMap c(4, 1, 1.0);
    const auto p = plan(c, query({0, 0}, {0, 3}));
    const auto ex = explain(p, p, c, 1.0, sem, palette);
    CHECK(ex.summary == "The shortest route is also the lowest-cost route.");
    CHECK(!ex.top_class);
    for (const auto& a : ex.per_class) {
      CHECK(a.cost_share_alternative == a.cost_share_chosen);
      CHECK(a.cells_on_alternative == a.cells_on_chosen);
    }
  }
  SUBCASE("shares sum to totals") {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const auto costs = random_costs(8, 7, rng);
      SemanticRaster sem(8, 7);
      for (auto& v : sem.data) v = std::uint8_t(rng.uniform_index(2));
      const double lambda = rng.uniform();
      const auto q = query({int(rng.uniform_index(7)), 0}, {int(rng.uniform_index(7)), 7}, lambda);
      const auto chosen = plan(costs, q);
      const auto alt = evaluate_path(costs, shortest_distance_path(8, 7, q).path, lambda);
      const auto ex = explain(chosen, alt, costs, lambda, sem, palette);
      double a = 0.0, b = 0.0;
      for (const auto& c : ex.per_class) {
        a += c.cost_share_alternative;
        b += c.cost_share_chosen;
      }
      CHECK(std::abs(a - alt.total_cost) < 1e-9);
      CHECK(std::abs(b - chosen.total_cost) < 1e-9);
    }
  }
  SUBCASE("endpoint mismatch") {
    SemanticRaster sem(4, 1, 0);
    const CostMap c(4, 1, 1.0);
    const auto a = plan(c, query({0, 0}, {0, 3}));
    const auto b = plan(c, query({0, 0}, {0, 2}));
    CHECK_THROWS_AS(explain(a, b, c, 1.0, sem, palette), Error);
  }
}
