// End-to-end acceptance runs. One PASS/FAIL line per criterion; the exit
// status is nonzero when any line fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scratch_dir.hpp"

#include "semnav/fewshot.hpp"
#include "semnav/frugal.hpp"
#include "semnav/irl.hpp"
#include "semnav/metrics.hpp"
#include "semnav/mlp.hpp"
#include "semnav/planner.hpp"
#include "semnav/pnm.hpp"
#include "semnav/service.hpp"
#include "semnav/synthetic.hpp"

using namespace semnav;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

FrugalConfig frugal_config(std::uint64_t seed) {
  FrugalConfig c;
  c.pixel_fraction = 0.04;
  c.sgd.epochs = 40;
  c.sgd.learning_rate = 0.1;
  c.sgd.seed = seed;
  return c;
}

// 1 ------------------------------------------------------------------------

Outcome label_fraction() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> gaps;
  std::string per_seed;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto bench = make_shapes({20, 128, seed});
    const auto curve = label_fraction_curve(to_dataset(bench, 0, 16), to_dataset(bench, 16, 20), {0.35, 1.0},
                                            frugal_config(seed));
    const double a35 = 100.0 * curve[0].metrics.overall_accuracy;
    const double a100 = 100.0 * curve[1].metrics.overall_accuracy;
    gaps.push_back(a100 - a35);
    per_seed += fmt(" [seed %d: %.2f%% vs %.2f%%]", int(seed), a35, a100);
  }
  const double gap = median(gaps);
  const double secs = seconds_since(t0);
  return {std::abs(gap) <= 3.0 && secs < 300.0,
          fmt("median gap %.2f points, %.0f s;", gap, secs) + per_seed};
}

// 2 ------------------------------------------------------------------------

Outcome pixel_sampling() {
  const auto bench = make_shapes({20, 128, 4});
  const auto train_set = to_dataset(bench, 0, 16);
  const auto holdout = to_dataset(bench, 16, 20);
  const auto volumes = extract_all(train_set);
  const auto hold_volumes = extract_all(holdout);
  auto accuracy = [&](double pf) {
    auto cfg = frugal_config(4);
    cfg.pixel_fraction = pf;
    return 100.0 * evaluate(train(train_set, volumes, cfg).model, holdout, hold_volumes).overall_accuracy;
  };
  const double sparse = accuracy(0.04), full = accuracy(1.0);
  return {full - sparse <= 2.0, fmt("pixel_fraction 0.04: %.2f%%, 1.0: %.2f%% (40 epochs each)", sparse, full)};
}

// 3 ------------------------------------------------------------------------

Outcome mlp_gradients() {
  SplitMix64 rng(33);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    std::vector<int> sizes = {1 + int(rng.next() % 6)};
    const int hidden_layers = int(rng.next() % 3);
    for (int l = 0; l < hidden_layers; ++l) sizes.push_back(1 + int(rng.next() % 8));
    sizes.push_back(1 + int(rng.next() % 5));
    auto model = MlpModel::he_uniform(sizes, rng.next());
    for (auto& layer : model.layers)
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.2 * rng.normal();
    const int batch = 1 + int(rng.next() % 4);
    Eigen::MatrixXd x(batch, sizes.front()), up(batch, sizes.back());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.normal();
    worst = std::max(worst, oracle::mlp_gradient_error(model, x, up));
  }
  return {worst < 1e-5, fmt("worst relative error %.3g over 100 instances", worst)};
}

// 4 ------------------------------------------------------------------------

SemanticRaster random_semantic(int w, int h, int classes, SplitMix64& rng) {
  SemanticRaster s(w, h);
  for (auto& v : s.data) v = std::uint8_t(rng.next() % std::uint64_t(classes));
  return s;
}

Outcome irl_oracles() {
  SplitMix64 rng(44);
  // (a)
  double part_err = 0.0;
  for (int n = 0; n < 5; ++n) {
    const auto s = random_semantic(3, 3, 3, rng);
    const GridMdp mdp = make_grid_mdp(s, 3, {2, 2}, 4);
    const RewardWeights w{Eigen::Vector3d(-0.1 - rng.uniform(), -rng.uniform(), -2.0 * rng.uniform())};
    const auto policy = soft_value_iteration(mdp, w);
    for (std::size_t st = 0; st < mdp.cells(); ++st) {
      const double brute = oracle::brute_force_partition(mdp, rewards(mdp, w), mdp.cell(st));
      part_err = std::max(part_err, std::abs(std::exp(policy.value(st)) - brute) / brute);
    }
  }
  // (b)
  const auto s4 = random_semantic(4, 4, 3, rng);
  const GridMdp mdp4 = make_grid_mdp(s4, 3, {3, 3}, 6);
  const RewardWeights w4{Eigen::Vector3d(-0.3, -1.0, -0.6)};
  const auto policy4 = soft_value_iteration(mdp4, w4);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(16);
  start(0) = 1.0;
  const auto svf = expected_svf(mdp4, policy4, start);
  const auto mc = oracle::monte_carlo_svf(mdp4, policy4, {0, 0}, 100000, 45);
  const double svf_err = (svf.total - mc).cwiseAbs().maxCoeff();
  // (c)
  double grad_err = 0.0;
  for (int n = 0; n < 5; ++n) {
    const auto s = random_semantic(4, 4, 3, rng);
    const GridMdp mdp = make_grid_mdp(s, 3, {3, 2}, 6);
    std::vector<Demonstration> demos;
    const auto planted = soft_value_iteration(mdp, RewardWeights{Eigen::Vector3d(-0.2, -1.0, -0.5)});
    while (demos.size() < 8) {
      const Cell c{int(rng.next() % 4), int(rng.next() % 2)};
      auto d = sample_path(mdp, planted, c, rng);
      if (d.path.back() == mdp.goal) demos.push_back(std::move(d));
    }
    const Eigen::Vector3d w(-rng.uniform(), -rng.uniform(), 0.5 - rng.uniform());
    const double l2 = 0.1 * rng.uniform();
    const auto g = irl_gradient(mdp, demos, RewardWeights{w}, l2);
    const auto fd = oracle::finite_difference([&](const Eigen::VectorXd& v) { return log_likelihood(mdp, demos, RewardWeights{v}, l2); },
                                              w, 1e-5);
    grad_err = std::max(grad_err, (g - fd).norm() / std::max(g.norm(), 1e-12));
  }
  return {part_err < 1e-6 && svf_err < 0.01 && grad_err < 1e-4,
          fmt("(a) partition rel %.2g; (b) svf max dev %.4f; (c) gradient rel %.2g", part_err, svf_err, grad_err)};
}

// 5 ------------------------------------------------------------------------

SemanticRaster blob_map(int n, SplitMix64& rng) {
  SemanticRaster s(n, n, 0);
  for (int k = 0; k < 10; ++k) {
    const auto cls = std::uint8_t(1 + rng.next() % 3);
    const int r0 = int(rng.next() % std::uint64_t(n)), c0 = int(rng.next() % std::uint64_t(n));
    const int h = 2 + int(rng.next() % 5), w = 2 + int(rng.next() % 5);
    for (int r = r0; r < std::min(n, r0 + h); ++r)
      for (int c = c0; c < std::min(n, c0 + w); ++c) s(r, c) = cls;
  }
  return s;
}

Outcome planted_recovery() {
  SplitMix64 rng(55);
  const int n = 16;
  const auto semantic = blob_map(n, rng);
  const Cell goal{12, 13};
  const GridMdp mdp = make_grid_mdp(semantic, 4, goal, 3 * n);
  const RewardWeights planted{Eigen::Vector4d(-0.2, -0.6, -1.5, -3.0)};
  const auto policy = soft_value_iteration(mdp, planted);
  std::vector<Demonstration> demos;
  while (demos.size() < 300) {
    const Cell c{int(rng.next() % n), int(rng.next() % n)};
    if (c == goal) continue;
    auto d = sample_path(mdp, policy, c, rng);
    if (d.path.back() == goal) demos.push_back(std::move(d));
  }
  IrlConfig cfg;
  cfg.horizon = mdp.horizon;
  cfg.iterations = 200;
  const auto trained = irl_train(mdp, demos, cfg);
  const auto mu = demo_feature_expectations(demos, mdp);
  const auto learned_policy = soft_value_iteration(mdp, trained.weights);
  const auto expected = expected_feature_counts(mdp, expected_svf(mdp, learned_policy, start_distribution(demos, mdp)));
  const double gap = (mu - expected).norm() / mu.norm();

  const auto learned_costs = cost_map(mdp, trained.weights);
  const auto planted_costs = cost_map(mdp, planted);
  int same = 0;
  for (int k = 0; k < 100; ++k) {
    RouteQuery q;
    q.start = {int(rng.next() % n), int(rng.next() % n)};
    do q.goal = {int(rng.next() % n), int(rng.next() % n)};
    while (q.goal == q.start);
    same += plan(learned_costs, q).path == plan(planted_costs, q).path;
  }
  const auto& w = trained.weights.w;
  return {gap <= 0.02 && same >= 90,
          fmt("moment gap %.4f relative; %d/100 routes coincide; learned w = [%.2f %.2f %.2f %.2f]", gap, same, w(0), w(1),
              w(2), w(3))};
}

// 6 and the attribution half of 8 -------------------------------------------

struct RandomRoutes {
  int exact = 0;
  int bitwise = 0;
  int total = 0;
  double worst_attribution = 0.0;
};

RandomRoutes random_routes() {
  SplitMix64 rng(66);
  RandomRoutes out;
  for (int k = 0; k < 200; ++k) {
    const int w = 2 + int(rng.next() % 4), h = 2 + int(rng.next() % 4);
    CostMap costs(w, h);
    for (auto& v : costs.data) v = kCostFloor + 5.0 * rng.uniform();
    SemanticRaster semantic(w, h);
    for (auto& v : semantic.data) v = std::uint8_t(rng.next() % 3);
    const LabelPalette palette({{0, "a", {1, 1, 1}}, {1, "b", {2, 2, 2}}, {2, "c", {3, 3, 3}}});
    RouteQuery q;
    q.start = {int(rng.next() % std::uint64_t(h)), int(rng.next() % std::uint64_t(w))};
    do q.goal = {int(rng.next() % std::uint64_t(h)), int(rng.next() % std::uint64_t(w))};
    while (q.goal == q.start);
    q.lambda = std::array{0.0, 0.25, 1.0, rng.uniform()}[k % 4];
    const auto chosen = plan(costs, q);
    const double brute = oracle::brute_force_route_cost(costs, q.start, q.goal, q.lambda);
    // equal-cost paths may sum the same step lengths in another order
    out.exact += std::abs(chosen.total_cost - brute) <= 1e-12 * std::max(1.0, brute);
    out.bitwise += chosen.total_cost == brute;
    ++out.total;

    const auto alternative = evaluate_path(costs, shortest_distance_path(w, h, q).path, q.lambda);
    const auto e = explain(chosen, alternative, costs, q.lambda, semantic, palette);
    double sc = 0.0, sa = 0.0;
    for (const auto& a : e.per_class) {
      sc += a.cost_share_chosen;
      sa += a.cost_share_alternative;
    }
    out.worst_attribution =
        std::max({out.worst_attribution, std::abs(sc - chosen.total_cost), std::abs(sa - alternative.total_cost)});
  }
  return out;
}

Outcome planner_optimality(const RandomRoutes& r) {
  return {r.exact == r.total, fmt("%d/%d grids match the enumerated optimum to 1e-12 relative (%d bitwise)", r.exact,
                                  r.total, r.bitwise)};
}

// 7 ------------------------------------------------------------------------

Outcome fewshot_properties() {
  SplitMix64 rng(77);
  // simplex and K=1 reduction
  double simplex_err = 0.0;
  bool reduction = true;
  for (int n = 0; n < 100; ++n) {
    const int k = 1 + int(rng.next() % 6), dim = 2 + int(rng.next() % 10);
    std::vector<FeatureVector> globals;
    for (int i = 0; i < k; ++i) globals.push_back(FeatureVector::NullaryExpr(dim, [&] { return rng.normal(); }));
    const FeatureVector query = FeatureVector::NullaryExpr(dim, [&] { return rng.normal(); });
    const auto w = fusion_weights(globals, query);
    double sum = 0.0;
    for (double v : w) {
      sum += v;
      if (v < 0.0) simplex_err = 1.0;
    }
    simplex_err = std::max(simplex_err, std::abs(sum - 1.0));
    if (k == 1) {
      ConditioningMap map;
      map.width = 3;
      map.height = 2;
      map.data = FeatureMatrix::NullaryExpr(6, dim, [&] { return rng.normal(); });
      const auto f = fuse_supports({map}, globals, query);
      reduction = reduction && f.weights == std::vector<double>{1.0} && f.fused.data == map.data;
    }
  }

  // Leave one class out: for each novel class in 1..4, a head trained on the
  // other classes, from images that never contain the novel one.
  const auto bench = make_shapes({40, 128, 7});
  std::vector<FeatureVolume> volumes;
  for (const auto& image : bench.images) volumes.push_back(extract_volume(image));
  auto query = [&](const FewshotHead& head, const std::vector<std::size_t>& support, std::size_t q, std::uint8_t cls) {
    std::vector<FeatureVolume> sv;
    std::vector<BinaryMask> sm;
    for (std::size_t i : support) {
      sv.push_back(volumes[i]);
      sm.push_back(binarize(bench.truth[i], cls));
    }
    return mask_iou(segment_query(head, prepare_support(sv, sm), volumes[q]).mask, binarize(bench.truth[q], cls));
  };

  std::string per_class;
  double self_iou = 0.0, iou1 = 0.0, iou5 = 0.0;
  int episodes = 0;
  for (std::uint8_t novel = 1; novel <= 4; ++novel) {
    std::vector<EpisodeVolume> data;
    std::vector<std::size_t> holders;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
      const bool has = binarize(bench.truth[i], novel).foreground_count() > 0;
      data.push_back({has ? FeatureVolume{} : volumes[i], bench.truth[i]});
      if (has) holders.push_back(i);
    }
    std::set<std::uint8_t> train_classes;
    for (std::uint8_t c = 0; c < 5; ++c)
      if (c != novel) train_classes.insert(c);
    FewshotConfig cfg;
    cfg.sgd.seed = 7;
    const auto head = episodic_train(data, 3, train_classes, {novel}, cfg).head;

    double self = 0.0;
    for (std::size_t i : holders) self += query(head, {i}, i, novel);
    self /= double(holders.size());
    self_iou += self / 4.0;
    per_class += fmt(" %s %.3f", bench.palette[novel].name.c_str(), self);

    // 50 episodes over the four heads: a query and 5 other supports
    for (int e = 0; e < (novel <= 2 ? 13 : 12); ++e, ++episodes) {
      std::vector<std::size_t> pool = holders;
      for (std::size_t i = 0; i < 6; ++i) std::swap(pool[i], pool[i + rng.next() % (pool.size() - i)]);
      const std::vector<std::size_t> support(pool.begin() + 1, pool.begin() + 6);
      iou5 += query(head, support, pool[0], novel);
      iou1 += query(head, {support.front()}, pool[0], novel);
    }
  }
  iou1 /= episodes;
  iou5 /= episodes;
  return {simplex_err <= 1e-12 && reduction && self_iou >= 0.95 && iou5 >= iou1,
          fmt("simplex err %.1g; K=1 reduction %s; support-as-query IoU %.3f (mean over held-out classes:", simplex_err,
              reduction ? "exact" : "BROKEN", self_iou) +
              per_class + fmt("); %d episodes: K=5 %.3f vs K=1 %.3f", episodes, iou5, iou1)};
}

// 8 and 9 --------------------------------------------------------------------

struct Scenario {
  Json route;
  std::map<std::string, Bytes> files;
  bool jobs_done = true;
};

Scenario flood_scenario(const std::string& root) {
  const auto f = make_flood({});
  Scenario out;
  Service service(root);
  const auto id = service.create_workspace(save_image(f.image), to_json(f.base_palette).dump());
  service.put_labels(id, save_gray8(f.labels));
  auto done = [&](const std::string& job) {
    const auto r = service.wait(job);
    if (r.status != "done") {
      std::fprintf(stderr, "job %s failed: %s\n", r.id.c_str(), r.error.c_str());
      out.jobs_done = false;
    }
  };
  done(service.start_train_seg(id, {{"pixel_fraction", 0.5}, {"sgd", {{"epochs", 30}, {"seed", 7}}}}));
  done(service.start_add_class(id, "flooded", {{save_image(f.support_image), save_mask(f.support_mask)}}, {{"seed", 7}}));
  done(service.start_train_irl(id, {{"profile", "safe"}, {"demos", to_json(f.demos)}, {"config", {{"horizon", f.horizon}}}}));
  if (!out.jobs_done) return out;
  out.route = service.route(id, {{"start", to_json(f.start)}, {"goal", to_json(f.goal)}, {"profile", "safe"}});
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.files[fs::relative(e.path(), root).string()] = read_file(e.path().string());
  return out;
}

Outcome explanation_exactness(const RandomRoutes& r, const Scenario& s) {
  if (!s.jobs_done) return {false, "scenario job failed"};
  const auto& e = s.route.at("explanation");
  double sc = 0.0, sa = 0.0;
  for (const auto& [name, a] : e.at("per_class_attribution").items()) {
    sc += a.at("cost_share_chosen").get<double>();
    sa += a.at("cost_share_alternative").get<double>();
  }
  const double worst = std::max({r.worst_attribution, std::abs(sc - e.at("chosen").at("total_cost").get<double>()),
                                 std::abs(sa - e.at("alternative").at("total_cost").get<double>())});
  const std::string top = e.at("top_class").is_string() ? e.at("top_class").get<std::string>() : "(none)";
  return {worst <= 1e-9 && top == "flooded",
          fmt("worst attribution residual %.2g over %d instances; flood top class '%s': %s", worst, r.total + 1, top.c_str(),
              e.at("summary").get<std::string>().c_str())};
}

Outcome determinism(const Scenario& a, const Scenario& b) {
  // models and plans outside the service as well
  const auto bench = make_shapes({4, 64, 9});
  auto cfg = frugal_config(9);
  cfg.sgd.epochs = 5;
  const auto m1 = dump_json(to_json(train(to_dataset(bench, 0, 4), cfg).model));
  const auto m2 = dump_json(to_json(train(to_dataset(bench, 0, 4), cfg).model));
  const bool models = m1 == m2;
  const bool registry = a.jobs_done && b.jobs_done && a.files == b.files;
  const bool plans = a.route == b.route;
  std::size_t bytes = 0;
  for (const auto& [name, data] : a.files) bytes += data.size();
  return {models && registry && plans, fmt("models %s; plans %s; registry %s (%d files, %d bytes)",
                                           models ? "identical" : "DIFFER", plans ? "identical" : "DIFFER",
                                           registry ? "identical" : "DIFFER", int(a.files.size()), int(bytes))};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& run) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "label fraction", label_fraction);
  report(2, "pixel sampling", pixel_sampling);
  report(3, "mlp gradients", mlp_gradients);
  report(4, "irl oracles", irl_oracles);
  report(5, "planted recovery", planted_recovery);
  RandomRoutes routes;
  report(6, "planner optimality", [&] {
    routes = random_routes();
    return planner_optimality(routes);
  });
  ScratchDir first("accept-a"), second("accept-b");
  Scenario run_a, run_b;
  report(7, "few-shot properties", fewshot_properties);
  report(8, "explanation exactness", [&] {
    run_a = flood_scenario(first.str());
    return explanation_exactness(routes, run_a);
  });
  report(9, "determinism", [&] {
    run_b = flood_scenario(second.str());
    return determinism(run_a, run_b);
  });
  return failures == 0 ? 0 : 1;
}
