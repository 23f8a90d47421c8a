#include "semnav/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "semnav/error.hpp"
#include "semnav/fewshot.hpp"
#include "semnav/frugal.hpp"
#include "semnav/irl.hpp"
#include "semnav/planner.hpp"
#include "semnav/pnm.hpp"
#include "semnav/serialize.hpp"
#include "semnav/service.hpp"
#include "semnav/synthetic.hpp"

// after Eigen: <resolv.h> defines _res
#include "httplib.h"

namespace fs = std::filesystem;

namespace semnav {

Cell parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    const int r = std::stoi(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("");
    const std::string rest = text.substr(comma + 1);
    const int c = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("");
    return {r, c};
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidArgument, "cell '" + text + "' must be written as row,col");
  }
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, sep);)
    if (!part.empty()) parts.push_back(part);
  return parts;
}

LabelPalette read_palette(const std::string& path) { return palette_from_json(parse_json(read_text_file(path), path)); }

ImageRaster read_image(const std::string& path) { return load_image(read_file(path)); }

/// images/<stem>.{pgm,ppm} paired with labels/<stem>.pgm
FrugalDataset read_dataset(const std::string& dir, const LabelPalette& palette) {
  FrugalDataset dataset;
  dataset.palette = palette;
  std::vector<fs::path> images;
  const fs::path image_dir = fs::path(dir) / "images";
  if (!fs::is_directory(image_dir)) fail(ErrorKind::Io, "dataset directory '" + image_dir.string() + "' not found");
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".pgm" || ext == ".ppm") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  for (const auto& image : images) {
    const fs::path label = fs::path(dir) / "labels" / (image.stem().string() + ".pgm");
    if (!fs::exists(label)) fail(ErrorKind::Io, "no label raster '" + label.string() + "' for '" + image.string() + "'");
    dataset.items.push_back({read_image(image.string()), load_sparse_labels(read_file(label.string()), palette)});
  }
  if (dataset.items.empty()) fail(ErrorKind::Io, "no images under '" + image_dir.string() + "'");
  return dataset;
}

std::set<std::uint8_t> class_ids(const LabelPalette& palette, const std::string& names) {
  std::set<std::uint8_t> ids;
  for (const auto& name : split(names, ',')) {
    const auto id = palette.find(name);
    if (!id) fail(ErrorKind::InvalidArgument, "class '" + name + "' is not in the palette");
    ids.insert(*id);
  }
  return ids;
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  for (const auto& part : split(text, ',')) {
    try {
      sizes.push_back(std::stoi(part));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "hidden sizes must be a comma list of integers, got '" + text + "'");
    }
  }
  return sizes;
}

void emit(const Json& j, const std::string& out_path, std::ostream& out) {
  if (out_path.empty())
    out << j.dump() << "\n";
  else
    write_text_file(out_path, dump_json(j));
}

struct RouteArgs {
  std::string semantic;
  std::string palette;
  std::string weights;
  std::string start;
  std::vector<std::string> goals;
  std::string profile = "safe";
  double lambda = -1.0;
  std::string out;
};

void add_route_options(CLI::App* cmd, RouteArgs& a) {
  cmd->add_option("--semantic", a.semantic, "semantic raster (PGM)")->required();
  cmd->add_option("--palette", a.palette, "palette JSON")->required();
  cmd->add_option("--weights", a.weights, "cost profile weights JSON")->required();
  cmd->add_option("--start", a.start, "start cell row,col")->required();
  cmd->add_option("--goal", a.goals, "goal cell row,col (repeatable; nearest by cost wins)")->required();
  cmd->add_option("--profile", a.profile, "profile name (safe|fast)");
  cmd->add_option("--lambda", a.lambda, "cost/length trade-off in [0,1]; defaults from the profile");
  cmd->add_option("--out", a.out, "output JSON (stdout when omitted)");
}

struct Routed {
  CostMap costs;
  SemanticRaster semantic;
  LabelPalette palette;
  RouteQuery query;
  RoutePlan chosen;
  RoutePlan alternative;
};

Routed run_route(const RouteArgs& a) {
  LabelPalette palette = read_palette(a.palette);
  SemanticRaster semantic = load_semantic(read_file(a.semantic), palette);
  const NamedWeights weights = weights_from_json(parse_json(read_text_file(a.weights), a.weights));
  if (weights.features != class_feature_names(palette))
    fail(ErrorKind::InvalidArgument, "weights in '" + a.weights + "' were trained for a different palette");
  RouteQuery query;
  query.start = parse_cell(a.start);
  query.profile = a.profile;
  query.lambda = a.lambda >= 0.0 ? a.lambda : profile_lambda(a.profile);
  std::vector<Cell> goals;
  for (const auto& g : a.goals) goals.push_back(parse_cell(g));
  query.goal = goals.front();
  const GridMdp mdp = make_grid_mdp(semantic, palette.size(), {0, 0}, 1);
  CostMap costs = cost_map(mdp, weights.weights);
  for (const Cell& g : goals) {
    RouteQuery q = query;
    q.goal = g;
    q.validate(costs.width, costs.height);
  }
  RoutePlan chosen = plan_to_nearest(costs, query, goals);
  query.goal = chosen.path.back();
  RoutePlan alternative = evaluate_path(costs, shortest_distance_path(costs.width, costs.height, query).path, query.lambda);
  return {std::move(costs), std::move(semantic), std::move(palette), query, std::move(chosen), std::move(alternative)};
}

volatile std::sig_atomic_t g_stop = 0;
httplib::Server* g_server = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_server) g_server->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"semnav: label-frugal segmentation, few-shot classes, learned cost maps and explainable routes"};
  app.require_subcommand(1);

  // train-seg
  std::string data, palette_path, out_path, hidden = "64,64", predict_image, semantic_out;
  FrugalConfig frugal;
  auto* train_seg = app.add_subcommand("train-seg", "train the pixel classifier from sparse labels");
  train_seg->add_option("--data", data, "dataset dir with images/ and labels/")->required();
  train_seg->add_option("--palette", palette_path, "palette JSON")->required();
  train_seg->add_option("--pixel-fraction", frugal.pixel_fraction, "fraction of pixels sampled per image per epoch");
  train_seg->add_option("--epochs", frugal.sgd.epochs);
  train_seg->add_option("--lr", frugal.sgd.learning_rate);
  train_seg->add_option("--batch", frugal.sgd.batch_pixels);
  train_seg->add_option("--l2", frugal.sgd.l2);
  train_seg->add_option("--seed", frugal.sgd.seed);
  train_seg->add_option("--hidden", hidden, "hidden layer sizes, comma separated");
  train_seg->add_option("--out", out_path, "model JSON")->required();
  train_seg->add_option("--predict", predict_image, "also segment this image");
  train_seg->add_option("--semantic-out", semantic_out, "where to write the --predict result (PGM)");

  // fewshot-train
  std::string image_path, labels_path, train_classes, test_classes;
  FewshotConfig fewshot;
  auto* fs_train = app.add_subcommand("fewshot-train", "episodic training of the few-shot head");
  fs_train->add_option("--data", data, "dataset dir with images/ and labels/");
  fs_train->add_option("--image", image_path, "single labeled raster, trained on tiles (instead of --data)");
  fs_train->add_option("--labels", labels_path, "labels for --image");
  fs_train->add_option("--palette", palette_path, "palette JSON")->required();
  fs_train->add_option("--train-classes", train_classes, "comma list of class names (default: all present)");
  fs_train->add_option("--test-classes", test_classes, "comma list of held-out class names");
  fs_train->add_option("--k", fewshot.k, "support examples per episode");
  fs_train->add_option("--episodes", fewshot.sgd.epochs);
  fs_train->add_option("--lr", fewshot.sgd.learning_rate);
  fs_train->add_option("--batch", fewshot.sgd.batch_pixels);
  fs_train->add_option("--seed", fewshot.sgd.seed);
  fs_train->add_option("--hidden", hidden);
  fs_train->add_option("--out", out_path, "head JSON")->required();

  // fewshot-predict
  std::string head_path, supports, query_path, merge_semantic, class_name, palette_out;
  auto* fs_predict = app.add_subcommand("fewshot-predict", "segment a query from K support pairs");
  fs_predict->add_option("--head", head_path)->required();
  fs_predict->add_option("--support", supports, "img:mask[,img:mask...]")->required();
  fs_predict->add_option("--query", query_path)->required();
  fs_predict->add_option("--out", out_path, "binary mask PGM")->required();
  fs_predict->add_option("--merge-into", merge_semantic, "semantic PGM receiving the mask as a new class");
  fs_predict->add_option("--palette", palette_path, "palette of --merge-into");
  fs_predict->add_option("--class", class_name, "name of the new class");
  fs_predict->add_option("--semantic-out", semantic_out, "merged semantic PGM");
  fs_predict->add_option("--palette-out", palette_out, "palette JSON including the new class");

  // train-irl
  std::string semantic_path, demos_path;
  IrlConfig irl;
  auto* train_irl = app.add_subcommand("train-irl", "maximum-entropy IRL from demonstrations");
  train_irl->add_option("--semantic", semantic_path)->required();
  train_irl->add_option("--palette", palette_path)->required();
  train_irl->add_option("--demos", demos_path)->required();
  train_irl->add_option("--iters", irl.iterations);
  train_irl->add_option("--lr", irl.learning_rate);
  train_irl->add_option("--l2", irl.l2);
  train_irl->add_option("--horizon", irl.horizon, "0 selects 4*(width+height)");
  train_irl->add_option("--seed", irl.seed);
  train_irl->add_option("--out", out_path)->required();

  RouteArgs plan_args, explain_args;
  auto* plan_cmd = app.add_subcommand("plan", "least-cost route on a learned cost map");
  add_route_options(plan_cmd, plan_args);
  auto* explain_cmd = app.add_subcommand("explain", "route plus attribution against the shortest route");
  add_route_options(explain_cmd, explain_args);

  int port = kDefaultPort;
  std::string root;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--port", port);
  serve->add_option("--root", root, "registry root (default $SEMNAV_ROOT or ./semnav-data)");
  serve->add_option("--host", host);

  std::string kind;
  std::uint64_t seed = 0;
  int count = 20, size = 0;
  auto* gen = app.add_subcommand("gen-synthetic", "write a seeded synthetic benchmark");
  gen->add_option("--kind", kind)->required()->check(CLI::IsMember({"flood", "shapes"}));
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_path)->required();
  gen->add_option("--count", count, "shapes: number of rasters");
  gen->add_option("--size", size, "raster side (shapes 128, flood 64)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*train_seg) {
      frugal.hidden = parse_sizes(hidden);
      const LabelPalette palette = read_palette(palette_path);
      const FrugalDataset dataset = read_dataset(data, palette);
      const auto trained = train(dataset, frugal);
      write_text_file(out_path, dump_json(to_json(trained.model)));
      if (!predict_image.empty()) {
        if (semantic_out.empty()) fail(ErrorKind::InvalidArgument, "--predict needs --semantic-out");
        write_file(semantic_out, save_gray8(predict(trained.model, read_image(predict_image))));
      }
      out << Json{{"model", out_path}, {"final_loss", trained.loss_trace.back()}}.dump() << "\n";
    } else if (*fs_train) {
      fewshot.hidden = parse_sizes(hidden);
      const LabelPalette palette = read_palette(palette_path);
      if (!image_path.empty()) {
        if (labels_path.empty()) fail(ErrorKind::InvalidArgument, "--image needs --labels");
        const ImageRaster image = read_image(image_path);
        const auto labels = load_sparse_labels(read_file(labels_path), palette);
        const FeatureVolume volume = extract_volume(image);
        // tile defaults, overridden by whatever was given explicitly
        FewshotConfig tiles = tile_head_config(fewshot.sgd.seed);
        if (fs_train->count("--episodes")) tiles.sgd.epochs = fewshot.sgd.epochs;
        if (fs_train->count("--lr")) tiles.sgd.learning_rate = fewshot.sgd.learning_rate;
        if (fs_train->count("--batch")) tiles.sgd.batch_pixels = fewshot.sgd.batch_pixels;
        if (fs_train->count("--k")) tiles.k = fewshot.k;
        if (fs_train->count("--hidden")) tiles.hidden = fewshot.hidden;
        const FewshotHead head = train_tile_head(volume, labels, tiles);
        write_text_file(out_path, dump_json(to_json(head)));
        out << Json{{"head", out_path}}.dump() << "\n";
        return 0;
      }
      if (data.empty()) fail(ErrorKind::InvalidArgument, "either --data or --image is required");
      const FrugalDataset dataset = read_dataset(data, palette);
      std::vector<EpisodeImage> images;
      for (const auto& item : dataset.items) {
        SemanticRaster semantic(item.labels.width, item.labels.height);
        semantic.data = item.labels.data;
        images.push_back({item.image, std::move(semantic)});
      }
      std::set<std::uint8_t> train_ids = train_classes.empty() ? std::set<std::uint8_t>{} : class_ids(palette, train_classes);
      const std::set<std::uint8_t> test_ids = class_ids(palette, test_classes);
      if (train_ids.empty())
        for (std::size_t c = 0; c < palette.size(); ++c)
          if (!test_ids.count(std::uint8_t(c))) train_ids.insert(std::uint8_t(c));
      const auto trained = episodic_train(images, train_ids, test_ids, fewshot);
      write_text_file(out_path, dump_json(to_json(trained.head)));
      out << Json{{"head", out_path}, {"episodes", trained.episodes.size()}}.dump() << "\n";
    } else if (*fs_predict) {
      const FewshotHead head = fewshot_head_from_json(parse_json(read_text_file(head_path), head_path));
      SupportSet support;
      for (const auto& pair : split(supports, ',')) {
        const auto colon = pair.rfind(':');
        if (colon == std::string::npos) fail(ErrorKind::InvalidArgument, "support '" + pair + "' must be image:mask");
        support.push_back({read_image(pair.substr(0, colon)), load_mask(read_file(pair.substr(colon + 1)))});
      }
      const auto result = segment_query(head, support, read_image(query_path));
      write_file(out_path, save_mask(result.mask));
      Json summary = {{"mask", out_path}, {"weights", result.weights}, {"foreground", result.mask.foreground_count()}};
      if (!merge_semantic.empty()) {
        if (palette_path.empty() || class_name.empty() || semantic_out.empty() || palette_out.empty())
          fail(ErrorKind::InvalidArgument, "--merge-into needs --palette, --class, --semantic-out and --palette-out");
        LabelPalette palette = read_palette(palette_path);
        SemanticRaster semantic = load_semantic(read_file(merge_semantic), palette);
        if (semantic.width != result.mask.width || semantic.height != result.mask.height)
          fail(ErrorKind::DimensionMismatch, "merge target and query differ in size");
        const auto id = palette.add_class(class_name, {60, 90, 200});
        for (std::size_t p = 0; p < semantic.size(); ++p)
          if (result.mask.data[p]) semantic.data[p] = id;
        write_file(semantic_out, save_gray8(semantic));
        write_text_file(palette_out, dump_json(to_json(palette)));
        summary["class_id"] = id;
      }
      out << summary.dump() << "\n";
    } else if (*train_irl) {
      const LabelPalette palette = read_palette(palette_path);
      const SemanticRaster semantic = load_semantic(read_file(semantic_path), palette);
      const Json demos_json = parse_json(read_text_file(demos_path), demos_path);
      const DemoSet demos = demos_from_json(demos_json);
      const GridMdp mdp = make_grid_mdp(semantic, palette.size(), demos.goal, irl.horizon);
      const auto trained = irl_train(mdp, demos.paths, irl);
      write_text_file(out_path, dump_json(to_json(NamedWeights{class_feature_names(palette), trained.weights})));
      out << Json{{"weights", out_path},
                  {"final_gradient_norm", trained.gradient_norms.empty() ? 0.0 : trained.gradient_norms.back()}}
                 .dump()
          << "\n";
    } else if (*plan_cmd) {
      const Routed r = run_route(plan_args);
      Json j = to_json(r.chosen);
      j["lambda"] = r.query.lambda;
      emit(j, plan_args.out, out);
    } else if (*explain_cmd) {
      const Routed r = run_route(explain_args);
      Json j = to_json(r.chosen);
      j["lambda"] = r.query.lambda;
      j["explanation"] = to_json(explain(r.chosen, r.alternative, r.costs, r.query.lambda, r.semantic, r.palette));
      emit(j, explain_args.out, out);
    } else if (*serve) {
      if (root.empty()) {
        const char* env = std::getenv("SEMNAV_ROOT");
        root = env ? env : "semnav-data";
      }
      Service service(root);
      httplib::Server server;
      service.bind(server);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (!server.bind_to_port(host, port)) fail(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
      out << Json{{"listening", host + ":" + std::to_string(port)}, {"root", root}}.dump() << std::endl;
      server.listen_after_bind();
      g_server = nullptr;
    } else if (*gen) {
      if (kind == "shapes") {
        ShapesOptions options;
        options.count = count;
        options.seed = seed;
        if (size > 0) options.size = size;
        write_shapes(make_shapes(options), out_path);
      } else {
        FloodOptions options;
        options.seed = seed;
        if (size > 0) options.size = size;
        write_flood(make_flood(options), out_path);
      }
      out << Json{{"out", out_path}, {"kind", kind}}.dump() << "\n";
    }
  } catch (const Error& e) {
    err << Json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << Json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace semnav
