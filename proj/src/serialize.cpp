#include "semnav/serialize.hpp"

#include "semnav/error.hpp"

namespace semnav {
namespace {

/// Runs a JSON accessor block, surfacing library errors as Format errors.
template <typename F>
auto guarded(const std::string& what, F&& body) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, what + ": " + e.what());
  }
}

}  // namespace

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Format, what + ": " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const LabelPalette& palette) {
  Json classes = Json::array();
  for (const auto& c : palette.classes())
    classes.push_back({{"id", c.id}, {"name", c.name}, {"color", {c.color[0], c.color[1], c.color[2]}}});
  return {{"classes", classes}};
}

LabelPalette palette_from_json(const Json& j) {
  return guarded("palette", [&] {
    std::vector<ClassInfo> classes;
    for (const auto& c : j.at("classes")) {
      ClassInfo info;
      const int id = c.at("id").get<int>();
      if (id < 0 || id > 254) fail(ErrorKind::Format, "palette: class id " + std::to_string(id) + " out of range");
      info.id = std::uint8_t(id);
      info.name = c.at("name").get<std::string>();
      const auto& color = c.at("color");
      if (color.size() != 3) fail(ErrorKind::Format, "palette: color of '" + info.name + "' needs 3 components");
      for (int k = 0; k < 3; ++k) info.color[std::size_t(k)] = color.at(std::size_t(k)).get<std::uint8_t>();
      classes.push_back(std::move(info));
    }
    return LabelPalette(std::move(classes));
  });
}

Json to_json(const MlpModel& model) {
  Json weights = Json::array(), biases = Json::array();
  for (const auto& layer : model.layers) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row.push_back(layer.weight(r, c));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
    biases.push_back(std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size()));
  }
  return {{"layer_sizes", model.layer_sizes}, {"weights", weights}, {"biases", biases}, {"seed", model.seed}};
}

MlpModel mlp_from_json(const Json& j) {
  return guarded("mlp", [&] {
    MlpModel m = MlpModel::zeros(j.at("layer_sizes").get<std::vector<int>>());
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.layers.size() || biases.size() != m.layers.size())
      fail(ErrorKind::Format, "mlp: layer count does not match layer_sizes");
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      auto& layer = m.layers[l];
      if (weights[l].size() != std::size_t(layer.weight.rows()) || biases[l].size() != std::size_t(layer.bias.size()))
        fail(ErrorKind::Format, "mlp: layer " + std::to_string(l) + " has the wrong shape");
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        const auto& row = weights[l][std::size_t(r)];
        if (row.size() != std::size_t(layer.weight.cols()))
          fail(ErrorKind::Format, "mlp: layer " + std::to_string(l) + " row " + std::to_string(r) + " has the wrong length");
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = row[std::size_t(c)].get<double>();
        layer.bias(r) = biases[l][std::size_t(r)].get<double>();
      }
    }
    if (!m.all_finite()) fail(ErrorKind::Format, "mlp: non-finite parameters");
    return m;
  });
}

Json to_json(const SegModel& model) {
  return {{"kind", "seg"}, {"channels", model.channels}, {"palette", to_json(model.palette)}, {"mlp", to_json(model.head)}};
}

SegModel seg_model_from_json(const Json& j) {
  return guarded("seg model", [&] {
    if (j.at("kind").get<std::string>() != "seg") fail(ErrorKind::Format, "seg model: wrong kind");
    SegModel m;
    m.channels = j.at("channels").get<int>();
    m.palette = palette_from_json(j.at("palette"));
    m.head = mlp_from_json(j.at("mlp"));
    if (m.head.input_dim() != feature_dim(m.channels) || std::size_t(m.head.output_dim()) != m.palette.size())
      fail(ErrorKind::Format, "seg model: head shape does not match channels/palette");
    return m;
  });
}

Json to_json(const FewshotHead& head) {
  return {{"kind", "fewshot"}, {"channels", head.channels}, {"mlp", to_json(head.mlp)}};
}

FewshotHead fewshot_head_from_json(const Json& j) {
  return guarded("few-shot head", [&] {
    if (j.at("kind").get<std::string>() != "fewshot") fail(ErrorKind::Format, "few-shot head: wrong kind");
    FewshotHead h;
    h.channels = j.at("channels").get<int>();
    h.mlp = mlp_from_json(j.at("mlp"));
    if (h.mlp.input_dim() != 2 * feature_dim(h.channels) || h.mlp.output_dim() != 2)
      fail(ErrorKind::Format, "few-shot head: shape does not match channels");
    if (h.mlp.all_zero()) fail(ErrorKind::Format, "few-shot head: all parameters are zero (untrained)");
    return h;
  });
}

Json to_json(const NamedWeights& weights) {
  return {{"features", weights.features},
          {"weights", std::vector<double>(weights.weights.w.data(), weights.weights.w.data() + weights.weights.w.size())}};
}

NamedWeights weights_from_json(const Json& j) {
  return guarded("weights", [&] {
    NamedWeights out;
    out.features = j.at("features").get<std::vector<std::string>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != out.features.size()) fail(ErrorKind::Format, "weights: feature names and values differ in length");
    out.weights.w = Eigen::Map<const Eigen::VectorXd>(w.data(), Eigen::Index(w.size()));
    return out;
  });
}

std::vector<std::string> class_feature_names(const LabelPalette& palette) {
  std::vector<std::string> names;
  for (const auto& c : palette.classes()) names.push_back(c.name);
  return names;
}

Json to_json(Cell c) { return Json::array({c.row, c.col}); }

Cell cell_from_json(const Json& j) {
  return guarded("cell", [&] {
    if (!j.is_array() || j.size() != 2) fail(ErrorKind::Format, "cell must be a [row, col] pair");
    return Cell{j[0].get<int>(), j[1].get<int>()};
  });
}

Json to_json(const DemoSet& demos) {
  Json paths = Json::array();
  for (const auto& d : demos.paths) {
    Json path = Json::array();
    for (const Cell& c : d.path) path.push_back(to_json(c));
    paths.push_back(std::move(path));
  }
  return {{"goal", to_json(demos.goal)}, {"paths", paths}};
}

DemoSet demos_from_json(const Json& j) {
  return guarded("demonstrations", [&] {
    DemoSet out;
    out.goal = cell_from_json(j.at("goal"));
    for (const auto& p : j.at("paths")) {
      Demonstration d;
      for (const auto& c : p) d.path.push_back(cell_from_json(c));
      out.paths.push_back(std::move(d));
    }
    return out;
  });
}

Json to_json(const RoutePlan& plan) {
  Json path = Json::array();
  for (const Cell& c : plan.path) path.push_back(to_json(c));
  return {{"path", path}, {"total_cost", plan.total_cost}, {"total_distance", plan.total_distance}};
}

Json to_json(const Explanation& e) {
  Json classes = Json::object();
  for (const auto& a : e.per_class)
    classes[a.name] = {{"class_id", a.class_id},
                       {"cells_on_alternative", a.cells_on_alternative},
                       {"cost_share_alternative", a.cost_share_alternative},
                       {"cells_on_chosen", a.cells_on_chosen},
                       {"cost_share_chosen", a.cost_share_chosen}};
  Json out = {{"chosen", to_json(e.chosen)},
              {"alternative", to_json(e.alternative)},
              {"per_class_attribution", classes},
              {"summary", e.summary}};
  out["top_class"] = e.top_class ? Json(e.per_class[*e.top_class].name) : Json(nullptr);
  return out;
}

Json to_json(const SgdConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"batch_pixels", c.batch_pixels}, {"seed", c.seed}, {"l2", c.l2}};
}

SgdConfig sgd_config_from_json(const Json& j, SgdConfig defaults) {
  return guarded("sgd config", [&] {
    SgdConfig c = defaults;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_pixels = j.value("batch_pixels", c.batch_pixels);
    c.seed = j.value("seed", c.seed);
    c.l2 = j.value("l2", c.l2);
    c.validate();
    return c;
  });
}

Json to_json(const FrugalConfig& c) {
  return {{"pixel_fraction", c.pixel_fraction}, {"sgd", to_json(c.sgd)}, {"hidden", c.hidden}};
}

FrugalConfig frugal_config_from_json(const Json& j) {
  return guarded("frugal config", [&] {
    FrugalConfig c;
    c.pixel_fraction = j.value("pixel_fraction", c.pixel_fraction);
    if (j.contains("sgd")) c.sgd = sgd_config_from_json(j.at("sgd"), c.sgd);
    c.hidden = j.value("hidden", c.hidden);
    c.validate();
    return c;
  });
}

Json to_json(const IrlConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"iterations", c.iterations}, {"l2", c.l2}, {"seed", c.seed}, {"horizon", c.horizon}};
}

IrlConfig irl_config_from_json(const Json& j) {
  return guarded("irl config", [&] {
    IrlConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.iterations = j.value("iterations", c.iterations);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
    c.horizon = j.value("horizon", c.horizon);
    c.validate();
    return c;
  });
}

RouteRequest route_request_from_json(const Json& j) {
  return guarded("route query", [&] {
    RouteRequest r;
    r.query.start = cell_from_json(j.at("start"));
    if (j.contains("goals")) {
      for (const auto& g : j.at("goals")) r.goals.push_back(cell_from_json(g));
    } else {
      r.goals.push_back(cell_from_json(j.at("goal")));
    }
    if (r.goals.empty()) fail(ErrorKind::Format, "route query needs a goal");
    r.query.goal = r.goals.front();
    r.query.profile = j.value("profile", std::string("safe"));
    r.lambda_given = j.contains("lambda");
    r.query.lambda = r.lambda_given ? j.at("lambda").get<double>() : profile_lambda(r.query.profile);
    if (!(r.query.lambda >= 0.0 && r.query.lambda <= 1.0)) fail(ErrorKind::InvalidArgument, "lambda must lie in [0, 1]");
    return r;
  });
}

}  // namespace semnav
