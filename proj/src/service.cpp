#include "semnav/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "httplib.h"

#include "semnav/error.hpp"
#include "semnav/fewshot.hpp"
#include "semnav/frugal.hpp"
#include "semnav/irl.hpp"
#include "semnav/planner.hpp"

namespace semnav {

namespace {

std::string numbered(const char* prefix, std::uint64_t n, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%0*llu", prefix, width, static_cast<unsigned long long>(n));
  return buf;
}

std::uint64_t trailing_number(const std::string& id) {
  const auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoull(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

std::array<std::uint8_t, 3> new_class_color(std::size_t id) {
  static const std::array<std::array<std::uint8_t, 3>, 6> colors = {
      {{60, 90, 200}, {230, 160, 20}, {20, 200, 200}, {150, 60, 180}, {240, 240, 80}, {120, 70, 30}}};
  return colors[id % colors.size()];
}

CostMap workspace_cost_map(const MapWorkspace& ws, const NamedWeights& weights) {
  if (weights.features != class_feature_names(ws.palette))
    fail(ErrorKind::InvalidArgument, "cost profile was trained for a different palette; retrain it with train-irl");
  const GridMdp mdp = make_grid_mdp(*ws.semantic, ws.palette.size(), {0, 0}, 1);
  return cost_map(mdp, weights.weights);
}

}  // namespace

int http_status(const Error& error) {
  switch (error.kind()) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Conflict: return 409;
    case ErrorKind::Io: return 500;
    default: return 422;
  }
}

std::vector<std::uint8_t> render_semantic(const SemanticRaster& semantic, const LabelPalette& palette) {
  std::vector<std::uint8_t> rgb(semantic.size() * 3);
  for (std::size_t p = 0; p < semantic.size(); ++p) {
    const auto& color = palette[semantic.data[p]].color;
    std::copy(color.begin(), color.end(), rgb.begin() + std::ptrdiff_t(3 * p));
  }
  return rgb;
}

FewshotConfig tile_head_config(std::uint64_t seed) {
  FewshotConfig config;
  config.sgd = SgdConfig{0.05, 1000, 256, seed, 0.0};
  config.k = 1;
  return config;
}

FewshotHead train_tile_head(const FeatureVolume& volume, const Grid<std::uint8_t>& labels, const FewshotConfig& config) {
  const int tile = std::max(16, std::min(volume.width, volume.height) / 4);
  std::vector<EpisodeVolume> tiles;
  for (int r = 0; r + tile <= volume.height; r += tile)
    for (int c = 0; c + tile <= volume.width; c += tile) {
      Grid<std::uint8_t> crop_labels(tile, tile);
      for (int y = 0; y < tile; ++y)
        for (int x = 0; x < tile; ++x) crop_labels(y, x) = labels(r + y, c + x);
      tiles.push_back({crop(volume, r, c, tile, tile), std::move(crop_labels)});
    }
  std::set<std::uint8_t> classes;
  for (auto v : labels.data)
    if (v != kUnlabeled) classes.insert(v);
  const int channels = int((volume.dim() - 2) / 7);
  return episodic_train(tiles, channels, classes, {}, config).head;
}

Service::Service(std::string root) : registry_(std::move(root)) {
  for (const auto& id : registry_.list()) {
    next_workspace_ = std::max(next_workspace_, trailing_number(id) + 1);
    for (const auto& job : registry_.read_jobs(id)) next_job_ = std::max(next_job_, trailing_number(job.id) + 1);
  }
}

Service::~Service() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
}

Service::Slot& Service::slot(const std::string& id) {
  auto it = slots_.find(id);
  if (it != slots_.end()) return it->second;
  if (!registry_.exists(id)) fail(ErrorKind::NotFound, "unknown workspace '" + id + "'");
  auto ws = std::make_shared<MapWorkspace>(registry_.load(id));
  return slots_.emplace(id, Slot{std::move(ws), false}).first->second;
}

std::shared_ptr<const MapWorkspace> Service::snapshot(const std::string& id) {
  std::lock_guard lock(mutex_);
  return slot(id).state;
}

std::string Service::create_workspace(std::span<const std::uint8_t> image, const std::string& palette_json) {
  MapWorkspace ws;
  ws.image = load_image(image);
  ws.palette = palette_from_json(parse_json(palette_json, "palette"));
  ws.validate();
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = numbered("ws", next_workspace_++, 4);
  } while (registry_.exists(id));
  ws.id = id;
  registry_.save(ws);
  slots_[id] = Slot{std::make_shared<MapWorkspace>(std::move(ws)), false};
  return id;
}

void Service::put_labels(const std::string& id, std::span<const std::uint8_t> pgm) {
  std::lock_guard lock(mutex_);
  Slot& s = slot(id);
  if (s.busy) fail(ErrorKind::Conflict, "a training job is running for workspace '" + id + "'");
  auto next = std::make_shared<MapWorkspace>(*s.state);
  auto labels = load_sparse_labels(pgm, next->palette);
  if (labels.width != next->image.width || labels.height != next->image.height)
    fail(ErrorKind::DimensionMismatch, "labels are " + std::to_string(labels.width) + "x" + std::to_string(labels.height) +
                                           ", workspace image is " + std::to_string(next->image.width) + "x" +
                                           std::to_string(next->image.height));
  next->labels = std::move(labels);
  registry_.save(*next);
  s.state = std::move(next);
}

std::string Service::submit(const std::string& id, const std::string& kind, JobBody body) {
  std::lock_guard lock(mutex_);
  Slot& s = slot(id);
  if (s.busy) fail(ErrorKind::Conflict, "a training job is already running for workspace '" + id + "'");
  s.busy = true;
  JobRecord record;
  record.id = numbered("job", next_job_++, 6);
  record.workspace = id;
  record.kind = kind;
  record.status = "queued";
  jobs_[record.id] = record;
  auto input = s.state;
  workers_.emplace_back([this, record, input, body = std::move(body)]() mutable {
    {
      std::lock_guard lock(mutex_);
      record.status = "running";
      jobs_[record.id] = record;
    }
    try {
      MapWorkspace next = body(*input, record);
      next.version = input->version + 1;
      next.validate();
      registry_.save(next);
      record.status = "done";
      record.progress = 1.0;
      finish(record, std::make_shared<MapWorkspace>(std::move(next)));
    } catch (const std::exception& e) {
      record.status = "failed";
      record.error = e.what();
      finish(record, nullptr);
    }
  });
  return record.id;
}

void Service::finish(JobRecord record, std::shared_ptr<const MapWorkspace> installed) {
  try {
    registry_.append_job(record);
  } catch (const Error& e) {
    if (record.status == "done") {
      record.status = "failed";
      record.error = e.what();
      installed = nullptr;
    }
  }
  std::lock_guard lock(mutex_);
  Slot& s = slots_.at(record.workspace);
  if (installed) s.state = std::move(installed);
  s.busy = false;
  jobs_[record.id] = record;
  job_done_.notify_all();
}

JobRecord Service::job(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it != jobs_.end()) return it->second;
  for (const auto& id : registry_.list())
    for (const auto& record : registry_.read_jobs(id))
      if (record.id == job_id) return record;
  fail(ErrorKind::NotFound, "unknown job '" + job_id + "'");
}

JobRecord Service::wait(const std::string& job_id) {
  std::unique_lock lock(mutex_);
  for (;;) {
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) {
      lock.unlock();
      return job(job_id);
    }
    if (it->second.terminal()) return it->second;
    job_done_.wait(lock);
  }
}

std::string Service::start_train_seg(const std::string& id, const Json& body) {
  const FrugalConfig config = frugal_config_from_json(body.is_null() ? Json::object() : body);
  {
    auto ws = snapshot(id);
    if (!ws->labels) fail(ErrorKind::InvalidArgument, "workspace '" + id + "' has no labels; POST /workspaces/" + id + "/labels first");
  }
  return submit(id, "train-seg", [config](const MapWorkspace& ws, JobRecord& record) {
    FrugalDataset dataset;
    dataset.palette = ws.palette;
    dataset.items.push_back({ws.image, *ws.labels});
    const auto volumes = extract_all(dataset);
    auto trained = train(dataset, volumes, config);
    MapWorkspace next = ws;
    next.semantic = predict(trained.model, volumes.front());
    next.models.seg = std::move(trained.model);
    char buf[128];
    std::snprintf(buf, sizeof buf, "semantic raster updated; final loss %.6f",
                  trained.loss_trace.empty() ? 0.0 : trained.loss_trace.back());
    record.result = buf;
    return next;
  });
}

std::string Service::start_add_class(const std::string& id, const std::string& name, const std::vector<SupportUpload>& uploads,
                                     const Json& options) {
  if (name.empty()) fail(ErrorKind::InvalidArgument, "class name is required");
  if (uploads.empty()) fail(ErrorKind::InvalidArgument, "at least one support image/mask pair is required");
  SupportSet support;
  for (const auto& u : uploads) support.push_back({load_image(u.image), load_mask(u.mask)});
  validate(support);
  const auto seed = options.value("seed", std::uint64_t{0});
  {
    auto ws = snapshot(id);
    if (!ws->semantic) fail(ErrorKind::InvalidArgument, "workspace '" + id + "' has no semantic raster; run train-seg first");
    if (ws->palette.find(name)) fail(ErrorKind::InvalidArgument, "class '" + name + "' already exists");
    for (const auto& ex : support)
      if (ex.image.width != ws->image.width || ex.image.height != ws->image.height || ex.image.channels != ws->image.channels)
        fail(ErrorKind::DimensionMismatch, "support images must match the workspace image size and channels");
  }
  return submit(id, "fewshot", [support, name, seed](const MapWorkspace& ws, JobRecord& record) {
    const FeatureVolume query = extract_volume(ws.image);
    FewshotHead head;
    if (ws.models.fewshot && ws.models.fewshot->channels == ws.image.channels) {
      head = *ws.models.fewshot;
    } else {
      const Grid<std::uint8_t>& labels = ws.labels ? static_cast<const Grid<std::uint8_t>&>(*ws.labels)
                                                   : static_cast<const Grid<std::uint8_t>&>(*ws.semantic);
      head = train_tile_head(query, labels, tile_head_config(seed));
    }
    record.progress = 0.5;
    std::vector<FeatureVolume> volumes;
    std::vector<BinaryMask> masks;
    for (const auto& ex : support) {
      volumes.push_back(extract_volume(ex.image));
      masks.push_back(ex.mask);
    }
    const auto result = segment_query(head, prepare_support(volumes, masks), query);
    MapWorkspace next = ws;
    const auto class_id = next.palette.add_class(name, new_class_color(next.palette.size()));
    std::size_t painted = 0;
    for (std::size_t p = 0; p < result.mask.size(); ++p)
      if (result.mask.data[p]) {
        next.semantic->data[p] = class_id;
        ++painted;
      }
    next.models.fewshot = std::move(head);
    Json summary = {{"class_id", class_id}, {"name", name}, {"pixels", painted}, {"weights", result.weights}};
    record.result = summary.dump();
    return next;
  });
}

std::string Service::start_train_irl(const std::string& id, const Json& body) {
  const std::string profile = body.value("profile", std::string("safe"));
  if (profile.empty() || !std::all_of(profile.begin(), profile.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
      }))
    fail(ErrorKind::InvalidArgument, "profile names use letters, digits, '-' and '_'");
  if (!body.contains("demos")) fail(ErrorKind::InvalidArgument, "train-irl body needs a 'demos' object");
  const DemoSet demos = demos_from_json(body.at("demos"));
  const IrlConfig config = irl_config_from_json(body.value("config", Json::object()));
  {
    auto ws = snapshot(id);
    if (!ws->semantic) fail(ErrorKind::InvalidArgument, "workspace '" + id + "' has no semantic raster; run train-seg first");
    const GridMdp mdp = make_grid_mdp(*ws->semantic, ws->palette.size(), demos.goal, config.horizon);
    for (const auto& d : demos.paths) validate_demonstration(mdp, d);
  }
  return submit(id, "train-irl", [demos, config, profile](const MapWorkspace& ws, JobRecord& record) {
    const GridMdp mdp = make_grid_mdp(*ws.semantic, ws.palette.size(), demos.goal, config.horizon);
    auto trained = irl_train(mdp, demos.paths, config);
    MapWorkspace next = ws;
    next.models.profiles[profile] = NamedWeights{class_feature_names(ws.palette), trained.weights};
    char buf[160];
    std::snprintf(buf, sizeof buf, "profile '%s' trained; final gradient norm %.6g", profile.c_str(),
                  trained.gradient_norms.empty() ? 0.0 : trained.gradient_norms.back());
    record.result = buf;
    return next;
  });
}

Json Service::route(const std::string& id, const Json& body) {
  const auto ws = snapshot(id);
  const RouteRequest request = route_request_from_json(body);
  if (!ws->semantic) fail(ErrorKind::InvalidArgument, "workspace '" + id + "' has no semantic raster; run train-seg first");
  const auto it = ws->models.profiles.find(request.query.profile);
  if (it == ws->models.profiles.end())
    fail(ErrorKind::InvalidArgument, "no trained weights for profile '" + request.query.profile + "'; run train-irl first");
  const CostMap costs = workspace_cost_map(*ws, it->second);
  for (const Cell& g : request.goals) {
    RouteQuery q = request.query;
    q.goal = g;
    q.validate(costs.width, costs.height);
  }
  const RoutePlan chosen = plan_to_nearest(costs, request.query, request.goals);
  RouteQuery q = request.query;
  q.goal = chosen.path.back();
  const RoutePlan alternative =
      evaluate_path(costs, shortest_distance_path(costs.width, costs.height, q).path, request.query.lambda);
  const Explanation explanation = explain(chosen, alternative, costs, request.query.lambda, *ws->semantic, ws->palette);

  Json out = to_json(chosen);
  out["explanation"] = to_json(explanation);
  out["profile"] = request.query.profile;
  out["lambda"] = request.query.lambda;
  out["goal"] = to_json(q.goal);
  out["model_version"] = ws->version;
  std::lock_guard lock(mutex_);
  const std::string route_id = numbered("route", next_route_++, 4);
  routes_[route_id] = {id, chosen.path};
  out["route_id"] = route_id;
  return out;
}

Bytes Service::overlay(const std::string& id, const std::string& layer) {
  const auto ws = snapshot(id);
  const int w = ws->image.width, h = ws->image.height;
  if (layer == "semantic") {
    if (!ws->semantic) fail(ErrorKind::InvalidArgument, "workspace '" + id + "' has no semantic raster");
    return save_rgb8(w, h, render_semantic(*ws->semantic, ws->palette));
  }
  if (layer.rfind("cost:", 0) == 0) {
    const std::string profile = layer.substr(5);
    if (!ws->semantic) fail(ErrorKind::InvalidArgument, "workspace '" + id + "' has no semantic raster");
    const auto it = ws->models.profiles.find(profile);
    if (it == ws->models.profiles.end()) fail(ErrorKind::NotFound, "unknown cost profile '" + profile + "'");
    const CostMap costs = workspace_cost_map(*ws, it->second);
    const auto [lo, hi] = std::minmax_element(costs.data.begin(), costs.data.end());
    std::vector<std::uint8_t> rgb(costs.size() * 3);
    for (std::size_t p = 0; p < costs.size(); ++p) {
      const double t = *hi > *lo ? (costs.data[p] - *lo) / (*hi - *lo) : 0.0;
      std::fill_n(rgb.begin() + std::ptrdiff_t(3 * p), 3, std::uint8_t(std::floor(t * 255.0 + 0.5)));
    }
    return save_rgb8(w, h, rgb);
  }
  if (layer.rfind("route:", 0) == 0) {
    std::vector<Cell> path;
    {
      std::lock_guard lock(mutex_);
      const auto it = routes_.find(layer.substr(6));
      if (it == routes_.end() || it->second.first != id) fail(ErrorKind::NotFound, "unknown route '" + layer.substr(6) + "'");
      path = it->second.second;
    }
    std::vector<std::uint8_t> rgb;
    if (ws->semantic) {
      rgb = render_semantic(*ws->semantic, ws->palette);
    } else {
      rgb.resize(std::size_t(w) * h * 3);
      for (std::size_t p = 0; p < std::size_t(w) * h; ++p)
        for (int ch = 0; ch < 3; ++ch) {
          const double v = ws->image.data[p * std::size_t(ws->image.channels) + std::size_t(ch % ws->image.channels)];
          rgb[3 * p + std::size_t(ch)] = std::uint8_t(std::floor(v * 255.0 + 0.5));
        }
    }
    for (const Cell& c : path)
      std::copy(kRouteHighlight.begin(), kRouteHighlight.end(), rgb.begin() + std::ptrdiff_t(3 * (std::size_t(c.row) * w + c.col)));
    return save_rgb8(w, h, rgb);
  }
  fail(ErrorKind::InvalidArgument, "layer must be semantic, cost:{profile} or route:{routeId}");
}

Json Service::describe(const std::string& id) {
  const auto ws = snapshot(id);
  Json profiles = Json::array();
  for (const auto& [name, _] : ws->models.profiles) profiles.push_back(name);
  return {{"id", ws->id},
          {"width", ws->image.width},
          {"height", ws->image.height},
          {"channels", ws->image.channels},
          {"palette", to_json(ws->palette)},
          {"has_labels", ws->labels.has_value()},
          {"has_semantic", ws->semantic.has_value()},
          {"has_seg_model", ws->models.seg.has_value()},
          {"has_fewshot_head", ws->models.fewshot.has_value()},
          {"profiles", profiles},
          {"model_version", ws->version},
          {"load_errors", ws->load_errors}};
}

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  send_json(res, status, {{"error", std::string(kind)}, {"message", message}});
}

Bytes body_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return parse_json(req.body, "request body");
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e), to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

void Service::bind(httplib::Server& server) {
  server.Post("/workspaces", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("image") || !req.has_file("palette"))
      fail(ErrorKind::InvalidArgument, "POST /workspaces expects multipart fields 'image' and 'palette'");
    const auto id = create_workspace(body_bytes(req.get_file_value("image").content), req.get_file_value("palette").content);
    send_json(res, 201, {{"id", id}});
  }));
  server.Get(R"(/workspaces/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, describe(req.matches[1]));
  }));
  server.Post(R"(/workspaces/([^/]+)/labels)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    put_labels(req.matches[1], body_bytes(req.body));
    send_json(res, 200, {{"stored", true}});
  }));
  server.Post(R"(/workspaces/([^/]+)/jobs/train-seg)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 202, {{"job_id", start_train_seg(req.matches[1], body_json(req))}});
  }));
  server.Post(R"(/workspaces/([^/]+)/classes)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("name"))
      fail(ErrorKind::InvalidArgument, "POST /classes expects multipart fields 'name', 'support_image_<k>', 'support_mask_<k>'");
    std::vector<SupportUpload> supports;
    for (int k = 0; req.has_file("support_image_" + std::to_string(k)); ++k) {
      const auto mask_key = "support_mask_" + std::to_string(k);
      if (!req.has_file(mask_key)) fail(ErrorKind::InvalidArgument, "missing field '" + mask_key + "'");
      supports.push_back({body_bytes(req.get_file_value("support_image_" + std::to_string(k)).content),
                          body_bytes(req.get_file_value(mask_key).content)});
    }
    Json options = Json::object();
    if (req.has_file("options")) options = parse_json(req.get_file_value("options").content, "options");
    send_json(res, 202, {{"job_id", start_add_class(req.matches[1], req.get_file_value("name").content, supports, options)}});
  }));
  server.Post(R"(/workspaces/([^/]+)/jobs/train-irl)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 202, {{"job_id", start_train_irl(req.matches[1], body_json(req))}});
  }));
  server.Post(R"(/workspaces/([^/]+)/routes)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, route(req.matches[1], body_json(req)));
  }));
  server.Get(R"(/workspaces/([^/]+)/overlay)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto bytes = overlay(req.matches[1], req.get_param_value("layer"));
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  }));
  server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(job(req.matches[1])));
  }));
}

}  // namespace semnav
