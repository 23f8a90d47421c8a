#include "semnav/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include "semnav/error.hpp"
#include "semnav/pnm.hpp"

namespace semnav {

namespace fs = std::filesystem;

Json to_json(const JobRecord& job) {
  return {{"id", job.id},         {"workspace", job.workspace}, {"kind", job.kind}, {"status", job.status},
          {"progress", job.progress}, {"result", job.result},   {"error", job.error}};
}

JobRecord job_from_json(const Json& j) {
  JobRecord r;
  r.id = j.at("id").get<std::string>();
  r.workspace = j.value("workspace", std::string());
  r.kind = j.at("kind").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.progress = j.value("progress", 0.0);
  r.result = j.value("result", std::string());
  r.error = j.value("error", std::string());
  return r;
}

void MapWorkspace::validate() const {
  semnav::validate(image);
  if (labels) {
    if (labels->width != image.width || labels->height != image.height)
      fail(ErrorKind::DimensionMismatch, "labels do not match the workspace image size");
    semnav::validate(*labels, palette);
  }
  if (semantic) {
    if (semantic->width != image.width || semantic->height != image.height)
      fail(ErrorKind::DimensionMismatch, "semantic raster does not match the workspace image size");
    semnav::validate(*semantic, palette);
  }
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  write_file(tmp, bytes);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool valid_profile_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

}  // namespace

Registry::Registry(std::string root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) fail(ErrorKind::Io, "cannot create registry root '" + root_ + "': " + ec.message());
}

std::string Registry::workspace_dir(const std::string& id) const { return (fs::path(root_) / id).string(); }

bool Registry::exists(const std::string& id) const { return fs::exists(fs::path(workspace_dir(id)) / "image.ppm"); }

void Registry::save(const MapWorkspace& ws) const {
  const fs::path dir = workspace_dir(ws.id);
  std::error_code ec;
  fs::create_directories(dir / "models", ec);
  if (ec) fail(ErrorKind::Io, "cannot create '" + (dir / "models").string() + "': " + ec.message());
  write_file_atomic((dir / "image.ppm").string(), save_image(ws.image));
  write_text_atomic((dir / "palette.json").string(), dump_json(to_json(ws.palette)));
  if (ws.labels) write_file_atomic((dir / "labels.pgm").string(), save_gray8(*ws.labels));
  if (ws.semantic) write_file_atomic((dir / "semantic.pgm").string(), save_gray8(*ws.semantic));

  std::vector<std::string> keep;
  if (ws.models.seg) {
    write_text_atomic((dir / "models" / "seg.json").string(), dump_json(to_json(*ws.models.seg)));
    keep.push_back("seg.json");
  }
  if (ws.models.fewshot) {
    write_text_atomic((dir / "models" / "fewshot.json").string(), dump_json(to_json(*ws.models.fewshot)));
    keep.push_back("fewshot.json");
  }
  for (const auto& [profile, weights] : ws.models.profiles) {
    if (!valid_profile_name(profile)) fail(ErrorKind::InvalidArgument, "invalid profile name '" + profile + "'");
    const std::string name = "irl_" + profile + ".json";
    write_text_atomic((dir / "models" / name).string(), dump_json(to_json(weights)));
    keep.push_back(name);
  }
  for (const auto& entry : fs::directory_iterator(dir / "models")) {
    const auto name = entry.path().filename().string();
    if (std::find(keep.begin(), keep.end(), name) == keep.end()) fs::remove(entry.path(), ec);
  }
}

MapWorkspace Registry::load(const std::string& id) const {
  const fs::path dir = workspace_dir(id);
  if (!exists(id)) fail(ErrorKind::NotFound, "workspace '" + id + "' not found under '" + root_ + "'");
  MapWorkspace ws;
  ws.id = id;
  auto with_path = [](const fs::path& p, auto&& body) {
    try {
      return body();
    } catch (const Error& e) {
      fail(e.kind(), p.string() + ": " + e.what());
    }
  };
  ws.image = with_path(dir / "image.ppm", [&] { return load_image(read_file((dir / "image.ppm").string())); });
  ws.palette = with_path(dir / "palette.json", [&] {
    return palette_from_json(parse_json(read_text_file((dir / "palette.json").string()), "palette.json"));
  });
  if (fs::exists(dir / "labels.pgm"))
    ws.labels = with_path(dir / "labels.pgm", [&] { return load_sparse_labels(read_file((dir / "labels.pgm").string()), ws.palette); });
  if (fs::exists(dir / "semantic.pgm"))
    ws.semantic = with_path(dir / "semantic.pgm", [&] { return load_semantic(read_file((dir / "semantic.pgm").string()), ws.palette); });

  const fs::path models = dir / "models";
  if (fs::exists(models)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(models)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      const auto name = path.filename().string();
      if (path.extension() != ".json") continue;
      try {
        const Json j = parse_json(read_text_file(path.string()), name);
        if (name == "seg.json") {
          ws.models.seg = seg_model_from_json(j);
        } else if (name == "fewshot.json") {
          ws.models.fewshot = fewshot_head_from_json(j);
        } else if (name.rfind("irl_", 0) == 0) {
          ws.models.profiles[name.substr(4, name.size() - 9)] = weights_from_json(j);
        }
      } catch (const Error& e) {
        ws.load_errors.push_back(path.string() + ": " + e.what());
      }
    }
  }
  // one version step per installed model, so the count survives restarts
  for (const auto& job : read_jobs(id))
    if (job.status == "done") ++ws.version;
  ws.validate();
  return ws;
}

std::vector<std::string> Registry::list() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_))
    if (entry.is_directory() && fs::exists(entry.path() / "image.ppm")) ids.push_back(entry.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Registry::append_job(const JobRecord& job) const {
  const fs::path path = fs::path(workspace_dir(job.workspace)) / "jobs.log";
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorKind::Io, "cannot append to '" + path.string() + "'");
  out << to_json(job).dump() << "\n";
}

std::vector<JobRecord> Registry::read_jobs(const std::string& id) const {
  std::vector<JobRecord> jobs;
  std::ifstream in(fs::path(workspace_dir(id)) / "jobs.log");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      jobs.push_back(job_from_json(Json::parse(line)));
    } catch (const std::exception&) {
      // torn trailing line after a crash; ignore
    }
  }
  return jobs;
}

}  // namespace semnav
