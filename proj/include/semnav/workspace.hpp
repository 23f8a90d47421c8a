#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semnav/fewshot.hpp"
#include "semnav/frugal.hpp"
#include "semnav/raster.hpp"
#include "semnav/serialize.hpp"

namespace semnav {

struct JobRecord {
  std::string id;
  std::string workspace;
  std::string kind;    // train-seg | fewshot | train-irl
  std::string status;  // queued | running | done | failed
  double progress = 0.0;
  std::string result;
  std::string error;

  bool terminal() const { return status == "done" || status == "failed"; }
};

Json to_json(const JobRecord& job);
JobRecord job_from_json(const Json& j);

struct WorkspaceModels {
  std::optional<SegModel> seg;
  std::optional<FewshotHead> fewshot;
  std::map<std::string, NamedWeights> profiles;
};

struct MapWorkspace {
  std::string id;
  ImageRaster image;
  LabelPalette palette;
  std::optional<SparseLabelRaster> labels;
  std::optional<SemanticRaster> semantic;
  WorkspaceModels models;
  std::uint64_t version = 0;             // count of completed training jobs
  std::vector<std::string> load_errors;  // model files that failed to load

  void validate() const;
};

/// Layout under `root/{id}/`:
///   image.ppm  palette.json  labels.pgm  semantic.pgm
///   models/seg.json  models/fewshot.json  models/irl_<profile>.json
///   jobs.log   (one JSON record per line, terminal job states)
class Registry {
public:
  explicit Registry(std::string root);

  const std::string& root() const { return root_; }
  std::string workspace_dir(const std::string& id) const;

  /// Rewrites every file of the workspace; stale model files are removed.
  void save(const MapWorkspace& ws) const;
  /// Missing optional files leave fields empty. A corrupted model file is
  /// recorded in load_errors and skipped.
  MapWorkspace load(const std::string& id) const;
  std::vector<std::string> list() const;
  bool exists(const std::string& id) const;

  void append_job(const JobRecord& job) const;
  std::vector<JobRecord> read_jobs(const std::string& id) const;

private:
  std::string root_;
};

/// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace semnav
