#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "semnav/pnm.hpp"
#include "semnav/serialize.hpp"
#include "semnav/workspace.hpp"

namespace httplib {
class Server;
}

namespace semnav {

inline constexpr int kDefaultPort = 8787;
inline constexpr std::array<std::uint8_t, 3> kRouteHighlight = {255, 0, 255};

struct SupportUpload {
  Bytes image;
  Bytes mask;
};

/// Registry-backed pipeline behind the HTTP API. Reads take an immutable
/// snapshot of the workspace; training jobs run on background threads, at
/// most one per workspace, and install their result by swapping the
/// snapshot pointer.
class Service {
public:
  explicit Service(std::string root);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::string create_workspace(std::span<const std::uint8_t> image, const std::string& palette_json);
  void put_labels(const std::string& id, std::span<const std::uint8_t> pgm);
  std::string start_train_seg(const std::string& id, const Json& config);
  std::string start_add_class(const std::string& id, const std::string& name, const std::vector<SupportUpload>& supports,
                              const Json& options);
  std::string start_train_irl(const std::string& id, const Json& body);
  Json route(const std::string& id, const Json& query);
  Bytes overlay(const std::string& id, const std::string& layer);
  Json describe(const std::string& id);

  JobRecord job(const std::string& job_id);
  /// Blocks until the job reaches a terminal state.
  JobRecord wait(const std::string& job_id);

  std::shared_ptr<const MapWorkspace> snapshot(const std::string& id);
  const Registry& registry() const { return registry_; }

  /// Installs every endpoint on `server`.
  void bind(httplib::Server& server);

private:
  struct Slot {
    std::shared_ptr<const MapWorkspace> state;
    bool busy = false;
  };

  using JobBody = std::function<MapWorkspace(const MapWorkspace&, JobRecord&)>;

  std::string submit(const std::string& id, const std::string& kind, JobBody body);
  void finish(JobRecord record, std::shared_ptr<const MapWorkspace> installed);
  Slot& slot(const std::string& id);  // requires mutex_

  Registry registry_;
  std::mutex mutex_;
  std::condition_variable job_done_;
  std::map<std::string, Slot> slots_;
  std::map<std::string, JobRecord> jobs_;
  std::map<std::string, std::pair<std::string, std::vector<Cell>>> routes_;  // route id -> (workspace, path)
  std::uint64_t next_workspace_ = 1;
  std::uint64_t next_job_ = 1;
  std::uint64_t next_route_ = 1;
  std::vector<std::thread> workers_;
};

/// HTTP status for a library error: 404 unknown ids, 409 conflicts, 422 otherwise.
int http_status(const Error& error);

/// Episode settings for tile training: 1000 short episodes, one support.
FewshotConfig tile_head_config(std::uint64_t seed);

/// Trains a few-shot head on tiles of a single labeled raster; every
/// palette class present in the labels becomes a training class.
FewshotHead train_tile_head(const FeatureVolume& volume, const Grid<std::uint8_t>& labels, const FewshotConfig& config);

/// Palette-colored render of a semantic raster.
std::vector<std::uint8_t> render_semantic(const SemanticRaster& semantic, const LabelPalette& palette);

}  // namespace semnav
