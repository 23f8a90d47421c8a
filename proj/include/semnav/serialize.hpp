#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "semnav/fewshot.hpp"
#include "semnav/frugal.hpp"
#include "semnav/irl.hpp"
#include "semnav/planner.hpp"
#include "semnav/raster.hpp"

namespace semnav {

using Json = nlohmann::json;

/// Parses text, mapping syntax errors to ErrorKind::Format.
Json parse_json(const std::string& text, const std::string& what);
/// Canonical on-disk text: two-space indent plus trailing newline.
std::string dump_json(const Json& j);

Json to_json(const LabelPalette& palette);
LabelPalette palette_from_json(const Json& j);

Json to_json(const MlpModel& model);
MlpModel mlp_from_json(const Json& j);

Json to_json(const SegModel& model);
SegModel seg_model_from_json(const Json& j);

Json to_json(const FewshotHead& head);
FewshotHead fewshot_head_from_json(const Json& j);

struct NamedWeights {
  std::vector<std::string> features;
  RewardWeights weights;
};

Json to_json(const NamedWeights& weights);
NamedWeights weights_from_json(const Json& j);
/// Feature names for one-hot class features.
std::vector<std::string> class_feature_names(const LabelPalette& palette);

struct DemoSet {
  Cell goal;
  std::vector<Demonstration> paths;
};

Json to_json(const DemoSet& demos);
DemoSet demos_from_json(const Json& j);

Json to_json(Cell c);
Cell cell_from_json(const Json& j);

Json to_json(const RoutePlan& plan);
Json to_json(const Explanation& explanation);

Json to_json(const SgdConfig& config);
SgdConfig sgd_config_from_json(const Json& j, SgdConfig defaults = {});
Json to_json(const FrugalConfig& config);
FrugalConfig frugal_config_from_json(const Json& j);
Json to_json(const IrlConfig& config);
IrlConfig irl_config_from_json(const Json& j);

struct RouteRequest {
  RouteQuery query;
  std::vector<Cell> goals;  // one or more candidates
  bool lambda_given = false;
};
RouteRequest route_request_from_json(const Json& j);

}  // namespace semnav
