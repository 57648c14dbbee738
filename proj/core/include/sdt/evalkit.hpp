#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdt/sphere_geom.hpp"
#include "sdt/tensor.hpp"

namespace sdt::evalkit {

/// A detector output in ERP pixels. Boxes crossing the seam have
/// x1 > width; x0 < x1 and y0 < y1 always.
struct DetectionRecord {
  int object_id = 0;
  PixelBox box;
  double score = 0.0;
};

using sdt::cyclic_bounding_box;

/// IoU of two boxes on a canvas that wraps after `width` columns.
double cyclic_box_iou(const PixelBox& a, const PixelBox& b, int width);

/// IoU of `pred` with the cyclic tight box of `gt_mask`. Throws for an
/// empty mask.
double iou(const PixelBox& pred, const Mask& gt_mask);

/// IoU measured inside a perspective view: the ground truth is the box of
/// the mask projected into `camera`, the prediction is in view pixels.
double iou_in_view(const PixelBox& pred_in_view, const Mask& gt_erp_mask, const CameraPose& camera);

inline constexpr std::array<std::string_view, 5> kMetricColumns = {"IoU", "CS", "IR", "FID", "CMMD"};
enum Metric { kIoU = 0, kClipScore, kImageReward, kFid, kCmmd };

/// Plugin executable name for a neural metric column.
std::string_view plugin_id(Metric m);

struct MetricRow {
  std::string config_id;
  std::map<std::string, std::string> params;
  std::array<std::optional<double>, 5> metrics;  // indexed by Metric
  std::vector<std::string> failed;               // plugin ids that failed
};

struct GroupRow {
  std::string value;
  int rows = 0;
  std::array<std::optional<double>, 5> means;
};

struct AggregateTable {
  std::string group_by;
  std::vector<GroupRow> groups;  // numeric-aware ascending order of value
};

/// Mean per metric within each value of `group_by`. Rows lacking the
/// parameter are skipped; a metric absent from every row of a group stays
/// absent. Values are sorted before summation so row order never matters.
AggregateTable aggregate(const std::vector<MetricRow>& rows, const std::string& group_by);

/// group_by,value,n,IoU,CS,IR,FID,CMMD with empty cells for absent metrics.
std::string to_csv(const AggregateTable& table);
/// Aligned text table with the same columns, two decimals.
std::string to_text(const AggregateTable& table);
/// Long-format plot data: parameter,value,metric,mean.
std::string to_plot_csv(const AggregateTable& table);

struct PluginResult {
  enum class Status { Ok, Absent, Failed };
  Status status = Status::Absent;
  std::optional<double> value;
  bool cache_hit = false;
  std::string error;
};

/// Runs external scorers: `<plugin_dir>/<id> images.txt refs.txt out.json`,
/// where the lists hold one path per line and out.json receives
/// {"metric": id, "value": number}. Results are cached under `cache_dir`
/// keyed by the plugin id and the content hash of every listed file.
class PluginRunner {
 public:
  PluginRunner(std::filesystem::path plugin_dir, std::filesystem::path cache_dir);

  /// Plugin directory from SDT_PLUGIN_DIR; empty when unset.
  static std::filesystem::path plugin_dir_from_env();

  PluginResult run(const std::string& id, const std::vector<std::filesystem::path>& images,
                   const std::vector<std::filesystem::path>& references);

  int invocations() const { return invocations_; }

 private:
  std::filesystem::path plugin_dir_;
  std::filesystem::path cache_dir_;
  int invocations_ = 0;
};

}  // namespace sdt::evalkit
