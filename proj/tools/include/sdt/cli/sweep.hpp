#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdt/config.hpp"

namespace sdt::cli {

/// Parameters a sweep may vary, in the order of the benchmark table.
const std::vector<std::string>& sweep_axes();

/// The benchmark value range of an axis.
nlohmann::json default_axis_values(const std::string& axis);

/// Copy of `base` with `axis` set to `value`. Throws std::invalid_argument
/// for unknown axes or ill-typed values.
PipelineConfig apply_axis(const PipelineConfig& base, const std::string& axis, const nlohmann::json& value);

/// Canonical text of an axis value ("20", "bg-only", "012").
std::string axis_label(const std::string& axis, const nlohmann::json& value);

struct SweepAxis {
  std::string name;
  std::vector<nlohmann::json> values;
};

/// {"base_config": {...}, "axes": {"bootstrap": null, "stride": [4, 8]},
///  "scenes": ["green_field_1"], "seeds": [0, 1] | "n_seeds": 2,
///  "one_at_a_time": true}
/// A single "axis" with optional "values" is accepted too. A null or absent
/// value list takes the benchmark range; an empty list is an error.
struct SweepSpec {
  PipelineConfig base;
  std::vector<SweepAxis> axes;
  std::vector<std::string> scenes;
  std::vector<std::uint64_t> seeds;
  bool one_at_a_time = true;
};

SweepSpec parse_sweep_spec(const nlohmann::json& j);

/// One configuration of the sweep, before crossing with scenes and seeds.
struct SweepPoint {
  std::string config_id;                      // "bootstrap=20" or "bootstrap=20,stride=8"
  std::map<std::string, std::string> params;  // every swept axis with its label
  PipelineConfig config;                      // seed not yet set
};

/// One-at-a-time: every value of every axis applied alone to the base.
/// Full grid: the cartesian product of all axes.
std::vector<SweepPoint> enumerate_points(const SweepSpec& spec, bool full_grid);

}  // namespace sdt::cli
