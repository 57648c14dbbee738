#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdt/fusion.hpp"
#include "sdt/layout.hpp"
#include "sdt/mpf.hpp"
#include "sdt/mstd.hpp"

namespace sdt {

enum class Pipeline { Mstd, Mpf };

/// Every tunable of a run. Fields left unset in JSON take the per-pipeline
/// defaults; `to_json` always emits the resolved values, so the hash of a
/// config never depends on which defaults were spelled out.
struct PipelineConfig {
  Pipeline pipeline = Pipeline::Mstd;
  std::uint64_t seed = 0;
  int steps = 50;
  int bootstrap = 20;
  BootstrapPlan::Coupling bootstrap_coupling = BootstrapPlan::Coupling::None;
  bool noise_coupling = true;
  LoraMode lora = LoraMode::BackgroundOnly;
  bool global_prompt = false;

  // sliding windows
  int stride = 8;
  int window = 0;
  bool stitch = true;
  int pad = -1;

  // dual branch
  MdMode md_mode = MdMode::Both;
  bool fg_eppa = true;
  bool eppa = true;
  std::optional<std::uint64_t> rotation_seed;
  bool circular_padding = true;
  double view_fov_deg = 90.0;
  int view_size = 256;
  double eppa_sigma = 0.5;

  // benchmark layout selection, used when a run is built from a scene
  std::string mask_size = "M";
  std::string mask_type = "erp_reprojected";
  std::vector<int> mask_indices{0, 1, 2};
  int erp_width = 1024;
  int erp_height = 512;

  nlohmann::json to_json() const;
  std::string hash() const;
  void validate() const;

  MstdConfig to_mstd(int workers = 1) const;
  MpfConfig to_mpf(int workers = 1) const;
};

/// Defaults for a pipeline: bg-only LoRA and uncoupled bootstrap colors for
/// the stitching pipeline, full LoRA and branch coupling for the dual-branch
/// one.
PipelineConfig default_config(Pipeline p);

/// Parses a config; unknown keys and ill-typed values throw
/// std::invalid_argument.
PipelineConfig config_from_json(const nlohmann::json& j);

std::string_view to_string(Pipeline p);
Pipeline pipeline_from_string(std::string_view s);

}  // namespace sdt
