#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdt/backend.hpp"
#include "sdt/config.hpp"

namespace sdt::cli {

enum ExitCode : int {
  kOk = 0,
  kPartialFailure = 1,
  kBadInput = 2,
  kBackendFailure = 3,
};

/// Denoiser, scheduler and codec for one run.
struct Backend {
  std::unique_ptr<Scheduler> scheduler;
  std::unique_ptr<Denoiser> denoiser;
  std::unique_ptr<Codec> codec;
};

/// "mock" or "adapter:<endpoint>". Throws std::invalid_argument otherwise.
Backend make_backend(const std::string& id, int steps);

PipelineConfig load_config(const std::filesystem::path& path);

/// Runs the configured pipeline on `layout` and writes pano.png, the view
/// PNGs of the dual-branch pipeline and manifest.json into `out_dir`.
/// Returns the manifest.
nlohmann::json run_pipeline(const Layout& layout, const PipelineConfig& config, const std::string& backend,
                            int workers, const std::filesystem::path& out_dir);

struct GenerateOptions {
  std::filesystem::path layout;
  std::filesystem::path config;  // empty means defaults
  std::string backend = "mock";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  int workers = 1;
};
int cmd_generate(const GenerateOptions& o, std::ostream& log);

struct MakeDatasetOptions {
  std::filesystem::path out = "dsynview";
  int seeds = 168;
  std::uint64_t seed_base = 0;
  std::string mask_size = "M";
  std::string mask_type = "erp_reprojected";
  std::vector<int> mask_indices{0, 1, 2};
  int erp_width = 1024;
  int erp_height = 512;
};
int cmd_make_dataset(const MakeDatasetOptions& o, std::ostream& log);

struct ProjectMasksOptions {
  enum class Mode { ToView, ToErp, Reproject };
  Mode mode = Mode::ToView;
  std::filesystem::path mask;
  std::filesystem::path camera;  // JSON camera record; Reproject centers one when empty
  std::filesystem::path out;
  int erp_width = 1024;
  int erp_height = 512;
};
int cmd_project_masks(const ProjectMasksOptions& o, std::ostream& log);

struct EvaluateOptions {
  std::filesystem::path runs;        // runs.jsonl
  std::filesystem::path references;  // optional text file with one reference image per line
  std::vector<std::string> group_by;  // empty means every parameter found
  std::filesystem::path out = "eval";
  std::filesystem::path plugin_dir;  // empty means SDT_PLUGIN_DIR
};
int cmd_evaluate(const EvaluateOptions& o, std::ostream& log);

struct SweepOptions {
  std::filesystem::path spec;
  std::filesystem::path out = "sweep";
  std::string backend = "mock";
  int workers = 1;
  bool resume = false;
  bool full_grid = false;
};
int cmd_sweep(const SweepOptions& o, std::ostream& log);

}  // namespace sdt::cli
