#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sdt/backend.hpp"
#include "sdt/eppa.hpp"
#include "sdt/fusion.hpp"
#include "sdt/layout.hpp"
#include "sdt/sphere_geom.hpp"

namespace sdt {

/// Which branch runs the region paths.
enum class MdMode { Pano, Pers, Both };

std::string_view to_string(MdMode m);
MdMode md_mode_from_string(std::string_view s);

inline constexpr int kBranchCount = 2;  // color table column 0 = panorama, 1 = perspective

struct MpfConfig {
  MdMode md_mode = MdMode::Both;
  bool fg_eppa = true;  // foreground paths exchange during bootstrapping
  bool eppa = true;     // exchange at all
  BootstrapPlan bootstrap{20, BootstrapPlan::Coupling::Branches};
  bool noise_coupling = true;
  LoraMode lora = LoraMode::Yes;
  std::optional<bool> include_objects_in_global;
  /// Yaw applied before each step, in latent columns. Entry 0 places the
  /// layout in the frame the noise is drawn in. Empty means a per-seed
  /// pseudo-random schedule; otherwise one entry per step.
  std::vector<int> rotation_schedule;
  std::optional<std::uint64_t> rotation_seed;  // defaults to the run seed
  bool circular_padding = true;
  double view_fov = kPi / 2;
  int view_size = 256;  // pixels
  EppaOptions eppa_options;
  std::uint64_t seed = 0;
  int workers = 1;
  bool record_colors = false;  // fill MpfResult::color_log
};

/// Exchange enabled for this path at this step?
inline bool eppa_gate(bool path_is_foreground, bool in_bootstrap, const MpfConfig& config) {
  return !(path_is_foreground && in_bootstrap && !config.fg_eppa);
}

/// Cameras in the rig frame plus cached mask samplers.
struct ViewRig {
  ViewRig(std::vector<CameraPose> poses, const ErpGrid& grid, int factor);

  std::vector<CameraPose> poses;  // pixel resolution
  std::vector<ViewSampler> samplers;
  ErpGrid grid;
  int factor;
};

/// One denoising path's dual-branch state in the working frame.
struct BranchState {
  Latent pano;
  std::vector<Latent> persp;
  std::vector<CameraPose> poses;
  Mask erp_mask;                 // pixel resolution
  std::vector<Mask> persp_masks;  // pixel resolution, one per view
  Latent pano_noise;             // bootstrap noise, rotates with the panorama
  std::vector<Latent> persp_noise;
  int yaw_columns = 0;           // latent columns relative to the rig frame
};

/// Rolls the panorama latent, its noise and the ERP mask by `columns`
/// latent columns, yaws the cameras by the same angle and re-projects the
/// perspective masks from the rolled ERP mask.
BranchState rotate_state(const BranchState& state, int columns, const ViewRig& rig);

/// Per-seed pseudo-random schedule in [0, width).
std::vector<int> default_rotation_schedule(std::uint64_t seed, int steps, int width);

struct MpfStats {
  long pano_predicts = 0;
  long persp_predicts = 0;
  long composited = 0;
  long gated_off = 0;  // foreground exchanges skipped, counted once per branch running MD
  long exchanges = 0;
  long total_yaw_columns = 0;
  long unwound_columns = 0;
};

/// One bootstrap color applied to one path latent.
struct ColorUse {
  int t_index;
  int path;    // 0 = background, i = region i - 1
  Branch branch;
  int view;    // -1 for the panorama
  Rgb rgb;
};

struct MpfResult {
  Image pano;
  std::vector<Image> views;
  std::vector<CameraPose> view_poses;  // input frame
  Latent pano_latent;
  std::vector<Latent> view_latents;
  MpfStats stats;
  std::vector<ColorUse> color_log;
};

MpfResult mpf_sample(const Layout& layout, const MpfConfig& config, const Denoiser& denoiser,
                     const Scheduler& scheduler, const Codec& codec);

}  // namespace sdt
