#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdt/layout.hpp"
#include "sdt/sphere_geom.hpp"

namespace sdt::dsynview {

enum class MaskSize { S, M, L };
enum class MaskType { Regular, ErpReprojected };

std::string_view to_string(MaskSize s);
std::string_view to_string(MaskType t);
MaskSize mask_size_from_string(std::string_view s);
MaskType mask_type_from_string(std::string_view s);

inline constexpr int kObjectsPerScene = 3;
inline constexpr int kDefaultSeeds = 168;
inline constexpr double kReprojectionFovDeg = 120.0;
inline constexpr int kReprojectionViewSize = 512;
/// Mask centers closer than this to a pole cannot be reprojected.
inline constexpr double kPoleLimitDeg = 80.0;

struct SceneSpec {
  std::string scene_id;
  std::string background_prompt;
  std::array<std::string, kObjectsPerScene> object_prompts;
  MaskSize mask_size = MaskSize::M;
  MaskType mask_type = MaskType::ErpReprojected;
  int mask_set_id = 1;
};

/// The six benchmark scenes: three backgrounds with two object sets each.
std::vector<SceneSpec> default_scenes(MaskSize size = MaskSize::M, MaskType type = MaskType::ErpReprojected);

/// Slot rectangle in ERP pixels. Slot 0 is long, slot 1 square, slot 2
/// tall; slots sit at the horizontal thirds, vertically centered. Medium
/// sides are the small sides times sqrt(2) rounded, large sides twice the
/// small ones.
PixelBox slot_box(int slot, MaskSize size, const ErpGrid& grid);

/// The three object masks of a scene.
std::vector<Mask> build_masks(const SceneSpec& scene, const ErpGrid& grid);

/// Camera looking at the center of the mask's bounding box.
CameraPose centered_camera(const Mask& mask, const ErpGrid& grid, double fov = deg2rad(kReprojectionFovDeg),
                           int view_size = kReprojectionViewSize);

/// Replaces every mask by the ERP footprint of the bounding box of its
/// projection into a centered 120-degree view. Throws for masks centered
/// within kPoleLimitDeg of a pole.
std::vector<Mask> erp_reproject_masks(const std::vector<Mask>& masks, const ErpGrid& grid);

/// Layout of a scene restricted to the given object slots.
Layout build_layout(const SceneSpec& scene, const ErpGrid& grid, const std::vector<int>& mask_indices = {0, 1, 2});

/// Placement table written next to every generated dataset.
nlohmann::json placements_json(const ErpGrid& grid);

struct ManifestConfig {
  ErpGrid grid;
  int n_seeds = kDefaultSeeds;
  std::uint64_t seed_base = 0;
  MaskSize mask_size = MaskSize::M;
  MaskType mask_type = MaskType::ErpReprojected;
  std::vector<int> mask_indices{0, 1, 2};
  double view_fov_deg = kReprojectionFovDeg;
  int view_size = kReprojectionViewSize;

  nlohmann::json to_json() const;
  std::string hash() const;
};

struct PanoramaEntry {
  std::string scene_id;
  std::uint64_t seed;
  std::string layout_path;
  std::string image_path;
};

struct PerspectiveEntry {
  std::string scene_id;
  std::uint64_t seed;
  int object_slot;
  CameraPose camera;
  std::string image_path;
};

/// A reference image to generate with the plain MultiDiffusion baseline:
/// one prompt, one centered perspective mask.
struct ReferenceJob {
  std::string prompt;
  std::string background_prompt;
  int object_slot;
  std::uint64_t seed;
  MaskSize mask_size;
  MaskType mask_type;
  std::string mask_path;
  std::string image_path;
};

struct BenchmarkManifest {
  ManifestConfig config;
  std::string config_hash;
  std::vector<SceneSpec> scenes;
  std::vector<std::uint64_t> seeds;
  std::vector<PanoramaEntry> panoramas;
  std::vector<PerspectiveEntry> perspectives;
  std::vector<ReferenceJob> references;
  int reference_prompts = 0;
  int reference_mask_variants = 0;
};

BenchmarkManifest build_manifest(const ManifestConfig& config);

/// Target mask of a reference job: the object's projection into its
/// centered camera, reduced to its bounding box and moved to the view
/// center.
Mask reference_target_mask(const Mask& erp_mask, const ErpGrid& grid, int view_size, double fov);

/// Writes manifest.jsonl, placements.json, per-scene layouts and all mask
/// PNGs under `root`. Output is byte-identical for equal configs.
void write_dataset(const BenchmarkManifest& manifest, const std::filesystem::path& root);

}  // namespace sdt::dsynview
