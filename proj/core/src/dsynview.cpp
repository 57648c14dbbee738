#include "sdt/dsynview.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "sdt/digest.hpp"
#include "sdt/image_io.hpp"

namespace sdt::dsynview {
namespace {

constexpr int kPlacementVersion = 1;

// small-size sides in units of grid.height / 16, per slot (width, height)
constexpr double kSmallSides[kObjectsPerScene][2] = {{2.0, 1.0}, {1.5, 1.5}, {1.0, 2.0}};

std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(c == ' ' ? '_' : c);
  return out;
}

}  // namespace

std::string_view to_string(MaskSize s) {
  switch (s) {
    case MaskSize::S: return "S";
    case MaskSize::M: return "M";
    case MaskSize::L: return "L";
  }
  return "M";
}

std::string_view to_string(MaskType t) { return t == MaskType::Regular ? "regular" : "erp_reprojected"; }

MaskSize mask_size_from_string(std::string_view s) {
  if (s == "S" || s == "s" || s == "0") return MaskSize::S;
  if (s == "M" || s == "m" || s == "1") return MaskSize::M;
  if (s == "L" || s == "l" || s == "2") return MaskSize::L;
  throw std::invalid_argument("unknown mask size: " + std::string(s));
}

MaskType mask_type_from_string(std::string_view s) {
  if (s == "regular") return MaskType::Regular;
  if (s == "erp_reprojected" || s == "erp-reproj" || s == "erp") return MaskType::ErpReprojected;
  throw std::invalid_argument("unknown mask type: " + std::string(s));
}

std::vector<SceneSpec> default_scenes(MaskSize size, MaskType type) {
  struct Row {
    const char* id;
    const char* bg;
    std::array<const char*, 3> set1, set2;
  };
  static const Row rows[] = {
      {"indoor_room", "an indoor room", {"table", "television", "wardrobe"}, {"bed", "potted plant", "door"}},
      {"green_field", "a green field", {"cow", "cat", "tree"}, {"sheep", "pond", "windmill"}},
      {"busy_street", "a busy street", {"bus", "sign", "building"}, {"car", "bicycle", "traffic light"}},
  };
  std::vector<SceneSpec> out;
  for (const auto& r : rows) {
    for (int set = 1; set <= 2; ++set) {
      SceneSpec s;
      s.scene_id = std::string(r.id) + "_" + std::to_string(set);
      s.background_prompt = r.bg;
      const auto& objs = set == 1 ? r.set1 : r.set2;
      for (int k = 0; k < kObjectsPerScene; ++k) s.object_prompts[k] = objs[k];
      s.mask_size = size;
      s.mask_type = type;
      s.mask_set_id = set;
      out.push_back(std::move(s));
    }
  }
  return out;
}

PixelBox slot_box(int slot, MaskSize size, const ErpGrid& grid) {
  grid.validate();
  if (slot < 0 || slot >= kObjectsPerScene) throw std::out_of_range("slot_box: slot must be 0, 1 or 2");
  const double unit = grid.height / 16.0;
  int sw = static_cast<int>(std::lround(kSmallSides[slot][0] * unit));
  int sh = static_cast<int>(std::lround(kSmallSides[slot][1] * unit));
  if (size == MaskSize::M) {
    sw = static_cast<int>(std::lround(sw * std::sqrt(2.0)));
    sh = static_cast<int>(std::lround(sh * std::sqrt(2.0)));
  } else if (size == MaskSize::L) {
    sw *= 2;
    sh *= 2;
  }
  sw = std::max(sw, 1);
  sh = std::max(sh, 1);
  const int cx = static_cast<int>(std::lround(grid.width * (2 * slot + 1) / 6.0));
  const int cy = grid.height / 2;
  const int x0 = cx - sw / 2, y0 = cy - sh / 2;
  return {x0, y0, x0 + sw, y0 + sh};
}

std::vector<Mask> build_masks(const SceneSpec& scene, const ErpGrid& grid) {
  std::vector<Mask> masks;
  for (int k = 0; k < kObjectsPerScene; ++k) {
    const PixelBox b = slot_box(k, scene.mask_size, grid);
    Mask m = make_mask(grid.height, grid.width);
    for (int y = b.y0; y < b.y1; ++y) {
      for (int x = b.x0; x < b.x1; ++x) m(y, x) = 1;
    }
    masks.push_back(std::move(m));
  }
  if (scene.mask_type == MaskType::ErpReprojected) masks = erp_reproject_masks(masks, grid);
  return masks;
}

CameraPose centered_camera(const Mask& mask, const ErpGrid& grid, double fov, int view_size) {
  const auto box = cyclic_bounding_box(mask);
  if (!box) throw std::invalid_argument("centered_camera: empty mask");
  // the cyclic box may run past the seam
  const double u = std::fmod(0.5 * (box->x0 + box->x1), static_cast<double>(grid.width));
  const SphericalCoord c = erp_to_spherical(u, 0.5 * (box->y0 + box->y1), grid);
  if (std::abs(c.lat) > deg2rad(kPoleLimitDeg)) {
    throw std::invalid_argument("mask centered at latitude " + std::to_string(rad2deg(c.lat)) +
                                " deg is too close to a pole for a centered view; move it within " +
                                std::to_string(kPoleLimitDeg) + " deg of the equator");
  }
  CameraPose cam{c.lon, c.lat, 0.0, fov, view_size};
  cam.validate();
  return cam;
}

std::vector<Mask> erp_reproject_masks(const std::vector<Mask>& masks, const ErpGrid& grid) {
  std::vector<Mask> out;
  out.reserve(masks.size());
  for (const auto& m : masks) {
    if (m.width() != grid.width || m.height() != grid.height) throw std::invalid_argument("erp_reproject_masks: mask does not match grid");
    out.push_back(reproject_mask_via_view(m, centered_camera(m, grid)));
  }
  return out;
}

Layout build_layout(const SceneSpec& scene, const ErpGrid& grid, const std::vector<int>& mask_indices) {
  const auto masks = build_masks(scene, grid);
  Layout layout;
  layout.grid = grid;
  layout.background_prompt = scene.background_prompt;
  for (int k : mask_indices) {
    if (k < 0 || k >= kObjectsPerScene) throw std::out_of_range("build_layout: mask index out of range");
    layout.regions.push_back({masks[k], scene.object_prompts[k], false, k});
  }
  return layout;
}

nlohmann::json placements_json(const ErpGrid& grid) {
  nlohmann::json slots = nlohmann::json::array();
  for (int k = 0; k < kObjectsPerScene; ++k) {
    nlohmann::json sizes;
    for (MaskSize s : {MaskSize::S, MaskSize::M, MaskSize::L}) {
      const PixelBox b = slot_box(k, s, grid);
      sizes[std::string(to_string(s))] = {b.x0, b.y0, b.x1, b.y1};
    }
    slots.push_back({{"slot", k}, {"shape", k == 0 ? "long" : k == 1 ? "square" : "tall"}, {"boxes_x0y0x1y1", sizes}});
  }
  return {{"version", kPlacementVersion},
          {"grid", {{"width", grid.width}, {"height", grid.height}}},
          {"reprojection", {{"fov_deg", kReprojectionFovDeg}, {"view_size", kReprojectionViewSize}}},
          {"slots", slots}};
}

nlohmann::json ManifestConfig::to_json() const {
  return {{"grid", {{"width", grid.width}, {"height", grid.height}}},
          {"n_seeds", n_seeds},
          {"seed_base", seed_base},
          {"mask_size", to_string(mask_size)},
          {"mask_type", to_string(mask_type)},
          {"mask_indices", mask_indices},
          {"view_fov_deg", view_fov_deg},
          {"view_size", view_size},
          {"placement_version", kPlacementVersion}};
}

std::string ManifestConfig::hash() const { return sha256_hex(to_json().dump()); }

Mask reference_target_mask(const Mask& erp_mask, const ErpGrid& grid, int view_size, double fov) {
  const CameraPose cam = centered_camera(erp_mask, grid, fov, view_size);
  const auto box = bounding_box(project_mask_erp_to_persp(erp_mask, cam));
  if (!box) throw std::invalid_argument("reference_target_mask: object not visible");
  Mask out = make_mask(view_size, view_size);
  const int x0 = (view_size - box->width()) / 2, y0 = (view_size - box->height()) / 2;
  for (int y = y0; y < y0 + box->height(); ++y) {
    for (int x = x0; x < x0 + box->width(); ++x) out(y, x) = 1;
  }
  return out;
}

BenchmarkManifest build_manifest(const ManifestConfig& config) {
  config.grid.validate();
  if (config.n_seeds < 1) throw std::invalid_argument("manifest: need at least one seed");
  if (config.mask_indices.empty()) throw std::invalid_argument("manifest: mask_indices must not be empty");
  BenchmarkManifest m;
  m.config = config;
  m.config_hash = config.hash();
  m.scenes = default_scenes(config.mask_size, config.mask_type);
  for (int i = 0; i < config.n_seeds; ++i) m.seeds.push_back(config.seed_base + static_cast<std::uint64_t>(i));

  const double fov = deg2rad(config.view_fov_deg);
  std::map<std::string, std::vector<CameraPose>> cameras;
  for (const auto& scene : m.scenes) {
    const auto masks = build_masks(scene, config.grid);
    for (int k : config.mask_indices) cameras[scene.scene_id].push_back(centered_camera(masks.at(k), config.grid, fov, config.view_size));
  }

  for (const auto& scene : m.scenes) {
    const std::string layout_path = "layouts/" + scene.scene_id + ".json";
    for (auto seed : m.seeds) {
      m.panoramas.push_back({scene.scene_id, seed, layout_path,
                             "panoramas/" + scene.scene_id + "/" + std::to_string(seed) + ".png"});
    }
  }
  for (const auto& pano : m.panoramas) {
    const auto& cams = cameras.at(pano.scene_id);
    for (std::size_t i = 0; i < config.mask_indices.size(); ++i) {
      const int slot = config.mask_indices[i];
      m.perspectives.push_back({pano.scene_id, pano.seed, slot, cams[i],
                                "perspectives/" + pano.scene_id + "/" + std::to_string(pano.seed) + "_obj" +
                                    std::to_string(slot) + ".png"});
    }
  }

  // prompts x seeds x (sizes x types); equals perspective entries x 6 for the default config
  const MaskSize sizes[] = {MaskSize::S, MaskSize::M, MaskSize::L};
  const MaskType types[] = {MaskType::Regular, MaskType::ErpReprojected};
  m.reference_mask_variants = 6;
  for (const auto& scene : m.scenes) {
    for (int slot = 0; slot < kObjectsPerScene; ++slot) {
      ++m.reference_prompts;
      const std::string& prompt = scene.object_prompts[slot];
      for (auto seed : m.seeds) {
        for (auto size : sizes) {
          for (auto type : types) {
            const std::string variant = std::string(to_string(size)) + "_" + std::string(to_string(type));
            m.references.push_back({prompt, scene.background_prompt, slot, seed, size, type,
                                    "reference_masks/slot" + std::to_string(slot) + "_" + variant + ".png",
                                    "references/" + slug(prompt) + "/" + variant + "/" + std::to_string(seed) + ".png"});
          }
        }
      }
    }
  }
  return m;
}

void write_dataset(const BenchmarkManifest& m, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  const auto& cfg = m.config;
  {
    std::ofstream out(root / "placements.json");
    out << placements_json(cfg.grid).dump(2) << '\n';
  }
  for (const auto& scene : m.scenes) {
    save_layout(build_layout(scene, cfg.grid, cfg.mask_indices), root / "layouts" / (scene.scene_id + ".json"));
  }
  std::map<std::string, bool> written;
  for (const auto& job : m.references) {
    if (written[job.mask_path]) continue;
    written[job.mask_path] = true;
    SceneSpec scene = m.scenes.front();
    scene.mask_size = job.mask_size;
    scene.mask_type = job.mask_type;
    const auto masks = build_masks(scene, cfg.grid);
    write_mask_png(root / job.mask_path,
                   reference_target_mask(masks.at(job.object_slot), cfg.grid, cfg.view_size, deg2rad(cfg.view_fov_deg)));
  }

  std::ofstream out(root / "manifest.jsonl");
  if (!out) throw std::runtime_error("cannot write " + (root / "manifest.jsonl").string());
  const nlohmann::json header{
      {"kind", "header"},
      {"version", 1},
      {"config", cfg.to_json()},
      {"config_hash", m.config_hash},
      {"counts",
       {{"panoramas", m.panoramas.size()}, {"perspectives", m.perspectives.size()}, {"references", m.references.size()}}},
      {"reference_factorization",
       {{"used", "prompts x seeds x mask_variants"},
        {"prompts", m.reference_prompts},
        {"seeds", m.seeds.size()},
        {"mask_variants", m.reference_mask_variants},
        {"equivalent", "perspective_entries x mask_variants"}}}};
  out << header.dump() << '\n';
  for (const auto& e : m.panoramas) {
    out << nlohmann::json{{"kind", "panorama"}, {"scene_id", e.scene_id}, {"seed", e.seed},
                          {"config_hash", m.config_hash},
                          {"paths", {{"layout", e.layout_path}, {"image", e.image_path}}}}
               .dump()
        << '\n';
  }
  for (const auto& e : m.perspectives) {
    out << nlohmann::json{{"kind", "perspective"}, {"scene_id", e.scene_id}, {"seed", e.seed},
                          {"object_slot", e.object_slot}, {"camera", camera_to_json(e.camera)},
                          {"config_hash", m.config_hash}, {"paths", {{"image", e.image_path}}}}
               .dump()
        << '\n';
  }
  for (const auto& e : m.references) {
    out << nlohmann::json{{"kind", "reference"}, {"prompt", e.prompt}, {"background_prompt", e.background_prompt},
                          {"object_slot", e.object_slot}, {"seed", e.seed}, {"mask_size", to_string(e.mask_size)},
                          {"mask_type", to_string(e.mask_type)}, {"config_hash", m.config_hash},
                          {"paths", {{"mask", e.mask_path}, {"image", e.image_path}}}}
               .dump()
        << '\n';
  }
  if (!out) throw std::runtime_error("failed writing manifest");
}

}  // namespace sdt::dsynview
