#include "sdt/layout.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sdt/image_io.hpp"

namespace sdt {

std::vector<LayoutWarning> validate(const Layout& layout, std::size_t max_regions) {
  try {
    layout.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw LayoutError(e.what());
  }
  if (layout.regions.size() > max_regions) {
    throw LayoutError("layout has " + std::to_string(layout.regions.size()) + " regions, limit is " +
                      std::to_string(max_regions));
  }
  std::set<int> ids;
  for (std::size_t i = 0; i < layout.regions.size(); ++i) {
    const auto& r = layout.regions[i];
    const std::string name = "region " + std::to_string(i);
    if (r.mask.channels() != 1 || r.mask.height() != layout.grid.height || r.mask.width() != layout.grid.width) {
      throw LayoutError(name + ": mask shape does not match the ERP grid");
    }
    if (!is_binary(r.mask)) throw LayoutError(name + ": mask is not binary");
    if (!any_set(r.mask)) throw LayoutError(name + ": mask is empty");
    if (!ids.insert(r.object_id).second) throw LayoutError(name + ": duplicate object id");
  }

  std::vector<LayoutWarning> warnings;
  const int h = layout.grid.height, w = layout.grid.width;
  for (std::size_t i = 0; i < layout.regions.size(); ++i) {
    const auto& m = layout.regions[i].mask;
    bool pole = false;
    for (int x = 0; x < w && !pole; ++x) pole = m(0, x) || m(h - 1, x);
    if (pole) {
      warnings.push_back({LayoutWarning::Kind::Pole, static_cast<int>(i), -1,
                          "region " + std::to_string(i) + " touches a pole row; objects near the poles tend to be "
                                                          "distorted or dropped"});
    }
  }
  for (std::size_t i = 0; i < layout.regions.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.regions.size(); ++j) {
      const auto a = layout.regions[i].mask.values();
      const auto b = layout.regions[j].mask.values();
      bool overlap = false;
      for (std::size_t k = 0; k < a.size() && !overlap; ++k) overlap = a[k] && b[k];
      if (overlap) {
        warnings.push_back({LayoutWarning::Kind::Overlap, static_cast<int>(i), static_cast<int>(j),
                            "regions " + std::to_string(i) + " and " + std::to_string(j) +
                                " overlap; overlapping objects are averaged and may be neglected"});
      }
    }
  }
  return warnings;
}

std::string effective_global_prompt(const Layout& layout, std::optional<std::string_view> trigger) {
  std::string out;
  if (trigger && !trigger->empty()) {
    out.append(*trigger);
    out.append(", ");
  }
  out.append(layout.background_prompt);
  if (layout.include_objects_in_global) {
    for (const auto& r : layout.regions) {
      out.append(", ");
      out.append(r.prompt);
    }
  }
  return out;
}

RegionSpec background_region(const Layout& layout, std::optional<std::string_view> trigger) {
  RegionSpec bg;
  bg.mask = make_mask(layout.grid.height, layout.grid.width, 1);
  bg.prompt = effective_global_prompt(layout, trigger);
  bg.lora_enabled = layout.background_lora;
  bg.object_id = -1;
  return bg;
}

std::string region_prompt(const RegionSpec& region, std::optional<std::string_view> trigger) {
  if (!trigger || trigger->empty()) return region.prompt;
  return std::string(*trigger) + ", " + region.prompt;
}

void apply_lora_mode(Layout& layout, LoraMode mode) {
  layout.background_lora = mode != LoraMode::No;
  for (auto& r : layout.regions) r.lora_enabled = mode == LoraMode::Yes;
}

Layout roll_layout(const Layout& layout, int columns) {
  Layout out = layout;
  for (auto& r : out.regions) r.mask = roll_columns(r.mask, columns);
  return out;
}

Layout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LayoutError("cannot open layout " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LayoutError("layout " + path.string() + " is not valid JSON: " + e.what());
  }
  const auto base = path.parent_path();
  Layout layout;
  try {
    layout.background_prompt = j.at("background_prompt").get<std::string>();
    const auto flags = j.value("flags", nlohmann::json::object());
    layout.include_objects_in_global = flags.value("include_objects_in_global", false);
    layout.background_lora = flags.value("background_lora", true);
    int next_id = 0;
    for (const auto& r : j.value("regions", nlohmann::json::array())) {
      RegionSpec spec;
      spec.mask = read_mask_png(base / r.at("mask_png_path").get<std::string>());
      spec.prompt = r.at("prompt").get<std::string>();
      spec.lora_enabled = r.value("lora", false);
      spec.object_id = r.value("object_id", next_id);
      next_id = spec.object_id + 1;
      layout.regions.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LayoutError("layout " + path.string() + ": " + e.what());
  }
  if (j.contains("grid")) {
    layout.grid = {j["grid"].at("width").get<int>(), j["grid"].at("height").get<int>()};
  } else if (!layout.regions.empty()) {
    layout.grid = {layout.regions.front().mask.width(), layout.regions.front().mask.height()};
  }
  return layout;
}

void save_layout(const Layout& layout, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  const std::string stem = path.stem().string();
  nlohmann::json regions = nlohmann::json::array();
  for (std::size_t i = 0; i < layout.regions.size(); ++i) {
    const auto& r = layout.regions[i];
    const std::string mask_name = stem + "_mask" + std::to_string(i) + ".png";
    write_mask_png(base / mask_name, r.mask);
    regions.push_back({{"mask_png_path", mask_name}, {"prompt", r.prompt}, {"lora", r.lora_enabled},
                       {"object_id", r.object_id}});
  }
  nlohmann::json j{{"background_prompt", layout.background_prompt},
                   {"grid", {{"width", layout.grid.width}, {"height", layout.grid.height}}},
                   {"regions", regions},
                   {"flags",
                    {{"include_objects_in_global", layout.include_objects_in_global},
                     {"background_lora", layout.background_lora}}}};
  if (!base.empty()) std::filesystem::create_directories(base);
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write layout " + path.string());
}

std::string_view to_string(LoraMode m) {
  switch (m) {
    case LoraMode::Yes: return "yes";
    case LoraMode::BackgroundOnly: return "bg-only";
    case LoraMode::No: return "no";
  }
  return "no";
}

LoraMode lora_mode_from_string(std::string_view s) {
  if (s == "yes" || s == "all") return LoraMode::Yes;
  if (s == "bg-only" || s == "bg") return LoraMode::BackgroundOnly;
  if (s == "no" || s == "none") return LoraMode::No;
  throw std::invalid_argument("unknown LoRA mode: " + std::string(s));
}

}  // namespace sdt
