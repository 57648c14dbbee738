#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdt/sphere_geom.hpp"
#include "sdt/tensor.hpp"

namespace sdt {

/// Trigger phrase that activates the panorama LoRA of the stitching backbone.
inline constexpr std::string_view kPanoramaTrigger = "360-degree panoramic image";

enum class LoraMode { Yes, BackgroundOnly, No };

struct RegionSpec {
  Mask mask;  // ERP resolution
  std::string prompt;
  bool lora_enabled = false;
  int object_id = 0;
};

/// Global prompt plus ordered (mask, prompt) regions on one ERP canvas.
/// Region order is the merge order.
struct Layout {
  ErpGrid grid;
  std::string background_prompt;
  std::vector<RegionSpec> regions;
  bool include_objects_in_global = false;
  bool background_lora = true;
};

class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LayoutWarning {
  enum class Kind { Overlap, Pole };
  Kind kind;
  int region_a = -1;
  int region_b = -1;
  std::string message;
};

inline constexpr std::size_t kDefaultMaxRegions = 3;

/// Throws LayoutError on hard errors (shape mismatch, non-binary or empty
/// masks, duplicate ids, too many regions). Overlaps and pole contact are
/// reported as warnings.
std::vector<LayoutWarning> validate(const Layout& layout, std::size_t max_regions = kDefaultMaxRegions);

/// Background prompt, optionally followed by every local prompt, optionally
/// prefixed by `trigger`.
std::string effective_global_prompt(const Layout& layout, std::optional<std::string_view> trigger);

/// The implicit background path: all-ones mask over the grid.
RegionSpec background_region(const Layout& layout, std::optional<std::string_view> trigger);

/// Prompt used by a region's own denoising path.
std::string region_prompt(const RegionSpec& region, std::optional<std::string_view> trigger);

/// Sets the background and per-region LoRA flags from a LoRA mode.
void apply_lora_mode(Layout& layout, LoraMode mode);

/// Layout with every mask rolled by `columns` ERP columns.
Layout roll_layout(const Layout& layout, int columns);

/// Reads the JSON layout manifest; mask paths resolve relative to the file.
Layout load_layout(const std::filesystem::path& path);
/// Writes the manifest and one PNG per region mask next to it.
void save_layout(const Layout& layout, const std::filesystem::path& path);

std::string_view to_string(LoraMode m);
LoraMode lora_mode_from_string(std::string_view s);

}  // namespace sdt
