#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sdt/backend.hpp"
#include "sdt/fusion.hpp"
#include "sdt/layout.hpp"

namespace sdt {

/// Horizontal sliding windows over the latent canvas, in latent columns.
/// Windows span the full latent height.
struct WindowPlan {
  int window = 0;   // 0 means the latent height
  int stride = 8;
  bool stitch = true;
  int pad = -1;     // negative means window / 2 with stitching, 0 without

  /// Window width and pad resolved against a latent height.
  WindowPlan resolved(int latent_height) const;
  void validate() const;
};

struct ColumnRange {
  int begin = 0;
  int end = 0;
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// Window ranges in padded coordinates (canvas_width + 2 * pad columns) at
/// offsets 0, stride, 2*stride, ... with a final window flush to the right
/// edge. `plan` must already be resolved.
std::vector<ColumnRange> make_windows(const WindowPlan& plan, int canvas_width);

/// Weighted sums of window outputs in padded coordinates.
class StitchAccumulator {
 public:
  StitchAccumulator(int channels, int height, int padded_width);

  void add(const Latent& window, int offset, double weight = 1.0);

  int padded_width() const { return static_cast<int>(weight_.size()); }
  const Planar<double>& sum() const { return sum_; }
  std::span<const double> weight() const { return weight_; }
  std::span<const int> count() const { return count_; }

 private:
  Planar<double> sum_;
  std::vector<double> weight_;
  std::vector<int> count_;
};

struct FoldResult {
  Latent canvas;
  std::vector<int> coverage;  // windows covering each canvas column
};

/// Folds padded column p onto canvas column (p - pad) mod width, summing
/// values and weights before dividing. Throws if a column has no weight.
FoldResult stitch_fold(const StitchAccumulator& acc, int pad);
/// Unit-weight fold of a padded array.
Latent stitch_fold(const Latent& padded, int pad);

struct MstdConfig {
  WindowPlan windows;
  BootstrapPlan bootstrap;
  bool noise_coupling = true;
  LoraMode lora = LoraMode::Yes;
  std::optional<bool> include_objects_in_global;  // overrides the layout flag
  std::uint64_t seed = 0;
  int workers = 1;
};

struct MstdResult {
  Image image;
  Latent latent;
  MdStats stats;
  int windows_per_step = 0;
  std::vector<int> coverage;  // windows per canvas column in the last step
};

/// Full sampling loop: per step every window runs a MultiDiffusion step on
/// its crop of the cyclically extended canvas, window outputs are folded
/// back onto the canvas, and every path continues from the folded canvas.
MstdResult mstd_sample(const Layout& layout, const MstdConfig& config, const Denoiser& denoiser,
                       const Scheduler& scheduler, const Codec& codec);

}  // namespace sdt
