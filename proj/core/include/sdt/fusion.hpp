#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdt/backend.hpp"
#include "sdt/tensor.hpp"

namespace sdt {

/// Block-max pooling by `factor` in both directions: a latent cell is set
/// when any pixel of its block is set. Throws when `factor` does not divide
/// the mask dimensions.
Mask downsample_mask(const Mask& mask, int factor);

struct BootstrapPlan {
  /// Which bootstrap colors are forced equal at a given step.
  enum class Coupling { None, Branches, Objects, All };

  int n_steps = 0;
  Coupling coupling = Coupling::Branches;
};

std::string_view to_string(BootstrapPlan::Coupling c);
BootstrapPlan::Coupling coupling_from_string(std::string_view s);

/// True while `steps_done` denoising steps have completed and the plan still
/// composites.
inline bool in_bootstrap(const BootstrapPlan& plan, int steps_done) { return steps_done < plan.n_steps; }

/// colors[object][branch]
using ColorTable = std::vector<std::vector<Rgb>>;

/// Draws the bootstrap background colors for step `t_index`. Entries that
/// the coupling mode ties together come from the same hash stream and are
/// therefore bitwise equal; all others come from distinct streams.
ColorTable assign_bootstrap_colors(const BootstrapPlan& plan, int n_objects, int n_branches, int t_index,
                                   std::uint64_t seed);

/// Foreground paths inside the bootstrap phase get their off-mask cells
/// replaced by `color_latent` forward-noised to `t_index` with `noise`.
/// Every other case returns `latent` unchanged.
Latent bootstrap_composite(const Latent& latent, const Mask& mask, const Latent& color_latent, const Latent& noise,
                           const Scheduler& scheduler, int t_index, int steps_done, const BootstrapPlan& plan,
                           bool foreground);

/// sum_i m_i * z_i / sum_i m_i per cell, accumulated in double in index
/// order. Throws std::domain_error if some cell has zero coverage.
Latent merge_paths(std::span<const Latent> latents, std::span<const Mask> masks);

/// One denoising path of a MultiDiffusion step.
struct FusionPath {
  Mask mask;  // latent resolution
  std::string prompt;
  bool foreground = false;
  int color_index = -1;  // row into the step's color list; unused for background
  DenoiseContext context;
};

/// Per-path states sharing one canvas. `bootstrap_noise[i]` is the noise
/// used to forward-noise path i's bootstrap color.
struct PathSet {
  std::vector<DiffusionState> states;
  std::vector<FusionPath> paths;
  std::vector<Latent> bootstrap_noise;

  void check() const;
};

struct MdStats {
  long predicts = 0;
  long composited = 0;  // foreground paths whose input was composited
};

/// Predicts with the path prompt and context and steps one path latent from
/// t_index to t_index - 1.
Latent denoise_path(const Latent& latent, const FusionPath& path, const Denoiser& denoiser,
                    const Scheduler& scheduler, int t_index);

/// One MultiDiffusion step over every path, then a merge. All states are
/// set to the fused latent at t_index - 1, which is also returned.
/// `colors[k]` is the bootstrap color of paths with color_index k.
Latent md_step(PathSet& set, const Denoiser& denoiser, const Scheduler& scheduler, const Codec& codec,
               int t_index, const BootstrapPlan& plan, std::span<const Rgb> colors, int workers = 1,
               MdStats* stats = nullptr);

}  // namespace sdt
