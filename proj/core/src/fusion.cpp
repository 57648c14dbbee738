#include "sdt/fusion.hpp"

#include <stdexcept>

#include "sdt/digest.hpp"
#include "sdt/parallel.hpp"

namespace sdt {

Mask downsample_mask(const Mask& mask, int factor) {
  if (factor < 1 || mask.height() % factor || mask.width() % factor) {
    throw std::invalid_argument("downsample_mask: factor " + std::to_string(factor) + " does not divide " +
                                std::to_string(mask.height()) + "x" + std::to_string(mask.width()));
  }
  Mask out = make_mask(mask.height() / factor, mask.width() / factor);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(y, x)) out(y / factor, x / factor) = 1;
    }
  }
  return out;
}

std::string_view to_string(BootstrapPlan::Coupling c) {
  switch (c) {
    case BootstrapPlan::Coupling::None: return "none";
    case BootstrapPlan::Coupling::Branches: return "branches";
    case BootstrapPlan::Coupling::Objects: return "objects";
    case BootstrapPlan::Coupling::All: return "all";
  }
  return "none";
}

BootstrapPlan::Coupling coupling_from_string(std::string_view s) {
  if (s == "none" || s == "no") return BootstrapPlan::Coupling::None;
  if (s == "branches") return BootstrapPlan::Coupling::Branches;
  if (s == "objects") return BootstrapPlan::Coupling::Objects;
  if (s == "all") return BootstrapPlan::Coupling::All;
  throw std::invalid_argument("unknown bootstrap coupling: " + std::string(s));
}

ColorTable assign_bootstrap_colors(const BootstrapPlan& plan, int n_objects, int n_branches, int t_index,
                                   std::uint64_t seed) {
  using C = BootstrapPlan::Coupling;
  const bool tie_objects = plan.coupling == C::Objects || plan.coupling == C::All;
  const bool tie_branches = plan.coupling == C::Branches || plan.coupling == C::All;
  ColorTable table(n_objects, std::vector<Rgb>(n_branches));
  for (int o = 0; o < n_objects; ++o) {
    for (int b = 0; b < n_branches; ++b) {
      // key 0 is the shared stream; distinct entries use index + 1
      const std::uint64_t ok = tie_objects ? 0 : o + 1;
      const std::uint64_t bk = tie_branches ? 0 : b + 1;
      for (int c = 0; c < 3; ++c) {
        table[o][b][c] = static_cast<float>(
            unit_interval(derive_seed(seed, {static_cast<std::uint64_t>(t_index), ok, bk, static_cast<std::uint64_t>(c)})));
      }
    }
  }
  return table;
}

Latent bootstrap_composite(const Latent& latent, const Mask& mask, const Latent& color_latent, const Latent& noise,
                           const Scheduler& scheduler, int t_index, int steps_done, const BootstrapPlan& plan,
                           bool foreground) {
  if (!foreground || !in_bootstrap(plan, steps_done)) return latent;
  if (!latent.same_extent(mask) || !latent.same_shape(color_latent)) {
    throw std::invalid_argument("bootstrap_composite: shape mismatch");
  }
  const Latent background = scheduler.add_noise(color_latent, noise, t_index);
  Latent out = latent;
  for (int c = 0; c < out.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        if (!mask(y, x)) out.at(c, y, x) = background.at(c, y, x);
      }
    }
  }
  return out;
}

Latent merge_paths(std::span<const Latent> latents, std::span<const Mask> masks) {
  if (latents.empty() || latents.size() != masks.size()) {
    throw std::invalid_argument("merge_paths: need one mask per latent and at least one path");
  }
  const Latent& first = latents.front();
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (!latents[i].same_shape(first) || !first.same_extent(masks[i])) {
      throw std::invalid_argument("merge_paths: shape mismatch at path " + std::to_string(i));
    }
  }
  const int h = first.height(), w = first.width();
  Latent out(first.channels(), h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int coverage = 0;
      for (const auto& m : masks) coverage += m(y, x) != 0;
      if (coverage == 0) {
        throw std::domain_error("merge_paths: zero coverage at cell (" + std::to_string(y) + ", " +
                                std::to_string(x) + ")");
      }
      for (int c = 0; c < first.channels(); ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < latents.size(); ++i) {
          if (masks[i](y, x)) sum += latents[i].at(c, y, x);
        }
        out.at(c, y, x) = static_cast<float>(sum / coverage);
      }
    }
  }
  return out;
}

void PathSet::check() const {
  if (states.size() != paths.size() || bootstrap_noise.size() != paths.size() || paths.empty()) {
    throw std::invalid_argument("PathSet: states, paths and bootstrap noise must have equal nonzero length");
  }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!states[i].latent.same_extent(paths[i].mask) || !states[i].latent.same_shape(bootstrap_noise[i])) {
      throw std::invalid_argument("PathSet: path " + std::to_string(i) + " has inconsistent shapes");
    }
  }
}

Latent denoise_path(const Latent& latent, const FusionPath& path, const Denoiser& denoiser,
                    const Scheduler& scheduler, int t_index) {
  const Latent residual = denoiser.predict(latent, t_index, path.prompt, path.context);
  if (!residual.same_shape(latent)) throw BackendError("denoiser returned a residual of the wrong shape");
  return scheduler.step(latent, residual, t_index);
}

Latent md_step(PathSet& set, const Denoiser& denoiser, const Scheduler& scheduler, const Codec& codec,
               int t_index, const BootstrapPlan& plan, std::span<const Rgb> colors, int workers, MdStats* stats) {
  set.check();
  const int steps_done = scheduler.steps() - 1 - t_index;
  const std::size_t n = set.paths.size();
  std::vector<Latent> stepped(n);
  std::vector<char> composited(n, 0);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto& path = set.paths[i];
    const Latent& z = set.states[i].latent;
    if (path.foreground && in_bootstrap(plan, steps_done)) {
      if (path.color_index < 0 || static_cast<std::size_t>(path.color_index) >= colors.size()) {
        throw std::out_of_range("md_step: foreground path without a bootstrap color");
      }
      const Latent color = codec.color_to_latent(colors[path.color_index], z.height(), z.width());
      const Latent input =
          bootstrap_composite(z, path.mask, color, set.bootstrap_noise[i], scheduler, t_index, steps_done, plan, true);
      composited[i] = 1;
      stepped[i] = denoise_path(input, path, denoiser, scheduler, t_index);
    } else {
      stepped[i] = denoise_path(z, path, denoiser, scheduler, t_index);
    }
  });
  std::vector<Mask> masks;
  masks.reserve(n);
  for (const auto& p : set.paths) masks.push_back(p.mask);
  Latent fused = merge_paths(stepped, masks);
  for (auto& s : set.states) {
    s.latent = fused;
    s.t_index = t_index - 1;
  }
  if (stats) {
    stats->predicts += static_cast<long>(n);
    for (char c : composited) stats->composited += c;
  }
  return fused;
}

}  // namespace sdt
