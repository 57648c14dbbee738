#include "sdt/mpf.hpp"

#include <mutex>
#include <stdexcept>

#include "sdt/digest.hpp"
#include "sdt/parallel.hpp"

namespace sdt {
namespace {

constexpr std::uint64_t kPanoNoiseStream = 1;
constexpr std::uint64_t kColorStream = 2;
constexpr std::uint64_t kRotationStream = 3;
constexpr std::uint64_t kViewNoiseStream = 4;

struct PathInfo {
  bool foreground = false;
  bool in_pano = true;
  bool in_persp = true;
  int color_index = -1;
  std::string pano_prompt;
  std::string persp_prompt;
  bool lora = false;
};

int md_branches(const PathInfo& p) { return int(p.in_pano) + int(p.in_persp); }

}  // namespace

std::string_view to_string(MdMode m) {
  switch (m) {
    case MdMode::Pano: return "md_pano";
    case MdMode::Pers: return "md_pers";
    case MdMode::Both: return "md_both";
  }
  return "md_both";
}

MdMode md_mode_from_string(std::string_view s) {
  if (s == "md_pano" || s == "pano") return MdMode::Pano;
  if (s == "md_pers" || s == "pers") return MdMode::Pers;
  if (s == "md_both" || s == "both") return MdMode::Both;
  throw std::invalid_argument("unknown md mode: " + std::string(s));
}

ViewRig::ViewRig(std::vector<CameraPose> poses_in, const ErpGrid& grid_in, int factor_in)
    : poses(std::move(poses_in)), grid(grid_in), factor(factor_in) {
  samplers.reserve(poses.size());
  for (const auto& p : poses) samplers.emplace_back(p, grid);
}

BranchState rotate_state(const BranchState& state, int columns, const ViewRig& rig) {
  const int w = state.pano.width();
  if (w == 0 || rig.grid.width != w * rig.factor) throw std::invalid_argument("rotate_state: rig does not match state");
  BranchState out = state;
  int k = columns % w;
  if (k < 0) k += w;
  if (k == 0) return out;
  out.pano = roll_columns(state.pano, k);
  out.pano_noise = roll_columns(state.pano_noise, k);
  out.erp_mask = roll_columns(state.erp_mask, k * rig.factor);
  out.yaw_columns = (state.yaw_columns + k) % w;
  for (std::size_t v = 0; v < out.poses.size(); ++v) {
    out.poses[v].lon = wrap_longitude(rig.poses[v].lon + columns_to_yaw(out.yaw_columns, w));
    out.persp_masks[v] = rig.samplers[v].sample(out.erp_mask, out.yaw_columns * rig.factor);
  }
  return out;
}

std::vector<int> default_rotation_schedule(std::uint64_t seed, int steps, int width) {
  std::vector<int> s(steps);
  for (int i = 0; i < steps; ++i) {
    s[i] = static_cast<int>(derive_seed(seed, {kRotationStream, static_cast<std::uint64_t>(i)}) %
                            static_cast<std::uint64_t>(width));
  }
  return s;
}

MpfResult mpf_sample(const Layout& input_layout, const MpfConfig& config, const Denoiser& denoiser,
                     const Scheduler& scheduler, const Codec& codec) {
  Layout layout = input_layout;
  validate(layout);
  apply_lora_mode(layout, config.lora);
  if (config.include_objects_in_global) layout.include_objects_in_global = *config.include_objects_in_global;

  const int f = codec.factor();
  const int C = codec.latent_channels();
  if (layout.grid.height % f || layout.grid.width % f) {
    throw std::invalid_argument("mpf: ERP grid not divisible by the codec factor");
  }
  if (config.view_size % f) throw std::invalid_argument("mpf: view size not divisible by the codec factor");
  const int h = layout.grid.height / f, w = layout.grid.width / f, s = config.view_size / f;
  const int T = scheduler.steps();

  std::vector<int> schedule = config.rotation_schedule;
  if (schedule.empty()) schedule = default_rotation_schedule(config.rotation_seed.value_or(config.seed), T, w);
  if (static_cast<int>(schedule.size()) != T) {
    throw std::invalid_argument("mpf: rotation schedule needs one entry per step");
  }
  for (auto& k : schedule) k = ((k % w) + w) % w;

  const ViewRig rig(icosahedron_cameras(config.view_fov, config.view_size), layout.grid, f);
  const int V = static_cast<int>(rig.poses.size());
  std::vector<CameraPose> latent_poses = rig.poses;
  for (auto& p : latent_poses) p.image_size = s;
  const EppaGeometry geometry(latent_poses, h, w, config.eppa_options);

  // path 0 is the background; path i > 0 is region i - 1
  const auto trigger = std::optional<std::string_view>(kPanoramaTrigger);
  std::vector<PathInfo> info;
  info.push_back({false, true, true, -1, effective_global_prompt(layout, layout.background_lora ? trigger : std::nullopt),
                  effective_global_prompt(layout, std::nullopt), layout.background_lora});
  for (std::size_t r = 0; r < layout.regions.size(); ++r) {
    const auto& region = layout.regions[r];
    info.push_back({true, config.md_mode != MdMode::Pers, config.md_mode != MdMode::Pano, static_cast<int>(r),
                    region_prompt(region, region.lora_enabled ? trigger : std::nullopt), region.prompt,
                    region.lora_enabled});
  }
  const int n_paths = static_cast<int>(info.size());

  const auto pano_noise =
      init_noise(C, h, w, derive_seed(config.seed, {kPanoNoiseStream}), config.noise_coupling, n_paths);
  std::vector<std::vector<Latent>> view_noise;  // [view][path]
  for (int v = 0; v < V; ++v) {
    view_noise.push_back(init_noise(C, s, s, derive_seed(config.seed, {kViewNoiseStream, static_cast<std::uint64_t>(v)}),
                                    config.noise_coupling, n_paths));
  }

  std::vector<BranchState> states(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    auto& st = states[p];
    st.pano = pano_noise[p];
    st.pano_noise = pano_noise[p];
    st.poses = rig.poses;
    const Mask full = make_mask(layout.grid.height, layout.grid.width, 1);
    st.erp_mask = p == 0 ? full : roll_columns(layout.regions[p - 1].mask, schedule[0] * f);
    for (int v = 0; v < V; ++v) {
      st.persp.push_back(view_noise[v][p]);
      st.persp_noise.push_back(view_noise[v][p]);
      st.persp_masks.push_back(p == 0 ? make_mask(config.view_size, config.view_size, 1)
                                      : rig.samplers[v].sample(st.erp_mask));
    }
  }

  MpfResult result;
  auto& stats = result.stats;
  stats.total_yaw_columns = schedule[0];
  const std::uint64_t color_seed = derive_seed(config.seed, {kColorStream});
  const int n_regions = static_cast<int>(layout.regions.size());

  for (int i = 0; i < T; ++i) {
    const int t = T - 1 - i;
    const bool boot = in_bootstrap(config.bootstrap, i);
    if (i > 0 && schedule[i] != 0) {
      for (auto& st : states) st = rotate_state(st, schedule[i], rig);
      stats.total_yaw_columns += schedule[i];
    }

    std::vector<Mask> pano_masks(n_paths);
    std::vector<std::vector<Mask>> view_masks(n_paths);
    for (int p = 0; p < n_paths; ++p) {
      pano_masks[p] = downsample_mask(states[p].erp_mask, f);
      for (int v = 0; v < V; ++v) view_masks[p].push_back(downsample_mask(states[p].persp_masks[v], f));
    }
    const ColorTable colors = assign_bootstrap_colors(config.bootstrap, n_regions, kBranchCount, t, color_seed);

    // unit -1 is the panorama, unit v >= 0 is view v
    struct Task {
      int path;
      int unit;
    };
    std::vector<Task> tasks;
    for (int p = 0; p < n_paths; ++p) {
      if (info[p].in_pano) tasks.push_back({p, -1});
      if (info[p].in_persp) {
        for (int v = 0; v < V; ++v) tasks.push_back({p, v});
      }
    }
    std::vector<Latent> stepped(tasks.size());
    std::vector<char> composited(tasks.size(), 0);
    std::vector<std::optional<ColorUse>> uses(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t k) {
      const auto [p, unit] = tasks[k];
      const auto& st = states[p];
      const bool pano = unit < 0;
      FusionPath path;
      path.foreground = info[p].foreground;
      path.prompt = pano ? info[p].pano_prompt : info[p].persp_prompt;
      path.context = {pano ? Branch::Panorama : Branch::Perspective, unit, p, info[p].foreground,
                      pano && info[p].lora, pano && config.circular_padding};
      const Latent& z = pano ? st.pano : st.persp[unit];
      if (info[p].foreground && boot) {
        const Rgb rgb = colors[info[p].color_index][pano ? 0 : 1];
        const Latent color = codec.color_to_latent(rgb, z.height(), z.width());
        const Mask& m = pano ? pano_masks[p] : view_masks[p][unit];
        const Latent& noise = pano ? st.pano_noise : st.persp_noise[unit];
        const Latent input = bootstrap_composite(z, m, color, noise, scheduler, t, i, config.bootstrap, true);
        composited[k] = 1;
        if (config.record_colors) uses[k] = ColorUse{t, p, path.context.branch, unit, rgb};
        stepped[k] = denoise_path(input, path, denoiser, scheduler, t);
      } else {
        stepped[k] = denoise_path(z, path, denoiser, scheduler, t);
      }
    });

    // gather per-path branch results
    std::vector<Latent> pano_out(n_paths);
    std::vector<std::vector<Latent>> views_out(n_paths);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const auto [p, unit] = tasks[k];
      if (unit < 0) {
        pano_out[p] = std::move(stepped[k]);
        ++stats.pano_predicts;
      } else {
        if (views_out[p].empty()) views_out[p].resize(V);
        views_out[p][unit] = std::move(stepped[k]);
        ++stats.persp_predicts;
      }
      stats.composited += composited[k];
      if (uses[k]) result.color_log.push_back(*uses[k]);
    }

    if (config.eppa) {
      // every exchange reads the background's pre-exchange branches
      const Latent bg_pano = pano_out[0];
      const std::vector<Latent> bg_views = views_out[0];
      const std::vector<char> all_on(V, 1);
      std::vector<char> exchanged(n_paths, 0);
      for (int p = 0; p < n_paths; ++p) {
        if (!eppa_gate(info[p].foreground, boot, config)) {
          stats.gated_off += md_branches(info[p]);
          continue;
        }
        exchanged[p] = 1;
      }
      parallel_for(n_paths, config.workers, [&](std::size_t pi) {
        const int p = static_cast<int>(pi);
        if (!exchanged[p]) return;
        const int yaw = states[p].yaw_columns;
        if (info[p].in_pano && info[p].in_persp) {
          geometry.exchange(pano_out[p], views_out[p], all_on, yaw);
        } else if (info[p].in_pano) {
          std::vector<Latent> other = bg_views;
          geometry.exchange(pano_out[p], other, all_on, yaw, true, false);
        } else {
          Latent other = bg_pano;
          geometry.exchange(other, views_out[p], all_on, yaw, false, true);
        }
      });
      for (char e : exchanged) stats.exchanges += e;
    }

    // merge each branch over the paths that run in it, in path order
    std::vector<Latent> pl;
    std::vector<Mask> pm;
    for (int p = 0; p < n_paths; ++p) {
      if (!info[p].in_pano) continue;
      pl.push_back(pano_out[p]);
      pm.push_back(pano_masks[p]);
    }
    const Latent fused_pano = merge_paths(pl, pm);
    std::vector<Latent> fused_views(V);
    for (int v = 0; v < V; ++v) {
      std::vector<Latent> vl;
      std::vector<Mask> vm;
      for (int p = 0; p < n_paths; ++p) {
        if (!info[p].in_persp) continue;
        vl.push_back(views_out[p][v]);
        vm.push_back(view_masks[p][v]);
      }
      fused_views[v] = merge_paths(vl, vm);
    }
    for (auto& st : states) {
      st.pano = fused_pano;
      st.persp = fused_views;
    }
  }

  const int total = static_cast<int>(stats.total_yaw_columns % w);
  stats.unwound_columns = stats.total_yaw_columns;
  result.pano_latent = roll_columns(states[0].pano, -total);
  result.pano = codec.decode(result.pano_latent);
  result.view_latents = states[0].persp;
  for (int v = 0; v < V; ++v) {
    CameraPose pose = states[0].poses[v];
    pose.lon = wrap_longitude(pose.lon - columns_to_yaw(total, w));
    result.view_poses.push_back(pose);
    result.views.push_back(codec.decode(states[0].persp[v]));
  }
  return result;
}

}  // namespace sdt
