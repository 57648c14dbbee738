#include "sdt/mstd.hpp"

#include <stdexcept>

#include "sdt/digest.hpp"
#include "sdt/parallel.hpp"

namespace sdt {
namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kColorStream = 2;

}  // namespace

WindowPlan WindowPlan::resolved(int latent_height) const {
  WindowPlan p = *this;
  if (p.window <= 0) p.window = latent_height;
  if (p.pad < 0) p.pad = p.stitch ? p.window / 2 : 0;
  if (!p.stitch) p.pad = 0;
  return p;
}

void WindowPlan::validate() const {
  if (window <= 0) throw std::invalid_argument("window plan: window must be positive");
  if (stride <= 0 || stride > window) throw std::invalid_argument("window plan: stride must be in [1, window]");
  if (pad < 0) throw std::invalid_argument("window plan: negative pad");
}

std::vector<ColumnRange> make_windows(const WindowPlan& plan, int canvas_width) {
  plan.validate();
  if (plan.pad > canvas_width) throw std::invalid_argument("make_windows: pad exceeds canvas width");
  const int padded = canvas_width + 2 * plan.pad;
  if (plan.window > padded) throw std::invalid_argument("make_windows: window wider than padded canvas");
  std::vector<ColumnRange> out;
  int offset = 0;
  for (; offset + plan.window <= padded; offset += plan.stride) out.push_back({offset, offset + plan.window});
  if (out.back().end < padded) out.push_back({padded - plan.window, padded});
  return out;
}

StitchAccumulator::StitchAccumulator(int channels, int height, int padded_width)
    : sum_(channels, height, padded_width), weight_(padded_width, 0.0), count_(padded_width, 0) {}

void StitchAccumulator::add(const Latent& window, int offset, double weight) {
  if (window.channels() != sum_.channels() || window.height() != sum_.height() || offset < 0 ||
      offset + window.width() > padded_width()) {
    throw std::invalid_argument("StitchAccumulator::add: window outside the padded canvas");
  }
  for (int c = 0; c < window.channels(); ++c) {
    for (int y = 0; y < window.height(); ++y) {
      for (int x = 0; x < window.width(); ++x) sum_.at(c, y, offset + x) += weight * window.at(c, y, x);
    }
  }
  for (int x = 0; x < window.width(); ++x) {
    weight_[offset + x] += weight;
    ++count_[offset + x];
  }
}

FoldResult stitch_fold(const StitchAccumulator& acc, int pad) {
  const int padded = acc.padded_width();
  const int width = padded - 2 * pad;
  if (pad < 0 || width <= 0) throw std::invalid_argument("stitch_fold: pad too large for the padded width");
  const auto& sum = acc.sum();
  Planar<double> folded(sum.channels(), sum.height(), width);
  std::vector<double> weight(width, 0.0);
  FoldResult out{Latent(sum.channels(), sum.height(), width), std::vector<int>(width, 0)};
  for (int p = 0; p < padded; ++p) {
    const int x = ((p - pad) % width + width) % width;
    weight[x] += acc.weight()[p];
    out.coverage[x] += acc.count()[p];
    for (int c = 0; c < sum.channels(); ++c) {
      for (int y = 0; y < sum.height(); ++y) folded.at(c, y, x) += sum.at(c, y, p);
    }
  }
  for (int x = 0; x < width; ++x) {
    if (weight[x] <= 0.0) throw std::domain_error("stitch_fold: column " + std::to_string(x) + " has no window");
  }
  for (int c = 0; c < sum.channels(); ++c) {
    for (int y = 0; y < sum.height(); ++y) {
      for (int x = 0; x < width; ++x) out.canvas.at(c, y, x) = static_cast<float>(folded.at(c, y, x) / weight[x]);
    }
  }
  return out;
}

Latent stitch_fold(const Latent& padded, int pad) {
  StitchAccumulator acc(padded.channels(), padded.height(), padded.width());
  acc.add(padded, 0);
  return stitch_fold(acc, pad).canvas;
}

MstdResult mstd_sample(const Layout& input_layout, const MstdConfig& config, const Denoiser& denoiser,
                       const Scheduler& scheduler, const Codec& codec) {
  Layout layout = input_layout;
  validate(layout);
  apply_lora_mode(layout, config.lora);
  if (config.include_objects_in_global) layout.include_objects_in_global = *config.include_objects_in_global;

  const int f = codec.factor();
  const int C = codec.latent_channels();
  if (layout.grid.height % f || layout.grid.width % f) {
    throw std::invalid_argument("mstd: ERP grid not divisible by the codec factor");
  }
  const int h = layout.grid.height / f, w = layout.grid.width / f;
  const WindowPlan plan = config.windows.resolved(h);
  const auto windows = make_windows(plan, w);
  const int pad = plan.pad;

  // path 0 is the background; path i > 0 is region i - 1
  const auto trigger = std::optional<std::string_view>(kPanoramaTrigger);
  std::vector<FusionPath> paths;
  {
    const RegionSpec bg = background_region(layout, layout.background_lora ? trigger : std::nullopt);
    FusionPath p;
    p.mask = make_mask(h, w, 1);
    p.prompt = bg.prompt;
    p.context = {Branch::Panorama, -1, 0, false, bg.lora_enabled, false};
    paths.push_back(std::move(p));
  }
  for (std::size_t r = 0; r < layout.regions.size(); ++r) {
    const auto& region = layout.regions[r];
    FusionPath p;
    p.mask = downsample_mask(region.mask, f);
    p.prompt = region_prompt(region, region.lora_enabled ? trigger : std::nullopt);
    p.foreground = true;
    p.color_index = static_cast<int>(r);
    p.context = {Branch::Panorama, -1, static_cast<int>(r + 1), true, region.lora_enabled, false};
    paths.push_back(std::move(p));
  }
  const std::size_t n_paths = paths.size();

  const auto noise = init_noise(C, h, w, derive_seed(config.seed, {kNoiseStream}), config.noise_coupling,
                                static_cast<int>(n_paths));
  std::vector<Latent> latents = noise;
  std::vector<Mask> padded_masks;
  std::vector<Latent> padded_noise;
  for (std::size_t i = 0; i < n_paths; ++i) {
    padded_masks.push_back(extend_cyclic(paths[i].mask, pad));
    padded_noise.push_back(extend_cyclic(noise[i], pad));
  }
  const std::uint64_t color_seed = derive_seed(config.seed, {kColorStream});

  MstdResult result;
  result.windows_per_step = static_cast<int>(windows.size());
  for (int t = scheduler.steps() - 1; t >= 0; --t) {
    const ColorTable table = assign_bootstrap_colors(config.bootstrap, static_cast<int>(layout.regions.size()), 1,
                                                     t, color_seed);
    std::vector<Rgb> colors;
    for (const auto& row : table) colors.push_back(row[0]);

    std::vector<Latent> padded_latents;
    for (const auto& z : latents) padded_latents.push_back(extend_cyclic(z, pad));

    std::vector<Latent> window_out(windows.size());
    std::vector<MdStats> window_stats(windows.size());
    parallel_for(windows.size(), config.workers, [&](std::size_t k) {
      const auto [b, e] = windows[k];
      PathSet set;
      for (std::size_t i = 0; i < n_paths; ++i) {
        Mask crop = crop_columns(padded_masks[i], b, e);
        if (i > 0 && !any_set(crop)) continue;
        FusionPath p = paths[i];
        p.mask = std::move(crop);
        set.paths.push_back(std::move(p));
        set.states.push_back({crop_columns(padded_latents[i], b, e), t, static_cast<int>(i), config.seed});
        set.bootstrap_noise.push_back(crop_columns(padded_noise[i], b, e));
      }
      window_out[k] = md_step(set, denoiser, scheduler, codec, t, config.bootstrap, colors, 1, &window_stats[k]);
    });

    StitchAccumulator acc(C, h, w + 2 * pad);
    for (std::size_t k = 0; k < windows.size(); ++k) {
      acc.add(window_out[k], windows[k].begin);
      result.stats.predicts += window_stats[k].predicts;
      result.stats.composited += window_stats[k].composited;
    }
    FoldResult folded = stitch_fold(acc, pad);
    for (auto& z : latents) z = folded.canvas;
    result.coverage = std::move(folded.coverage);
  }
  result.latent = latents.front();
  result.image = codec.decode(result.latent);
  return result;
}

}  // namespace sdt
