#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdt/tensor.hpp"

namespace sdt {

enum class Branch { Panorama, Perspective };

/// Per-call metadata a denoiser may use to pick weights or padding.
struct DenoiseContext {
  Branch branch = Branch::Panorama;
  int view_index = -1;
  int path_id = 0;
  bool foreground = false;
  bool lora = false;
  bool circular_padding = false;
};

struct DiffusionState {
  Latent latent;
  int t_index = 0;  // counts down from steps()-1 to 0
  int path_id = 0;
  std::uint64_t rng_seed = 0;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Predicts the noise residual of `latent` at step `t_index`. Implementations
/// must be deterministic and safe for concurrent const calls.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Latent predict(const Latent& latent, int t_index, std::string_view prompt,
                         const DenoiseContext& context) const = 0;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual int steps() const = 0;
  /// Cumulative signal fraction at step `t_index`.
  virtual double alpha_bar(int t_index) const = 0;
  /// Latent at t_index - 1. Shape preserving.
  virtual Latent step(const Latent& latent, const Latent& residual, int t_index) const = 0;
  /// Forward-noises a clean latent to the level of `t_index`.
  virtual Latent add_noise(const Latent& clean, const Latent& noise, int t_index) const = 0;
  virtual double init_sigma() const { return 1.0; }
};

/// Deterministic DDIM (eta = 0) over a scaled-linear beta schedule with
/// "leading" timestep spacing.
class DdimScheduler final : public Scheduler {
 public:
  struct Options {
    int steps = 50;
    int train_steps = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    int steps_offset = 1;
  };

  DdimScheduler() : DdimScheduler(Options{}) {}
  explicit DdimScheduler(Options opts);

  int steps() const override { return opts_.steps; }
  double alpha_bar(int t_index) const override;
  /// 1.0 after the final step.
  double alpha_bar_prev(int t_index) const;
  int train_timestep(int t_index) const;
  Latent step(const Latent& latent, const Latent& residual, int t_index) const override;
  Latent add_noise(const Latent& clean, const Latent& noise, int t_index) const override;

 private:
  void check(int t_index) const;

  Options opts_;
  std::vector<double> alphas_cumprod_;
};

using Rgb = std::array<float, 3>;

class Codec {
 public:
  virtual ~Codec() = default;
  virtual int factor() const = 0;
  virtual int latent_channels() const = 0;
  virtual Latent encode(const Image& image) const = 0;
  virtual Image decode(const Latent& latent) const = 0;
  /// Latent of a constant-color image of (height, width) latent cells.
  virtual Latent color_to_latent(const Rgb& rgb, int height, int width) const = 0;
};

/// 8x block-average encoder into 4 channels (RGB in [-1,1] plus their mean);
/// nearest-neighbor decoder. Exact on block-constant images.
class MockCodec final : public Codec {
 public:
  int factor() const override { return 8; }
  int latent_channels() const override { return 4; }
  Latent encode(const Image& image) const override;
  Image decode(const Latent& latent) const override;
  Latent color_to_latent(const Rgb& rgb, int height, int width) const override;
};

/// Test double for a trained denoiser. It predicts a clean latent
///   x0 = (1 - mix) * blur(x) + mix * mean(x) + gain * field(prompt)
/// and returns the residual consistent with it,
///   eps = (x - sqrt(abar_t) * x0) / sqrt(1 - abar_t),
/// which is linear in x. The field is a per-channel constant derived from
/// a hash of the prompt. Blur is a separable box filter over the visible
/// crop only, wrapping horizontally when the context asks for circular
/// padding.
class MockDenoiser final : public Denoiser {
 public:
  struct Options {
    int blur_radius = 2;
    double context_mix = 0.1;
    double prompt_gain = 1.0;
  };

  MockDenoiser(const Scheduler& scheduler, Options opts);
  explicit MockDenoiser(const Scheduler& scheduler) : MockDenoiser(scheduler, Options{}) {}

  Latent predict(const Latent& latent, int t_index, std::string_view prompt,
                 const DenoiseContext& context) const override;

  /// The per-channel prompt field, each entry in [-1, 1].
  static std::vector<double> prompt_field(std::string_view prompt, int channels);

 private:
  const Scheduler& scheduler_;
  Options opts_;
};

/// `n_paths` Gaussian latents of shape (c, h, w). Coupled draws are identical;
/// uncoupled draws use independent streams derived from `seed`.
std::vector<Latent> init_noise(int channels, int height, int width, std::uint64_t seed, bool coupled,
                               int n_paths);

/// One standard-normal latent from a seed.
Latent gaussian_latent(int channels, int height, int width, std::uint64_t seed);

}  // namespace sdt
