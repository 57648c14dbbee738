#include "sdt/backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sdt/digest.hpp"

namespace sdt {

DdimScheduler::DdimScheduler(Options opts) : opts_(opts) {
  if (opts_.steps < 1) throw std::invalid_argument("DdimScheduler: steps must be >= 1");
  if (opts_.train_steps < opts_.steps) throw std::invalid_argument("DdimScheduler: steps exceed train_steps");
  alphas_cumprod_.resize(opts_.train_steps);
  const double b0 = std::sqrt(opts_.beta_start), b1 = std::sqrt(opts_.beta_end);
  double prod = 1.0;
  for (int i = 0; i < opts_.train_steps; ++i) {
    const double s = opts_.train_steps == 1 ? b0 : b0 + (b1 - b0) * i / (opts_.train_steps - 1);
    prod *= 1.0 - s * s;
    alphas_cumprod_[i] = prod;
  }
}

void DdimScheduler::check(int t_index) const {
  if (t_index < 0 || t_index >= opts_.steps) {
    throw std::out_of_range("scheduler: t_index " + std::to_string(t_index) + " outside [0, " +
                            std::to_string(opts_.steps) + ")");
  }
}

int DdimScheduler::train_timestep(int t_index) const {
  check(t_index);
  const int ratio = opts_.train_steps / opts_.steps;
  return std::min(t_index * ratio + opts_.steps_offset, opts_.train_steps - 1);
}

double DdimScheduler::alpha_bar(int t_index) const { return alphas_cumprod_[train_timestep(t_index)]; }

double DdimScheduler::alpha_bar_prev(int t_index) const {
  check(t_index);
  return t_index == 0 ? 1.0 : alpha_bar(t_index - 1);
}

Latent DdimScheduler::step(const Latent& latent, const Latent& residual, int t_index) const {
  if (!latent.same_shape(residual)) throw std::invalid_argument("scheduler step: shape mismatch");
  const double ab = alpha_bar(t_index);
  const double ab_prev = alpha_bar_prev(t_index);
  const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
  const double ap = std::sqrt(ab_prev), sp = std::sqrt(1.0 - ab_prev);
  Latent out(latent.channels(), latent.height(), latent.width());
  const auto x = latent.values();
  const auto e = residual.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x0 = (x[i] - s * e[i]) / a;
    o[i] = static_cast<float>(ap * x0 + sp * e[i]);
  }
  return out;
}

Latent DdimScheduler::add_noise(const Latent& clean, const Latent& noise, int t_index) const {
  if (!clean.same_shape(noise)) throw std::invalid_argument("add_noise: shape mismatch");
  const double ab = alpha_bar(t_index);
  const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
  Latent out(clean.channels(), clean.height(), clean.width());
  const auto c = clean.values();
  const auto n = noise.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<float>(a * c[i] + s * n[i]);
  return out;
}

Latent MockCodec::encode(const Image& image) const {
  const int f = factor();
  if (image.channels() != 3 || image.height() % f || image.width() % f) {
    throw std::invalid_argument("MockCodec::encode: need 3 channels and dimensions divisible by 8");
  }
  const int h = image.height() / f, w = image.width() / f;
  Latent z(4, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mean_all = 0.0;
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int dy = 0; dy < f; ++dy) {
          for (int dx = 0; dx < f; ++dx) sum += image.at(c, y * f + dy, x * f + dx);
        }
        const double v = 2.0 * (sum / (f * f)) - 1.0;
        z.at(c, y, x) = static_cast<float>(v);
        mean_all += v;
      }
      z.at(3, y, x) = static_cast<float>(mean_all / 3.0);
    }
  }
  return z;
}

Image MockCodec::decode(const Latent& latent) const {
  const int f = factor();
  if (latent.channels() < 3) throw std::invalid_argument("MockCodec::decode: need at least 3 channels");
  Image img(3, latent.height() * f, latent.width() * f);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        img.at(c, y, x) = static_cast<float>((latent.at(c, y / f, x / f) + 1.0) * 0.5);
      }
    }
  }
  return img;
}

Latent MockCodec::color_to_latent(const Rgb& rgb, int height, int width) const {
  Latent z(4, height, width);
  double mean_all = 0.0;
  float vals[4];
  for (int c = 0; c < 3; ++c) {
    const double v = 2.0 * static_cast<double>(rgb[c]) - 1.0;
    vals[c] = static_cast<float>(v);
    mean_all += v;
  }
  vals[3] = static_cast<float>(mean_all / 3.0);
  for (int c = 0; c < 4; ++c) {
    for (auto& v : z.plane(c)) v = vals[c];
  }
  return z;
}

MockDenoiser::MockDenoiser(const Scheduler& scheduler, Options opts) : scheduler_(scheduler), opts_(opts) {
  if (opts_.blur_radius < 0) throw std::invalid_argument("MockDenoiser: negative blur radius");
}

std::vector<double> MockDenoiser::prompt_field(std::string_view prompt, int channels) {
  const std::uint64_t h = stable_hash64(prompt);
  std::vector<double> f(channels);
  for (int c = 0; c < channels; ++c) f[c] = 2.0 * unit_interval(derive_seed(h, {static_cast<std::uint64_t>(c)})) - 1.0;
  return f;
}

namespace {

// Box blur of one plane; rows clamp, columns clamp or wrap.
void box_blur(std::span<const float> src, std::span<double> dst, int h, int w, int r, bool wrap) {
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  const double norm = 1.0 / (2 * r + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) {
        int xx = x + d;
        if (wrap) {
          xx %= w;
          if (xx < 0) xx += w;
        } else {
          xx = std::clamp(xx, 0, w - 1);
        }
        s += src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s * norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) s += tmp[static_cast<std::size_t>(std::clamp(y + d, 0, h - 1)) * w + x];
      dst[static_cast<std::size_t>(y) * w + x] = s * norm;
    }
  }
}

}  // namespace

Latent MockDenoiser::predict(const Latent& latent, int t_index, std::string_view prompt,
                             const DenoiseContext& context) const {
  const double ab = scheduler_.alpha_bar(t_index);
  const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
  const auto field = prompt_field(prompt, latent.channels());
  const int h = latent.height(), w = latent.width();
  Latent out(latent.channels(), h, w);
  std::vector<double> blurred(latent.plane_size());
  for (int c = 0; c < latent.channels(); ++c) {
    const auto x = latent.plane(c);
    box_blur(x, blurred, h, w, opts_.blur_radius, context.circular_padding);
    double mean = 0.0;
    for (float v : x) mean += v;
    mean /= static_cast<double>(x.size());
    auto o = out.plane(c);
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double x0 = (1.0 - opts_.context_mix) * blurred[i] + opts_.context_mix * mean + opts_.prompt_gain * field[c];
      o[i] = static_cast<float>((x[i] - a * x0) / s);
    }
  }
  return out;
}

Latent gaussian_latent(int channels, int height, int width, std::uint64_t seed) {
  Latent z(channels, height, width);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (auto& v : z.values()) v = normal(rng);
  return z;
}

std::vector<Latent> init_noise(int channels, int height, int width, std::uint64_t seed, bool coupled,
                               int n_paths) {
  if (n_paths < 1) throw std::invalid_argument("init_noise: n_paths must be >= 1");
  std::vector<Latent> out;
  out.reserve(n_paths);
  if (coupled) {
    const Latent shared = gaussian_latent(channels, height, width, derive_seed(seed, {0}));
    out.assign(n_paths, shared);
  } else {
    for (int p = 0; p < n_paths; ++p) {
      out.push_back(gaussian_latent(channels, height, width, derive_seed(seed, {static_cast<std::uint64_t>(p)})));
    }
  }
  return out;
}

}  // namespace sdt
