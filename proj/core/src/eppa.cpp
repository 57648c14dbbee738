#include "sdt/eppa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdt {

void EppaOptions::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("eppa: sigma must be positive");
  if (pano_weight < 0.0) throw std::invalid_argument("eppa: pano_weight must be >= 0");
  if (view_weight < 0.0 || view_weight > 1.0) throw std::invalid_argument("eppa: view_weight must be in [0, 1]");
}

namespace {

double radial_weight(double px, double py, int size, double sigma) {
  const double half = 0.5 * size;
  const double dx = (px - half) / half, dy = (py - half) / half;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

}  // namespace

EppaGeometry::EppaGeometry(std::vector<CameraPose> poses, int pano_height, int pano_width, EppaOptions options)
    : poses_(std::move(poses)), pano_height_(pano_height), pano_width_(pano_width), options_(options) {
  options_.validate();
  if (poses_.empty()) throw std::invalid_argument("eppa: no views");
  view_size_ = poses_.front().image_size;
  for (const auto& p : poses_) {
    p.validate();
    if (p.image_size != view_size_) throw std::invalid_argument("eppa: views must share one size");
  }
  const ErpGrid grid{pano_width, pano_height};
  const int s = view_size_;
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };

  for (int v = 0; v < view_count(); ++v) {
    for (int r = 0; r < pano_height; ++r) {
      for (int c = 0; c < pano_width; ++c) {
        const auto p = gnomonic_project(erp_to_spherical(c + 0.5, r + 0.5, grid), poses_[v]);
        if (!p || p->x < 0.0 || p->y < 0.0 || p->x > s || p->y > s) continue;
        const double sx = std::clamp(p->x - 0.5, 0.0, s - 1.0);
        const double sy = std::clamp(p->y - 0.5, 0.0, s - 1.0);
        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        pano_taps_.push_back({r, c, v, x0, y0, clampi(x0 + 1, s - 1), clampi(y0 + 1, s - 1),
                              static_cast<float>(sx - x0), static_cast<float>(sy - y0),
                              radial_weight(p->x, p->y, s, options_.sigma)});
      }
    }
    auto& taps = view_taps_.emplace_back(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const auto e = spherical_to_erp(gnomonic_unproject(x + 0.5, y + 0.5, poses_[v]), grid);
        taps[static_cast<std::size_t>(y) * s + x] = {e.x, e.y,
                                                     options_.view_weight * radial_weight(x + 0.5, y + 0.5, s, options_.sigma)};
      }
    }
  }
}

void EppaGeometry::exchange(Latent& pano, std::vector<Latent>& views, std::span<const char> gate, int column_shift,
                            bool update_pano, bool update_views) const {
  if (pano.height() != pano_height_ || pano.width() != pano_width_) {
    throw std::invalid_argument("eppa: panorama shape does not match the geometry");
  }
  if (views.size() != poses_.size() || gate.size() != poses_.size()) {
    throw std::invalid_argument("eppa: need one view latent and one gate per camera");
  }
  for (const auto& v : views) {
    if (v.channels() != pano.channels() || v.height() != view_size_ || v.width() != view_size_) {
      throw std::invalid_argument("eppa: view latent shape does not match the geometry");
    }
  }
  const int C = pano.channels(), W = pano_width_, H = pano_height_;
  int shift = column_shift % W;
  if (shift < 0) shift += W;
  const Latent pano_in = pano;

  if (update_pano) {
    const std::size_t cells = static_cast<std::size_t>(H) * W;
    std::vector<double> num(static_cast<std::size_t>(C) * cells, 0.0);
    std::vector<double> den(cells, 0.0);
    for (const auto& tap : pano_taps_) {
      if (!gate[tap.view]) continue;
      const Latent& view = views[tap.view];
      int col = tap.col + shift;
      if (col >= W) col -= W;
      const std::size_t cell = static_cast<std::size_t>(tap.row) * W + col;
      den[cell] += tap.weight;
      for (int c = 0; c < C; ++c) {
        const double top = view.at(c, tap.y0, tap.x0) + tap.fx * (double(view.at(c, tap.y0, tap.x1)) - view.at(c, tap.y0, tap.x0));
        const double bot = view.at(c, tap.y1, tap.x0) + tap.fx * (double(view.at(c, tap.y1, tap.x1)) - view.at(c, tap.y1, tap.x0));
        const double val = top + tap.fy * (bot - top);
        num[c * cells + cell] += tap.weight * (val - pano_in.at(c, tap.row, col));
      }
    }
    const double a = options_.pano_weight;
    for (int c = 0; c < C; ++c) {
      auto plane = pano.plane(c);
      for (std::size_t i = 0; i < cells; ++i) {
        if (den[i] == 0.0) continue;
        plane[i] = static_cast<float>(plane[i] + a * num[c * cells + i] / (1.0 + a * den[i]));
      }
    }
  }

  if (update_views) {
    const int s = view_size_;
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (!gate[v]) continue;
      Latent& view = views[v];
      const auto& taps = view_taps_[v];
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const auto& tap = taps[static_cast<std::size_t>(y) * s + x];
          // bilinear on the panorama: columns wrap, rows clamp
          const double u = tap.u - 0.5 + shift;
          const double r = std::clamp(tap.v - 0.5, 0.0, H - 1.0);
          const double uf = std::floor(u), rf = std::floor(r);
          const double fx = u - uf, fy = r - rf;
          int c0 = static_cast<int>(uf) % W;
          if (c0 < 0) c0 += W;
          const int c1 = c0 + 1 == W ? 0 : c0 + 1;
          const int r0 = static_cast<int>(rf), r1 = std::min(r0 + 1, H - 1);
          for (int c = 0; c < C; ++c) {
            const double top = pano_in.at(c, r0, c0) + fx * (double(pano_in.at(c, r0, c1)) - pano_in.at(c, r0, c0));
            const double bot = pano_in.at(c, r1, c0) + fx * (double(pano_in.at(c, r1, c1)) - pano_in.at(c, r1, c0));
            const double sampled = top + fy * (bot - top);
            float& out = view.at(c, y, x);
            out = static_cast<float>(out + tap.kappa * (sampled - out));
          }
        }
      }
    }
  }
}

std::pair<Latent, std::vector<Latent>> eppa_exchange(const Latent& pano, const std::vector<Latent>& views,
                                                     const std::vector<CameraPose>& poses,
                                                     std::span<const char> gate, const EppaOptions& options) {
  const EppaGeometry geometry(poses, pano.height(), pano.width(), options);
  Latent p = pano;
  std::vector<Latent> v = views;
  geometry.exchange(p, v, gate, 0);
  return {std::move(p), std::move(v)};
}

}  // namespace sdt
