#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdt/tensor.hpp"

namespace sdt {

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Equirectangular canvas. Longitude is linear in x, latitude linear in y.
struct ErpGrid {
  int width = 1024;
  int height = 512;

  void validate() const;
  friend bool operator==(const ErpGrid&, const ErpGrid&) = default;
};

/// lon in [-pi, pi), lat in [-pi/2, pi/2].
struct SphericalCoord {
  double lon = 0.0;
  double lat = 0.0;
};

struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

/// Perspective camera looking at (lon, lat), rolled about its axis.
/// `image_size` is the side of the square view in pixels.
struct CameraPose {
  double lon = 0.0;
  double lat = 0.0;
  double roll = 0.0;
  double fov = kPi / 2;
  int image_size = 512;

  void validate() const;
  double focal() const { return 0.5 * image_size / std::tan(0.5 * fov); }
};

/// Half-open pixel box [x0, x1) x [y0, y1).
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

using Vec3 = std::array<double, 3>;

double wrap_longitude(double lon);
Vec3 to_unit_vector(SphericalCoord c);
SphericalCoord from_unit_vector(const Vec3& v);
double angular_distance(SphericalCoord a, SphericalCoord b);

/// Throws std::domain_error when (u, v) lies outside [0,W] x [0,H].
SphericalCoord erp_to_spherical(double u, double v, const ErpGrid& grid);
PixelCoord spherical_to_erp(SphericalCoord c, const ErpGrid& grid);

/// Gnomonic projection into the camera's pixel frame (y down, origin at the
/// top-left corner). Empty for points on or behind the camera's horizon.
std::optional<PixelCoord> gnomonic_project(SphericalCoord c, const CameraPose& cam);
SphericalCoord gnomonic_unproject(double x, double y, const CameraPose& cam);

/// Nearest ERP cell under a continuous ERP position; columns wrap, rows clamp.
std::array<int, 2> erp_cell(PixelCoord p, const ErpGrid& grid);

/// Tight bounding box of the set pixels. Empty for an all-zero mask.
std::optional<PixelBox> bounding_box(const Mask& mask);

/// Tightest box around the set pixels on a horizontally cyclic canvas: the
/// box starts after the widest run of empty columns, so x0 lies in
/// [0, width) and x1 may exceed width. Empty for an all-zero mask.
std::optional<PixelBox> cyclic_bounding_box(const Mask& mask);

/// Per-pixel lookup table from a perspective view into an ERP mask.
/// Sampling with a column shift k reads the ERP mask as if it had been rolled
/// by k columns while the camera was yawed by the same amount, which is the
/// identity on the projected result.
class ViewSampler {
 public:
  ViewSampler(const CameraPose& cam, const ErpGrid& grid);

  Mask sample(const Mask& erp_mask, int column_shift = 0) const;
  const CameraPose& camera() const { return cam_; }

 private:
  CameraPose cam_;
  ErpGrid grid_;
  std::vector<int> rows_;
  std::vector<int> cols_;
};

/// Nearest-neighbor projection of an ERP mask into a perspective view.
Mask project_mask_erp_to_persp(const Mask& erp_mask, const CameraPose& cam);

/// Rasterizes the bounding box of `persp_mask` back onto an ERP canvas.
/// Throws std::invalid_argument for an empty mask.
Mask reproject_bbox_to_erp(const Mask& persp_mask, const CameraPose& cam, const ErpGrid& grid);

/// ERP pixels whose centers project into `box` of the view.
Mask box_footprint(const PixelBox& box, const CameraPose& cam, const ErpGrid& grid);

/// Box of the view pixels hit by the centers of the set ERP pixels, clipped
/// to the view. Empty when no center lands inside the view. Unlike the box
/// of the sampled view mask it does not depend on the view's sampling
/// grid, so it is stable under reprojection.
std::optional<PixelBox> projected_bbox(const Mask& erp_mask, const CameraPose& cam);

/// Footprint of projected_bbox. Idempotent for a fixed camera. Throws
/// std::invalid_argument when the mask is not visible from `cam`.
Mask reproject_mask_via_view(const Mask& erp_mask, const CameraPose& cam);

/// Face-center cameras of a regular icosahedron with vertices at both poles.
std::vector<CameraPose> icosahedron_cameras(double fov, int image_size = 256);

/// round(yaw / 2pi * width), normalized to [0, width).
int yaw_to_columns(double yaw, int width);
double columns_to_yaw(int columns, int width);

/// Circular horizontal shift: out[x] = in[(x - shift) mod W].
template <class T>
Planar<T> roll_columns(const Planar<T>& a, int shift) {
  const int w = a.width();
  if (w == 0) return a;
  shift %= w;
  if (shift < 0) shift += w;
  if (shift == 0) return a;
  Planar<T> out(a.channels(), a.height(), w);
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < w; ++x) {
        const int src = x - shift < 0 ? x - shift + w : x - shift;
        out.at(c, y, x) = a.at(c, y, src);
      }
    }
  }
  return out;
}

/// Rotates ERP data about the polar axis by `yaw`, quantized to whole columns.
template <class T>
Planar<T> roll_erp(const Planar<T>& a, double yaw) {
  return roll_columns(a, yaw_to_columns(yaw, a.width()));
}

/// Widens by `pad` columns on both sides with wrapped content.
template <class T>
Planar<T> extend_cyclic(const Planar<T>& a, int pad) {
  const int w = a.width();
  if (pad < 0 || pad > w) throw std::invalid_argument("extend_cyclic: pad must be in [0, width]");
  Planar<T> out(a.channels(), a.height(), w + 2 * pad);
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < w + 2 * pad; ++x) {
        int src = (x - pad) % w;
        if (src < 0) src += w;
        out.at(c, y, x) = a.at(c, y, src);
      }
    }
  }
  return out;
}

/// Inverse of extend_cyclic: folds a padded array back to `width - 2*pad`
/// columns, averaging every group of columns that map to the same source.
Latent fold_cyclic_mean(const Latent& padded, int pad);

nlohmann::json camera_to_json(const CameraPose& cam);
CameraPose camera_from_json(const nlohmann::json& j);

}  // namespace sdt
