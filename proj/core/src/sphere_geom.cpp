#include "sdt/sphere_geom.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace sdt {

void ErpGrid::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("ErpGrid: dimensions must be positive");
  if (width != 2 * height) throw std::invalid_argument("ErpGrid: width must equal 2 * height");
}

void CameraPose::validate() const {
  if (!(fov > 0.0 && fov < kPi)) throw std::invalid_argument("CameraPose: fov must lie in (0, pi)");
  if (image_size <= 0) throw std::invalid_argument("CameraPose: image_size must be positive");
}

double wrap_longitude(double lon) {
  double w = std::fmod(lon + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  // fmod can land exactly on +pi after the shift
  return w >= kPi ? -kPi : w;
}

Vec3 to_unit_vector(SphericalCoord c) {
  const double cl = std::cos(c.lat);
  return {cl * std::cos(c.lon), cl * std::sin(c.lon), std::sin(c.lat)};
}

SphericalCoord from_unit_vector(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {wrap_longitude(std::atan2(v[1], v[0])), std::asin(std::clamp(v[2] / n, -1.0, 1.0))};
}

double angular_distance(SphericalCoord a, SphericalCoord b) {
  const Vec3 p = to_unit_vector(a);
  const Vec3 q = to_unit_vector(b);
  const Vec3 cross{p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]};
  const double s = std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
  const double c = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
  return std::atan2(s, c);
}

SphericalCoord erp_to_spherical(double u, double v, const ErpGrid& grid) {
  if (!(u >= 0.0 && u <= grid.width && v >= 0.0 && v <= grid.height)) {
    throw std::domain_error("erp_to_spherical: pixel outside canvas");
  }
  return {2.0 * kPi * u / grid.width - kPi, 0.5 * kPi - kPi * v / grid.height};
}

PixelCoord spherical_to_erp(SphericalCoord c, const ErpGrid& grid) {
  return {(c.lon + kPi) / (2.0 * kPi) * grid.width, (0.5 * kPi - c.lat) / kPi * grid.height};
}

std::optional<PixelCoord> gnomonic_project(SphericalCoord c, const CameraPose& cam) {
  const double dlon = c.lon - cam.lon;
  const double sl0 = std::sin(cam.lat), cl0 = std::cos(cam.lat);
  const double sl = std::sin(c.lat), cl = std::cos(c.lat);
  const double cd = std::cos(dlon);
  const double k = sl0 * sl + cl0 * cl * cd;
  if (k <= 0.0) return std::nullopt;
  const double tx = cl * std::sin(dlon) / k;
  const double ty = (cl0 * sl - sl0 * cl * cd) / k;
  const double cr = std::cos(cam.roll), sr = std::sin(cam.roll);
  const double rx = tx * cr + ty * sr;
  const double ry = -tx * sr + ty * cr;
  const double f = cam.focal();
  const double half = 0.5 * cam.image_size;
  return PixelCoord{half + f * rx, half - f * ry};
}

SphericalCoord gnomonic_unproject(double x, double y, const CameraPose& cam) {
  const double f = cam.focal();
  const double half = 0.5 * cam.image_size;
  const double rx = (x - half) / f;
  const double ry = (half - y) / f;
  const double cr = std::cos(cam.roll), sr = std::sin(cam.roll);
  const double tx = rx * cr - ry * sr;
  const double ty = rx * sr + ry * cr;
  const double rho = std::hypot(tx, ty);
  if (rho == 0.0) return {wrap_longitude(cam.lon), cam.lat};
  const double c = std::atan(rho);
  const double sc = std::sin(c), cc = std::cos(c);
  const double sl0 = std::sin(cam.lat), cl0 = std::cos(cam.lat);
  const double lat = std::asin(std::clamp(cc * sl0 + ty * sc * cl0 / rho, -1.0, 1.0));
  const double lon = cam.lon + std::atan2(tx * sc, rho * cl0 * cc - ty * sl0 * sc);
  return {wrap_longitude(lon), lat};
}

std::array<int, 2> erp_cell(PixelCoord p, const ErpGrid& grid) {
  int col = static_cast<int>(std::floor(p.x)) % grid.width;
  if (col < 0) col += grid.width;
  const int row = std::clamp(static_cast<int>(std::floor(p.y)), 0, grid.height - 1);
  return {row, col};
}

std::optional<PixelBox> bounding_box(const Mask& mask) {
  PixelBox box{mask.width(), mask.height(), 0, 0};
  bool any = false;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(y, x) == 0) continue;
      any = true;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  if (!any) return std::nullopt;
  return box;
}

std::optional<PixelBox> cyclic_bounding_box(const Mask& mask) {
  const int h = mask.height(), w = mask.width();
  std::vector<char> col(w, 0);
  int y0 = h, y1 = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x)) {
        col[x] = 1;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y + 1);
      }
    }
  }
  if (y1 == 0) return std::nullopt;
  if (std::all_of(col.begin(), col.end(), [](char c) { return c != 0; })) return PixelBox{0, y0, w, y1};
  // widest cyclic run of empty columns; the box starts right after it
  int best_len = 0, best_end = 0;
  for (int start = 0; start < w; ++start) {
    if (col[start] || !col[(start + w - 1) % w]) continue;  // runs begin after a set column
    int len = 0;
    while (!col[(start + len) % w]) ++len;
    if (len > best_len) {
      best_len = len;
      best_end = (start + len) % w;
    }
  }
  return PixelBox{best_end, y0, best_end + (w - best_len), y1};
}

ViewSampler::ViewSampler(const CameraPose& cam, const ErpGrid& grid) : cam_(cam), grid_(grid) {
  cam.validate();
  grid.validate();
  const int n = cam.image_size;
  rows_.resize(static_cast<std::size_t>(n) * n);
  cols_.resize(rows_.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const SphericalCoord s = gnomonic_unproject(i + 0.5, j + 0.5, cam);
      const auto [row, col] = erp_cell(spherical_to_erp(s, grid), grid);
      rows_[static_cast<std::size_t>(j) * n + i] = row;
      cols_[static_cast<std::size_t>(j) * n + i] = col;
    }
  }
}

Mask ViewSampler::sample(const Mask& erp_mask, int column_shift) const {
  if (erp_mask.height() != grid_.height || erp_mask.width() != grid_.width) {
    throw std::invalid_argument("ViewSampler: mask does not match the ERP grid");
  }
  const int w = grid_.width;
  int shift = column_shift % w;
  if (shift < 0) shift += w;
  const int n = cam_.image_size;
  Mask out = make_mask(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      int col = cols_[k] + shift;
      if (col >= w) col -= w;
      out(j, i) = erp_mask(rows_[k], col) ? 1 : 0;
    }
  }
  return out;
}

Mask project_mask_erp_to_persp(const Mask& erp_mask, const CameraPose& cam) {
  return ViewSampler(cam, ErpGrid{erp_mask.width(), erp_mask.height()}).sample(erp_mask);
}

Mask reproject_bbox_to_erp(const Mask& persp_mask, const CameraPose& cam, const ErpGrid& grid) {
  const auto box = bounding_box(persp_mask);
  if (!box) throw std::invalid_argument("reproject_bbox_to_erp: empty perspective mask has no box");
  return box_footprint(*box, cam, grid);
}

Mask box_footprint(const PixelBox& box, const CameraPose& cam, const ErpGrid& grid) {
  cam.validate();
  grid.validate();
  Mask out = make_mask(grid.height, grid.width);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const auto p = gnomonic_project(erp_to_spherical(c + 0.5, r + 0.5, grid), cam);
      if (!p) continue;
      if (p->x >= box.x0 && p->x < box.x1 && p->y >= box.y0 && p->y < box.y1) out(r, c) = 1;
    }
  }
  return out;
}

std::optional<PixelBox> projected_bbox(const Mask& erp_mask, const CameraPose& cam) {
  cam.validate();
  const ErpGrid grid{erp_mask.width(), erp_mask.height()};
  grid.validate();
  const int n = cam.image_size;
  PixelBox box{n, n, 0, 0};
  bool any = false;
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      if (!erp_mask(r, c)) continue;
      const auto p = gnomonic_project(erp_to_spherical(c + 0.5, r + 0.5, grid), cam);
      if (!p || p->x < 0.0 || p->y < 0.0 || p->x >= n || p->y >= n) continue;
      const int x = static_cast<int>(std::floor(p->x)), y = static_cast<int>(std::floor(p->y));
      any = true;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  if (!any) return std::nullopt;
  return box;
}

Mask reproject_mask_via_view(const Mask& erp_mask, const CameraPose& cam) {
  const auto box = projected_bbox(erp_mask, cam);
  if (!box) throw std::invalid_argument("reproject_mask_via_view: mask not visible from the camera");
  return box_footprint(*box, cam, {erp_mask.width(), erp_mask.height()});
}

std::vector<CameraPose> icosahedron_cameras(double fov, int image_size) {
  const double ring = std::atan(0.5);
  std::vector<Vec3> verts;
  verts.push_back({0.0, 0.0, 1.0});
  for (int k = 0; k < 5; ++k) verts.push_back(to_unit_vector({deg2rad(72.0 * k), ring}));
  for (int k = 0; k < 5; ++k) verts.push_back(to_unit_vector({deg2rad(36.0 + 72.0 * k), -ring}));
  verts.push_back({0.0, 0.0, -1.0});

  auto upper = [](int k) { return 1 + (k % 5); };
  auto lower = [](int k) { return 6 + (k % 5); };
  std::vector<std::array<int, 3>> faces;
  for (int k = 0; k < 5; ++k) faces.push_back({0, upper(k), upper(k + 1)});
  for (int k = 0; k < 5; ++k) faces.push_back({upper(k), lower(k), upper(k + 1)});
  for (int k = 0; k < 5; ++k) faces.push_back({lower(k), lower(k + 1), upper(k + 1)});
  for (int k = 0; k < 5; ++k) faces.push_back({11, lower(k + 1), lower(k)});

  std::vector<CameraPose> poses;
  poses.reserve(faces.size());
  for (const auto& f : faces) {
    Vec3 c{0.0, 0.0, 0.0};
    for (int i : f) {
      for (int d = 0; d < 3; ++d) c[d] += verts[i][d];
    }
    const SphericalCoord s = from_unit_vector(c);
    CameraPose pose{s.lon, s.lat, 0.0, fov, image_size};
    pose.validate();
    poses.push_back(pose);
  }
  return poses;
}

int yaw_to_columns(double yaw, int width) {
  long long k = std::llround(yaw / (2.0 * kPi) * width) % width;
  if (k < 0) k += width;
  return static_cast<int>(k);
}

double columns_to_yaw(int columns, int width) { return 2.0 * kPi * columns / width; }

Latent fold_cyclic_mean(const Latent& padded, int pad) {
  const int w = padded.width() - 2 * pad;
  if (pad < 0 || w <= 0 || pad > w) throw std::invalid_argument("fold_cyclic_mean: bad pad");
  Planar<double> sum(padded.channels(), padded.height(), w);
  std::vector<int> count(w, 0);
  for (int x = 0; x < padded.width(); ++x) {
    int dst = (x - pad) % w;
    if (dst < 0) dst += w;
    ++count[dst];
    for (int c = 0; c < padded.channels(); ++c) {
      for (int y = 0; y < padded.height(); ++y) sum.at(c, y, dst) += padded.at(c, y, x);
    }
  }
  Latent out(padded.channels(), padded.height(), w);
  for (int c = 0; c < padded.channels(); ++c) {
    for (int y = 0; y < padded.height(); ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = static_cast<float>(sum.at(c, y, x) / count[x]);
    }
  }
  return out;
}

nlohmann::json camera_to_json(const CameraPose& cam) {
  return {{"lon_deg", rad2deg(cam.lon)},
          {"lat_deg", rad2deg(cam.lat)},
          {"roll_deg", rad2deg(cam.roll)},
          {"fov_deg", rad2deg(cam.fov)},
          {"size", cam.image_size}};
}

CameraPose camera_from_json(const nlohmann::json& j) {
  CameraPose cam;
  cam.lon = deg2rad(j.at("lon_deg").get<double>());
  cam.lat = deg2rad(j.at("lat_deg").get<double>());
  cam.roll = deg2rad(j.value("roll_deg", 0.0));
  cam.fov = deg2rad(j.at("fov_deg").get<double>());
  cam.image_size = j.at("size").get<int>();
  cam.validate();
  return cam;
}

}  // namespace sdt
