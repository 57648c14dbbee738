#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sdt/sphere_geom.hpp"
#include "sdt/tensor.hpp"

namespace sdt {

/// Weights of the projection-resampling exchange between a panorama latent
/// and its perspective view latents.
struct EppaOptions {
  double sigma = 0.5;        // Gaussian width over the view radius, 1 = half the view side
  double pano_weight = 1.0;  // strength of views pulling the panorama
  double view_weight = 0.5;  // in [0, 1]; strength of the panorama pulling views
  void validate() const;
};

/// Precomputed sampling geometry for one camera rig at latent resolution.
///
/// Panorama update, per panorama cell:
///   pano' = (pano + a * sum_v g_v * view_v) / (1 + a * sum_v g_v)
/// where view_v is the view latent bilinearly sampled at the cell's
/// projection and g_v a Gaussian of the normalized distance to the view
/// center. View update, per view cell:
///   view' = view + b * g * (pano_sampled - view).
/// Both updates read pre-exchange values, so every output is a convex
/// combination of inputs. Views whose gate is off neither send nor receive.
class EppaGeometry {
 public:
  /// `poses` use the view latent side as image_size.
  EppaGeometry(std::vector<CameraPose> poses, int pano_height, int pano_width, EppaOptions options = {});

  int view_count() const { return static_cast<int>(poses_.size()); }
  int view_size() const { return view_size_; }

  /// In-place exchange. `column_shift` is the panorama's yaw relative to the
  /// rig frame in latent columns.
  void exchange(Latent& pano, std::vector<Latent>& views, std::span<const char> gate, int column_shift = 0,
                bool update_pano = true, bool update_views = true) const;

 private:
  struct PanoTap {
    int row, col;  // panorama cell in the rig frame
    int view;
    int x0, y0, x1, y1;
    float fx, fy;
    double weight;
  };
  struct ViewTap {
    double u, v;  // continuous panorama position of the view cell center, rig frame
    double kappa;
  };

  std::vector<CameraPose> poses_;
  int pano_height_, pano_width_, view_size_;
  EppaOptions options_;
  std::vector<PanoTap> pano_taps_;               // grouped by view, in view order
  std::vector<std::vector<ViewTap>> view_taps_;  // [view][row * size + col]
};

/// One-shot exchange with freshly built geometry.
std::pair<Latent, std::vector<Latent>> eppa_exchange(const Latent& pano, const std::vector<Latent>& views,
                                                     const std::vector<CameraPose>& poses,
                                                     std::span<const char> gate, const EppaOptions& options = {});

}  // namespace sdt
