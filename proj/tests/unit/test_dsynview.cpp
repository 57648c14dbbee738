#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sdt/dsynview.hpp"
#include "sdt/image_io.hpp"
#include "test_support.hpp"

namespace sdt::dsynview {
namespace {

const ErpGrid kGrid{512, 256};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Pixel set of a reprojected mask computed ray by ray: the view box is the
// cell hull of the projected mask pixel centers, and an ERP pixel belongs to
// the output when its center lands inside that box.
Mask ray_oracle(const Mask& erp_mask, const ErpGrid& grid) {
  const CameraPose cam = centered_camera(erp_mask, grid);
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      if (!erp_mask(r, c)) continue;
      const auto q = gnomonic_project(erp_to_spherical(c + 0.5, r + 0.5, grid), cam);
      if (!q || q->x < 0 || q->y < 0 || q->x >= cam.image_size || q->y >= cam.image_size) continue;
      x0 = std::min(x0, std::floor(q->x));
      y0 = std::min(y0, std::floor(q->y));
      x1 = std::max(x1, std::floor(q->x) + 1);
      y1 = std::max(y1, std::floor(q->y) + 1);
    }
  }
  Mask out = make_mask(grid.height, grid.width);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const auto q = gnomonic_project(erp_to_spherical(c + 0.5, r + 0.5, grid), cam);
      if (q && q->x >= x0 && q->x < x1 && q->y >= y0 && q->y < y1) out(r, c) = 1;
    }
  }
  return out;
}

TEST(Scenes, SixScenesOfThreeObjects) {
  const auto scenes = default_scenes();
  ASSERT_EQ(scenes.size(), 6u);
  std::set<std::string> ids;
  for (const auto& s : scenes) {
    ids.insert(s.scene_id);
    const auto masks = build_masks(s, kGrid);
    EXPECT_EQ(masks.size(), 3u);
  }
  EXPECT_EQ(ids.size(), 6u);
}

TEST(Placements, MasksDisjointForEverySizeAndType) {
  for (auto size : {MaskSize::S, MaskSize::M, MaskSize::L}) {
    for (auto type : {MaskType::Regular, MaskType::ErpReprojected}) {
      SceneSpec s = default_scenes(size, type).front();
      const auto masks = build_masks(s, kGrid);
      for (std::size_t i = 0; i < masks.size(); ++i) {
        EXPECT_TRUE(any_set(masks[i]));
        for (std::size_t j = i + 1; j < masks.size(); ++j) {
          for (std::size_t p = 0; p < masks[i].size(); ++p) {
            ASSERT_FALSE(masks[i].values()[p] && masks[j].values()[p])
                << to_string(size) << " " << to_string(type) << " slots " << i << "," << j;
          }
        }
      }
    }
  }
}

TEST(Placements, LargeIsFourTimesSmall) {
  for (int slot = 0; slot < 3; ++slot) {
    const PixelBox s = slot_box(slot, MaskSize::S, kGrid);
    const PixelBox l = slot_box(slot, MaskSize::L, kGrid);
    EXPECT_EQ(l.width() * l.height(), 4 * s.width() * s.height());
    const PixelBox m = slot_box(slot, MaskSize::M, kGrid);
    EXPECT_GT(m.width() * m.height(), s.width() * s.height());
    EXPECT_LT(m.width() * m.height(), l.width() * l.height());
  }
  EXPECT_THROW(slot_box(3, MaskSize::S, kGrid), std::out_of_range);
}

TEST(Reprojection, EquatorMaskSymmetricAboutItsMeridian) {
  // box centered on the boundary between columns 255 and 256
  const Mask m = test::rect_mask(256, 512, 216, 108, 296, 148);
  const Mask out = erp_reproject_masks({m}, kGrid).front();
  ASSERT_TRUE(any_set(out));
  for (int r = 0; r < 256; ++r) {
    for (int d = 0; d < 200; ++d) ASSERT_EQ(out(r, 255 - d), out(r, 256 + d)) << r << " " << d;
  }
}

TEST(Reprojection, MidLatitudeMaskHasCurvedEdges) {
  const Mask m = test::rect_mask(256, 512, 200, 60, 260, 90);
  const Mask out = erp_reproject_masks({m}, kGrid).front();
  std::set<int> spans;
  for (int c = 0; c < 512; ++c) {
    int n = 0;
    for (int r = 0; r < 256; ++r) n += out(r, c);
    if (n) spans.insert(n);
  }
  EXPECT_GT(spans.size(), 2u);
}

TEST(Reprojection, PixelSetMatchesRayOracle) {
  std::vector<Mask> masks{test::rect_mask(256, 512, 200, 60, 260, 90), test::rect_mask(256, 512, 20, 110, 70, 150),
                          test::rect_mask(256, 512, 490, 150, 530, 200)};
  const auto out = erp_reproject_masks(masks, kGrid);
  for (std::size_t i = 0; i < masks.size(); ++i) EXPECT_EQ(out[i], ray_oracle(masks[i], kGrid)) << i;
  for (const auto& s : default_scenes(MaskSize::L, MaskType::Regular)) {
    const auto regular = build_masks(s, kGrid);
    SceneSpec r = s;
    r.mask_type = MaskType::ErpReprojected;
    const auto reproj = build_masks(r, kGrid);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(reproj[k], ray_oracle(regular[k], kGrid));
    break;
  }
}

TEST(Reprojection, SeamCrossingMaskIsCenteredOnItself) {
  const Mask m = test::rect_mask(256, 512, 490, 110, 530, 150);
  const CameraPose cam = centered_camera(m, kGrid);
  EXPECT_NEAR(cam.lon, 2 * kPi * 510 / 512 - kPi, 1e-9);
  const Mask out = erp_reproject_masks({m}, kGrid).front();
  EXPECT_TRUE(out(130, 0));
  EXPECT_TRUE(out(130, 500));
  EXPECT_FALSE(out(130, 256));
}

TEST(Reprojection, FixedCameraReprojectionIsIdempotent) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> col(0, 511), row(40, 200), len(4, 60);
  for (int trial = 0; trial < 20; ++trial) {
    const int x = col(rng), y = row(rng);
    const Mask m = test::rect_mask(256, 512, x, y, x + len(rng), std::min(256, y + len(rng)));
    const CameraPose cam = centered_camera(m, kGrid);
    const Mask once = reproject_mask_via_view(m, cam);
    EXPECT_EQ(reproject_mask_via_view(once, cam), once) << trial;
  }
}

TEST(Reprojection, PoleCenteredMaskIsRejectedWithGuidance) {
  const Mask m = test::rect_mask(256, 512, 100, 0, 140, 6);
  try {
    erp_reproject_masks({m}, kGrid);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("pole"), std::string::npos);
  }
}

TEST(Manifest, DefaultCounts) {
  ManifestConfig cfg;
  cfg.grid = kGrid;
  const BenchmarkManifest m = build_manifest(cfg);
  EXPECT_EQ(m.panoramas.size(), 1008u);
  EXPECT_EQ(m.perspectives.size(), 3024u);
  EXPECT_EQ(m.references.size(), 18144u);
  EXPECT_EQ(m.reference_prompts, 18);
  EXPECT_EQ(static_cast<std::size_t>(m.reference_prompts) * m.seeds.size() * m.reference_mask_variants, 18144u);
  EXPECT_EQ(m.perspectives.size() * m.reference_mask_variants, m.references.size());
}

TEST(Manifest, ByteIdenticalAndEveryLayoutValidates) {
  test::TempDir a("ds_a"), b("ds_b");
  ManifestConfig cfg;
  cfg.grid = {256, 128};
  cfg.n_seeds = 2;
  write_dataset(build_manifest(cfg), a.path());
  write_dataset(build_manifest(cfg), b.path());
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  EXPECT_EQ(slurp(a / "placements.json"), slurp(b / "placements.json"));

  std::ifstream in(a / "manifest.jsonl");
  std::string line;
  int panoramas = 0, references = 0;
  while (std::getline(in, line)) {
    const auto rec = nlohmann::json::parse(line);
    if (rec["kind"] == "panorama") {
      ++panoramas;
      const Layout l = load_layout(a / rec["paths"]["layout"].get<std::string>());
      EXPECT_NO_THROW(validate(l));
      EXPECT_EQ(l.regions.size(), 3u);
    } else if (rec["kind"] == "reference") {
      ++references;
      const Mask target = read_mask_png(a / rec["paths"]["mask"].get<std::string>());
      const auto box = bounding_box(target);
      ASSERT_TRUE(box);
      // centered: equal margins up to one pixel of rounding
      EXPECT_LE(std::abs(box->x0 - (target.width() - box->x1)), 1);
      EXPECT_LE(std::abs(box->y0 - (target.height() - box->y1)), 1);
    }
  }
  EXPECT_EQ(panoramas, 12);
  EXPECT_EQ(references, 6 * 3 * 2 * 6);
}

TEST(Manifest, HashTracksConfig) {
  ManifestConfig a;
  ManifestConfig b = a;
  EXPECT_EQ(a.hash(), b.hash());
  b.mask_size = MaskSize::L;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Names, RoundTrip) {
  for (auto s : {MaskSize::S, MaskSize::M, MaskSize::L}) EXPECT_EQ(mask_size_from_string(to_string(s)), s);
  for (auto t : {MaskType::Regular, MaskType::ErpReprojected}) EXPECT_EQ(mask_type_from_string(to_string(t)), t);
  EXPECT_THROW(mask_size_from_string("XL"), std::invalid_argument);
}

}  // namespace
}  // namespace sdt::dsynview
