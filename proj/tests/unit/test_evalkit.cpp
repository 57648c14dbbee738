#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "sdt/evalkit.hpp"
#include "test_support.hpp"

namespace sdt::evalkit {
namespace {

// Area oracle: enumerate unit cells of a canvas that wraps after `width`.
double brute_iou(const PixelBox& pred, const Mask& gt) {
  const int w = gt.width(), h = gt.height();
  // ground-truth box cells: columns and rows touched by the mask, then filled
  std::vector<char> cols(w, 0);
  int y0 = h, y1 = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gt(y, x)) {
        cols[x] = 1;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y + 1);
      }
    }
  }
  const int ymax = std::max(h, pred.y1);
  long long inter = 0, a = 0, b = 0;
  for (int y = std::min(0, pred.y0); y < ymax; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in_gt = y >= y0 && y < y1 && cols[x];
      bool in_pred = false;
      for (int k = -2; k <= 2; ++k) in_pred |= x + k * w >= pred.x0 && x + k * w < pred.x1;
      in_pred &= y >= pred.y0 && y < pred.y1;
      a += in_gt;
      b += in_pred;
      inter += in_gt && in_pred;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a + b - inter);
}

TEST(Iou, Examples) {
  const Mask gt = test::rect_mask(64, 128, 0, 0, 10, 10);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, gt), 1.0);
  EXPECT_DOUBLE_EQ(iou({50, 30, 60, 40}, gt), 0.0);
  EXPECT_DOUBLE_EQ(iou({5, 0, 15, 10}, gt), 1.0 / 3.0);
  // a box written past the seam is the same box as its wrapped copy
  EXPECT_DOUBLE_EQ(iou({128, 0, 138, 10}, gt), 1.0);
  EXPECT_DOUBLE_EQ(iou({-5, 0, 5, 10}, gt), 1.0 / 3.0);
  EXPECT_THROW(iou({0, 0, 10, 10}, make_mask(64, 128)), std::invalid_argument);
}

TEST(Iou, SeamCrossingGroundTruth) {
  const Mask gt = test::rect_mask(64, 128, 120, 10, 136, 20);
  const auto box = cyclic_bounding_box(gt);
  ASSERT_TRUE(box);
  EXPECT_EQ(*box, (PixelBox{120, 10, 136, 20}));
  EXPECT_DOUBLE_EQ(iou({120, 10, 136, 20}, gt), 1.0);
  EXPECT_DOUBLE_EQ(iou({-8, 10, 8, 20}, gt), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 10, 8, 20}, gt), 0.5);
}

TEST(Iou, MatchesAreaOracleOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> col(0, 127), row(0, 63), len(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const int gx = col(rng), gy = row(rng), gw = len(rng), gh = std::min(len(rng), 64 - gy);
    const Mask gt = test::rect_mask(64, 128, gx, gy, gx + gw, gy + gh);
    const int px = col(rng) - 64, py = row(rng), pw = len(rng) * 2, ph = std::min(len(rng), 64 - py);
    const PixelBox pred{px, py, px + pw, py + ph};
    ASSERT_NEAR(iou(pred, gt), brute_iou(pred, gt), 1e-12) << trial;
  }
}

TEST(Iou, SymmetricAndShiftInvariant) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> col(0, 127), len(1, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const int ax = col(rng), bx = col(rng);
    const PixelBox a{ax, 4, ax + len(rng), 30}, b{bx, 10, bx + len(rng), 40};
    EXPECT_DOUBLE_EQ(cyclic_box_iou(a, b, 128), cyclic_box_iou(b, a, 128));
    const int s = col(rng);
    const PixelBox as{a.x0 + s, a.y0, a.x1 + s, a.y1}, bs{b.x0 + s, b.y0, b.x1 + s, b.y1};
    EXPECT_DOUBLE_EQ(cyclic_box_iou(as, bs, 128), cyclic_box_iou(a, b, 128));
    // shifting the mask and the prediction together leaves the score unchanged
    const Mask gt = test::rect_mask(64, 128, b.x0, b.y0, b.x1, b.y1);
    EXPECT_NEAR(iou(as, roll_columns(gt, s)), iou(a, gt), 1e-15);
  }
}

TEST(Iou, InViewPerfectPrediction) {
  const Mask gt = test::rect_mask(64, 128, 54, 24, 74, 40);
  const CameraPose cam{0.0, 0.0, 0.0, deg2rad(90), 64};
  const auto box = bounding_box(project_mask_erp_to_persp(gt, cam));
  ASSERT_TRUE(box);
  EXPECT_DOUBLE_EQ(iou_in_view(*box, gt, cam), 1.0);
  const CameraPose away{kPi - 0.1, 0.0, 0.0, deg2rad(60), 64};
  EXPECT_THROW(iou_in_view(*box, gt, away), std::invalid_argument);
}

TEST(CyclicBoundingBox, WidestGapDecidesStart) {
  Mask m = make_mask(8, 16);
  m(2, 1) = 1;
  m(3, 14) = 1;
  EXPECT_EQ(*cyclic_bounding_box(m), (PixelBox{14, 2, 18, 4}));
  EXPECT_FALSE(cyclic_bounding_box(make_mask(8, 16)));
  EXPECT_EQ(*cyclic_bounding_box(make_mask(8, 16, 1)), (PixelBox{0, 0, 16, 8}));
}

MetricRow row(const std::string& id, const std::string& b, std::optional<double> iou_v, std::optional<double> cs = {}) {
  MetricRow r;
  r.config_id = id;
  r.params["bootstrap"] = b;
  r.metrics[kIoU] = iou_v;
  r.metrics[kClipScore] = cs;
  return r;
}

TEST(Aggregate, Examples) {
  const auto one = aggregate({row("a", "5", 0.7, 0.3)}, "bootstrap");
  ASSERT_EQ(one.groups.size(), 1u);
  EXPECT_EQ(one.groups[0].means[kIoU], 0.7);
  EXPECT_EQ(one.groups[0].means[kClipScore], 0.3);
  EXPECT_FALSE(one.groups[0].means[kFid]);

  const auto two = aggregate({row("a", "5", 0.4), row("b", "5", 0.6)}, "bootstrap");
  ASSERT_EQ(two.groups.size(), 1u);
  EXPECT_DOUBLE_EQ(*two.groups[0].means[kIoU], 0.5);
  EXPECT_EQ(two.groups[0].rows, 2);
}

TEST(Aggregate, ReproducesInjectedMeansInNumericOrder) {
  std::vector<MetricRow> rows;
  std::mt19937_64 rng(4);
  const std::vector<int> bs{0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  for (int b : bs) {
    // symmetric offsets around the injected mean
    for (double d : {-0.2, 0.2, -0.05, 0.05}) rows.push_back(row("c" + std::to_string(b), std::to_string(b), b / 100.0 + d));
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto t = aggregate(rows, "bootstrap");
  ASSERT_EQ(t.groups.size(), bs.size());
  for (std::size_t i = 0; i < bs.size(); ++i) {
    EXPECT_EQ(t.groups[i].value, std::to_string(bs[i]));
    EXPECT_NEAR(*t.groups[i].means[kIoU], bs[i] / 100.0, 1e-12);
  }
}

TEST(Aggregate, PermutationInvariantBitForBit) {
  std::vector<MetricRow> rows;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 60; ++i) rows.push_back(row("c", std::to_string(i % 3), u(rng), u(rng)));
  const std::string ref = to_csv(aggregate(rows, "bootstrap"));
  for (int k = 0; k < 20; ++k) {
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_EQ(to_csv(aggregate(rows, "bootstrap")), ref);
  }
}

TEST(Aggregate, CsvTextAndPlotSchemas) {
  const auto t = aggregate({row("a", "0", 0.25), row("b", "20", 0.75, 0.5), row("c", "x", 0.1)}, "bootstrap");
  const std::string csv = to_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "group_by,value,n,IoU,CS,IR,FID,CMMD");
  EXPECT_NE(csv.find("bootstrap,0,1,0.250000,,,,\n"), std::string::npos);
  EXPECT_NE(csv.find("bootstrap,20,1,0.750000,0.500000,,,\n"), std::string::npos);
  // words sort after numbers
  EXPECT_LT(csv.find("bootstrap,20"), csv.find("bootstrap,x"));
  const std::string text = to_text(t);
  EXPECT_NE(text.find("IoU"), std::string::npos);
  EXPECT_NE(text.find("0.75"), std::string::npos);
  const std::string plot = to_plot_csv(t);
  EXPECT_EQ(plot.substr(0, plot.find('\n')), "parameter,value,metric,mean");
  EXPECT_NE(plot.find("bootstrap,20,CS,0.500000"), std::string::npos);
  EXPECT_EQ(plot.find("bootstrap,0,CS"), std::string::npos);
  EXPECT_TRUE(aggregate({row("a", "0", 0.1)}, "stride").groups.empty());
}

TEST(PluginIds, OnePerMetric) {
  EXPECT_EQ(plugin_id(kClipScore), "clip_score");
  EXPECT_EQ(plugin_id(kImageReward), "image_reward");
  EXPECT_EQ(plugin_id(kFid), "fid");
  EXPECT_EQ(plugin_id(kCmmd), "cmmd");
}

void write_script(const std::filesystem::path& p, const std::string& body) {
  {
    std::ofstream out(p);
    out << "#!/bin/sh\n" << body;
  }
  std::filesystem::permissions(p, std::filesystem::perms::owner_all);
}

class Plugins : public ::testing::Test {
 protected:
  test::TempDir dir{"plugins"};
  std::vector<std::filesystem::path> images, refs;

  void SetUp() override {
    std::filesystem::create_directories(dir / "bin");
    for (int i = 0; i < 3; ++i) {
      images.push_back(dir / ("img" + std::to_string(i) + ".png"));
      std::ofstream(images.back()) << "image " << i;
    }
    refs.push_back(dir / "ref.png");
    std::ofstream(refs.back()) << "reference";
  }
};

TEST_F(Plugins, AbsentPluginLeavesMetricEmpty) {
  PluginRunner none("", dir / "cache");
  EXPECT_EQ(none.run("fid", images, refs).status, PluginResult::Status::Absent);
  PluginRunner missing(dir / "bin", dir / "cache");
  const PluginResult r = missing.run("fid", images, refs);
  EXPECT_EQ(r.status, PluginResult::Status::Absent);
  EXPECT_FALSE(r.value);
  EXPECT_EQ(missing.invocations(), 0);
}

TEST_F(Plugins, ConstantPluginAndCacheHit) {
  write_script(dir / "bin" / "clip_score",
               "n=$(wc -l < \"$1\")\necho \"{\\\"metric\\\": \\\"clip_score\\\", \\\"value\\\": $n.5}\" > \"$3\"\n");
  PluginRunner runner(dir / "bin", dir / "cache");
  const PluginResult first = runner.run("clip_score", images, refs);
  ASSERT_EQ(first.status, PluginResult::Status::Ok) << first.error;
  EXPECT_DOUBLE_EQ(*first.value, 3.5);
  EXPECT_FALSE(first.cache_hit);
  EXPECT_EQ(runner.invocations(), 1);

  const PluginResult again = runner.run("clip_score", images, refs);
  EXPECT_TRUE(again.cache_hit);
  EXPECT_EQ(again.value, first.value);
  EXPECT_EQ(runner.invocations(), 1);

  // a fresh runner sharing the cache directory also hits
  PluginRunner other(dir / "bin", dir / "cache");
  EXPECT_TRUE(other.run("clip_score", images, refs).cache_hit);
  EXPECT_EQ(other.invocations(), 0);

  // changing an input's content invalidates the key
  std::ofstream(images[1]) << "edited";
  EXPECT_FALSE(runner.run("clip_score", images, refs).cache_hit);
  EXPECT_EQ(runner.invocations(), 2);
}

TEST_F(Plugins, FailingPluginIsReportedNotFatal) {
  write_script(dir / "bin" / "fid", "exit 3\n");
  write_script(dir / "bin" / "cmmd", "echo nonsense > \"$3\"\n");
  PluginRunner runner(dir / "bin", dir / "cache");
  const PluginResult fid = runner.run("fid", images, refs);
  EXPECT_EQ(fid.status, PluginResult::Status::Failed);
  EXPECT_FALSE(fid.value);
  EXPECT_NE(fid.error.find("status 3"), std::string::npos);
  const PluginResult cmmd = runner.run("cmmd", images, refs);
  EXPECT_EQ(cmmd.status, PluginResult::Status::Failed);
  // failures are not cached
  EXPECT_EQ(runner.run("fid", images, refs).status, PluginResult::Status::Failed);
  EXPECT_EQ(runner.invocations(), 3);
}

TEST_F(Plugins, MissingInputFileFails) {
  write_script(dir / "bin" / "fid", "echo '{\"value\": 1}' > \"$3\"\n");
  PluginRunner runner(dir / "bin", dir / "cache");
  images.push_back(dir / "does_not_exist.png");
  EXPECT_EQ(runner.run("fid", images, refs).status, PluginResult::Status::Failed);
}

}  // namespace
}  // namespace sdt::evalkit
