#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sdt/digest.hpp"
#include "sdt/eppa.hpp"
#include "sdt/mpf.hpp"
#include "test_support.hpp"

namespace sdt {
namespace {

const ErpGrid kGrid{128, 64};  // latent 16 x 8

std::vector<CameraPose> latent_rig(int size) {
  auto poses = icosahedron_cameras(deg2rad(90), size);
  return poses;
}

TEST(EppaGate, Table) {
  MpfConfig off;
  off.fg_eppa = false;
  MpfConfig on;
  for (bool boot : {false, true}) {
    EXPECT_TRUE(eppa_gate(false, boot, off));
    EXPECT_TRUE(eppa_gate(false, boot, on));
    EXPECT_TRUE(eppa_gate(true, boot, on));
  }
  EXPECT_FALSE(eppa_gate(true, true, off));
  EXPECT_TRUE(eppa_gate(true, false, off));
}

TEST(Eppa, GateOffIsIdentity) {
  std::mt19937_64 rng(1);
  const Latent pano = test::random_latent(4, 8, 16, rng);
  std::vector<Latent> views;
  for (int v = 0; v < 20; ++v) views.push_back(test::random_latent(4, 8, 8, rng));
  const std::vector<char> gate(20, 0);
  const auto [p, vs] = eppa_exchange(pano, views, latent_rig(8), gate);
  EXPECT_EQ(p, pano);
  for (int v = 0; v < 20; ++v) EXPECT_EQ(vs[v], views[v]);
}

TEST(Eppa, ConstantConsensusIsFixedPoint) {
  const Latent pano(4, 8, 16, 0.3f);
  const std::vector<Latent> views(20, Latent(4, 8, 8, 0.3f));
  const std::vector<char> gate(20, 1);
  const auto [p, vs] = eppa_exchange(pano, views, latent_rig(8), gate);
  EXPECT_EQ(p, pano);
  for (const auto& v : vs) EXPECT_EQ(v, views[0]);
}

TEST(Eppa, SingleDifferingViewPullsItsFootprint) {
  const int H = 16, W = 32, S = 8;
  const auto poses = latent_rig(S);
  const Latent pano(1, H, W, 0.0f);
  std::vector<Latent> views(20, Latent(1, S, S, 0.0f));
  views[3] = Latent(1, S, S, 1.0f);
  const std::vector<char> gate(20, 1);
  const auto [p, vs] = eppa_exchange(pano, views, poses, gate);
  int inside = 0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const auto q = gnomonic_project(erp_to_spherical(c + 0.5, r + 0.5, {W, H}), poses[3]);
      const bool in = q && q->x > 0 && q->y > 0 && q->x < S && q->y < S;
      if (in) {
        ++inside;
        EXPECT_GT(p(r, c), 0.0f);
        EXPECT_LT(p(r, c), 1.0f);
      } else {
        EXPECT_EQ(p(r, c), 0.0f);
      }
    }
  }
  EXPECT_GT(inside, 0);
  // the differing view is pulled toward the panorama, the others stay put
  for (float v : vs[3].values()) EXPECT_LT(v, 1.0f);
  EXPECT_EQ(vs[0], views[0]);
}

TEST(Eppa, OutputsStayInInputRange) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Latent pano = test::random_latent(2, 8, 16, rng, -2.0, 2.0);
    std::vector<Latent> views;
    for (int v = 0; v < 20; ++v) views.push_back(test::random_latent(2, 8, 8, rng, -2.0, 2.0));
    std::vector<char> gate(20);
    std::bernoulli_distribution bit(0.7);
    for (auto& g : gate) g = bit(rng);
    float lo = INFINITY, hi = -INFINITY;
    for (float v : pano.values()) lo = std::min(lo, v), hi = std::max(hi, v);
    for (const auto& vw : views) {
      for (float v : vw.values()) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    const auto [p, vs] = eppa_exchange(pano, views, latent_rig(8), gate);
    for (float v : p.values()) {
      ASSERT_GE(v, lo);
      ASSERT_LE(v, hi);
    }
    for (const auto& vw : vs) {
      for (float v : vw.values()) {
        ASSERT_GE(v, lo);
        ASSERT_LE(v, hi);
      }
    }
  }
}

TEST(Eppa, RejectsMismatchedShapes) {
  const std::vector<char> gate(20, 1);
  EXPECT_THROW(eppa_exchange(Latent(4, 8, 16), std::vector<Latent>(19, Latent(4, 8, 8)), latent_rig(8), gate),
               std::invalid_argument);
  EXPECT_THROW(eppa_exchange(Latent(4, 8, 16), std::vector<Latent>(20, Latent(4, 4, 4)), latent_rig(8), gate),
               std::invalid_argument);
}

BranchState masked_state(const ViewRig& rig, const Mask& erp_mask, std::mt19937_64& rng) {
  BranchState st;
  st.pano = test::random_latent(4, 8, 16, rng);
  st.pano_noise = test::random_latent(4, 8, 16, rng);
  st.poses = rig.poses;
  st.erp_mask = erp_mask;
  for (std::size_t v = 0; v < rig.poses.size(); ++v) {
    st.persp.push_back(test::random_latent(4, 8, 8, rng));
    st.persp_noise.push_back(test::random_latent(4, 8, 8, rng));
    st.persp_masks.push_back(rig.samplers[v].sample(erp_mask));
  }
  return st;
}

TEST(RotateState, IdentityInverseAndMaskPoseConsistency) {
  const ViewRig rig(icosahedron_cameras(deg2rad(90), 64), kGrid, 8);
  std::mt19937_64 rng(3);
  const Mask m = test::rect_mask(64, 128, 20, 18, 60, 44);
  const BranchState st = masked_state(rig, m, rng);

  const BranchState zero = rotate_state(st, 0, rig);
  EXPECT_EQ(zero.pano, st.pano);
  EXPECT_EQ(zero.erp_mask, st.erp_mask);

  for (int k : {1, 5, 9, 15, -3}) {
    const BranchState r = rotate_state(st, k, rig);
    EXPECT_EQ(r.pano, roll_columns(st.pano, k));
    EXPECT_EQ(r.pano_noise, roll_columns(st.pano_noise, k));
    EXPECT_EQ(r.erp_mask, roll_columns(m, 8 * k));
    for (std::size_t v = 0; v < rig.poses.size(); ++v) {
      // projecting the rolled mask with the yawed camera reproduces the original view mask
      EXPECT_EQ(r.persp_masks[v], st.persp_masks[v]) << "view " << v;
      EXPECT_EQ(project_mask_erp_to_persp(r.erp_mask, r.poses[v]), project_mask_erp_to_persp(m, st.poses[v]))
          << "view " << v << " shift " << k;
      EXPECT_EQ(r.persp[v], st.persp[v]);
    }
    const BranchState back = rotate_state(r, -k, rig);
    EXPECT_EQ(back.pano, st.pano);
    EXPECT_EQ(back.erp_mask, st.erp_mask);
    EXPECT_EQ(back.persp_masks, st.persp_masks);
    EXPECT_EQ(back.yaw_columns, 0);
    for (std::size_t v = 0; v < rig.poses.size(); ++v) EXPECT_NEAR(back.poses[v].lon, st.poses[v].lon, 1e-12);
  }
}

TEST(RotationSchedule, DeterministicPerSeedAndInRange) {
  const auto a = default_rotation_schedule(7, 50, 128);
  EXPECT_EQ(a, default_rotation_schedule(7, 50, 128));
  EXPECT_NE(a, default_rotation_schedule(8, 50, 128));
  for (int k : a) {
    EXPECT_GE(k, 0);
    EXPECT_LT(k, 128);
  }
}

Layout two_objects() {
  return test::rect_layout(kGrid, {{8, 20, 40, 44}, {72, 16, 96, 40}}, {"cow", "windmill"});
}

MpfConfig small_mpf(MdMode mode, int bootstrap) {
  MpfConfig c;
  c.md_mode = mode;
  c.bootstrap = {bootstrap, BootstrapPlan::Coupling::Branches};
  c.view_size = 64;
  c.seed = 3;
  return c;
}

struct Mock {
  DdimScheduler sched;
  MockDenoiser den;
  MockCodec codec;
  explicit Mock(int steps) : sched({.steps = steps}), den(sched) {}
};

TEST(MpfSample, DeterministicAcrossRunsAndWorkers) {
  const Mock m(4);
  MpfConfig c = small_mpf(MdMode::Both, 2);
  const MpfResult a = mpf_sample(two_objects(), c, m.den, m.sched, m.codec);
  const MpfResult b = mpf_sample(two_objects(), c, m.den, m.sched, m.codec);
  c.workers = 4;
  const MpfResult p = mpf_sample(two_objects(), c, m.den, m.sched, m.codec);
  EXPECT_EQ(a.pano_latent, b.pano_latent);
  EXPECT_EQ(a.pano_latent, p.pano_latent);
  EXPECT_EQ(a.view_latents, p.view_latents);
  ASSERT_EQ(a.views.size(), 20u);
  EXPECT_EQ(a.pano.height(), 64);
  EXPECT_EQ(a.views[0].height(), 64);
  EXPECT_EQ(a.stats.total_yaw_columns, a.stats.unwound_columns);
}

TEST(MpfSample, MdPanoRunsSinglePathViews) {
  const Mock m(3);
  const MpfResult r = mpf_sample(two_objects(), small_mpf(MdMode::Pano, 1), m.den, m.sched, m.codec);
  EXPECT_EQ(r.stats.persp_predicts, 20L * 3);
  EXPECT_EQ(r.stats.pano_predicts, 3L * 3);
  const MpfResult pers = mpf_sample(two_objects(), small_mpf(MdMode::Pers, 1), m.den, m.sched, m.codec);
  EXPECT_EQ(pers.stats.pano_predicts, 3L);
  EXPECT_EQ(pers.stats.persp_predicts, 3L * 20 * 3);
  EXPECT_NE(pers.pano_latent, r.pano_latent);
}

TEST(MpfSample, BranchCouplingSharesColorsAcrossBranches) {
  const Mock m(4);
  MpfConfig c = small_mpf(MdMode::Both, 3);
  c.record_colors = true;
  const MpfResult r = mpf_sample(two_objects(), c, m.den, m.sched, m.codec);
  int pano_uses = 0;
  for (const auto& pano : r.color_log) {
    if (pano.branch != Branch::Panorama) continue;
    ++pano_uses;
    int views = 0;
    for (const auto& u : r.color_log) {
      if (u.branch == Branch::Perspective && u.path == pano.path && u.t_index == pano.t_index) {
        EXPECT_EQ(u.rgb, pano.rgb);
        ++views;
      }
    }
    EXPECT_EQ(views, 20);
  }
  EXPECT_EQ(pano_uses, 3 * 2);
}

TEST(MpfSample, SingleStepFullyDecoupledIsTwoVanillaSteps) {
  const Mock m(1);
  Layout l;
  l.grid = kGrid;
  l.background_prompt = "an indoor room";
  MpfConfig c = small_mpf(MdMode::Pano, 0);
  c.eppa = false;
  c.lora = LoraMode::No;
  c.rotation_schedule = {0};
  const MpfResult r = mpf_sample(l, c, m.den, m.sched, m.codec);
  // Oracle: panorama noise comes from stream 1, view v from stream (4, v).
  const Latent z = init_noise(4, 8, 16, derive_seed(c.seed, {1}), true, 1)[0];
  DenoiseContext pano_ctx;
  pano_ctx.circular_padding = true;
  EXPECT_EQ(r.pano_latent, m.sched.step(z, m.den.predict(z, 0, "an indoor room", pano_ctx), 0));
  for (int v = 0; v < 20; ++v) {
    const Latent zv = init_noise(4, 8, 8, derive_seed(c.seed, {4, static_cast<std::uint64_t>(v)}), true, 1)[0];
    EXPECT_EQ(r.view_latents[v], m.sched.step(zv, m.den.predict(zv, 0, "an indoor room", {}), 0));
  }
}

TEST(MpfSample, GatedExchangeCounter) {
  const Mock m(6);
  for (auto mode : {MdMode::Pano, MdMode::Pers, MdMode::Both}) {
    MpfConfig c = small_mpf(mode, 4);
    c.fg_eppa = false;
    const MpfResult r = mpf_sample(two_objects(), c, m.den, m.sched, m.codec);
    const int branches = mode == MdMode::Both ? 2 : 1;
    EXPECT_EQ(r.stats.gated_off, 4L * 2 * branches) << to_string(mode);
    EXPECT_EQ(r.stats.exchanges, 6L * 3 - 4L * 2);
    c.fg_eppa = true;
    EXPECT_EQ(mpf_sample(two_objects(), c, m.den, m.sched, m.codec).stats.gated_off, 0);
  }
}

TEST(MpfSample, GlobalYawOffsetRollsOutput) {
  const Mock m(4);
  MpfConfig c = small_mpf(MdMode::Both, 2);
  c.rotation_schedule = {5, 3, 11, 7};
  const MpfResult base = mpf_sample(two_objects(), c, m.den, m.sched, m.codec);
  for (int offset : {1, 4, 13}) {
    MpfConfig shifted = c;
    shifted.rotation_schedule[0] -= offset;
    const MpfResult r = mpf_sample(roll_layout(two_objects(), offset * 8), shifted, m.den, m.sched, m.codec);
    EXPECT_EQ(r.pano_latent, roll_columns(base.pano_latent, offset)) << offset;
    EXPECT_EQ(r.view_latents, base.view_latents);
    for (int v = 0; v < 20; ++v) {
      EXPECT_NEAR(std::remainder(r.view_poses[v].lon - base.view_poses[v].lon - columns_to_yaw(offset, 16), 2 * kPi),
                  0.0, 1e-9);
    }
  }
}

TEST(MpfSample, ModeNames) {
  for (auto mode : {MdMode::Pano, MdMode::Pers, MdMode::Both}) EXPECT_EQ(md_mode_from_string(to_string(mode)), mode);
  EXPECT_EQ(to_string(MdMode::Pano), "md_pano");
  EXPECT_THROW(md_mode_from_string("md_all"), std::invalid_argument);
}

TEST(MpfSample, RejectsBadSchedule) {
  const Mock m(3);
  MpfConfig c = small_mpf(MdMode::Both, 0);
  c.rotation_schedule = {1, 2};
  EXPECT_THROW(mpf_sample(two_objects(), c, m.den, m.sched, m.codec), std::invalid_argument);
  c.rotation_schedule.clear();
  c.view_size = 60;
  EXPECT_THROW(mpf_sample(two_objects(), c, m.den, m.sched, m.codec), std::invalid_argument);
}

}  // namespace
}  // namespace sdt
