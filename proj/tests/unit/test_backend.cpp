#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>

#include "sdt/adapter.hpp"
#include "sdt/backend.hpp"
#include "test_support.hpp"

namespace sdt {
namespace {

double l2(const Latent& a, const Latent& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(double(a.values()[i]) - b.values()[i], 2);
  return std::sqrt(s);
}

TEST(MockDenoiser, DeterministicAndPromptSensitive) {
  const DdimScheduler sched;
  const MockDenoiser den(sched);
  std::mt19937_64 rng(1);
  const Latent x = test::random_latent(4, 8, 16, rng);
  const DenoiseContext ctx;
  EXPECT_EQ(den.predict(x, 10, "cow", ctx), den.predict(x, 10, "cow", ctx));
  EXPECT_GT(l2(den.predict(x, 10, "cow", ctx), den.predict(x, 10, "car", ctx)), 0.0);
}

TEST(MockDenoiser, ZeroLatentWithoutFieldGivesZeroResidual) {
  const DdimScheduler sched;
  const MockDenoiser den(sched, {.blur_radius = 2, .context_mix = 0.1, .prompt_gain = 0.0});
  const Latent r = den.predict(Latent(4, 8, 16), 30, "anything", {});
  for (float v : r.values()) EXPECT_EQ(v, 0.0f);
}

TEST(MockDenoiser, ResidualIsLinearInLatent) {
  const DdimScheduler sched;
  const MockDenoiser den(sched, {.blur_radius = 1, .context_mix = 0.2, .prompt_gain = 0.0});
  std::mt19937_64 rng(2);
  const Latent a = test::random_latent(4, 8, 16, rng), b = test::random_latent(4, 8, 16, rng);
  Latent sum(4, 8, 16);
  for (std::size_t i = 0; i < sum.size(); ++i) sum.values()[i] = 2.0f * a.values()[i] - 0.5f * b.values()[i];
  const Latent ra = den.predict(a, 7, "x", {}), rb = den.predict(b, 7, "x", {}), rs = den.predict(sum, 7, "x", {});
  for (std::size_t i = 0; i < sum.size(); ++i) {
    EXPECT_NEAR(rs.values()[i], 2.0 * ra.values()[i] - 0.5 * rb.values()[i], 1e-4);
  }
}

TEST(MockDenoiser, CircularPaddingWrapsBlur) {
  const DdimScheduler sched;
  const MockDenoiser den(sched, {.blur_radius = 2, .context_mix = 0.0, .prompt_gain = 0.0});
  Latent x(1, 4, 16);
  for (int y = 0; y < 4; ++y) x(y, 15) = 1.0f;
  DenoiseContext wrap;
  wrap.circular_padding = true;
  // column 0 sees column 15 only through the wrap
  EXPECT_NE(den.predict(x, 5, "p", wrap)(1, 0), den.predict(x, 5, "p", {})(1, 0));
}

TEST(DdimScheduler, ScaledLinearScheduleOracle) {
  const DdimScheduler sched({.steps = 1});
  EXPECT_EQ(sched.train_timestep(0), 1);
  const double s0 = std::sqrt(0.00085), s1 = std::sqrt(0.012);
  const double beta0 = s0 * s0, beta1 = std::pow(s0 + (s1 - s0) / 999.0, 2);
  const double ab = (1 - beta0) * (1 - beta1);
  EXPECT_NEAR(sched.alpha_bar(0), ab, 1e-15);

  // T = 1: the step returns the predicted clean latent in closed form
  std::mt19937_64 rng(3);
  const Latent x = test::random_latent(2, 3, 4, rng), e = test::random_latent(2, 3, 4, rng);
  const Latent out = sched.step(x, e, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(out.values()[i], (x.values()[i] - std::sqrt(1 - ab) * e.values()[i]) / std::sqrt(ab), 1e-6);
  }
}

TEST(DdimScheduler, LeadingSpacing) {
  const DdimScheduler sched;  // 50 steps over 1000
  EXPECT_EQ(sched.train_timestep(0), 1);
  EXPECT_EQ(sched.train_timestep(49), 981);
  for (int t = 1; t < 50; ++t) EXPECT_LT(sched.alpha_bar(t), sched.alpha_bar(t - 1));
  EXPECT_EQ(sched.alpha_bar_prev(0), 1.0);
  EXPECT_THROW(sched.alpha_bar(50), std::out_of_range);
  EXPECT_THROW(sched.step(Latent(1, 1, 1), Latent(1, 1, 1), -1), std::out_of_range);
}

TEST(DdimScheduler, ZeroResidualRescalesNoise) {
  const DdimScheduler sched({.steps = 10});
  std::mt19937_64 rng(4);
  const Latent x0 = test::random_latent(4, 4, 8, rng);
  Latent x = x0;
  const Latent zero(4, 4, 8);
  for (int t = 9; t >= 0; --t) x = sched.step(x, zero, t);
  const double scale = 1.0 / std::sqrt(sched.alpha_bar(9));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x.values()[i], x0.values()[i] * scale, 1e-4);
}

TEST(DdimScheduler, StepCommutesWithMaskSelection) {
  const DdimScheduler sched;
  std::mt19937_64 rng(5);
  const Latent a = test::random_latent(4, 8, 8, rng), b = test::random_latent(4, 8, 8, rng);
  const Latent ea = test::random_latent(4, 8, 8, rng), eb = test::random_latent(4, 8, 8, rng);
  Latent mix(4, 8, 8), emix(4, 8, 8);
  std::bernoulli_distribution bit(0.5);
  std::vector<bool> m(64);
  for (auto&& v : m) v = bit(rng);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 64; ++i) {
      mix.plane(c)[i] = m[i] ? a.plane(c)[i] : b.plane(c)[i];
      emix.plane(c)[i] = m[i] ? ea.plane(c)[i] : eb.plane(c)[i];
    }
  }
  const Latent sa = sched.step(a, ea, 20), sb = sched.step(b, eb, 20), sm = sched.step(mix, emix, 20);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 64; ++i) EXPECT_EQ(sm.plane(c)[i], m[i] ? sa.plane(c)[i] : sb.plane(c)[i]);
  }
  // and is linear for general weights
  Latent lin(4, 8, 8), elin(4, 8, 8);
  for (std::size_t i = 0; i < lin.size(); ++i) {
    lin.values()[i] = 0.3f * a.values()[i] + 0.7f * b.values()[i];
    elin.values()[i] = 0.3f * ea.values()[i] + 0.7f * eb.values()[i];
  }
  const Latent sl = sched.step(lin, elin, 20);
  for (std::size_t i = 0; i < lin.size(); ++i) {
    EXPECT_NEAR(sl.values()[i], 0.3 * sa.values()[i] + 0.7 * sb.values()[i], 1e-5);
  }
}

TEST(InitNoise, CouplingSemantics) {
  const auto coupled = init_noise(4, 8, 16, 42, true, 3);
  ASSERT_EQ(coupled.size(), 3u);
  EXPECT_EQ(coupled[0], coupled[1]);
  EXPECT_EQ(coupled[1], coupled[2]);
  const auto a = init_noise(4, 8, 16, 42, false, 3), b = init_noise(4, 8, 16, 42, false, 3);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_GT(l2(a[0], a[1]), 0.0);
  EXPECT_GT(l2(a[1], a[2]), 0.0);
  EXPECT_GT(l2(a[0], a[2]), 0.0);
  EXPECT_THROW(init_noise(1, 1, 1, 0, false, 0), std::invalid_argument);
}

TEST(InitNoise, StandardNormalMoments) {
  const Latent z = gaussian_latent(4, 64, 128, 9);
  double m = 0, v = 0;
  for (float x : z.values()) m += x;
  m /= z.size();
  for (float x : z.values()) v += (x - m) * (x - m);
  v /= z.size();
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(v, 1.0, 0.03);
}

TEST(MockCodec, ExactOnBlockConstantImages) {
  const MockCodec codec;
  std::mt19937_64 rng(6);
  const Latent small = test::random_latent(3, 4, 8, rng, 0.0, 1.0);
  Image img(3, 32, 64);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 64; ++x) img.at(c, y, x) = small.at(c, y / 8, x / 8);
    }
  }
  const Latent z = codec.encode(img);
  ASSERT_EQ(z.channels(), 4);
  ASSERT_EQ(z.height(), 4);
  EXPECT_LT(test::max_abs_diff(codec.decode(z), img), 1e-6);
  EXPECT_THROW(codec.encode(Image(3, 30, 64)), std::invalid_argument);
}

TEST(MockCodec, ColorLatentIsEncodedConstantImage) {
  const MockCodec codec;
  const Rgb rgb{0.25f, 0.5f, 0.875f};
  Image img(3, 16, 32);
  for (int c = 0; c < 3; ++c) {
    for (auto& v : img.plane(c)) v = rgb[c];
  }
  EXPECT_LT(test::max_abs_diff(codec.color_to_latent(rgb, 2, 4), codec.encode(img)), 1e-7);
}

TEST(Adapter, WireRoundTrip) {
  std::mt19937_64 rng(7);
  const Latent x = test::random_latent(4, 3, 5, rng);
  DenoiseContext ctx;
  ctx.branch = Branch::Perspective;
  ctx.view_index = 7;
  ctx.path_id = 2;
  ctx.foreground = true;
  ctx.lora = true;
  const std::string bytes = encode_predict_request(x, 12, "a cow", ctx);
  EXPECT_EQ(bytes.substr(0, 4), "SDTQ");
  const PredictRequest req = decode_predict_request(bytes);
  EXPECT_EQ(req.latent, x);
  EXPECT_EQ(req.t_index, 12);
  EXPECT_EQ(req.prompt, "a cow");
  EXPECT_EQ(req.context.branch, Branch::Perspective);
  EXPECT_EQ(req.context.view_index, 7);
  EXPECT_EQ(req.context.path_id, 2);
  EXPECT_TRUE(req.context.foreground);
  EXPECT_TRUE(req.context.lora);
  EXPECT_FALSE(req.context.circular_padding);

  const std::string resp = encode_predict_response(x);
  EXPECT_EQ(resp.size(), 4u + 4u * 4u + x.size() * 4u);
  EXPECT_EQ(decode_predict_response(resp), x);
}

TEST(Adapter, LittleEndianFloatLayout) {
  Latent one(1, 1, 2);
  one(0, 0) = 1.0f;
  one(0, 1) = -2.0f;
  const std::string resp = encode_predict_response(one);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000, little-endian
  EXPECT_EQ(resp.substr(20, 4), std::string("\x00\x00\x80\x3f", 4));
  EXPECT_EQ(resp.substr(24, 4), std::string("\x00\x00\x00\xc0", 4));
}

TEST(Adapter, MalformedMessagesThrow) {
  EXPECT_THROW(decode_predict_request("SDTX"), BackendError);
  EXPECT_THROW(decode_predict_request("SDTQ\x01\x00\x00\x00"), BackendError);
  std::string ok = encode_predict_response(Latent(1, 2, 2));
  EXPECT_THROW(decode_predict_response(ok + "x"), BackendError);
  EXPECT_THROW(decode_predict_response(ok.substr(0, ok.size() - 1)), BackendError);
}

TEST(Adapter, HttpRoundTripMatchesInProcessDenoiser) {
  const DdimScheduler sched;
  const MockDenoiser mock(sched);
  httplib::Server server;
  server.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    res.set_content(handle_predict_request(mock, req.body), "application/octet-stream");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const AdapterDenoiser remote("http://127.0.0.1:" + std::to_string(port), 10);
  std::mt19937_64 rng(8);
  const Latent x = test::random_latent(4, 8, 16, rng);
  DenoiseContext ctx;
  ctx.circular_padding = true;
  EXPECT_EQ(remote.predict(x, 25, "a sheep", ctx), mock.predict(x, 25, "a sheep", ctx));
  server.stop();
  th.join();
}

TEST(Adapter, UnreachableServerIsBackendError) {
  const AdapterDenoiser remote("127.0.0.1:1", 2);
  EXPECT_THROW(remote.predict(Latent(4, 2, 4), 0, "x", {}), BackendError);
  EXPECT_THROW(AdapterDenoiser("127.0.0.1:notaport"), BackendError);
}

}  // namespace
}  // namespace sdt
