// Copyright 2026 The spikefit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spikefit/errors.hpp"
#include "spikefit/fitter.hpp"
#include "spikefit/metrics.hpp"
#include "spikefit/render.hpp"
#include "spikefit/simulator.hpp"

using namespace spikefit;

namespace
{
// widths, slopes and intercepts chosen so the rendered values stay in (0.1, 0.9)
PixelParams gentle_params(std::mt19937_64 & rng, int n)
{
  std::uniform_real_distribution<double> raw(-0.7, 0.7), m(-0.3, 0.3), b(0.3, 0.7);
  PixelParams p;
  for (int i = 0; i < n; ++i) {
    p.raw_widths.push_back(raw(rng));
    p.slopes.push_back(m(rng));
    p.intercepts.push_back(b(rng));
  }
  return p;
}

double distance_to_keypoints(const SpikingPixel & px, double t)
{
  double d = 1e300;
  for (double k : px.keypoints) d = std::min(d, std::abs(k - t));
  return d;
}

std::vector<double> times_away_from(std::mt19937_64 & rng, const SpikingPixel & px, int count, double gap)
{
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> ts;
  while (static_cast<int>(ts.size()) < count) {
    const double t = u(rng);
    if (distance_to_keypoints(px, t) > gap) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  return ts;
}

double oracle_supervised_loss(const SpikingPixel & px, const PixelObservations & obs, LossKind loss)
{
  double total = 0.0;
  for (std::size_t j = 0; j < obs.sample_t.size(); ++j) {
    const double r = std::clamp(oracle::value(px, obs.sample_t[j]), 0.0, 1.0) - obs.sample_v[j];
    total += loss == LossKind::L2 ? r * r : std::abs(r);
  }
  return total / static_cast<double>(obs.sample_t.size());
}

// central differences of the reported loss, one parameter at a time
void expect_gradient_matches(const PixelParams & p, const PixelObservations & obs, const FitConfig & cfg, double tol)
{
  const ExposureWindow w(1.0);
  const LossGradient g = loss_and_gradient(p, w, obs, cfg);
  const double h = 1e-6;
  auto probe = [&](std::vector<double> PixelParams::*member, const std::vector<double> & analytic, const char * name) {
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      PixelParams up = p, down = p;
      (up.*member)[i] += h;
      (down.*member)[i] -= h;
      const double fd = (loss_and_gradient(up, w, obs, cfg).loss - loss_and_gradient(down, w, obs, cfg).loss) / (2 * h);
      EXPECT_NEAR(analytic[i], fd, tol * std::max(1.0, std::abs(fd))) << name << "[" << i << "]";
    }
  };
  probe(&PixelParams::slopes, g.d_slopes, "slopes");
  probe(&PixelParams::intercepts, g.d_intercepts, "intercepts");
  probe(&PixelParams::raw_widths, g.d_raw_widths, "raw_widths");
}

FrameSequence constant_video(Resolution res, double level, int count)
{
  std::vector<Frame> frames;
  for (double t : uniform_timestamps(ExposureWindow(1.0), count)) frames.emplace_back(res, t, level);
  return FrameSequence(frames);
}
}  // namespace

TEST(Objective, SupervisedLossMatchesOracle)
{
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const PixelParams p = gentle_params(rng, 1 + trial % 8);
    PixelObservations obs;
    obs.blur = u(rng);
    for (double t : uniform_timestamps(ExposureWindow(1.0), 13)) {
      obs.sample_t.push_back(t);
      obs.sample_v.push_back(u(rng));
    }
    const SpikingPixel px = assemble_pixel(p, ExposureWindow(1.0), obs.blur);
    for (LossKind loss : {LossKind::L1, LossKind::L2}) {
      FitConfig cfg;
      cfg.loss = loss;
      EXPECT_NEAR(loss_and_gradient(p, ExposureWindow(1.0), obs, cfg).loss, oracle_supervised_loss(px, obs, loss), 1e-14);
    }
  }
}

TEST(Objective, AssembledPixelHoldsBlur)
{
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 100; ++trial) {
    const PixelParams p = gentle_params(rng, 1 + trial % 9);
    const SpikingPixel px = assemble_pixel(p, ExposureWindow(1.0), 0.3);
    EXPECT_NEAR(oracle::quadrature_mean(px, 20000), 0.3, 1e-12);
    EXPECT_EQ(px.keypoints, keypoints_from_widths(p.raw_widths, ExposureWindow(1.0)));
  }
}

TEST(Objective, SupervisedGradientMatchesFiniteDifferences)
{
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    const PixelParams p = gentle_params(rng, 2 + trial % 6);
    PixelObservations obs;
    obs.blur = 0.5;
    const SpikingPixel px = assemble_pixel(p, ExposureWindow(1.0), obs.blur);
    obs.sample_t = times_away_from(rng, px, 15, 1e-3);
    for (std::size_t j = 0; j < 15; ++j) obs.sample_v.push_back(u(rng));
    FitConfig cfg;
    cfg.loss = LossKind::L2;
    expect_gradient_matches(p, obs, cfg, 1e-6);
  }
}

TEST(Objective, EventGradientMatchesFiniteDifferences)
{
  std::mt19937_64 rng(84);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const PixelParams p = gentle_params(rng, 2 + trial % 6);
    PixelObservations obs;
    obs.blur = 0.5;
    const SpikingPixel px = assemble_pixel(p, ExposureWindow(1.0), obs.blur);
    obs.event_t = times_away_from(rng, px, 6, 1e-3);
    for (int k = 0; k < 6; ++k) obs.event_p.push_back(u(rng) < 0.5 ? 1 : -1);
    FitConfig cfg;
    cfg.mode = FitMode::EventOnly;
    cfg.loss = LossKind::L2;
    cfg.smooth_weight = 0.0;  // the smoothness terms are not differentiable at zero
    expect_gradient_matches(p, obs, cfg, 1e-5);
  }
}

TEST(Objective, ZeroGradientAtExactFit)
{
  std::mt19937_64 rng(85);
  for (int trial = 0; trial < 20; ++trial) {
    const PixelParams p = gentle_params(rng, 1 + trial % 7);
    PixelObservations obs;
    obs.blur = 0.45;
    const SpikingPixel px = assemble_pixel(p, ExposureWindow(1.0), obs.blur);
    obs.sample_t = times_away_from(rng, px, 20, 1e-3);
    for (double t : obs.sample_t) obs.sample_v.push_back(oracle::value(px, t));
    FitConfig cfg;
    cfg.loss = LossKind::L2;
    const LossGradient g = loss_and_gradient(p, ExposureWindow(1.0), obs, cfg);
    EXPECT_LE(g.loss, 1e-30);
    for (double d : g.d_slopes) EXPECT_NEAR(d, 0.0, 1e-14);
    for (double d : g.d_intercepts) EXPECT_NEAR(d, 0.0, 1e-14);
    for (double d : g.d_raw_widths) EXPECT_NEAR(d, 0.0, 1e-14);
    // L1 residuals are only zero up to rounding, so its subgradient is not
    cfg.loss = LossKind::L1;
    EXPECT_LE(loss_and_gradient(p, ExposureWindow(1.0), obs, cfg).loss, 1e-15);
  }
}

TEST(Objective, RejectsBadParameters)
{
  PixelParams p{{0.0, 0.0}, {0.0}, {0.0, 0.0}};
  PixelObservations obs{0.5, {0.0}, {0.5}, {}, {}};
  EXPECT_THROW(loss_and_gradient(p, ExposureWindow(1.0), obs, FitConfig{}), ConfigError);
  p.slopes = {0.0, std::nan("")};
  EXPECT_THROW(loss_and_gradient(p, ExposureWindow(1.0), obs, FitConfig{}), NumericError);
}

TEST(FitPixel, ConstantVideoIsExact)
{
  FitConfig cfg;
  cfg.n = 4;
  PixelObservations obs;
  obs.blur = 0.6;
  obs.sample_t = uniform_timestamps(ExposureWindow(1.0), 12);
  obs.sample_v.assign(12, 0.6);
  const PixelFit fit = fit_pixel_supervised(obs, ExposureWindow(1.0), cfg);
  EXPECT_LE(fit.losses.back(), 1e-10);
  EXPECT_TRUE(fit.converged);
  for (double t : {-0.5, -0.2, 0.1, 0.5}) EXPECT_NEAR(eval(fit.pixel, t), 0.6, 1e-9);
}

TEST(FitPixel, EventOnlyStep)
{
  // 0.25 -> 0.5 at t = 0: one positive event, blur 0.375
  FitConfig cfg;
  cfg.mode = FitMode::EventOnly;
  cfg.n = 2;
  cfg.event_threshold = std::log(2.0);
  cfg.log_floor = 1e-9;
  PixelObservations obs{0.375, {}, {}, {0.0}, {1}};
  const PixelFit fit = fit_pixel_event_only(obs, ExposureWindow(1.0), cfg);
  EXPECT_LE(fit.losses.back(), 1e-6);
  EXPECT_NEAR(integral_mean(fit.pixel), 0.375, 1e-12);
  EXPECT_NEAR(eval(fit.pixel, -0.3), 0.25, 1e-3);
  EXPECT_NEAR(eval(fit.pixel, 0.3), 0.5, 1e-3);
}

TEST(FitPixel, NoEventsGivesBlur)
{
  FitConfig cfg;
  cfg.mode = FitMode::EventOnly;
  PixelObservations obs{0.42, {}, {}, {}, {}};
  const PixelFit fit = fit_pixel_event_only(obs, ExposureWindow(1.0), cfg);
  for (double t : {-0.5, -0.1, 0.3, 0.5}) EXPECT_NEAR(eval(fit.pixel, t), 0.42, 1e-12);
}

TEST(FitPixel, LossesMonotoneAndBlurExactEveryIteration)
{
  std::mt19937_64 rng(86);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    for (FitMode mode : {FitMode::Supervised, FitMode::EventOnly}) {
      FitConfig cfg;
      cfg.mode = mode;
      cfg.n = 3 + trial % 5;
      cfg.loss = trial % 2 ? LossKind::L1 : LossKind::L2;
      PixelObservations obs;
      obs.blur = u(rng);
      obs.sample_t = uniform_timestamps(ExposureWindow(1.0), 9);
      for (int j = 0; j < 9; ++j) obs.sample_v.push_back(u(rng));
      for (int k = 0; k < 7; ++k) obs.event_t.push_back(-0.5 + u(rng));
      std::sort(obs.event_t.begin(), obs.event_t.end());
      for (int k = 0; k < 7; ++k) obs.event_p.push_back(u(rng) < 0.5 ? 1 : -1);
      int calls = 0;
      auto observer = [&](int it, const SpikingPixel & px) {
        EXPECT_EQ(it, ++calls);
        EXPECT_NEAR(integral_mean(px), obs.blur, 1e-12);
        EXPECT_NO_THROW(check_pixel(px, ExposureWindow(1.0)));
      };
      const PixelFit fit = mode == FitMode::Supervised ? fit_pixel_supervised(obs, ExposureWindow(1.0), cfg, {}, observer)
                                                       : fit_pixel_event_only(obs, ExposureWindow(1.0), cfg, {}, observer);
      EXPECT_EQ(calls, static_cast<int>(fit.losses.size()));
      for (std::size_t i = 1; i < fit.losses.size(); ++i) EXPECT_LE(fit.losses[i], fit.losses[i - 1]);
      EXPECT_NEAR(integral_mean(fit.pixel), obs.blur, 1e-12);
    }
  }
}

TEST(FitPixel, FrozenKeypointsStayPut)
{
  FitConfig cfg;
  cfg.n = 3;
  cfg.freeze_keypoints = true;
  PixelObservations obs{0.5, {-0.4, -0.1, 0.2, 0.45}, {0.2, 0.9, 0.3, 0.6}, {}, {}};
  const std::vector<double> kp{-0.5, -0.25, 0.3, 0.5};
  const PixelFit fit = fit_pixel_supervised(obs, ExposureWindow(1.0), cfg, kp);
  EXPECT_EQ(fit.pixel.keypoints, kp);
  EXPECT_THROW(fit_pixel_supervised(obs, ExposureWindow(1.0), cfg, {-0.5, 0.5}), ConfigError);
}

TEST(FitField, ConstantVideo)
{
  FitConfig cfg;
  cfg.n = 3;
  const Frame blur({3, 4}, 0.0, 0.7);
  const auto fit = fit_supervised(blur, constant_video({3, 4}, 0.7, 8), ExposureWindow(1.0), cfg);
  EXPECT_LE(fit.report.final_loss, 1e-10);
  const auto & field = std::get<SpikingField>(fit.field);
  for (double v : render_frame(field, blur, 0.25).data) EXPECT_NEAR(v, 0.7, 1e-9);
}

TEST(FitField, EmptyEventsGiveConstantField)
{
  FitConfig cfg;
  cfg.mode = FitMode::EventOnly;
  Frame blur({2, 3}, 0.0);
  for (std::size_t i = 0; i < 6; ++i) blur.data[i] = 0.1 * static_cast<double>(i + 1);
  const auto fit = fit_event_only(blur, EventStream{{2, 3}, ExposureWindow(1.0), {}}, cfg);
  for (double t : {-0.5, 0.0, 0.5}) {
    const Frame f = render_frame(fit.field, blur, t);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(f.data[i], blur.data[i], 1e-12);
  }
}

TEST(FitField, DeterministicAcrossThreadCounts)
{
  SceneSpec scene;
  scene.resolution = {4, 24};
  scene.velocity = 16.0;
  scene.background = 0.2;
  scene.foreground = 0.8;
  const Frame blur = synthesize_blur(scene, 2001);
  const auto events = simulate_events(scene, SimulationOptions{});
  const auto targets = sample_video(scene, uniform_timestamps(scene.window, 12));
  FitConfig one, many;
  one.threads = 1;
  many.threads = 4;
  EXPECT_EQ(std::get<SpikingField>(fit_supervised(blur, targets, scene.window, one).field),
            std::get<SpikingField>(fit_supervised(blur, targets, scene.window, many).field));
  one.mode = many.mode = FitMode::EventOnly;
  EXPECT_EQ(fit_event_only(blur, events, one).field, fit_event_only(blur, events, many).field);
}

TEST(FitField, PixelsAreIndependent)
{
  SceneSpec scene;
  scene.resolution = {3, 20};
  scene.velocity = 16.0;
  scene.background = 0.2;
  scene.foreground = 0.8;
  const Frame blur = synthesize_blur(scene, 2001);
  const auto events = simulate_events(scene, SimulationOptions{});
  FitConfig cfg;
  cfg.mode = FitMode::EventOnly;
  const auto full = fit_event_only(blur, events, cfg);
  for (int x : {3, 9, 14}) {
    const Frame one({1, 1}, 0.0, blur.at(1, x));
    EventStream sub{{1, 1}, events.window, {}};
    for (const Event & e : events.events) {
      if (e.x == x && e.y == 1) sub.events.push_back(Event{0, 0, e.t, e.p});
    }
    EXPECT_EQ(fit_event_only(one, sub, cfg).field.pixels[0], full.field.at(1, x)) << "x=" << x;
  }
}

TEST(FitField, SupervisedMovingBar)
{
  SceneSpec scene;
  scene.resolution = {12, 48};
  scene.velocity = 24.0;
  scene.background = 0.1;
  scene.foreground = 0.9;
  const auto ts = uniform_timestamps(scene.window, 30);
  const auto targets = sample_video(scene, ts);
  const Frame blur = synthesize_blur(scene, 4001);
  FitConfig cfg;
  const auto fit = fit_supervised(blur, targets, scene.window, cfg);
  RenderRequest r;
  r.timestamps = ts;
  const auto m = sequence_metrics(render_video(fit.field, blur, r), targets);
  EXPECT_GE(m.mean.psnr, 30.0);
  for (std::size_t i = 1; i < fit.report.losses.size(); ++i) EXPECT_LE(fit.report.losses[i], fit.report.losses[i - 1]);
}

TEST(FitField, KernelModeRendersLikePlainFit)
{
  SceneSpec scene;
  scene.resolution = {6, 12};
  scene.velocity = 12.0;
  scene.background = 0.2;
  scene.foreground = 0.7;
  const auto ts = uniform_timestamps(scene.window, 10);
  const auto targets = sample_video(scene, ts);
  const Frame blur = synthesize_blur(scene, 2001);
  FitConfig plain, kernel;
  kernel.k = 3;
  const auto a = fit_supervised(blur, targets, scene.window, plain);
  const auto b = fit_supervised(blur, targets, scene.window, kernel);
  ASSERT_TRUE(std::holds_alternative<KernelField>(b.field));
  const auto & kf = std::get<KernelField>(b.field);
  EXPECT_EQ(kf.k, 3);
  EXPECT_NO_THROW(check_field(kf));
  for (double t : {-0.45, -0.1, 0.0, 0.33}) {
    const Frame fa = render_frame(a.field, blur, t, false);
    const Frame fb = render_frame(b.field, blur, t, false);
    for (std::size_t i = 0; i < fa.data.size(); ++i) EXPECT_NEAR(fa.data[i], fb.data[i], 1e-9);
  }
  FitConfig bad = kernel;
  bad.mode = FitMode::EventOnly;
  EXPECT_THROW(fit_event_only(blur, simulate_events(scene, SimulationOptions{}), bad), ConfigError);
}

TEST(FitField, InputErrors)
{
  const Frame blur({2, 2}, 0.0, 0.5);
  FitConfig cfg;
  EXPECT_THROW(fit_supervised(blur, FrameSequence{}, ExposureWindow(1.0), cfg), ShapeError);
  EXPECT_THROW(fit_supervised(blur, constant_video({2, 3}, 0.5, 3), ExposureWindow(1.0), cfg), ShapeError);
  FitHooks hooks;
  hooks.initial_keypoints.resize(3);
  EXPECT_THROW(fit_supervised(blur, constant_video({2, 2}, 0.5, 3), ExposureWindow(1.0), cfg, hooks), ShapeError);
  cfg.mode = FitMode::EventOnly;
  EXPECT_THROW(fit_event_only(blur, EventStream{{3, 2}, ExposureWindow(1.0), {}}, cfg), ShapeError);
  EventStream bad{{2, 2}, ExposureWindow(1.0), {Event{0, 0, 0.2, 1}, Event{0, 0, 0.1, 1}}};
  EXPECT_THROW(fit_event_only(blur, bad, cfg), ConfigError);
  EXPECT_EQ(parse_fit_mode("event-only"), FitMode::EventOnly);
  EXPECT_EQ(parse_loss_kind("l1"), LossKind::L1);
  EXPECT_THROW(parse_loss_kind("huber"), ConfigError);
}
