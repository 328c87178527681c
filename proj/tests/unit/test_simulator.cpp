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
#include <map>
#include <memory>

#include "oracles.hpp"
#include "spikefit/errors.hpp"
#include "spikefit/simulator.hpp"

using namespace spikefit;

namespace
{
SceneSpec bar_scene(double velocity)
{
  SceneSpec s;
  s.resolution = {2, 64};
  s.kind = SceneKind::MovingBar;
  s.velocity = velocity;
  s.bar_width = 8.0;
  return s;
}

// 1x1 playback of a step from lo to hi at t = 0
SceneSpec step_scene(double lo, double hi)
{
  auto f = std::make_shared<SpikingField>();
  f->resolution = {1, 1};
  f->n = 2;
  f->pixels.push_back(SpikingPixel{{-0.5, 0.0, 0.5}, {0.0, 0.0}, {lo, hi}, 0.0});
  SceneSpec s;
  s.resolution = {1, 1};
  s.kind = SceneKind::SpikingFieldPlayback;
  s.playback = f;
  return s;
}

std::map<std::size_t, std::vector<Event>> by_pixel(const EventStream & s)
{
  std::map<std::size_t, std::vector<Event>> out;
  for (const Event & e : s.events) out[static_cast<std::size_t>(e.y) * s.resolution.width + e.x].push_back(e);
  return out;
}
}  // namespace

TEST(Scene, KindNamesRoundTrip)
{
  for (auto k : {SceneKind::MovingBar, SceneKind::LinearGradientDrift, SceneKind::PiecewiseConstantBlocks,
                 SceneKind::SpikingFieldPlayback}) {
    EXPECT_EQ(parse_scene_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_scene_kind("waterfall"), ConfigError);
}

TEST(Scene, Validation)
{
  SceneSpec s = bar_scene(32.0);
  s.foreground = 1.5;
  EXPECT_THROW(check_scene(s), ConfigError);
  s = bar_scene(std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(check_scene(s), ConfigError);
  s = bar_scene(32.0);
  s.kind = SceneKind::SpikingFieldPlayback;
  EXPECT_THROW(check_scene(s), ConfigError);
}

TEST(Scene, ConstantPlaybackIsConstant)
{
  auto f = std::make_shared<SpikingField>();
  f->resolution = {3, 4};
  f->n = 2;
  for (int i = 0; i < 12; ++i) f->pixels.push_back(SpikingPixel{{-0.5, 0.2, 0.5}, {0, 0}, {0.1, 0.1}, 0.3});
  SceneSpec s;
  s.resolution = {3, 4};
  s.kind = SceneKind::SpikingFieldPlayback;
  s.playback = f;
  for (double t : {-0.5, -0.1, 0.2, 0.5}) {
    const Frame fr = sample_scene(s, t);
    for (double v : fr.data) EXPECT_NEAR(v, 0.4, 1e-15);
  }
}

TEST(Scene, StaticBarFramesIdentical)
{
  const SceneSpec s = bar_scene(0.0);
  const Frame a = sample_scene(s, -0.5);
  for (double t : {-0.2, 0.0, 0.37, 0.5}) EXPECT_EQ(sample_scene(s, t).data, a.data);
  const Frame blur = synthesize_blur(s, 101);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(blur.data[i], a.data[i], 1e-15);
  EXPECT_TRUE(simulate_events(s, SimulationOptions{}).events.empty());
}

TEST(Scene, BarShiftsByWholePixels)
{
  const SceneSpec s = bar_scene(32.0);
  for (double t : {-0.4, -0.1, 0.2}) {
    const double dt = 3.0 / 32.0;  // three pixels
    const Frame a = sample_scene(s, t);
    const Frame b = sample_scene(s, t + dt);
    for (int x = 3; x < 64; ++x) EXPECT_NEAR(b.at(0, x), a.at(0, x - 3), 1e-12) << "x=" << x;
  }
}

TEST(Scene, SweptPixelBlurIsDwellTime)
{
  // the bar spans [12, 20] at the start and [44, 52] at the end; pixels it
  // fully enters and leaves in between are covered for bar_width / velocity
  SceneSpec s = bar_scene(32.0);
  s.resolution = {1, 64};
  const Frame blur = synthesize_blur(s, 100001);
  for (int x = 20; x < 44; ++x) EXPECT_NEAR(blur.at(0, x), 8.0 / 32.0, 1e-8) << "x=" << x;
}

TEST(Scene, PlaybackBlurIsClosedForm)
{
  std::mt19937_64 rng(31);
  auto f = std::make_shared<SpikingField>();
  f->resolution = {2, 3};
  f->n = 5;
  for (int i = 0; i < 6; ++i) f->pixels.push_back(oracle::bounded_pixel(rng, 5, 1.0));
  SceneSpec s;
  s.resolution = {2, 3};
  s.kind = SceneKind::SpikingFieldPlayback;
  s.playback = f;
  const Frame blur = synthesize_blur(s, 2);
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(blur.data[static_cast<std::size_t>(i)], oracle::quadrature_mean(f->pixels[static_cast<std::size_t>(i)], 20000), 1e-12);
  }
}

TEST(Scene, SuperResolutionTruthAveragesToSource)
{
  SceneSpec s = bar_scene(32.0);
  s.kind = SceneKind::LinearGradientDrift;
  s.ramp_span = 10.0;
  const Frame lo = sample_scene(s, 0.1);
  const Frame hi = sample_scene(s, 0.1, Resolution{8, 256});
  for (int x = 0; x < 64; ++x) {
    double avg = 0.0;
    for (int k = 0; k < 4; ++k) avg += hi.at(0, 4 * x + k) / 4.0;
    EXPECT_NEAR(avg, lo.at(0, x), 1e-12);
  }
}

TEST(Events, StaticSceneIsSilent)
{
  EXPECT_TRUE(simulate_events(step_scene(0.4, 0.4), SimulationOptions{}).events.empty());
}

TEST(Events, SingleStepOneEvent)
{
  SimulationOptions o;
  o.thresholds = {std::log(2.0) - 1e-9, -(std::log(2.0) - 1e-9)};
  o.epsilon_floor = 1e-12;
  const auto s = simulate_events(step_scene(0.25, 0.5), o);
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0].p, 1);
  EXPECT_NEAR(s.events[0].t, 0.0, 1.0 / 2000);
}

TEST(Events, QuadrupleStepTwoEvents)
{
  SimulationOptions o;
  o.thresholds = {std::log(2.0) - 1e-9, -(std::log(2.0) - 1e-9)};
  o.epsilon_floor = 1e-12;
  const auto s = simulate_events(step_scene(0.25, 1.0), o);
  ASSERT_EQ(s.events.size(), 2u);
  for (const Event & e : s.events) {
    EXPECT_EQ(e.p, 1);
    EXPECT_NEAR(e.t, 0.0, 1.0 / 2000);
  }
}

TEST(Events, StreamIsValid)
{
  const auto s = simulate_events(bar_scene(32.0), SimulationOptions{});
  EXPECT_FALSE(s.events.empty());
  EXPECT_TRUE(validate_stream(s).ok());
}

TEST(Events, MonotoneScenesHaveSinglePolarity)
{
  SceneSpec s = bar_scene(24.0);
  s.kind = SceneKind::LinearGradientDrift;
  s.ramp_span = 20.0;
  s.background = 0.1;
  s.foreground = 0.9;
  const auto ev = simulate_events(s, SimulationOptions{});
  ASSERT_FALSE(ev.events.empty());
  for (const auto & [pixel, list] : by_pixel(ev)) {
    for (const Event & e : list) EXPECT_EQ(e.p, list.front().p) << "pixel " << pixel;
  }
}

TEST(Events, CountNonIncreasingInThreshold)
{
  const SceneSpec s = bar_scene(32.0);
  SimulationOptions lo, hi;
  lo.thresholds = {0.2, -0.2};
  hi.thresholds = {0.35, -0.2};
  auto count_pos = [](const EventStream & st) {
    std::map<std::size_t, int> c;
    for (const Event & e : st.events) c[static_cast<std::size_t>(e.y) * st.resolution.width + e.x] += e.p > 0;
    return c;
  };
  auto a = count_pos(simulate_events(s, lo));
  auto b = count_pos(simulate_events(s, hi));
  for (const auto & [px, n] : b) EXPECT_LE(n, a[px]);
}

TEST(Events, ReferenceStaysWithinThreshold)
{
  SceneSpec s = bar_scene(20.0);
  s.background = 0.15;
  s.foreground = 0.85;
  SimulationOptions o;
  o.thresholds = {0.2, -0.25};
  const auto ev = simulate_events(s, o);
  const Frame first = sample_scene(s, s.window.begin());
  const Frame last = sample_scene(s, s.window.end());
  auto lists = by_pixel(ev);
  for (std::size_t i = 0; i < first.data.size(); ++i) {
    double ref = std::log(first.data[i] + o.epsilon_floor);
    for (const Event & e : lists[i]) ref += e.p > 0 ? o.thresholds.c_plus : o.thresholds.c_minus;
    EXPECT_LT(std::abs(std::log(last.data[i] + o.epsilon_floor) - ref), 0.25);
  }
}

TEST(Events, StableUnderSampleRefinement)
{
  SceneSpec s = bar_scene(32.0);
  s.background = 0.2;
  s.foreground = 0.8;
  SimulationOptions a, b;
  a.time_samples = 2001;
  b.time_samples = 4001;
  auto la = by_pixel(simulate_events(s, a));
  auto lb = by_pixel(simulate_events(s, b));
  ASSERT_EQ(la.size(), lb.size());
  for (auto & [px, list] : la) {
    const auto & other = lb[px];
    ASSERT_EQ(list.size(), other.size()) << "pixel " << px;
    for (std::size_t k = 0; k < list.size(); ++k) {
      EXPECT_EQ(list[k].p, other[k].p);
      EXPECT_LE(std::abs(list[k].t - other[k].t), 1.0 / 2000);
    }
  }
}

TEST(Events, NoiseIsSeededAndBounded)
{
  const SceneSpec s = bar_scene(32.0);
  SimulationOptions clean, noisy;
  noisy.noise = {0.3, 0.01, 7};
  const auto base = simulate_events(s, clean);
  const auto a = simulate_events(s, noisy);
  const auto b = simulate_events(s, noisy);
  EXPECT_EQ(a, b);
  EXPECT_LT(a.events.size(), base.events.size());
  EXPECT_TRUE(validate_stream(a).ok());
  noisy.noise.drop_rate = 1.0;
  EXPECT_THROW(simulate_events(s, noisy), ConfigError);
}

TEST(Events, RejectsBadOptions)
{
  const SceneSpec s = bar_scene(32.0);
  SimulationOptions o;
  o.thresholds = {0.2, 0.1};
  EXPECT_THROW(simulate_events(s, o), ConfigError);
  o = SimulationOptions{};
  o.epsilon_floor = 0.0;
  EXPECT_THROW(simulate_events(s, o), ConfigError);
  o = SimulationOptions{};
  o.time_samples = 1;
  EXPECT_THROW(simulate_events(s, o), ConfigError);
  EXPECT_THROW(synthesize_blur(s, 1), ConfigError);
}
