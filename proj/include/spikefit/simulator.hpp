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

#ifndef SPIKEFIT_SIMULATOR_HPP
#define SPIKEFIT_SIMULATOR_HPP

#include <cstdint>
#include <memory>
#include <string>

#include "spikefit/core.hpp"
#include "spikefit/spiking.hpp"

namespace spikefit
{
enum class SceneKind { MovingBar, LinearGradientDrift, PiecewiseConstantBlocks, SpikingFieldPlayback };

SceneKind parse_scene_kind(const std::string & name);
std::string to_string(SceneKind kind);

/*
 * Analytic synthetic scenes. Coordinates are in source pixels; pixel x
 * covers [x, x + 1). Bar and gradient scenes vary along x only and are box
 * filtered over each pixel footprint, so their time profiles are
 * piecewise linear.
 *
 *  - moving bar: vertical bar of bar_width px centred at t = 0, moving at
 *    velocity px/s, foreground on background.
 *  - linear gradient drift: background -> foreground ramp of ramp_span px
 *    centred at t = 0, moving at velocity px/s.
 *  - piecewise constant blocks: block_size squares in checker parity that
 *    switch once, at -T/2 + T (i + 1) / (blocks + 1) for block i.
 *  - spiking field playback: clamp(eval(field, t), 0, 1).
 */
struct SceneSpec
{
  Resolution resolution{64, 64};
  ExposureWindow window{1.0};
  SceneKind kind = SceneKind::MovingBar;
  double velocity = 32.0;
  double bar_width = 8.0;
  double ramp_span = 16.0;
  double foreground = 1.0;
  double background = 0.0;
  int block_size = 8;
  std::shared_ptr<const SpikingField> playback;
};

// Throws ConfigError on non-finite velocity, levels outside [0, 1], etc.
void check_scene(const SceneSpec & spec);

struct ThresholdPair
{
  double c_plus = 0.2;
  double c_minus = -0.2;
};

struct EventNoise
{
  double drop_rate = 0.0;  // probability of discarding each event
  double jitter = 0.0;     // std-dev of Gaussian timestamp jitter, seconds
  std::uint64_t seed = 0;
};

struct SimulationOptions
{
  ThresholdPair thresholds;
  double epsilon_floor = 1e-3;  // added before the logarithm
  int time_samples = 2001;
  EventNoise noise;
};

Frame sample_scene(const SceneSpec & spec, double t);
// Same scene sampled on a finer grid (output pixel footprints mapped back to
// source coordinates); used for super-resolution ground truth.
Frame sample_scene(const SceneSpec & spec, double t, Resolution output);

// Trapezoid-rule exposure average; closed form for spiking field playback.
Frame synthesize_blur(const SceneSpec & spec, int quadrature_samples);

FrameSequence sample_video(const SceneSpec & spec, std::span<const double> timestamps);

EventStream simulate_events(const SceneSpec & spec, const SimulationOptions & options);

}  // namespace spikefit

#endif  // SPIKEFIT_SIMULATOR_HPP
