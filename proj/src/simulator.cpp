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

#include "spikefit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spikefit/errors.hpp"

namespace spikefit
{
SceneKind parse_scene_kind(const std::string & name)
{
  if (name == "moving-bar") return SceneKind::MovingBar;
  if (name == "linear-gradient-drift") return SceneKind::LinearGradientDrift;
  if (name == "piecewise-constant-blocks") return SceneKind::PiecewiseConstantBlocks;
  if (name == "spiking-field-playback") return SceneKind::SpikingFieldPlayback;
  throw ConfigError("unknown scene kind '" + name + "'");
}

std::string to_string(SceneKind kind)
{
  switch (kind) {
    case SceneKind::MovingBar:
      return "moving-bar";
    case SceneKind::LinearGradientDrift:
      return "linear-gradient-drift";
    case SceneKind::PiecewiseConstantBlocks:
      return "piecewise-constant-blocks";
    case SceneKind::SpikingFieldPlayback:
      return "spiking-field-playback";
  }
  throw ConfigError("unknown scene kind");
}

void check_scene(const SceneSpec & spec)
{
  if (spec.resolution.height < 1 || spec.resolution.width < 1) {
    throw ConfigError("scene resolution must be positive");
  }
  if (!std::isfinite(spec.velocity)) {
    throw ConfigError("scene velocity must be finite");
  }
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(spec.foreground) || !unit(spec.background)) {
    throw ConfigError("scene intensity levels must lie in [0, 1]");
  }
  switch (spec.kind) {
    case SceneKind::MovingBar:
      if (!(spec.bar_width > 0.0) || !std::isfinite(spec.bar_width)) throw ConfigError("bar width must be positive");
      break;
    case SceneKind::LinearGradientDrift:
      if (!(spec.ramp_span > 0.0) || !std::isfinite(spec.ramp_span)) throw ConfigError("ramp span must be positive");
      break;
    case SceneKind::PiecewiseConstantBlocks:
      if (spec.block_size < 1) throw ConfigError("block size must be positive");
      break;
    case SceneKind::SpikingFieldPlayback:
      if (!spec.playback) throw ConfigError("playback scene needs a field");
      if (!(spec.playback->resolution == spec.resolution) || !(spec.playback->window == spec.window)) {
        throw ConfigError("playback field must match scene resolution and window");
      }
      break;
  }
}

namespace
{
// Antiderivatives of the x-profiles; a pixel value is their mean over the footprint.
double bar_antiderivative(double u, double left, double width) { return std::clamp(u - left, 0.0, width); }

double ramp_antiderivative(double u, double left, double span)
{
  const double d = u - left;
  if (d <= 0.0) return 0.0;
  if (d <= span) return 0.5 * d * d / span;
  return 0.5 * span + (d - span);
}

struct Footprint
{
  double u0;
  double u1;
};

Footprint footprint(int x, int out_width, int src_width)
{
  const double scale = static_cast<double>(src_width) / out_width;
  return {x * scale, (x + 1) * scale};
}

double block_value(const SceneSpec & spec, double u, double v, double t)
{
  const int bs = spec.block_size;
  const int nbx = (spec.resolution.width + bs - 1) / bs;
  const int nby = (spec.resolution.height + bs - 1) / bs;
  const int bx = std::clamp(static_cast<int>(std::floor(u / bs)), 0, nbx - 1);
  const int by = std::clamp(static_cast<int>(std::floor(v / bs)), 0, nby - 1);
  const int idx = by * nbx + bx;
  const auto & w = spec.window;
  const double t_switch = w.begin() + w.length() * (idx + 1) / (nbx * nby + 1);
  const bool rising = (bx + by) % 2 == 0;
  const double before = rising ? spec.background : spec.foreground;
  const double after = rising ? spec.foreground : spec.background;
  return t < t_switch ? before : after;
}
}  // namespace

Frame sample_scene(const SceneSpec & spec, double t, Resolution output)
{
  check_scene(spec);
  if (!spec.window.contains(t)) {
    throw RangeError("scene sample time outside exposure window");
  }
  if (output.height < 1 || output.width < 1) {
    throw ConfigError("output resolution must be positive");
  }
  Frame frame(output, t);
  const int w = spec.resolution.width;
  const int h = spec.resolution.height;
  const double span = spec.foreground - spec.background;
  switch (spec.kind) {
    case SceneKind::MovingBar: {
      const double left = 0.5 * (w - spec.bar_width) + spec.velocity * t;
      for (int x = 0; x < output.width; ++x) {
        const auto fp = footprint(x, output.width, w);
        const double cover = (bar_antiderivative(fp.u1, left, spec.bar_width) -
                              bar_antiderivative(fp.u0, left, spec.bar_width)) / (fp.u1 - fp.u0);
        const double v = spec.background + span * cover;
        for (int y = 0; y < output.height; ++y) frame.at(y, x) = v;
      }
      break;
    }
    case SceneKind::LinearGradientDrift: {
      const double left = 0.5 * (w - spec.ramp_span) + spec.velocity * t;
      for (int x = 0; x < output.width; ++x) {
        const auto fp = footprint(x, output.width, w);
        const double level = (ramp_antiderivative(fp.u1, left, spec.ramp_span) -
                              ramp_antiderivative(fp.u0, left, spec.ramp_span)) / (fp.u1 - fp.u0);
        const double v = spec.background + span * level;
        for (int y = 0; y < output.height; ++y) frame.at(y, x) = v;
      }
      break;
    }
    case SceneKind::PiecewiseConstantBlocks: {
      for (int y = 0; y < output.height; ++y) {
        const double v = (y + 0.5) * h / output.height;
        for (int x = 0; x < output.width; ++x) {
          const double u = (x + 0.5) * w / output.width;
          frame.at(y, x) = block_value(spec, u, v, t);
        }
      }
      break;
    }
    case SceneKind::SpikingFieldPlayback: {
      if (!(output == spec.resolution)) {
        throw ConfigError("spiking field playback cannot be resampled");
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          frame.at(y, x) = std::clamp(eval(spec.playback->at(y, x), t), 0.0, 1.0);
        }
      }
      break;
    }
  }
  return frame;
}

Frame sample_scene(const SceneSpec & spec, double t) { return sample_scene(spec, t, spec.resolution); }

Frame synthesize_blur(const SceneSpec & spec, int quadrature_samples)
{
  check_scene(spec);
  if (quadrature_samples < 2) {
    throw ConfigError("blur quadrature needs at least two samples");
  }
  Frame blur(spec.resolution, 0.0);
  if (spec.kind == SceneKind::SpikingFieldPlayback) {
    for (std::size_t i = 0; i < blur.data.size(); ++i) {
      blur.data[i] = integral_mean(spec.playback->pixels[i]);
    }
    return blur;
  }
  const auto & w = spec.window;
  const int intervals = quadrature_samples - 1;
  for (int j = 0; j <= intervals; ++j) {
    const double t = j == intervals ? w.end() : w.begin() + w.length() * j / intervals;
    const double weight = (j == 0 || j == intervals) ? 0.5 : 1.0;
    const Frame f = sample_scene(spec, t);
    for (std::size_t i = 0; i < blur.data.size(); ++i) {
      blur.data[i] += weight * f.data[i];
    }
  }
  for (auto & v : blur.data) {
    v /= intervals;
  }
  return blur;
}

FrameSequence sample_video(const SceneSpec & spec, std::span<const double> timestamps)
{
  FrameSequence seq;
  for (double t : timestamps) {
    seq.push_back(sample_scene(spec, t));
  }
  return seq;
}

EventStream simulate_events(const SceneSpec & spec, const SimulationOptions & options)
{
  check_scene(spec);
  const auto & th = options.thresholds;
  if (!(th.c_plus > 0.0) || !(th.c_minus < 0.0)) {
    throw ConfigError("thresholds must satisfy c_plus > 0 > c_minus");
  }
  if (!(options.epsilon_floor > 0.0)) {
    throw ConfigError("log floor must be positive");
  }
  if (options.time_samples < 2) {
    throw ConfigError("event simulation needs at least two time samples");
  }
  const auto & noise = options.noise;
  if (!(noise.drop_rate >= 0.0 && noise.drop_rate < 1.0) || !(noise.jitter >= 0.0)) {
    throw ConfigError("noise drop rate must be in [0, 1) and jitter non-negative");
  }

  const auto & w = spec.window;
  const int intervals = options.time_samples - 1;
  const Resolution res = spec.resolution;
  auto log_frame = [&](double t) {
    Frame f = sample_scene(spec, t);
    for (auto & v : f.data) v = std::log(v + options.epsilon_floor);
    return f;
  };

  EventStream stream{res, w, {}};
  Frame prev = log_frame(w.begin());
  std::vector<double> ref = prev.data;
  double t_prev = w.begin();
  for (int j = 1; j <= intervals; ++j) {
    const double t = j == intervals ? w.end() : w.begin() + w.length() * j / intervals;
    const Frame cur = log_frame(t);
    for (std::size_t i = 0; i < cur.data.size(); ++i) {
      const double l0 = prev.data[i];
      const double l1 = cur.data[i];
      const double delta = l1 - ref[i];
      double step = 0.0;
      std::int8_t pol = 0;
      if (delta >= th.c_plus) {
        step = th.c_plus;
        pol = 1;
      } else if (delta <= th.c_minus) {
        step = th.c_minus;
        pol = -1;
      } else {
        continue;
      }
      const auto count = static_cast<long>(std::floor(delta / step));
      for (long k = 1; k <= count; ++k) {
        const double level = ref[i] + k * step;
        const double frac = std::clamp((level - l0) / (l1 - l0), 0.0, 1.0);
        Event e;
        e.x = static_cast<std::uint16_t>(i % res.width);
        e.y = static_cast<std::uint16_t>(i / res.width);
        e.t = t_prev + frac * (t - t_prev);
        e.p = pol;
        stream.events.push_back(e);
      }
      ref[i] += count * step;
    }
    prev = cur;
    t_prev = t;
  }

  if (noise.drop_rate > 0.0 || noise.jitter > 0.0) {
    std::mt19937_64 rng(noise.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, noise.jitter > 0.0 ? noise.jitter : 1.0);
    std::vector<Event> kept;
    kept.reserve(stream.events.size());
    for (Event e : stream.events) {
      if (noise.drop_rate > 0.0 && uni(rng) < noise.drop_rate) continue;
      if (noise.jitter > 0.0) e.t = std::clamp(e.t + gauss(rng), w.begin(), w.end());
      kept.push_back(e);
    }
    stream.events = std::move(kept);
  }
  sort_events(stream.events);
  return stream;
}

}  // namespace spikefit
