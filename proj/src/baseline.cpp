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

#include "spikefit/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "spikefit/errors.hpp"

namespace spikefit
{
FrameSequence edi_reconstruct(const Frame & blurry, const EventStream & events, double c_thr,
                              std::span<const double> timestamps)
{
  if (!(c_thr > 0.0)) {
    throw ConfigError("EDI threshold must be positive");
  }
  if (!(blurry.resolution == events.resolution)) {
    throw ShapeError("blurry image and events differ in resolution");
  }
  const auto & win = events.window;
  for (double t : timestamps) {
    if (!win.contains(t)) throw RangeError("render timestamp outside exposure window");
  }

  // per-pixel event lists, already in time order
  const std::size_t npix = blurry.resolution.pixels();
  std::vector<std::vector<const Event *>> per_pixel(npix);
  for (const Event & e : events.events) {
    per_pixel[static_cast<std::size_t>(e.y) * blurry.resolution.width + e.x].push_back(&e);
  }

  std::vector<Frame> frames;
  for (double t : timestamps) frames.emplace_back(blurry.resolution, t);

  for (std::size_t i = 0; i < npix; ++i) {
    auto & list = per_pixel[i];
    std::stable_sort(list.begin(), list.end(), [](const Event * a, const Event * b) { return a->t < b->t; });

    double integral = 0.0;
    double level = 0.0;
    double t_prev = win.begin();
    for (const Event * e : list) {
      integral += std::exp(c_thr * level) * (e->t - t_prev);
      level += e->p;
      t_prev = e->t;
    }
    integral += std::exp(c_thr * level) * (win.end() - t_prev);
    // B / mean(exp(c E)); equals B exactly when there are no events
    const double l0 = blurry.data[i] / (integral / win.length());

    for (auto & f : frames) {
      double count = 0.0;
      for (const Event * e : list) {
        if (e->t > f.t) break;
        count += e->p;
      }
      f.data[i] = std::clamp(l0 * std::exp(c_thr * count), 0.0, 1.0);
    }
  }
  return FrameSequence(std::move(frames));
}

}  // namespace spikefit
