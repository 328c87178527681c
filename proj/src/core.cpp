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

#include "spikefit/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "spikefit/errors.hpp"

namespace spikefit
{
ExposureWindow::ExposureWindow(double length) : length_(length)
{
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw ConfigError("exposure length must be positive and finite");
  }
}

bool event_less(const Event & a, const Event & b)
{
  return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
}

void sort_events(std::vector<Event> & events) { std::stable_sort(events.begin(), events.end(), event_less); }

ValidationReport validate_stream(const EventStream & stream)
{
  ValidationReport report;
  const auto & ev = stream.events;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const Event & e = ev[i];
    if (!stream.resolution.contains(e.x, e.y)) {
      std::ostringstream os;
      os << "event " << i << ": coordinate (" << e.x << ", " << e.y << ") out of range";
      report.violations.push_back({ViolationKind::CoordinateOutOfRange, i, os.str()});
    }
    if (!std::isfinite(e.t) || !stream.window.contains(e.t)) {
      std::ostringstream os;
      os << "event " << i << ": timestamp " << e.t << " outside window";
      report.violations.push_back({ViolationKind::TimestampOutsideWindow, i, os.str()});
    }
    if (e.p != 1 && e.p != -1) {
      std::ostringstream os;
      os << "event " << i << ": invalid polarity " << static_cast<int>(e.p);
      report.violations.push_back({ViolationKind::InvalidPolarity, i, os.str()});
    }
    if (i > 0 && event_less(e, ev[i - 1])) {
      std::ostringstream os;
      os << "event " << i << ": out of canonical order";
      report.violations.push_back({ViolationKind::Unsorted, i, os.str()});
    }
  }
  return report;
}

EventStream slice_by_time(const EventStream & stream, double t0, double t1)
{
  const auto & w = stream.window;
  if (!(t0 >= w.begin() && t0 <= t1 && t1 <= w.end())) {
    throw RangeError("slice interval outside exposure window");
  }
  EventStream out{stream.resolution, stream.window, {}};
  std::copy_if(stream.events.begin(), stream.events.end(), std::back_inserter(out.events),
               [&](const Event & e) { return e.t >= t0 && e.t < t1; });
  return out;
}

EventHistogram::EventHistogram(int bins, Resolution resolution)
: bins_(bins), resolution_(resolution), data_(static_cast<std::size_t>(bins) * resolution.pixels(), 0)
{
  if (bins < 1) {
    throw ConfigError("histogram needs at least one bin");
  }
}

int & EventHistogram::at(int bin, int y, int x)
{
  return data_[(static_cast<std::size_t>(bin) * resolution_.height + y) * resolution_.width + x];
}

int EventHistogram::at(int bin, int y, int x) const
{
  return data_[(static_cast<std::size_t>(bin) * resolution_.height + y) * resolution_.width + x];
}

int histogram_bin(double t, const ExposureWindow & window, int bins)
{
  const double u = (t - window.begin()) / window.length() * bins;
  const auto b = static_cast<long long>(std::floor(u));
  return static_cast<int>(std::clamp<long long>(b, 0, bins - 1));
}

EventHistogram voxelize(const EventStream & stream, int bins)
{
  EventHistogram hist(bins, stream.resolution);
  for (const Event & e : stream.events) {
    hist.at(histogram_bin(e.t, stream.window, bins), e.y, e.x) += e.p;
  }
  return hist;
}

Frame::Frame(Resolution res, double timestamp, double fill) : resolution(res), t(timestamp), data(res.pixels(), fill)
{
}

bool Frame::in_unit_range() const
{
  return std::all_of(data.begin(), data.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

FrameSequence::FrameSequence(std::vector<Frame> frames)
{
  frames_.reserve(frames.size());
  for (auto & f : frames) {
    push_back(std::move(f));
  }
}

void FrameSequence::push_back(Frame frame)
{
  if (!frames_.empty()) {
    if (!(frame.resolution == frames_.front().resolution)) {
      throw ShapeError("frame resolution differs from sequence");
    }
    if (!(frame.t > frames_.back().t)) {
      throw RangeError("frame timestamps must be strictly increasing");
    }
  }
  if (frame.data.size() != frame.resolution.pixels()) {
    throw ShapeError("frame data size does not match resolution");
  }
  frames_.push_back(std::move(frame));
}

std::vector<double> uniform_timestamps(const ExposureWindow & window, int count)
{
  if (count < 1) {
    throw ConfigError("frame count must be positive");
  }
  std::vector<double> ts(static_cast<std::size_t>(count));
  const double length = window.length();
  for (int i = 0; i < count; ++i) {
    ts[static_cast<std::size_t>(i)] = window.begin() + length * i / count;
  }
  return ts;
}

}  // namespace spikefit
