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

#ifndef SPIKEFIT_CORE_HPP
#define SPIKEFIT_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace spikefit
{
struct Resolution
{
  int height = 0;
  int width = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const Resolution &, const Resolution &) = default;
};

// Exposure interval [-T/2, T/2] centred on the blurry capture.
class ExposureWindow
{
public:
  ExposureWindow() = default;
  explicit ExposureWindow(double length);

  double length() const { return length_; }
  double begin() const { return -0.5 * length_; }
  double end() const { return 0.5 * length_; }
  bool contains(double t) const { return t >= begin() && t <= end(); }

  friend bool operator==(const ExposureWindow &, const ExposureWindow &) = default;

private:
  double length_ = 1.0;
};

struct Event
{
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;  // seconds relative to the window centre
  std::int8_t p = 1;

  friend bool operator==(const Event &, const Event &) = default;
};

// Canonical order: t ascending, ties broken by (y, x, p).
bool event_less(const Event & a, const Event & b);
void sort_events(std::vector<Event> & events);

struct EventStream
{
  Resolution resolution;
  ExposureWindow window;
  std::vector<Event> events;

  friend bool operator==(const EventStream &, const EventStream &) = default;
};

enum class ViolationKind { CoordinateOutOfRange, TimestampOutsideWindow, Unsorted, InvalidPolarity };

struct Violation
{
  ViolationKind kind;
  std::size_t index;  // offending event
  std::string message;
};

struct ValidationReport
{
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_stream(const EventStream & stream);

// Events with t0 <= t < t1, order preserved. Throws RangeError when the
// interval is not inside the stream's window.
EventStream slice_by_time(const EventStream & stream, double t0, double t1);

// m x h x w signed polarity histogram.
class EventHistogram
{
public:
  EventHistogram(int bins, Resolution resolution);

  int bins() const { return bins_; }
  const Resolution & resolution() const { return resolution_; }
  int & at(int bin, int y, int x);
  int at(int bin, int y, int x) const;
  const std::vector<int> & data() const { return data_; }

private:
  int bins_;
  Resolution resolution_;
  std::vector<int> data_;
};

// Bin index floor((t + T/2) / T * bins), clamped to [0, bins - 1].
int histogram_bin(double t, const ExposureWindow & window, int bins);
EventHistogram voxelize(const EventStream & stream, int bins);

// Normalized intensity image, row-major. Values are nominally in [0, 1];
// unclamped renders may leave that range.
struct Frame
{
  Resolution resolution;
  double t = 0.0;
  std::vector<double> data;

  Frame() = default;
  Frame(Resolution res, double timestamp, double fill = 0.0);

  double & at(int y, int x) { return data[static_cast<std::size_t>(y) * resolution.width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * resolution.width + x]; }
  bool in_unit_range() const;

  friend bool operator==(const Frame &, const Frame &) = default;
};

// Frames with strictly increasing timestamps and a shared resolution.
class FrameSequence
{
public:
  FrameSequence() = default;
  explicit FrameSequence(std::vector<Frame> frames);

  // Throws ShapeError on resolution mismatch, RangeError on non-increasing t.
  void push_back(Frame frame);

  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const Frame & operator[](std::size_t i) const { return frames_[i]; }
  const std::vector<Frame> & frames() const { return frames_; }
  auto begin() const { return frames_.begin(); }
  auto end() const { return frames_.end(); }

private:
  std::vector<Frame> frames_;
};

// N timestamps -T/2 + i*T/N, i = 0..N-1. Rates that divide each other
// produce bitwise-identical shared timestamps.
std::vector<double> uniform_timestamps(const ExposureWindow & window, int count);

}  // namespace spikefit

#endif  // SPIKEFIT_CORE_HPP
