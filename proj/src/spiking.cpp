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

#include "spikefit/spiking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spikefit/errors.hpp"

namespace spikefit
{
int segment_index(std::span<const double> keypoints, double t)
{
  // interior keypoints are keypoints[1 .. n-1]
  const auto first = keypoints.begin() + 1;
  const auto last = keypoints.end() - 1;
  return static_cast<int>(std::upper_bound(first, last, t) - first);
}

int SpikingPixel::segment_at(double t) const { return segment_index(keypoints, t); }

namespace
{
void check_keypoints(std::span<const double> kp, std::size_t n, const ExposureWindow & window)
{
  if (n < 1) {
    throw ConfigError("spiking pixel needs at least one segment");
  }
  if (kp.size() != n + 1) {
    throw ConfigError("keypoint count must be segments + 1");
  }
  if (kp.front() != window.begin() || kp.back() != window.end()) {
    throw ConfigError("keypoint endpoints must equal -T/2 and T/2");
  }
  for (std::size_t i = 1; i < kp.size(); ++i) {
    if (!(kp[i] > kp[i - 1])) {
      throw ConfigError("keypoints must be strictly increasing");
    }
  }
}
}  // namespace

void check_pixel(const SpikingPixel & pixel, const ExposureWindow & window)
{
  const std::size_t n = pixel.slopes.size();
  if (pixel.intercepts.size() != n) {
    throw ConfigError("slope and intercept counts differ");
  }
  check_keypoints(pixel.keypoints, n, window);
}

void check_field(const SpikingField & field)
{
  if (field.pixels.size() != field.resolution.pixels()) {
    throw ConfigError("field pixel count does not match resolution");
  }
  for (const auto & p : field.pixels) {
    if (p.segments() != field.n) {
      throw ConfigError("all pixels must share the segment count");
    }
    check_pixel(p, field.window);
  }
}

void check_field(const KernelField & field)
{
  if (field.k < 1 || field.k % 2 == 0) {
    throw ConfigError("kernel size must be odd and positive");
  }
  if (field.pixels.size() != field.resolution.pixels()) {
    throw ConfigError("field pixel count does not match resolution");
  }
  const auto coeffs = static_cast<std::size_t>(field.taps() * field.n);
  for (const auto & p : field.pixels) {
    if (p.slopes.size() != coeffs || p.intercepts.size() != coeffs) {
      throw ConfigError("kernel pixel coefficient count must be k*k*n");
    }
    check_keypoints(p.keypoints, static_cast<std::size_t>(field.n), field.window);
  }
}

std::vector<double> keypoints_from_widths(std::span<const double> raw_widths, const ExposureWindow & window)
{
  const std::size_t n = raw_widths.size();
  if (n < 1) {
    throw ConfigError("need at least one width");
  }
  const double top = *std::max_element(raw_widths.begin(), raw_widths.end());
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(raw_widths[i] - top);
    total += w[i];
  }
  const double T = window.length();
  std::vector<double> kp(n + 1);
  kp[0] = window.begin();
  for (std::size_t i = 1; i < n; ++i) {
    kp[i] = kp[i - 1] + T * (w[i - 1] / total);
  }
  kp[n] = window.end();

  // Forward pass keeps interior keypoints above their left neighbour, the
  // backward pass keeps them below the pinned end.
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < n; ++i) {
    kp[i] = std::max(kp[i], std::nextafter(kp[i - 1], inf));
  }
  for (std::size_t i = n - 1; i >= 1; --i) {
    kp[i] = std::min(kp[i], std::nextafter(kp[i + 1], -inf));
  }
  return kp;
}

std::vector<double> raw_widths_from_keypoints(std::span<const double> keypoints)
{
  std::vector<double> raw(keypoints.size() - 1);
  for (std::size_t i = 0; i + 1 < keypoints.size(); ++i) {
    raw[i] = std::log(keypoints[i + 1] - keypoints[i]);
  }
  return raw;
}

double piecewise_mean(std::span<const double> slopes, std::span<const double> intercepts,
                      std::span<const double> keypoints)
{
  double acc = 0.0;
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    const double a = keypoints[i];
    const double b = keypoints[i + 1];
    acc += 0.5 * slopes[i] * (b - a) * (b + a) + intercepts[i] * (b - a);
  }
  return acc / (keypoints.back() - keypoints.front());
}

double eval(const SpikingPixel & pixel, double t)
{
  if (!(t >= pixel.keypoints.front() && t <= pixel.keypoints.back())) {
    throw RangeError("evaluation time outside exposure window");
  }
  return pixel.c + pixel.piece(pixel.segment_at(t), t);
}

double integral_mean(const SpikingPixel & pixel)
{
  return pixel.c + piecewise_mean(pixel.slopes, pixel.intercepts, pixel.keypoints);
}

double normalization_constant(std::span<const double> slopes, std::span<const double> intercepts,
                              std::span<const double> keypoints, double blur)
{
  return blur - piecewise_mean(slopes, intercepts, keypoints);
}

std::vector<double> neighborhood(const Frame & image, int x, int y, int k)
{
  const int r = k / 2;
  std::vector<double> hood(static_cast<std::size_t>(k * k), 0.0);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int xx = x + dx;
      const int yy = y + dy;
      if (image.resolution.contains(xx, yy)) {
        hood[static_cast<std::size_t>((dy + r) * k + (dx + r))] = image.at(yy, xx);
      }
    }
  }
  return hood;
}

double eval_kernel(const KernelField & field, const Frame & blurry, int x, int y, double t)
{
  if (!field.resolution.contains(x, y)) {
    throw RangeError("kernel evaluation pixel out of bounds");
  }
  if (!(blurry.resolution == field.resolution)) {
    throw ShapeError("blurry image resolution differs from field");
  }
  if (!field.window.contains(t)) {
    throw RangeError("evaluation time outside exposure window");
  }
  const KernelPixel & px = field.at(y, x);
  const int seg = segment_index(px.keypoints, t);
  const auto hood = neighborhood(blurry, x, y, field.k);
  double acc = 0.0;
  for (int tap = 0; tap < field.taps(); ++tap) {
    const std::size_t j = static_cast<std::size_t>(tap * field.n + seg);
    acc += (px.slopes[j] * t + px.intercepts[j]) * hood[static_cast<std::size_t>(tap)];
  }
  return px.c + acc;
}

namespace
{
double kernel_piecewise_mean(std::span<const double> slopes, std::span<const double> intercepts,
                             std::span<const double> keypoints, std::span<const double> hood)
{
  const std::size_t n = keypoints.size() - 1;
  double acc = 0.0;
  for (std::size_t tap = 0; tap < hood.size(); ++tap) {
    if (hood[tap] == 0.0) {
      continue;
    }
    acc += hood[tap] * piecewise_mean(slopes.subspan(tap * n, n), intercepts.subspan(tap * n, n), keypoints);
  }
  return acc;
}
}  // namespace

double kernel_integral_mean(const KernelPixel & pixel, std::span<const double> hood)
{
  return pixel.c + kernel_piecewise_mean(pixel.slopes, pixel.intercepts, pixel.keypoints, hood);
}

double kernel_normalization_constant(std::span<const double> slopes, std::span<const double> intercepts,
                                     std::span<const double> keypoints, std::span<const double> hood,
                                     double blur)
{
  return blur - kernel_piecewise_mean(slopes, intercepts, keypoints, hood);
}

}  // namespace spikefit
