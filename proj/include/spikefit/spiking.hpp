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

#ifndef SPIKEFIT_SPIKING_HPP
#define SPIKEFIT_SPIKING_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "spikefit/core.hpp"

namespace spikefit
{
/*
 * Piecewise-linear time -> intensity mapping of one pixel.
 *
 * Segment i covers [t_i, t_{i+1}) and the last one is closed, so the value
 * at an interior keypoint is taken from the segment on its right. The jump
 * between the left limit and that value is the "spike". The constant c is
 * added to every segment and is normally chosen so that the temporal mean
 * matches the blurry pixel.
 */
struct SpikingPixel
{
  std::vector<double> keypoints;   // n + 1, strictly increasing, pinned to +-T/2
  std::vector<double> slopes;      // n, intensity per second
  std::vector<double> intercepts;  // n
  double c = 0.0;

  int segments() const { return static_cast<int>(slopes.size()); }
  // index of the segment that contains t (t assumed inside the window)
  int segment_at(double t) const;
  // m_i t + b_i, without c
  double piece(int i, double t) const { return slopes[i] * t + intercepts[i]; }

  friend bool operator==(const SpikingPixel &, const SpikingPixel &) = default;
};

// Segment lookup shared by all representations: number of interior keypoints <= t.
int segment_index(std::span<const double> keypoints, double t);

// Throws ConfigError when sizes or keypoint ordering/endpoints are inconsistent.
void check_pixel(const SpikingPixel & pixel, const ExposureWindow & window);

struct SpikingField
{
  Resolution resolution;
  ExposureWindow window;
  int n = 1;
  std::vector<SpikingPixel> pixels;  // row-major

  SpikingPixel & at(int y, int x) { return pixels[static_cast<std::size_t>(y) * resolution.width + x]; }
  const SpikingPixel & at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * resolution.width + x]; }

  friend bool operator==(const SpikingField &, const SpikingField &) = default;
};

// k x k taps per pixel sharing one set of keypoints and one constant c.
struct KernelPixel
{
  std::vector<double> keypoints;   // n + 1
  std::vector<double> slopes;      // k*k*n, tap-major (tap * n + segment)
  std::vector<double> intercepts;  // k*k*n
  double c = 0.0;

  friend bool operator==(const KernelPixel &, const KernelPixel &) = default;
};

struct KernelField
{
  Resolution resolution;
  ExposureWindow window;
  int n = 1;
  int k = 1;  // odd
  std::vector<KernelPixel> pixels;

  int taps() const { return k * k; }
  KernelPixel & at(int y, int x) { return pixels[static_cast<std::size_t>(y) * resolution.width + x]; }
  const KernelPixel & at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * resolution.width + x]; }

  friend bool operator==(const KernelField &, const KernelField &) = default;
};

void check_field(const SpikingField & field);
void check_field(const KernelField & field);

// Widths = T * softmax(raw); keypoints are their running sum from -T/2 with
// the last keypoint pinned to T/2. Widths below the floating-point spacing
// are widened to one ulp so the keypoints stay strictly increasing.
std::vector<double> keypoints_from_widths(std::span<const double> raw_widths, const ExposureWindow & window);

// A preimage of keypoints_from_widths (log widths; softmax is shift invariant).
std::vector<double> raw_widths_from_keypoints(std::span<const double> keypoints);

// (1/T) * sum_i [ m_i/2 (t_{i+1}^2 - t_i^2) + b_i (t_{i+1} - t_i) ]
double piecewise_mean(std::span<const double> slopes, std::span<const double> intercepts,
                      std::span<const double> keypoints);

// c + m_i t + b_i, unclamped. Throws RangeError outside the window.
double eval(const SpikingPixel & pixel, double t);

// Closed-form temporal mean over the window, including c.
double integral_mean(const SpikingPixel & pixel);

// The unique c with integral_mean == blur.
double normalization_constant(std::span<const double> slopes, std::span<const double> intercepts,
                              std::span<const double> keypoints, double blur);

// k x k neighbourhood of (x, y), zero padded, row-major.
std::vector<double> neighborhood(const Frame & image, int x, int y, int k);

// c + <K_xy(t), N(B_xy)>; throws RangeError for out-of-bounds pixel or time.
double eval_kernel(const KernelField & field, const Frame & blurry, int x, int y, double t);

// Temporal mean of one kernel pixel against a given neighbourhood, including c.
double kernel_integral_mean(const KernelPixel & pixel, std::span<const double> hood);

// c making the temporal mean of eval_kernel equal to blur.
double kernel_normalization_constant(std::span<const double> slopes, std::span<const double> intercepts,
                                     std::span<const double> keypoints, std::span<const double> hood,
                                     double blur);

}  // namespace spikefit

#endif  // SPIKEFIT_SPIKING_HPP
