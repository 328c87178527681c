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

#ifndef SPIKEFIT_METRICS_HPP
#define SPIKEFIT_METRICS_HPP

#include <iosfwd>
#include <vector>

#include "spikefit/core.hpp"

namespace spikefit
{
/// Mean squared error on the [0, 1] scale.
double mse(const Frame & a, const Frame & b);

/// 10 log10(1 / mse) with peak 1.0; +infinity for identical frames.
double psnr(const Frame & a, const Frame & b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over window positions that lie
/// fully inside the image. Frames must be at least 11x11.
double ssim(const Frame & a, const Frame & b);

struct FrameMetrics
{
  double t = 0.0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SequenceMetrics
{
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;  // unweighted; t is unused
};

// Sequences must have equal length and co-timed frames
// (|t_a - t_b| <= time_tolerance). Mean PSNR is +inf if any frame is exact.
SequenceMetrics sequence_metrics(const FrameSequence & a, const FrameSequence & b, double time_tolerance = 1e-9);

// frame_index,t,mse,psnr,ssim then one row per frame and a final "mean" row.
void write_metrics_csv(std::ostream & os, const SequenceMetrics & metrics);

}  // namespace spikefit

#endif  // SPIKEFIT_METRICS_HPP
