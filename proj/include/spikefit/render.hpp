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


#ifndef SPIKEFIT_RENDER_HPP
#define SPIKEFIT_RENDER_HPP

#include <vector>

#include "spikefit/core.hpp"
#include "spikefit/fitter.hpp"
#include "spikefit/spiking.hpp"

namespace spikefit
{
struct RenderRequest
{
  std::vector<double> timestamps;  // each inside the window
  Resolution output;               // zero: same as the field
  bool clamp = true;
  int threads = 0;
};

// Throws RangeError for t outside the window, ShapeError when the blurry
// image does not match the field.
Frame render_frame(const SpikingField & field, const Frame & blurry, double t, bool clamp = true);
Frame render_frame(const KernelField & field, const Frame & blurry, double t, bool clamp = true);
Frame render_frame(const FittedField & field, const Frame & blurry, double t, bool clamp = true);

// Timestamps must be strictly increasing. Output resolution, if set, must
// equal the field's.
FrameSequence render_video(const SpikingField & field, const Frame & blurry, const RenderRequest & request);
FrameSequence render_video(const KernelField & field, const Frame & blurry, const RenderRequest & request);
FrameSequence render_video(const FittedField & field, const Frame & blurry, const RenderRequest & request);

/*
 * Upscaled render by an integer factor s. Output pixel (x', y') sits at
 * source coordinate ((x' + 0.5) / s - 0.5, (y' + 0.5) / s - 0.5). Slopes,
 * intercepts, raw widths and blur are bilinearly interpolated from the four
 * neighbours (linearly extrapolated in the half-pixel border, blur clamped
 * to [0, 1]), then keypoints and c are rebuilt. Samples that land on a
 * source pixel take its parameters unchanged.
 */
SpikingField upscale_field(const SpikingField & field, const Frame & blurry, int scale, Frame * upscaled_blur = nullptr);
FrameSequence render_superres(const SpikingField & field, const Frame & blurry, const RenderRequest & request);
FrameSequence render_superres(const FittedField & field, const Frame & blurry, const RenderRequest & request);

// Catmull-Rom bicubic resize by an integer factor, same pixel convention,
// clamp-to-edge borders.
Frame bicubic_upscale(const Frame & frame, int scale);

}  // namespace spikefit

#endif  // SPIKEFIT_RENDER_HPP
