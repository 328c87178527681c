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


#include "spikefit/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "parallel.hpp"
#include "spikefit/errors.hpp"

namespace spikefit
{
namespace
{
void check_render_inputs(const Resolution & field_res, const ExposureWindow & window, const Frame & blurry, double t)
{
  if (!(blurry.resolution == field_res)) throw ShapeError("blurry image does not match the field resolution");
  if (!window.contains(t)) throw RangeError("render timestamp outside exposure window");
}

void check_request(const RenderRequest & request, const ExposureWindow & window)
{
  for (std::size_t i = 0; i < request.timestamps.size(); ++i) {
    if (!window.contains(request.timestamps[i])) throw RangeError("render timestamp outside exposure window");
    if (i > 0 && !(request.timestamps[i] > request.timestamps[i - 1])) {
      throw RangeError("render timestamps must be strictly increasing");
    }
  }
}

double finish(double v, bool clamp) { return clamp ? std::clamp(v, 0.0, 1.0) : v; }

template <class Field>
FrameSequence render_video_impl(const Field & field, const Frame & blurry, const RenderRequest & request)
{
  check_request(request, field.window);
  if (request.output.pixels() != 0 && !(request.output == field.resolution)) {
    throw ShapeError("plain render cannot change resolution; use render_superres");
  }
  std::vector<Frame> frames(request.timestamps.size());
  detail::parallel_for(frames.size(), request.threads, [&](std::size_t i) {
    frames[i] = render_frame(field, blurry, request.timestamps[i], request.clamp);
  });
  return FrameSequence(std::move(frames));
}

}  // namespace

Frame render_frame(const SpikingField & field, const Frame & blurry, double t, bool clamp)
{
  check_render_inputs(field.resolution, field.window, blurry, t);
  Frame out(field.resolution, t);
  for (std::size_t i = 0; i < field.pixels.size(); ++i) out.data[i] = finish(eval(field.pixels[i], t), clamp);
  return out;
}

Frame render_frame(const KernelField & field, const Frame & blurry, double t, bool clamp)
{
  check_render_inputs(field.resolution, field.window, blurry, t);
  Frame out(field.resolution, t);
  for (int y = 0; y < field.resolution.height; ++y) {
    for (int x = 0; x < field.resolution.width; ++x) out.at(y, x) = finish(eval_kernel(field, blurry, x, y, t), clamp);
  }
  return out;
}

Frame render_frame(const FittedField & field, const Frame & blurry, double t, bool clamp)
{
  return std::visit([&](const auto & f) { return render_frame(f, blurry, t, clamp); }, field);
}

FrameSequence render_video(const SpikingField & field, const Frame & blurry, const RenderRequest & request)
{
  return render_video_impl(field, blurry, request);
}

FrameSequence render_video(const KernelField & field, const Frame & blurry, const RenderRequest & request)
{
  return render_video_impl(field, blurry, request);
}

FrameSequence render_video(const FittedField & field, const Frame & blurry, const RenderRequest & request)
{
  return std::visit([&](const auto & f) { return render_video(f, blurry, request); }, field);
}

namespace
{
struct Tap
{
  int x0, x1;
  double f;  // weight of x1
};

// Inside the image this is plain linear interpolation; in the half-pixel
// border it extrapolates from the two outermost pixels (f < 0 or f > 1).
Tap source_tap(int out, int scale, int size)
{
  const double s = (out + 0.5) / scale - 0.5;
  if (size == 1) return {0, 0, 0.0};
  const int x0 = std::clamp(static_cast<int>(std::floor(s)), 0, size - 2);
  const double f = s - x0;
  if (f == 1.0) return {x0 + 1, x0 + 1, 0.0};
  return {x0, x0 + 1, f};
}
}  // namespace

SpikingField upscale_field(const SpikingField & field, const Frame & blurry, int scale, Frame * upscaled_blur)
{
  if (scale < 1) throw ConfigError("scale must be a positive integer");
  if (!(blurry.resolution == field.resolution)) throw ShapeError("blurry image does not match the field resolution");
  const int h = field.resolution.height;
  const int w = field.resolution.width;
  const int n = field.n;
  const Resolution out_res{h * scale, w * scale};

  std::vector<std::vector<double>> widths(field.pixels.size());
  for (std::size_t i = 0; i < field.pixels.size(); ++i) widths[i] = raw_widths_from_keypoints(field.pixels[i].keypoints);

  SpikingField out{out_res, field.window, n, std::vector<SpikingPixel>(out_res.pixels())};
  if (upscaled_blur) *upscaled_blur = Frame(out_res, blurry.t);
  for (int yo = 0; yo < out_res.height; ++yo) {
    const Tap ty = source_tap(yo, scale, h);
    for (int xo = 0; xo < out_res.width; ++xo) {
      const Tap tx = source_tap(xo, scale, w);
      SpikingPixel & dst = out.at(yo, xo);
      double blur = 0.0;
      if (tx.f == 0.0 && ty.f == 0.0) {
        dst = field.at(ty.x0, tx.x0);
        blur = blurry.at(ty.x0, tx.x0);
      } else {
        const std::array<int, 4> ys{ty.x0, ty.x0, ty.x1, ty.x1};
        const std::array<int, 4> xs{tx.x0, tx.x1, tx.x0, tx.x1};
        const std::array<double, 4> wt{(1 - ty.f) * (1 - tx.f), (1 - ty.f) * tx.f, ty.f * (1 - tx.f), ty.f * tx.f};
        std::vector<double> raw(static_cast<std::size_t>(n), 0.0);
        dst.slopes.assign(static_cast<std::size_t>(n), 0.0);
        dst.intercepts.assign(static_cast<std::size_t>(n), 0.0);
        for (int j = 0; j < 4; ++j) {
          const std::size_t idx = static_cast<std::size_t>(ys[j]) * w + xs[j];
          const SpikingPixel & src = field.pixels[idx];
          for (int i = 0; i < n; ++i) {
            dst.slopes[i] += wt[j] * src.slopes[i];
            dst.intercepts[i] += wt[j] * src.intercepts[i];
            raw[i] += wt[j] * widths[idx][i];
          }
          blur += wt[j] * blurry.data[idx];
        }
        blur = std::clamp(blur, 0.0, 1.0);
        dst.keypoints = keypoints_from_widths(raw, field.window);
        dst.c = normalization_constant(dst.slopes, dst.intercepts, dst.keypoints, blur);
      }
      if (upscaled_blur) upscaled_blur->at(yo, xo) = blur;
    }
  }
  return out;
}

FrameSequence render_superres(const SpikingField & field, const Frame & blurry, const RenderRequest & request)
{
  const Resolution & in = field.resolution;
  const Resolution & target = request.output;
  if (target.height < in.height || target.width < in.width || target.height % in.height != 0 ||
      target.width % in.width != 0 || target.height / in.height != target.width / in.width) {
    throw ConfigError("output resolution must be the same integer multiple of the field in both axes");
  }
  const int scale = target.height / in.height;
  check_request(request, field.window);
  Frame blur_hi;
  const SpikingField hi = upscale_field(field, blurry, scale, &blur_hi);
  RenderRequest plain = request;
  plain.output = hi.resolution;
  return render_video(hi, blur_hi, plain);
}

FrameSequence render_superres(const FittedField & field, const Frame & blurry, const RenderRequest & request)
{
  if (!std::holds_alternative<SpikingField>(field)) throw ConfigError("super-resolution needs a non-kernel field");
  return render_superres(std::get<SpikingField>(field), blurry, request);
}

namespace
{
double cubic_weight(double d)
{
  d = std::abs(d);
  if (d < 1.0) return 1.5 * d * d * d - 2.5 * d * d + 1.0;
  if (d < 2.0) return -0.5 * d * d * d + 2.5 * d * d - 4.0 * d + 2.0;
  return 0.0;
}
}  // namespace

Frame bicubic_upscale(const Frame & frame, int scale)
{
  if (scale < 1) throw ConfigError("scale must be a positive integer");
  const int h = frame.resolution.height;
  const int w = frame.resolution.width;
  Frame out(Resolution{h * scale, w * scale}, frame.t);
  for (int yo = 0; yo < h * scale; ++yo) {
    const double sy = (yo + 0.5) / scale - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    for (int xo = 0; xo < w * scale; ++xo) {
      const double sx = (xo + 0.5) / scale - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      double acc = 0.0;
      for (int j = -1; j <= 2; ++j) {
        const double wy = cubic_weight(sy - (y0 + j));
        const int yy = std::clamp(y0 + j, 0, h - 1);
        for (int i = -1; i <= 2; ++i) {
          const int xx = std::clamp(x0 + i, 0, w - 1);
          acc += wy * cubic_weight(sx - (x0 + i)) * frame.at(yy, xx);
        }
      }
      out.at(yo, xo) = acc;
    }
  }
  return out;
}

}  // namespace spikefit
