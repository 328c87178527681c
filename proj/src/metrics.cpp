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

#include "spikefit/metrics.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "spikefit/errors.hpp"

namespace spikefit
{
namespace
{
void check_same_shape(const Frame & a, const Frame & b)
{
  if (!(a.resolution == b.resolution) || a.data.size() != b.data.size()) {
    throw ShapeError("frames differ in resolution");
  }
  if (a.data.empty()) {
    throw ShapeError("frames are empty");
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::array<double, kWindow * kWindow> gaussian_window()
{
  std::array<double, kWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  std::array<double, kWindow * kWindow> w{};
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) {
      w[y * kWindow + x] = (g[y] / total) * (g[x] / total);
    }
  }
  return w;
}
}  // namespace

double mse(const Frame & a, const Frame & b)
{
  check_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const Frame & a, const Frame & b)
{
  const double e = mse(a, b);
  if (e == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return -10.0 * std::log10(e);
}

double ssim(const Frame & a, const Frame & b)
{
  check_same_shape(a, b);
  const int h = a.resolution.height;
  const int w = a.resolution.width;
  if (h < kWindow || w < kWindow) {
    throw ShapeError("SSIM needs frames of at least 11x11");
  }
  static const auto win = gaussian_window();
  double acc = 0.0;
  for (int y0 = 0; y0 + kWindow <= h; ++y0) {
    for (int x0 = 0; x0 + kWindow <= w; ++x0) {
      double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (int dy = 0; dy < kWindow; ++dy) {
        for (int dx = 0; dx < kWindow; ++dx) {
          const double g = win[dy * kWindow + dx];
          const double va = a.at(y0 + dy, x0 + dx);
          const double vb = b.at(y0 + dy, x0 + dx);
          mu_a += g * va;
          mu_b += g * vb;
          aa += g * va * va;
          bb += g * vb * vb;
          ab += g * va * vb;
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
      acc += num / den;
    }
  }
  return acc / static_cast<double>((h - kWindow + 1) * (w - kWindow + 1));
}

SequenceMetrics sequence_metrics(const FrameSequence & a, const FrameSequence & b, double time_tolerance)
{
  if (a.empty() || b.empty()) {
    throw ShapeError("metrics need non-empty sequences");
  }
  if (a.size() != b.size()) {
    throw ShapeError("sequences differ in length");
  }
  SequenceMetrics out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].t - b[i].t) > time_tolerance) {
      throw ShapeError("sequences are not co-timed at frame " + std::to_string(i));
    }
    FrameMetrics m{a[i].t, mse(a[i], b[i]), psnr(a[i], b[i]), ssim(a[i], b[i])};
    out.mean.mse += m.mse;
    out.mean.psnr += m.psnr;
    out.mean.ssim += m.ssim;
    out.frames.push_back(m);
  }
  const auto count = static_cast<double>(a.size());
  out.mean.mse /= count;
  out.mean.psnr /= count;
  out.mean.ssim /= count;
  return out;
}

void write_metrics_csv(std::ostream & os, const SequenceMetrics & metrics)
{
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  os << "frame_index,t,mse,psnr,ssim\n";
  for (std::size_t i = 0; i < metrics.frames.size(); ++i) {
    const auto & m = metrics.frames[i];
    os << i << ',' << m.t << ',' << m.mse << ',' << m.psnr << ',' << m.ssim << '\n';
  }
  const auto & m = metrics.mean;
  os << "mean,," << m.mse << ',' << m.psnr << ',' << m.ssim << '\n';
  os.flags(flags);
  os.precision(prec);
}

}  // namespace spikefit
