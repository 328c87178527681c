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


// Test-side oracles and generators shared by the unit tests. Nothing here
// calls the library's closed forms.

#ifndef SPIKEFIT_TESTS_ORACLES_HPP
#define SPIKEFIT_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spikefit/core.hpp"
#include "spikefit/spiking.hpp"

namespace oracle
{
// Keypoints by hand: cumulative normalized exponentials.
inline std::vector<double> keypoints(const std::vector<double> & raw, double T)
{
  double mx = raw[0];
  for (double r : raw) mx = std::max(mx, r);
  std::vector<double> e;
  double sum = 0.0;
  for (double r : raw) {
    e.push_back(std::exp(r - mx));
    sum += e.back();
  }
  std::vector<double> kp{-T / 2};
  double acc = 0.0;
  for (double v : e) {
    acc += v / sum;
    kp.push_back(-T / 2 + T * acc);
  }
  kp.back() = T / 2;
  return kp;
}

// Value of a pixel at t from its own pieces, right-continuous, last piece
// closed.
inline double value(const spikefit::SpikingPixel & px, double t)
{
  std::size_t i = 0;
  while (i + 1 < px.slopes.size() && t >= px.keypoints[i + 1]) ++i;
  return px.c + (px.slopes[i] * t + px.intercepts[i]);
}

// Trapezoid rule per segment with `samples` points in total, so jumps
// between segments add no error.
inline double quadrature_mean(const spikefit::SpikingPixel & px, long samples)
{
  const double T = px.keypoints.back() - px.keypoints.front();
  double total = 0.0;
  for (std::size_t i = 0; i < px.slopes.size(); ++i) {
    const double a = px.keypoints[i], b = px.keypoints[i + 1];
    const long m = std::max(2L, static_cast<long>(std::llround(samples * (b - a) / T)));
    const double h = (b - a) / static_cast<double>(m - 1);
    auto f = [&](double t) { return px.c + px.slopes[i] * t + px.intercepts[i]; };
    double s = 0.5 * (f(a) + f(b));
    for (long j = 1; j < m - 1; ++j) s += f(a + h * static_cast<double>(j));
    total += s * h;
  }
  return total / T;
}

inline spikefit::SpikingPixel random_pixel(std::mt19937_64 & rng, int n, double T, double spread = 2.0)
{
  std::normal_distribution<double> raw(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-spread, spread);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto & v : w) v = raw(rng);
  spikefit::SpikingPixel px;
  px.keypoints = keypoints(w, T);
  for (int i = 0; i < n; ++i) {
    px.slopes.push_back(coef(rng));
    px.intercepts.push_back(coef(rng));
  }
  px.c = coef(rng);
  return px;
}

// Pixel whose pieces stay inside [lo, hi] with c = 0.
inline spikefit::SpikingPixel bounded_pixel(std::mt19937_64 & rng, int n, double T, double lo = 0.05,
                                            double hi = 0.95)
{
  std::normal_distribution<double> raw(0.0, 0.5);
  std::uniform_real_distribution<double> level(lo, hi);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto & v : w) v = raw(rng);
  spikefit::SpikingPixel px;
  px.keypoints = keypoints(w, T);
  for (int i = 0; i < n; ++i) {
    const double a = px.keypoints[static_cast<std::size_t>(i)], b = px.keypoints[static_cast<std::size_t>(i) + 1];
    const double va = level(rng), vb = level(rng);
    const double m = (vb - va) / (b - a);
    px.slopes.push_back(m);
    px.intercepts.push_back(va - m * a);
  }
  px.c = 0.0;
  return px;
}

}  // namespace oracle

#endif  // SPIKEFIT_TESTS_ORACLES_HPP
