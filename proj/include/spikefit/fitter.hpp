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

#ifndef SPIKEFIT_FITTER_HPP
#define SPIKEFIT_FITTER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "spikefit/core.hpp"
#include "spikefit/spiking.hpp"

namespace spikefit
{
enum class FitMode { Supervised, EventOnly };
enum class LossKind { L1, L2 };

FitMode parse_fit_mode(const std::string & name);
LossKind parse_loss_kind(const std::string & name);
std::string to_string(FitMode mode);
std::string to_string(LossKind loss);

struct FitConfig
{
  FitMode mode = FitMode::Supervised;
  int n = 10;                     // segments per pixel
  int k = 1;                      // kernel size, 1 disables kernel mode
  int outer_iters = 8;            // alternations of coefficient / keypoint updates
  int inner_iters = 40;           // coefficient iterations per alternation
  double step = 0.05;             // initial L1 subgradient step
  LossKind loss = LossKind::L1;
  double event_weight = 1.0;      // lambda_e
  double smooth_weight = 0.01;    // lambda_s
  std::uint64_t seed = 0;
  double tolerance = 1e-12;       // stop when an alternation improves less than this
  double event_threshold = 0.2;   // assumed log step per event
  double log_floor = 1e-3;        // epsilon inside ln(v + epsilon)
  double event_bracket = 1e-4;    // keypoint support radius around events, fraction of T
  bool freeze_keypoints = false;
  int threads = 0;                // 0: hardware concurrency
};

// Throws ConfigError when n < 1, k even, weights negative, tolerance <= 0 ...
void check_config(const FitConfig & config);

struct FitReport
{
  std::vector<double> losses;  // mean over pixels, one entry per completed alternation
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Observations of one pixel. Supervised fits use the samples, event-only
// fits the events; blur is always required.
struct PixelObservations
{
  double blur = 0.0;
  std::vector<double> sample_t;  // ascending
  std::vector<double> sample_v;
  std::vector<double> event_t;   // ascending
  std::vector<int> event_p;
};

struct PixelParams
{
  std::vector<double> raw_widths;  // n, pre-activation
  std::vector<double> slopes;      // n
  std::vector<double> intercepts;  // n
};

struct LossGradient
{
  double loss = 0.0;
  std::vector<double> d_slopes;
  std::vector<double> d_intercepts;
  std::vector<double> d_raw_widths;
};

// Objective of one pixel (mode taken from config) and its analytic gradient.
// c is recomputed from the parameters and the blur, and its dependence on
// every parameter is part of the gradient. Segment membership is treated as
// locally constant; the L1 subgradient uses sign(0) = 0.
LossGradient loss_and_gradient(const PixelParams & params, const ExposureWindow & window,
                               const PixelObservations & obs, const FitConfig & config);

// Builds the evaluated pixel (keypoints from widths, c from the blur).
SpikingPixel assemble_pixel(const PixelParams & params, const ExposureWindow & window, double blur);

struct PixelFit
{
  SpikingPixel pixel;
  std::vector<double> losses;
  bool converged = false;
};

using IterationObserver = std::function<void(int outer, const SpikingPixel & pixel)>;

// Single-pixel fits. initial_keypoints, when non-empty, replace the default
// initialisation. The observer sees the pixel after every alternation.
PixelFit fit_pixel_supervised(const PixelObservations & obs, const ExposureWindow & window, const FitConfig & config,
                              const std::vector<double> & initial_keypoints = {},
                              const IterationObserver & observer = {});
PixelFit fit_pixel_event_only(const PixelObservations & obs, const ExposureWindow & window, const FitConfig & config,
                              const std::vector<double> & initial_keypoints = {},
                              const IterationObserver & observer = {});

struct FitHooks
{
  // per-pixel initial keypoints (row-major); empty for the default
  std::vector<std::vector<double>> initial_keypoints;
  // called after each alternation of each pixel; may run on worker threads
  std::function<void(std::size_t pixel, int outer, const SpikingPixel &)> on_iterate;
};

using FittedField = std::variant<SpikingField, KernelField>;

struct SupervisedFit
{
  FittedField field;
  FitReport report;
};

struct EventOnlyFit
{
  SpikingField field;
  FitReport report;
};

SupervisedFit fit_supervised(const Frame & blurry, const FrameSequence & targets, const ExposureWindow & window,
                             const FitConfig & config, const FitHooks & hooks = {});

EventOnlyFit fit_event_only(const Frame & blurry, const EventStream & events, const FitConfig & config,
                            const FitHooks & hooks = {});

}  // namespace spikefit

#endif  // SPIKEFIT_FITTER_HPP
