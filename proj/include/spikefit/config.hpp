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


#ifndef SPIKEFIT_CONFIG_HPP
#define SPIKEFIT_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikefit/fitter.hpp"
#include "spikefit/simulator.hpp"

namespace spikefit
{
struct RenderSettings
{
  double fps = 30.0;  // frames = round(fps * T)
  int scale = 1;
  bool clamp = true;
};

struct PipelineConfig
{
  SceneSpec scene;
  SimulationOptions simulation;
  int blur_samples = 2001;  // quadrature samples for the blurry image
  FitConfig fit;
  RenderSettings render;
};

/*
 * Flat "key = value" text, one pair per line, '#' starts a comment. Keys:
 *
 *   scene.kind scene.width scene.height scene.exposure scene.velocity
 *   scene.bar_width scene.ramp_span scene.foreground scene.background
 *   scene.block_size
 *   sim.c_plus sim.c_minus sim.epsilon sim.time_samples sim.blur_samples
 *   sim.drop_rate sim.jitter sim.seed
 *   fit.mode fit.segments fit.kernel fit.outer_iters fit.inner_iters fit.step
 *   fit.loss fit.event_weight fit.smooth_weight fit.seed fit.tolerance
 *   fit.threshold fit.log_floor fit.event_bracket fit.freeze_keypoints
 *   fit.threads
 *   render.fps render.scale render.clamp
 *
 * Errors name the line: ParseError for syntax and type problems,
 * ConfigError for unknown keys and invalid values.
 */
PipelineConfig parse_config(std::istream & is);
PipelineConfig load_config(const std::filesystem::path & path);

// Throws ConfigError describing the first invalid setting.
void check_pipeline(const PipelineConfig & config);

// Frame count for a render rate: round(fps * T), at least 1.
int frame_count(double fps, const ExposureWindow & window);

}  // namespace spikefit

#endif  // SPIKEFIT_CONFIG_HPP
