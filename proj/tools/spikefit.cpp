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


// spikefit: simulate, fit, render, edi and eval subcommands.

#include <CLI11.hpp>

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spikefit/baseline.hpp"
#include "spikefit/config.hpp"
#include "spikefit/errors.hpp"
#include "spikefit/fitter.hpp"
#include "spikefit/io.hpp"
#include "spikefit/metrics.hpp"
#include "spikefit/render.hpp"
#include "spikefit/simulator.hpp"

namespace fs = std::filesystem;
using namespace spikefit;

namespace
{
// Thrown for argument combinations CLI11 cannot express; exits with 2.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

PipelineConfig config_or_default(const std::string & path)
{
  if (path.empty()) {
    PipelineConfig c;
    check_pipeline(c);
    return c;
  }
  return load_config(path);
}

const ExposureWindow & window_of(const FittedField & field)
{
  return std::visit([](const auto & f) -> const ExposureWindow & { return f.window; }, field);
}

std::vector<double> parse_timestamps(const std::string & list)
{
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception &) {
      throw UsageError("bad timestamp '" + item + "'");
    }
    if (used != item.size()) throw UsageError("bad timestamp '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--timestamps is empty");
  return out;
}

struct SimulateArgs
{
  std::string config, events, blur, truth_dir;
  int frames = 0;
  bool pgm = false;
};

void run_simulate(const SimulateArgs & a)
{
  const PipelineConfig cfg = config_or_default(a.config);
  const int frames = a.frames > 0 ? a.frames : frame_count(cfg.render.fps, cfg.scene.window);
  const EventStream events = simulate_events(cfg.scene, cfg.simulation);
  write_events(fs::path(a.events), events);
  Frame blur = synthesize_blur(cfg.scene, cfg.blur_samples);
  write_frame(fs::path(a.blur), blur);
  if (!a.truth_dir.empty()) {
    const auto ts = uniform_timestamps(cfg.scene.window, frames);
    write_frame_dir(a.truth_dir, sample_video(cfg.scene, ts), a.pgm);
  }
  std::cout << "events: " << events.events.size() << "\n";
}

struct FitArgs
{
  std::string blur, events, targets_dir, config, field, log;
};

void run_fit(const FitArgs & a)
{
  if (a.events.empty() && a.targets_dir.empty()) throw UsageError("fit needs --events or --targets-dir");
  PipelineConfig cfg = config_or_default(a.config);
  const Frame blur = read_frame(fs::path(a.blur));
  FitReport report;
  FittedField field;
  if (!a.targets_dir.empty()) {
    cfg.fit.mode = FitMode::Supervised;
    const FrameSequence targets = read_frame_dir(a.targets_dir);
    auto fit = fit_supervised(blur, targets, cfg.scene.window, cfg.fit);
    field = std::move(fit.field);
    report = fit.report;
  } else {
    cfg.fit.mode = FitMode::EventOnly;
    const EventStream events = read_events(fs::path(a.events));
    auto fit = fit_event_only(blur, events, cfg.fit);
    field = std::move(fit.field);
    report = fit.report;
  }
  write_field(fs::path(a.field), field);
  const std::string log_path = a.log.empty() ? a.field + ".loss.csv" : a.log;
  std::ofstream log(log_path);
  if (!log) throw ParseError("cannot open '" + log_path + "'");
  log.precision(17);
  log << "iteration,loss\n";
  for (std::size_t i = 0; i < report.losses.size(); ++i) log << i + 1 << ',' << report.losses[i] << '\n';
  if (!log) throw ParseError("write to '" + log_path + "' failed");
  std::cout << "final loss: " << report.final_loss << (report.converged ? " (converged)" : "") << "\n";
}

struct RenderArgs
{
  std::string field, blur, timestamps, out_dir;
  double fps = 0.0;
  int scale = 1;
  bool no_clamp = false;
  bool pgm = false;
  int threads = 0;
};

void run_render(const RenderArgs & a)
{
  const FittedField field = read_field(fs::path(a.field));
  const Frame blur = read_frame(fs::path(a.blur));
  const ExposureWindow & window = window_of(field);
  RenderRequest request;
  request.clamp = !a.no_clamp;
  request.threads = a.threads;
  request.timestamps = a.timestamps.empty() ? uniform_timestamps(window, frame_count(a.fps > 0 ? a.fps : 30.0, window))
                                            : parse_timestamps(a.timestamps);
  FrameSequence frames;
  if (a.scale > 1) {
    const Resolution res = blur.resolution;
    request.output = Resolution{res.height * a.scale, res.width * a.scale};
    frames = render_superres(field, blur, request);
  } else {
    frames = render_video(field, blur, request);
  }
  write_frame_dir(a.out_dir, frames, a.pgm);
}

struct EdiArgs
{
  std::string blur, events, out_dir;
  double threshold = 0.2;
  double fps = 30.0;
  bool pgm = false;
};

void run_edi(const EdiArgs & a)
{
  if (!(a.threshold > 0.0)) throw UsageError("--threshold must be positive");
  const Frame blur = read_frame(fs::path(a.blur));
  const EventStream events = read_events(fs::path(a.events));
  const auto ts = uniform_timestamps(events.window, frame_count(a.fps, events.window));
  write_frame_dir(a.out_dir, edi_reconstruct(blur, events, a.threshold, ts), a.pgm);
}

struct EvalArgs
{
  std::string pred_dir, truth_dir, out;
};

void run_eval(const EvalArgs & a)
{
  const FrameSequence pred = read_frame_dir(a.pred_dir);
  const FrameSequence truth = read_frame_dir(a.truth_dir);
  if (pred.size() != truth.size()) throw ShapeError("frame count mismatch between prediction and truth");
  const SequenceMetrics m = sequence_metrics(pred, truth);
  if (a.out.empty()) {
    write_metrics_csv(std::cout, m);
    return;
  }
  std::ofstream os(a.out);
  if (!os) throw ParseError("cannot open '" + a.out + "'");
  write_metrics_csv(os, m);
  std::cout << "mean psnr: " << m.mean.psnr << " ssim: " << m.mean.ssim << "\n";
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Spiking representation deblurring toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto * simulate = app.add_subcommand("simulate", "simulate events, blur and ground truth for a scene");
  simulate->add_option("--config", sim.config, "config file")->check(CLI::ExistingFile);
  simulate->add_option("--out-events", sim.events, "event file (SEVT)")->required();
  simulate->add_option("--out-blur", sim.blur, "blurry frame (.sfrm or .pgm)")->required();
  simulate->add_option("--out-truth-dir", sim.truth_dir, "ground-truth frame directory");
  simulate->add_option("--frames", sim.frames, "ground-truth frame count (default round(fps * T))")
    ->check(CLI::PositiveNumber);
  simulate->add_flag("--pgm", sim.pgm, "also write PGM copies");

  FitArgs fit;
  auto * fitc = app.add_subcommand("fit", "fit a field from events or target frames");
  fitc->add_option("--blur", fit.blur, "blurry frame")->required()->check(CLI::ExistingFile);
  fitc->add_option("--events", fit.events, "event file (event-only fit)")->check(CLI::ExistingFile);
  fitc->add_option("--targets-dir", fit.targets_dir, "target frames (supervised fit)")->check(CLI::ExistingDirectory);
  fitc->add_option("--config", fit.config, "config file")->check(CLI::ExistingFile);
  fitc->add_option("--out-field", fit.field, "output field (SFLD)")->required();
  fitc->add_option("--out-log", fit.log, "loss log, default <out-field>.loss.csv");

  RenderArgs ren;
  auto * render = app.add_subcommand("render", "render frames from a fitted field");
  render->add_option("--field", ren.field, "field file")->required()->check(CLI::ExistingFile);
  render->add_option("--blur", ren.blur, "blurry frame")->required()->check(CLI::ExistingFile);
  auto * fps = render->add_option("--fps", ren.fps, "frames per second (default 30)")->check(CLI::PositiveNumber);
  render->add_option("--timestamps", ren.timestamps, "comma-separated timestamps")->excludes(fps);
  render->add_option("--scale", ren.scale, "integer upscaling factor")->check(CLI::PositiveNumber);
  render->add_option("--out-dir", ren.out_dir, "output directory")->required();
  render->add_flag("--no-clamp", ren.no_clamp, "keep values outside [0, 1]");
  render->add_flag("--pgm", ren.pgm, "also write PGM copies");
  render->add_option("--threads", ren.threads, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);

  EdiArgs edi;
  auto * edic = app.add_subcommand("edi", "event double integral baseline");
  edic->add_option("--blur", edi.blur, "blurry frame")->required()->check(CLI::ExistingFile);
  edic->add_option("--events", edi.events, "event file")->required()->check(CLI::ExistingFile);
  edic->add_option("--threshold", edi.threshold, "log intensity per event");
  edic->add_option("--fps", edi.fps, "frames per second")->check(CLI::PositiveNumber);
  edic->add_option("--out-dir", edi.out_dir, "output directory")->required();
  edic->add_flag("--pgm", edi.pgm, "also write PGM copies");

  EvalArgs ev;
  auto * eval = app.add_subcommand("eval", "per-frame MSE, PSNR and SSIM");
  eval->add_option("--pred-dir", ev.pred_dir, "predicted frames")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth-dir", ev.truth_dir, "ground-truth frames")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", ev.out, "CSV report (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) run_simulate(sim);
    if (*fitc) run_fit(fit);
    if (*render) run_render(ren);
    if (*edic) run_edi(edi);
    if (*eval) run_eval(ev);
  } catch (const UsageError & e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
