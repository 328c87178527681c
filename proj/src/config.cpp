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


#include "spikefit/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>

#include "spikefit/errors.hpp"

namespace spikefit
{
namespace
{
std::string trim(const std::string & s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string where(int line) { return "line " + std::to_string(line) + ": "; }

double to_double(const std::string & v, int line)
{
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ParseError(where(line) + "expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string & v, int line)
{
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError(where(line) + "expected an integer, got '" + v + "'");
  }
  return out;
}

int to_small_int(const std::string & v, int line)
{
  const long long x = to_int(v, line);
  if (x < -1000000000LL || x > 1000000000LL) throw ParseError(where(line) + "integer out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string & v, int line)
{
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ParseError(where(line) + "expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(PipelineConfig &, const std::string &, int)>;

const std::map<std::string, Setter> & setters()
{
  static const std::map<std::string, Setter> table = {
    {"scene.kind", [](PipelineConfig & c, const std::string & v, int) { c.scene.kind = parse_scene_kind(v); }},
    {"scene.width", [](PipelineConfig & c, const std::string & v, int l) { c.scene.resolution.width = to_small_int(v, l); }},
    {"scene.height", [](PipelineConfig & c, const std::string & v, int l) { c.scene.resolution.height = to_small_int(v, l); }},
    {"scene.exposure",
     [](PipelineConfig & c, const std::string & v, int l) {
       const double T = to_double(v, l);
       if (!(T > 0.0)) throw ConfigError(where(l) + "scene.exposure must be positive");
       c.scene.window = ExposureWindow(T);
     }},
    {"scene.velocity", [](PipelineConfig & c, const std::string & v, int l) { c.scene.velocity = to_double(v, l); }},
    {"scene.bar_width", [](PipelineConfig & c, const std::string & v, int l) { c.scene.bar_width = to_double(v, l); }},
    {"scene.ramp_span", [](PipelineConfig & c, const std::string & v, int l) { c.scene.ramp_span = to_double(v, l); }},
    {"scene.foreground", [](PipelineConfig & c, const std::string & v, int l) { c.scene.foreground = to_double(v, l); }},
    {"scene.background", [](PipelineConfig & c, const std::string & v, int l) { c.scene.background = to_double(v, l); }},
    {"scene.block_size", [](PipelineConfig & c, const std::string & v, int l) { c.scene.block_size = to_small_int(v, l); }},
    {"sim.c_plus", [](PipelineConfig & c, const std::string & v, int l) { c.simulation.thresholds.c_plus = to_double(v, l); }},
    {"sim.c_minus", [](PipelineConfig & c, const std::string & v, int l) { c.simulation.thresholds.c_minus = to_double(v, l); }},
    {"sim.epsilon", [](PipelineConfig & c, const std::string & v, int l) { c.simulation.epsilon_floor = to_double(v, l); }},
    {"sim.time_samples", [](PipelineConfig & c, const std::string & v, int l) { c.simulation.time_samples = to_small_int(v, l); }},
    {"sim.blur_samples", [](PipelineConfig & c, const std::string & v, int l) { c.blur_samples = to_small_int(v, l); }},
    {"sim.drop_rate", [](PipelineConfig & c, const std::string & v, int l) { c.simulation.noise.drop_rate = to_double(v, l); }},
    {"sim.jitter", [](PipelineConfig & c, const std::string & v, int l) { c.simulation.noise.jitter = to_double(v, l); }},
    {"sim.seed",
     [](PipelineConfig & c, const std::string & v, int l) {
       const long long s = to_int(v, l);
       if (s < 0) throw ParseError(where(l) + "seed must be non-negative");
       c.simulation.noise.seed = static_cast<std::uint64_t>(s);
     }},
    {"fit.mode", [](PipelineConfig & c, const std::string & v, int) { c.fit.mode = parse_fit_mode(v); }},
    {"fit.segments", [](PipelineConfig & c, const std::string & v, int l) { c.fit.n = to_small_int(v, l); }},
    {"fit.kernel", [](PipelineConfig & c, const std::string & v, int l) { c.fit.k = to_small_int(v, l); }},
    {"fit.outer_iters", [](PipelineConfig & c, const std::string & v, int l) { c.fit.outer_iters = to_small_int(v, l); }},
    {"fit.inner_iters", [](PipelineConfig & c, const std::string & v, int l) { c.fit.inner_iters = to_small_int(v, l); }},
    {"fit.step", [](PipelineConfig & c, const std::string & v, int l) { c.fit.step = to_double(v, l); }},
    {"fit.loss", [](PipelineConfig & c, const std::string & v, int) { c.fit.loss = parse_loss_kind(v); }},
    {"fit.event_weight", [](PipelineConfig & c, const std::string & v, int l) { c.fit.event_weight = to_double(v, l); }},
    {"fit.smooth_weight", [](PipelineConfig & c, const std::string & v, int l) { c.fit.smooth_weight = to_double(v, l); }},
    {"fit.seed",
     [](PipelineConfig & c, const std::string & v, int l) {
       const long long s = to_int(v, l);
       if (s < 0) throw ParseError(where(l) + "seed must be non-negative");
       c.fit.seed = static_cast<std::uint64_t>(s);
     }},
    {"fit.tolerance", [](PipelineConfig & c, const std::string & v, int l) { c.fit.tolerance = to_double(v, l); }},
    {"fit.threshold", [](PipelineConfig & c, const std::string & v, int l) { c.fit.event_threshold = to_double(v, l); }},
    {"fit.log_floor", [](PipelineConfig & c, const std::string & v, int l) { c.fit.log_floor = to_double(v, l); }},
    {"fit.event_bracket", [](PipelineConfig & c, const std::string & v, int l) { c.fit.event_bracket = to_double(v, l); }},
    {"fit.freeze_keypoints", [](PipelineConfig & c, const std::string & v, int l) { c.fit.freeze_keypoints = to_bool(v, l); }},
    {"fit.threads", [](PipelineConfig & c, const std::string & v, int l) { c.fit.threads = to_small_int(v, l); }},
    {"render.fps", [](PipelineConfig & c, const std::string & v, int l) { c.render.fps = to_double(v, l); }},
    {"render.scale", [](PipelineConfig & c, const std::string & v, int l) { c.render.scale = to_small_int(v, l); }},
    {"render.clamp", [](PipelineConfig & c, const std::string & v, int l) { c.render.clamp = to_bool(v, l); }},
  };
  return table;
}

}  // namespace

void check_pipeline(const PipelineConfig & c)
{
  check_scene(c.scene);
  if (!(c.simulation.thresholds.c_plus > 0.0) || !(c.simulation.thresholds.c_minus < 0.0)) {
    throw ConfigError("sim.c_plus must be positive and sim.c_minus negative");
  }
  if (!(c.simulation.epsilon_floor > 0.0)) throw ConfigError("sim.epsilon must be positive");
  if (c.simulation.time_samples < 2) throw ConfigError("sim.time_samples must be at least 2");
  if (c.blur_samples < 2) throw ConfigError("sim.blur_samples must be at least 2");
  if (!(c.simulation.noise.drop_rate >= 0.0 && c.simulation.noise.drop_rate <= 1.0)) {
    throw ConfigError("sim.drop_rate must be in [0, 1]");
  }
  if (!(c.simulation.noise.jitter >= 0.0)) throw ConfigError("sim.jitter must be non-negative");
  check_config(c.fit);
  if (!(c.render.fps > 0.0)) throw ConfigError("render.fps must be positive");
  if (c.render.scale < 1) throw ConfigError("render.scale must be >= 1");
}

PipelineConfig parse_config(std::istream & is)
{
  PipelineConfig config;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(where(line) + "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(where(line) + "expected 'key = value'");
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where(line) + "unknown key '" + key + "'");
    try {
      it->second(config, value, line);
    } catch (const ConfigError & e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw ConfigError(where(line) + msg);
    }
  }
  check_pipeline(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path & path)
{
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open config '" + path.string() + "'");
  return parse_config(is);
}

int frame_count(double fps, const ExposureWindow & window)
{
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("fps must be positive");
  const double n = std::round(fps * window.length());
  if (n > 1e7) throw ConfigError("too many frames requested");
  return std::max(1, static_cast<int>(n));
}

}  // namespace spikefit
