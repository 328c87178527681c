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

#include "spikefit/fitter.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "spikefit/errors.hpp"

namespace spikefit
{
FitMode parse_fit_mode(const std::string & name)
{
  if (name == "supervised") return FitMode::Supervised;
  if (name == "event-only") return FitMode::EventOnly;
  throw ConfigError("unknown fit mode '" + name + "'");
}

LossKind parse_loss_kind(const std::string & name)
{
  if (name == "L1" || name == "l1") return LossKind::L1;
  if (name == "L2" || name == "l2") return LossKind::L2;
  throw ConfigError("unknown loss '" + name + "'");
}

std::string to_string(FitMode mode) { return mode == FitMode::Supervised ? "supervised" : "event-only"; }
std::string to_string(LossKind loss) { return loss == LossKind::L1 ? "L1" : "L2"; }

void check_config(const FitConfig & c)
{
  if (c.n < 1) throw ConfigError("fit.segments must be >= 1");
  if (c.k < 1 || c.k % 2 == 0) throw ConfigError("fit.kernel must be odd and >= 1");
  if (c.outer_iters < 1 || c.inner_iters < 0) throw ConfigError("iteration counts must be positive");
  if (!(c.step > 0.0)) throw ConfigError("fit.step must be positive");
  if (!(c.event_weight >= 0.0) || !(c.smooth_weight >= 0.0)) throw ConfigError("weights must be non-negative");
  if (!(c.tolerance > 0.0)) throw ConfigError("fit.tolerance must be positive");
  if (!(c.event_threshold > 0.0)) throw ConfigError("fit.threshold must be positive");
  if (!(c.log_floor > 0.0)) throw ConfigError("fit.log_floor must be positive");
  if (!(c.event_bracket > 0.0 && c.event_bracket < 0.5)) throw ConfigError("fit.event_bracket must be in (0, 0.5)");
  if (c.threads < 0) throw ConfigError("fit.threads must be >= 0");
}

namespace
{
constexpr double kInf = std::numeric_limits<double>::infinity();

// Working parameters of one pixel, keypoint space.
struct Model
{
  std::vector<double> kp;  // n + 1
  std::vector<double> m;   // n
  std::vector<double> b;   // n

  int n() const { return static_cast<int>(m.size()); }
};

struct ModelGradient
{
  double loss = 0.0;
  std::vector<double> dm, db, dkp;  // dkp has n + 1 entries, endpoints zero
};

double length_of(const Model & md) { return md.kp.back() - md.kp.front(); }

double constant_of(const Model & md, double blur) { return normalization_constant(md.m, md.b, md.kp, blur); }

SpikingPixel to_pixel(const Model & md, double blur)
{
  return SpikingPixel{md.kp, md.m, md.b, constant_of(md, blur)};
}

// Enforces strictly increasing keypoints with pinned endpoints.
void sanitize_keypoints(std::vector<double> & kp, const ExposureWindow & w)
{
  const std::size_t n = kp.size() - 1;
  kp.front() = w.begin();
  kp.back() = w.end();
  for (std::size_t i = 1; i < n; ++i) kp[i] = std::clamp(kp[i], w.begin(), w.end());
  for (std::size_t i = 1; i < n; ++i) kp[i] = std::max(kp[i], std::nextafter(kp[i - 1], kInf));
  for (std::size_t i = n - 1; i >= 1; --i) kp[i] = std::min(kp[i], std::nextafter(kp[i + 1], -kInf));
}

std::vector<double> uniform_keypoints(int n, const ExposureWindow & w)
{
  std::vector<double> kp(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) kp[static_cast<std::size_t>(i)] = w.begin() + w.length() * i / n;
  kp.back() = w.end();
  return kp;
}

// Per-segment mean weights: mean of the mapping = sum_i m_i M_i + b_i W_i.
void mean_weights(const std::vector<double> & kp, std::vector<double> & M, std::vector<double> & W)
{
  const std::size_t n = kp.size() - 1;
  const double T = kp.back() - kp.front();
  M.resize(n);
  W.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    M[i] = 0.5 * (kp[i + 1] - kp[i]) * (kp[i + 1] + kp[i]) / T;
    W[i] = (kp[i + 1] - kp[i]) / T;
  }
}

void check_finite(const std::vector<double> & v, const char * what)
{
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite ") + what);
  }
}

// ---------------------------------------------------------------------------
// supervised objective

ModelGradient supervised_objective(const Model & md, const PixelObservations & obs, LossKind loss, bool want_grad)
{
  const int n = md.n();
  const double T = length_of(md);
  const double c = constant_of(md, obs.blur);
  ModelGradient out;
  if (want_grad) {
    out.dm.assign(n, 0.0);
    out.db.assign(n, 0.0);
    out.dkp.assign(n + 1, 0.0);
  }
  const std::size_t count = obs.sample_t.size();
  if (count == 0) return out;
  const double scale = 1.0 / static_cast<double>(count);
  double total_g = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const double t = obs.sample_t[j];
    const int s = segment_index(md.kp, t);
    const double v = c + md.m[s] * t + md.b[s];
    const double r = std::clamp(v, 0.0, 1.0) - obs.sample_v[j];
    double g = 0.0;
    if (loss == LossKind::L2) {
      out.loss += r * r;
      g = 2.0 * r;
    } else {
      out.loss += std::abs(r);
      g = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    }
    if (!want_grad || !(v > 0.0 && v < 1.0)) continue;
    g *= scale;
    out.dm[s] += g * t;
    out.db[s] += g;
    total_g += g;
  }
  out.loss *= scale;
  if (!want_grad) return out;
  std::vector<double> M, W;
  mean_weights(md.kp, M, W);
  for (int i = 0; i < n; ++i) {
    out.dm[i] -= M[i] * total_g;
    out.db[i] -= W[i] * total_g;
  }
  // dc/dt_q = (right piece - left piece) / T at the keypoint
  for (int q = 1; q < n; ++q) {
    const double tq = md.kp[q];
    const double gap = (md.m[q] * tq + md.b[q]) - (md.m[q - 1] * tq + md.b[q - 1]);
    out.dkp[q] += total_g * gap / T;
  }
  return out;
}

// ---------------------------------------------------------------------------
// event-only objective
//
// Terms compare log intensities at probe points. A probe is a time and the
// segment whose piece is evaluated there (left limits use the left piece).

struct Probe
{
  double s = 0.0;
  int seg = 0;
  int keypoint = -1;  // index of the keypoint the probe sits on, if any
};

struct Term
{
  Probe a;
  Probe b;
  double target = 0.0;  // event: p * c_thr; hinge: c_thr
  bool hinge = false;
};

struct EventData
{
  std::vector<double> t;    // merged, ascending
  std::vector<int> p;       // summed polarity per timestamp
  double delta = 0.0;
  // disjoint, sorted intervals with evidence of gradual change: the span
  // of each run of same-sign events, widened by its edge spacing
  std::vector<std::pair<double, double>> active;

  double active_overlap(double a, double b) const
  {
    double total = 0.0;
    for (const auto & [lo, hi] : active) total += std::max(0.0, std::min(b, hi) - std::max(a, lo));
    return total;
  }
  bool is_active(double t) const
  {
    for (const auto & [lo, hi] : active) {
      if (t > lo && t < hi) return true;
    }
    return false;
  }
};

EventData prepare_events(const PixelObservations & obs, const ExposureWindow & w, const FitConfig & cfg)
{
  EventData ev;
  ev.delta = cfg.event_bracket * w.length();
  for (std::size_t k = 0; k < obs.event_t.size(); ++k) {
    if (!ev.t.empty() && obs.event_t[k] == ev.t.back()) {
      ev.p.back() += obs.event_p[k];
      continue;
    }
    ev.t.push_back(obs.event_t[k]);
    ev.p.push_back(obs.event_p[k]);
  }
  const std::size_t count = ev.t.size();
  auto sign = [&](std::size_t k) { return (ev.p[k] > 0) - (ev.p[k] < 0); };
  for (std::size_t k = 0; k + 1 < count;) {
    std::size_t end = k;
    while (end + 1 < count && sign(end + 1) == sign(k) && sign(k) != 0) ++end;
    if (end > k) {
      const double before = k == 0 ? w.begin() : ev.t[k - 1];
      const double after = end + 1 == count ? w.end() : ev.t[end + 1];
      const double lo = std::max(before, ev.t[k] - (ev.t[k + 1] - ev.t[k]));
      const double hi = std::min(after, ev.t[end] + (ev.t[end] - ev.t[end - 1]));
      if (!ev.active.empty() && lo <= ev.active.back().second) {
        ev.active.back().second = std::max(ev.active.back().second, hi);
      } else {
        ev.active.emplace_back(lo, hi);
      }
    }
    k = end + 1;
  }
  return ev;
}

struct TermSet
{
  std::vector<Term> terms;
  std::vector<int> gap_keypoints;  // keypoints whose gap is penalized
  std::vector<double> quiet;       // per segment: length not spanned by its events
};

TermSet build_terms(const Model & md, const EventData & ev, double c_thr)
{
  const int n = md.n();
  const Probe start{md.kp.front(), 0, -1};
  auto probe_at = [&](double s) { return Probe{s, segment_index(md.kp, s), -1}; };
  // level reference: last event whose evaluation time is <= s
  auto ref = [&](double s) {
    const auto it = std::upper_bound(ev.t.begin(), ev.t.end(), s);
    if (it == ev.t.begin()) return start;
    return probe_at(*(it - 1));
  };
  auto supported = [&](double tq) {
    const auto it = std::lower_bound(ev.t.begin(), ev.t.end(), tq - ev.delta);
    return it != ev.t.end() && *it <= tq + ev.delta;
  };

  TermSet ts;
  ts.terms.reserve(ev.t.size() + 2 * static_cast<std::size_t>(n) + 1);
  for (std::size_t k = 0; k < ev.t.size(); ++k) {
    const Probe prev = k == 0 ? start : probe_at(ev.t[k - 1]);
    ts.terms.push_back({probe_at(ev.t[k]), prev, ev.p[k] * c_thr, false});
  }
  for (int q = 1; q < n; ++q) {
    const double tq = md.kp[q];
    ts.terms.push_back({Probe{tq, q - 1, q}, ref(tq), c_thr, true});
    if (!supported(tq)) {
      ts.terms.push_back({Probe{tq, q, q}, ref(tq), c_thr, true});
      ts.gap_keypoints.push_back(q);
    }
  }
  const double end = md.kp.back();
  ts.terms.push_back({Probe{end, n - 1, -1}, ref(end), c_thr, true});
  ts.quiet.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ts.quiet[static_cast<std::size_t>(i)] = (md.kp[i + 1] - md.kp[i]) - ev.active_overlap(md.kp[i], md.kp[i + 1]);
  }
  return ts;
}

struct LogValue
{
  double value;  // ln(max(v, 0) + eps)
  double slope;  // d value / d v
};

LogValue log_value(const Model & md, double c, const Probe & pr, double eps)
{
  const double v = c + md.m[pr.seg] * pr.s + md.b[pr.seg];
  if (v < 0.0) return {std::log(eps), 0.0};
  return {std::log(v + eps), 1.0 / (v + eps)};
}

double rho(double r, LossKind loss) { return loss == LossKind::L2 ? r * r : std::abs(r); }
double rho_prime(double r, LossKind loss)
{
  if (loss == LossKind::L2) return 2.0 * r;
  return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}
double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Residual of a term; hinge terms are 0 when inactive.
struct TermValue
{
  double r;
  double da;  // d r / d v_a
  double db;  // d r / d v_b
};

TermValue term_value(const Model & md, double c, const Term & term, double eps)
{
  const LogValue la = log_value(md, c, term.a, eps);
  const LogValue lb = log_value(md, c, term.b, eps);
  const double diff = la.value - lb.value;
  if (!term.hinge) return {diff - term.target, la.slope, -lb.slope};
  const double h = std::abs(diff) - term.target;
  if (h <= 0.0) return {0.0, 0.0, 0.0};
  const double s = sgn(diff);
  return {h, s * la.slope, -s * lb.slope};
}

double gap_at(const Model & md, int q)
{
  const double tq = md.kp[q];
  return (md.m[q] * tq + md.b[q]) - (md.m[q - 1] * tq + md.b[q - 1]);
}

ModelGradient event_objective(const Model & md, const PixelObservations & obs, const EventData & ev,
                              const FitConfig & cfg, bool want_grad)
{
  const int n = md.n();
  const double T = length_of(md);
  const double c = constant_of(md, obs.blur);
  const TermSet ts = build_terms(md, ev, cfg.event_threshold);
  ModelGradient out;
  if (want_grad) {
    out.dm.assign(n, 0.0);
    out.db.assign(n, 0.0);
    out.dkp.assign(n + 1, 0.0);
  }
  double total_g = 0.0;
  auto accumulate = [&](const Probe & pr, double g) {
    if (g == 0.0) return;
    out.dm[pr.seg] += g * pr.s;
    out.db[pr.seg] += g;
    total_g += g;
    if (pr.keypoint > 0) out.dkp[pr.keypoint] += g * md.m[pr.seg];
  };
  for (const Term & term : ts.terms) {
    const TermValue tv = term_value(md, c, term, cfg.log_floor);
    out.loss += cfg.event_weight * rho(tv.r, cfg.loss);
    if (!want_grad) continue;
    const double g = cfg.event_weight * rho_prime(tv.r, cfg.loss);
    accumulate(term.a, g * tv.da);
    accumulate(term.b, g * tv.db);
  }
  for (int q : ts.gap_keypoints) {
    const double gap = gap_at(md, q);
    out.loss += cfg.smooth_weight * std::abs(gap);
    if (!want_grad) continue;
    const double g = cfg.smooth_weight * sgn(gap);
    const double tq = md.kp[q];
    out.dm[q] += g * tq;
    out.db[q] += g;
    out.dm[q - 1] -= g * tq;
    out.db[q - 1] -= g;
    out.dkp[q] += g * (md.m[q] - md.m[q - 1]);
  }
  // drift inside event-free stretches
  for (int i = 0; i < n; ++i) {
    const double q = ts.quiet[static_cast<std::size_t>(i)];
    out.loss += cfg.smooth_weight * std::abs(md.m[i]) * q;
    if (!want_grad) continue;
    out.dm[i] += cfg.smooth_weight * sgn(md.m[i]) * q;
    const double g = cfg.smooth_weight * std::abs(md.m[i]);
    if (!ev.is_active(md.kp[i])) out.dkp[i] -= g;
    if (!ev.is_active(md.kp[i + 1])) out.dkp[i + 1] += g;
  }
  if (!want_grad) return out;
  std::vector<double> M, W;
  mean_weights(md.kp, M, W);
  for (int i = 0; i < n; ++i) {
    out.dm[i] -= M[i] * total_g;
    out.db[i] -= W[i] * total_g;
  }
  for (int q = 1; q < n; ++q) out.dkp[q] += total_g * gap_at(md, q) / T;
  return out;
}

// ---------------------------------------------------------------------------
// coefficient updates

// Constrained least squares for fixed keypoints: rendered pieces fit the
// samples of their segment, subject to the exposure mean equalling the blur.
// Segment i is written as p_i + d_i u with u in [-1, 1] across it, so its
// exposure share is W_i p_i.
//
// Samples decide what they can: both coefficients of a segment with two or
// more samples, the value at the sample of a one-sample segment. Whatever is
// left open (slopes of one-sample segments, empty segments) minimizes a
// value/slope continuity penalty between neighbours and absorbs the blur
// constraint, which then costs nothing in the loss. With nothing open,
// `balance` first lets the keypoints absorb it inside their sample gaps;
// the rest is spread over the samples' normal equations.
// Stored intercepts are p_i - blur, so c comes out as the blur.
// Slides keypoints inside their sample gaps (membership unchanged) so the
// unconstrained pieces (m, b) integrate to the blur. Keypoint q moves the
// integral by a quadratic in its position; keypoints are tried in turn until
// the residual vanishes or every gap is exhausted.
void balance_keypoints(Model & md, const std::vector<double> & m, const std::vector<double> & b,
                       const std::vector<double> & sample_t, double blur)
{
  const int n = md.n();
  const double T = length_of(md);
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = md.kp[i], e = md.kp[i + 1];
    integral += 0.5 * m[i] * (e - a) * (e + a) + b[i] * (e - a);
  }
  double residual = blur * T - integral;
  for (int q = 1; q < n && residual != 0.0; ++q) {
    const double x0 = md.kp[q];
    const auto it = std::lower_bound(sample_t.begin(), sample_t.end(), x0);
    const double lo = std::max(std::nextafter(md.kp[q - 1], kInf),
                               it == sample_t.begin() ? md.kp[q - 1] : std::nextafter(*(it - 1), kInf));
    const double hi = std::min(std::nextafter(md.kp[q + 1], -kInf), it == sample_t.end() ? md.kp[q + 1] : *it);
    if (!(hi >= lo)) continue;
    // F(x) = integral gained by moving the keypoint from x0 to x
    const double dm = m[q - 1] - m[q], db = b[q - 1] - b[q];
    auto F = [&](double x) { return 0.5 * dm * (x - x0) * (x + x0) + db * (x - x0); };
    std::vector<double> cand{lo, hi};
    const double A = 0.5 * dm, B = db, C = -(0.5 * dm * x0 * x0 + db * x0) - residual;
    if (A == 0.0) {
      if (B != 0.0) cand.push_back(-C / B);
    } else {
      const double disc = B * B - 4.0 * A * C;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double r = -0.5 * (B + (B >= 0.0 ? sq : -sq));
        if (r != 0.0) cand.push_back(C / r);
        cand.push_back(r / A);
      }
      cand.push_back(-B / (2.0 * A));
    }
    double best_x = x0, best_r = std::abs(residual);
    for (double x : cand) {
      if (!(x >= lo && x <= hi)) continue;
      const double r = std::abs(residual - F(x));
      if (r < best_r || (r == best_r && std::abs(x - x0) < std::abs(best_x - x0))) best_x = x, best_r = r;
    }
    residual -= F(best_x);
    md.kp[q] = best_x;
  }
}

void solve_supervised_ls(Model & md, const PixelObservations & obs, bool balance)
{
  const int n = md.n();
  const auto un = static_cast<std::size_t>(n);
  const double T = length_of(md);
  std::vector<double> mid(un), hw(un), W(un);
  for (std::size_t i = 0; i < un; ++i) {
    mid[i] = 0.5 * (md.kp[i] + md.kp[i + 1]);
    hw[i] = 0.5 * (md.kp[i + 1] - md.kp[i]);
    W[i] = 2.0 * hw[i] / T;
  }
  struct Acc
  {
    double s1 = 0, su = 0, suu = 0, sy = 0, suy = 0;
    double u = 0, y = 0;  // the sample, when there is exactly one
  };
  std::vector<Acc> acc(un);
  for (std::size_t j = 0; j < obs.sample_t.size(); ++j) {
    const auto i = static_cast<std::size_t>(segment_index(md.kp, obs.sample_t[j]));
    const double u = (obs.sample_t[j] - mid[i]) / hw[i];
    const double y = obs.sample_v[j];
    Acc & a = acc[i];
    a.s1 += 1.0;
    a.su += u;
    a.suu += u * u;
    a.sy += y;
    a.suy += u * y;
    a.u = u;
    a.y = y;
  }

  // affine parametrization (p_i, d_i) = base_i + J_i f over the open dofs f
  std::vector<double> p(un, 0.0), d(un, 0.0);
  std::vector<int> first(un, -1);  // index of the segment's first open dof
  std::vector<std::array<double, 4>> J(un, {0, 0, 0, 0});  // [dp/df0 dp/df1 dd/df0 dd/df1]
  std::vector<int> open_count(un, 0);
  int nf = 0;
  for (std::size_t i = 0; i < un; ++i) {
    const Acc & a = acc[i];
    const double det = a.s1 * a.suu - a.su * a.su;
    if (a.s1 >= 2.0 && det > 0.0) {
      p[i] = (a.suu * a.sy - a.su * a.suy) / det;
      d[i] = (a.s1 * a.suy - a.su * a.sy) / det;
    } else if (a.s1 >= 1.0) {
      // every sample at the same u: the value there is their mean
      const double y = a.sy / a.s1;
      p[i] = y;
      first[i] = nf++;
      open_count[i] = 1;
      J[i] = {-a.u, 0, 1, 0};
    } else {
      first[i] = nf;
      nf += 2;
      open_count[i] = 2;
      J[i] = {1, 0, 0, 1};
    }
  }

  if (nf == 0 && balance) {
    // every coefficient is data-determined: let the keypoints take up the
    // blur where their gaps allow, then solve again for what remains
    std::vector<double> m(un), b(un);
    for (std::size_t i = 0; i < un; ++i) {
      m[i] = d[i] / hw[i];
      b[i] = p[i] - m[i] * mid[i];
    }
    balance_keypoints(md, m, b, obs.sample_t, obs.blur);
    solve_supervised_ls(md, obs, false);
    return;
  }
  if (nf == 0) {
    // Lagrange step over each segment's 2x2 normal matrix
    double violation = -obs.blur, curvature = 0.0;
    std::vector<double> zp(un), zd(un);
    for (std::size_t i = 0; i < un; ++i) {
      const Acc & a = acc[i];
      const double det = a.s1 * a.suu - a.su * a.su;
      zp[i] = a.suu * W[i] / det;
      zd[i] = -a.su * W[i] / det;
      violation += W[i] * p[i];
      curvature += W[i] * zp[i];
    }
    const double lambda = violation / curvature;
    for (std::size_t i = 0; i < un; ++i) {
      p[i] -= lambda * zp[i];
      d[i] -= lambda * zd[i];
    }
  } else {
    // continuity rows between neighbours, affine in f
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * (n - 1), nf);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * (n - 1));
    auto add = [&](Eigen::Index row, std::size_t i, double cp, double cd) {
      // row += cp * p_i + cd * d_i
      r(row) -= cp * p[i] + cd * d[i];
      for (int k = 0; k < open_count[i]; ++k) {
        A(row, first[i] + k) += cp * J[i][static_cast<std::size_t>(k)] + cd * J[i][static_cast<std::size_t>(2 + k)];
      }
    };
    for (std::size_t i = 0; i + 1 < un; ++i) {
      const auto row = static_cast<Eigen::Index>(2 * i);
      // value jump (p_i + d_i) - (p_j - d_j), slope jump scaled by the
      // narrower half width
      add(row, i, 1.0, 1.0);
      add(row, i + 1, -1.0, 1.0);
      const double g = std::min(hw[i], hw[i + 1]);
      add(row + 1, i, 0.0, g / hw[i]);
      add(row + 1, i + 1, 0.0, -g / hw[i + 1]);
    }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(nf);
    double beta = obs.blur;
    for (std::size_t i = 0; i < un; ++i) {
      beta -= W[i] * p[i];
      for (int k = 0; k < open_count[i]; ++k) u(first[i] + k) += W[i] * J[i][static_cast<std::size_t>(k)];
    }
    Eigen::MatrixXd H = A.transpose() * A;
    H.diagonal().array() += 1e-12;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    const Eigen::VectorXd x0 = ldlt.solve(A.transpose() * r);
    const Eigen::VectorXd z = ldlt.solve(u);
    const Eigen::VectorXd f = x0 + z * ((beta - u.dot(x0)) / u.dot(z));
    for (std::size_t i = 0; i < un; ++i) {
      for (int k = 0; k < open_count[i]; ++k) {
        p[i] += J[i][static_cast<std::size_t>(k)] * f(first[i] + k);
        d[i] += J[i][static_cast<std::size_t>(2 + k)] * f(first[i] + k);
      }
    }
  }
  for (std::size_t i = 0; i < un; ++i) {
    md.m[i] = d[i] / hw[i];
    md.b[i] = (p[i] - md.m[i] * mid[i]) - obs.blur;
  }
}

// Keeps the best of a diminishing-step normalized subgradient walk.
void refine_l1(Model & md, const PixelObservations & obs, const FitConfig & cfg)
{
  const double T = length_of(md);
  Model best = md;
  double best_loss = supervised_objective(md, obs, LossKind::L1, false).loss;
  Model cur = md;
  // segments without samples keep their least-squares continuation
  std::vector<char> observed(static_cast<std::size_t>(md.n()), 0);
  for (double t : obs.sample_t) observed[static_cast<std::size_t>(segment_index(md.kp, t))] = 1;
  for (int it = 0; it < cfg.inner_iters; ++it) {
    const ModelGradient g = supervised_objective(cur, obs, LossKind::L1, true);
    double norm2 = 0.0;
    for (int i = 0; i < cur.n(); ++i) {
      if (!observed[static_cast<std::size_t>(i)]) continue;
      // slopes measured in intensity per half-window
      const double gm = g.dm[i] * (2.0 / T);
      norm2 += gm * gm + g.db[i] * g.db[i];
    }
    if (norm2 == 0.0) break;
    const double alpha = cfg.step / std::sqrt(static_cast<double>(it + 1)) / std::sqrt(norm2);
    for (int i = 0; i < cur.n(); ++i) {
      if (!observed[static_cast<std::size_t>(i)]) continue;
      cur.m[i] -= alpha * g.dm[i] * (2.0 / T) * (2.0 / T);
      cur.b[i] -= alpha * g.db[i];
    }
    const double loss = supervised_objective(cur, obs, LossKind::L1, false).loss;
    if (loss < best_loss) {
      best_loss = loss;
      best = cur;
    }
  }
  md = std::move(best);
}

double supervised_loss(const Model & md, const PixelObservations & obs, const FitConfig & cfg)
{
  return supervised_objective(md, obs, cfg.loss, false).loss;
}

double event_loss(const Model & md, const PixelObservations & obs, const EventData & ev, const FitConfig & cfg)
{
  return event_objective(md, obs, ev, cfg, false).loss;
}

// Levenberg-Marquardt on (m, b) with the term structure frozen; L1 terms
// and the gap penalty are handled by reweighting. Only improving steps are
// taken.
void refine_events_lm(Model & md, const PixelObservations & obs, const EventData & ev, const FitConfig & cfg)
{
  const int n = md.n();
  const int dim = 2 * n;
  const double eps = cfg.log_floor;
  constexpr double eta = 1e-6;
  double current = event_loss(md, obs, ev, cfg);
  double mu = 1e-3;
  std::vector<double> M, W;
  mean_weights(md.kp, M, W);
  const TermSet ts = build_terms(md, ev, cfg.event_threshold);

  Eigen::VectorXd row(dim);
  for (int it = 0; it < cfg.inner_iters && current > 0.0; ++it) {
    const double c = constant_of(md, obs.blur);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    auto add_probe = [&](const Probe & pr, double coef) {
      if (coef == 0.0) return;
      for (int i = 0; i < n; ++i) {
        row[2 * i] -= coef * M[i];
        row[2 * i + 1] -= coef * W[i];
      }
      row[2 * pr.seg] += coef * pr.s;
      row[2 * pr.seg + 1] += coef;
    };
    for (const Term & term : ts.terms) {
      const TermValue tv = term_value(md, c, term, eps);
      if (tv.da == 0.0 && tv.db == 0.0) continue;
      row.setZero();
      add_probe(term.a, tv.da);
      add_probe(term.b, tv.db);
      const double w = cfg.event_weight * (cfg.loss == LossKind::L2 ? 1.0 : 1.0 / std::max(std::abs(tv.r), eta));
      H.noalias() += w * row * row.transpose();
      g.noalias() += w * tv.r * row;
    }
    for (int q : ts.gap_keypoints) {
      const double gap = gap_at(md, q);
      const double tq = md.kp[q];
      row.setZero();
      row[2 * q] = tq;
      row[2 * q + 1] = 1.0;
      row[2 * (q - 1)] = -tq;
      row[2 * (q - 1) + 1] = -1.0;
      const double w = cfg.smooth_weight / std::max(std::abs(gap), eta);
      H.noalias() += w * row * row.transpose();
      g.noalias() += w * gap * row;
    }
    for (int i = 0; i < n; ++i) {
      const double q = ts.quiet[static_cast<std::size_t>(i)];
      if (q <= 0.0) continue;
      const double r = md.m[i] * q;
      const double w = cfg.smooth_weight / std::max(std::abs(r), eta);
      H(2 * i, 2 * i) += w * q * q;
      g[2 * i] += w * r * q;
    }
    if (g.squaredNorm() == 0.0) break;

    bool accepted = false;
    while (mu < 1e10) {
      Eigen::MatrixXd A = H;
      for (int i = 0; i < dim; ++i) A(i, i) += mu * (H(i, i) + 1e-9);
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      Model trial = md;
      for (int i = 0; i < n; ++i) {
        trial.m[i] += step[2 * i];
        trial.b[i] += step[2 * i + 1];
      }
      const double loss = event_loss(trial, obs, ev, cfg);
      if (std::isfinite(loss) && loss < current) {
        md = std::move(trial);
        current = loss;
        mu = std::max(mu / 3.0, 1e-9);
        accepted = true;
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) break;
  }
}

// ---------------------------------------------------------------------------
// keypoint search

constexpr double kGolden = 0.6180339887498949;

// Minimizes f on [lo, hi]; returns the best abscissa seen.
template <class F>
std::pair<double, double> golden_section(F && f, double lo, double hi, double tol)
{
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  double best_x = f1 <= f2 ? x1 : x2;
  double best_f = std::min(f1, f2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
      if (f1 < best_f) best_f = f1, best_x = x1;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
      if (f2 < best_f) best_f = f2, best_x = x2;
    }
  }
  return {best_x, best_f};
}

// Round-robin golden-section search over interior keypoints. `profile`
// maps a candidate model to (loss, possibly re-solved model). With samples,
// membership only changes as a keypoint crosses one, so one probe per gap
// between samples finds the bracket and golden-section refines inside it.
template <class Profile>
void search_keypoints(Model & md, double & loss, const std::vector<double> & sample_t, const ExposureWindow & w,
                      Profile && profile)
{
  const int n = md.n();
  const double tol = 1e-12 * w.length();
  for (int q = 1; q < n; ++q) {
    const double lo = std::nextafter(md.kp[q - 1], kInf);
    const double hi = std::nextafter(md.kp[q + 1], -kInf);
    if (!(hi > lo)) continue;
    Model trial = md;
    auto f = [&](double x) {
      trial.kp[q] = x;
      return profile(trial).first;
    };
    double best_x = md.kp[q];
    double best_f = loss;
    if (sample_t.empty()) {
      const auto wide = golden_section(f, lo, hi, std::max(tol, 1e-9 * (hi - lo)));
      if (wide.second < best_f) best_x = wide.first, best_f = wide.second;
    } else {
      auto it = std::upper_bound(sample_t.begin(), sample_t.end(), lo);
      double left = lo;
      for (;; ++it) {
        const double right = it == sample_t.end() ? hi : std::min(hi, *it);
        if (right > left) {
          const double x = 0.5 * (left + right);
          const double v = f(x);
          if (v < best_f) best_x = x, best_f = v;
        }
        if (it == sample_t.end() || *it >= hi) break;
        left = *it;
      }
    }
    // refine inside the gap between the samples that bracket the keypoint
    if (!sample_t.empty()) {
      const auto it = std::upper_bound(sample_t.begin(), sample_t.end(), best_x);
      const double glo = std::max(lo, it == sample_t.begin() ? lo : std::nextafter(*(it - 1), kInf));
      const double ghi = std::min(hi, it == sample_t.end() ? hi : std::nextafter(*it, -kInf));
      if (ghi > glo) {
        const auto narrow = golden_section(f, glo, ghi, tol);
        if (narrow.second < best_f) best_x = narrow.first, best_f = narrow.second;
      }
    }
    if (best_f < loss) {
      trial.kp[q] = best_x;
      auto [l, solved] = profile(trial);
      if (l < loss) {
        md = std::move(solved);
        loss = l;
      }
    }
  }
}

// Non-local move for what the coordinate search cannot reach: take one
// interior keypoint out and put it back into any gap between samples.
template <class Profile>
void relocate_keypoints(Model & md, double & loss, const std::vector<double> & sample_t, Profile && profile)
{
  const int n = md.n();
  if (n < 2 || sample_t.empty()) return;
  std::vector<double> gaps;
  for (std::size_t j = 0; j + 1 < sample_t.size(); ++j) gaps.push_back(0.5 * (sample_t[j] + sample_t[j + 1]));
  gaps.push_back(0.5 * (md.kp.front() + sample_t.front()));
  gaps.push_back(0.5 * (sample_t.back() + md.kp.back()));
  Model best;
  double best_loss = loss;
  for (int q = 1; q < n; ++q) {
    std::vector<double> rest = md.kp;
    rest.erase(rest.begin() + q);
    for (double x : gaps) {
      if (!(x > rest.front() && x < rest.back())) continue;
      const auto at = std::lower_bound(rest.begin(), rest.end(), x);
      if (*at == x) continue;
      Model trial = md;
      trial.kp = rest;
      trial.kp.insert(trial.kp.begin() + (at - rest.begin()), x);
      auto [l, solved] = profile(trial);
      if (l < best_loss) {
        best_loss = l;
        best = std::move(solved);
      }
    }
  }
  if (best_loss < loss) {
    md = std::move(best);
    loss = best_loss;
  }
}

// Exact segmented least squares (lines, no blur constraint) over the sorted
// samples; keypoints go halfway between consecutive groups.
std::vector<double> segmentation_keypoints(const PixelObservations & obs, int n, const ExposureWindow & w)
{
  const auto & t = obs.sample_t;
  const auto & y = obs.sample_v;
  const int count = static_cast<int>(t.size());
  const int groups = std::min(n, count);
  std::vector<double> kp;
  if (groups < 1) return uniform_keypoints(n, w);

  std::vector<double> S1(count + 1, 0), St(count + 1, 0), Stt(count + 1, 0), Sy(count + 1, 0), Sty(count + 1, 0),
    Syy(count + 1, 0);
  for (int j = 0; j < count; ++j) {
    S1[j + 1] = S1[j] + 1;
    St[j + 1] = St[j] + t[j];
    Stt[j + 1] = Stt[j] + t[j] * t[j];
    Sy[j + 1] = Sy[j] + y[j];
    Sty[j + 1] = Sty[j] + t[j] * y[j];
    Syy[j + 1] = Syy[j] + y[j] * y[j];
  }
  // residual sum of squares of a line through samples [i, j)
  auto cost = [&](int i, int j) {
    const double k = S1[j] - S1[i];
    if (k <= 2.0) return 0.0;
    const double mt = (St[j] - St[i]) / k;
    const double my = (Sy[j] - Sy[i]) / k;
    const double vtt = (Stt[j] - Stt[i]) - k * mt * mt;
    const double vty = (Sty[j] - Sty[i]) - k * mt * my;
    const double vyy = (Syy[j] - Syy[i]) - k * my * my;
    const double sse = vtt > 1e-300 ? vyy - vty * vty / vtt : vyy;
    return std::max(sse, 0.0);
  };

  const std::size_t stride = static_cast<std::size_t>(count) + 1;
  std::vector<double> D(static_cast<std::size_t>(groups + 1) * stride, kInf);
  std::vector<int> arg(D.size(), 0);
  D[0] = 0.0;
  for (int g = 1; g <= groups; ++g) {
    for (int j = g; j <= count - (groups - g); ++j) {
      double best = kInf;
      int best_i = g - 1;
      for (int i = g - 1; i < j; ++i) {
        const double prev = D[static_cast<std::size_t>(g - 1) * stride + i];
        if (prev == kInf) continue;
        const double v = prev + cost(i, j);
        if (v < best) best = v, best_i = i;
      }
      D[static_cast<std::size_t>(g) * stride + j] = best;
      arg[static_cast<std::size_t>(g) * stride + j] = best_i;
    }
  }
  std::vector<int> starts;
  for (int g = groups, j = count; g >= 1; --g) {
    const int i = arg[static_cast<std::size_t>(g) * stride + j];
    starts.push_back(i);
    j = i;
  }
  std::reverse(starts.begin(), starts.end());
  kp.push_back(w.begin());
  for (std::size_t g = 1; g < starts.size(); ++g) {
    const int s = starts[g];
    kp.push_back(0.5 * (t[s - 1] + t[s]));
  }
  kp.push_back(w.end());
  // too few samples: split the widest segments
  while (static_cast<int>(kp.size()) < n + 1) {
    std::size_t widest = 0;
    for (std::size_t i = 1; i + 1 < kp.size(); ++i) {
      if (kp[i + 1] - kp[i] > kp[widest + 1] - kp[widest]) widest = i;
    }
    kp.insert(kp.begin() + static_cast<long>(widest) + 1, 0.5 * (kp[widest] + kp[widest + 1]));
  }
  sanitize_keypoints(kp, w);
  return kp;
}

std::vector<double> quantile_keypoints(const EventData & ev, int n, const ExposureWindow & w)
{
  const int count = static_cast<int>(ev.t.size());
  if (count < n) return uniform_keypoints(n, w);
  std::vector<double> kp(static_cast<std::size_t>(n) + 1);
  for (int q = 1; q < n; ++q) {
    const double pos = static_cast<double>(q) / n * (count - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(count - 1));
    const double f = pos - static_cast<double>(lo);
    kp[static_cast<std::size_t>(q)] = ev.t[lo] + f * (ev.t[hi] - ev.t[lo]);
  }
  sanitize_keypoints(kp, w);
  return kp;
}

// Intensity profile implied by the events alone: the log level crosses
// ref + c_thr * E(t_k) at every event, holds between bursts, and is scaled
// so that its exposure mean equals the blur. Used to seed the coefficients.
PixelObservations event_profile(const PixelObservations & obs, const EventData & ev, const FitConfig & cfg,
                                const ExposureWindow & w)
{
  std::vector<double> at, level;
  at.push_back(w.begin());
  level.push_back(0.0);
  double e = 0.0;
  const std::size_t count = ev.t.size();
  for (std::size_t k = 0; k < count; ++k) {
    const double gap = ev.t[k] - (k == 0 ? w.begin() : ev.t[k - 1]);
    double lead = ev.delta;
    if (k + 1 < count && (ev.p[k + 1] > 0) == (ev.p[k] > 0)) lead = std::max(lead, ev.t[k + 1] - ev.t[k]);
    const double start = ev.t[k] - std::min(gap, lead);
    if (start > at.back()) {
      at.push_back(start);
      level.push_back(e);
    }
    e += ev.p[k];
    if (ev.t[k] > at.back()) {
      at.push_back(ev.t[k]);
      level.push_back(e);
    } else {
      level.back() = e;
    }
  }

  constexpr int grid = 256;
  PixelObservations out;
  out.blur = obs.blur;
  std::vector<double> ts;
  for (int i = 0; i <= grid; ++i) ts.push_back(w.begin() + w.length() * i / grid);
  ts.back() = w.end();
  ts.insert(ts.end(), at.begin(), at.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  std::vector<double> g(ts.size());
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const auto it = std::upper_bound(at.begin(), at.end(), ts[j]);
    const std::size_t hi = static_cast<std::size_t>(it - at.begin());
    double lv = level[hi - 1];
    if (hi < at.size()) {
      const double f = (ts[j] - at[hi - 1]) / (at[hi] - at[hi - 1]);
      lv += f * (level[hi] - level[hi - 1]);
    }
    g[j] = std::exp(cfg.event_threshold * lv);
  }
  double mean = 0.0;
  for (std::size_t j = 1; j < ts.size(); ++j) mean += 0.5 * (g[j] + g[j - 1]) * (ts[j] - ts[j - 1]);
  mean /= w.length();
  const double scale = (std::max(obs.blur, 0.0) + cfg.log_floor) / mean;
  out.sample_t = ts;
  out.sample_v.resize(ts.size());
  for (std::size_t j = 0; j < ts.size(); ++j) out.sample_v[j] = std::clamp(scale * g[j] - cfg.log_floor, 0.0, 1.0);
  return out;
}

Model initial_model(int n, std::vector<double> kp)
{
  Model md;
  md.kp = std::move(kp);
  md.m.assign(static_cast<std::size_t>(n), 0.0);
  md.b.assign(static_cast<std::size_t>(n), 0.0);
  return md;
}

void validate_initial_keypoints(const std::vector<double> & kp, int n, const ExposureWindow & w)
{
  SpikingPixel probe{kp, std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n)), 0.0};
  check_pixel(probe, w);
}

bool finished(const std::vector<double> & losses, double tol)
{
  const double last = losses.back();
  if (last <= tol) return true;
  if (losses.size() < 2) return false;
  return losses[losses.size() - 2] - last <= tol;
}

}  // namespace

// ---------------------------------------------------------------------------

SpikingPixel assemble_pixel(const PixelParams & params, const ExposureWindow & window, double blur)
{
  SpikingPixel px;
  px.keypoints = keypoints_from_widths(params.raw_widths, window);
  px.slopes = params.slopes;
  px.intercepts = params.intercepts;
  px.c = normalization_constant(px.slopes, px.intercepts, px.keypoints, blur);
  return px;
}

LossGradient loss_and_gradient(const PixelParams & params, const ExposureWindow & window,
                               const PixelObservations & obs, const FitConfig & config)
{
  const std::size_t n = params.raw_widths.size();
  if (n < 1 || params.slopes.size() != n || params.intercepts.size() != n) {
    throw ConfigError("parameter vectors must share a positive length");
  }
  check_finite(params.raw_widths, "raw widths");
  check_finite(params.slopes, "slopes");
  check_finite(params.intercepts, "intercepts");
  if (!std::isfinite(obs.blur)) throw NumericError("non-finite blur");

  Model md{keypoints_from_widths(params.raw_widths, window), params.slopes, params.intercepts};
  ModelGradient mg;
  if (config.mode == FitMode::Supervised) {
    mg = supervised_objective(md, obs, config.loss, true);
  } else {
    const EventData ev = prepare_events(obs, window, config);
    mg = event_objective(md, obs, ev, config, true);
  }

  // chain rule through the normalized widths:
  // dt_q/dr_l = [l < q] w_l - s_l (t_q + T/2)
  const double T = window.length();
  const double top = *std::max_element(params.raw_widths.begin(), params.raw_widths.end());
  std::vector<double> share(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (share[i] = std::exp(params.raw_widths[i] - top));
  for (auto & s : share) s /= total;

  LossGradient out;
  out.loss = mg.loss;
  out.d_slopes = std::move(mg.dm);
  out.d_intercepts = std::move(mg.db);
  out.d_raw_widths.assign(n, 0.0);
  for (std::size_t q = 1; q < n; ++q) {
    const double g = mg.dkp[q];
    if (g == 0.0) continue;
    const double offset = md.kp[q] - window.begin();
    for (std::size_t l = 0; l < n; ++l) {
      const double d = (l < q ? T * share[l] : 0.0) - share[l] * offset;
      out.d_raw_widths[l] += g * d;
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  return out;
}

PixelFit fit_pixel_supervised(const PixelObservations & obs, const ExposureWindow & window, const FitConfig & cfg,
                              const std::vector<double> & initial_keypoints, const IterationObserver & observer)
{
  check_config(cfg);
  if (obs.sample_t.empty() || obs.sample_t.size() != obs.sample_v.size()) {
    throw ShapeError("supervised fit needs matching, non-empty samples");
  }
  std::vector<double> kp;
  if (!initial_keypoints.empty()) {
    validate_initial_keypoints(initial_keypoints, cfg.n, window);
    kp = initial_keypoints;
  } else {
    kp = segmentation_keypoints(obs, cfg.n, window);
  }
  Model md = initial_model(cfg.n, std::move(kp));

  auto profile = [&](const Model & trial) {
    Model solved = trial;
    solve_supervised_ls(solved, obs, !cfg.freeze_keypoints);
    return std::make_pair(supervised_loss(solved, obs, cfg), std::move(solved));
  };

  PixelFit fit;
  double loss = supervised_loss(md, obs, cfg);
  for (int it = 1; it <= cfg.outer_iters; ++it) {
    // (a) coefficients
    auto [ls_loss, ls_model] = profile(md);
    if (ls_loss < loss) {
      md = std::move(ls_model);
      loss = ls_loss;
    }
    if (cfg.loss == LossKind::L1 && loss > 0.0) {
      refine_l1(md, obs, cfg);
      loss = supervised_loss(md, obs, cfg);
    }
    // (b) keypoints
    if (!cfg.freeze_keypoints && loss > 0.0) {
      search_keypoints(md, loss, obs.sample_t, window, profile);
      if (loss > cfg.tolerance) relocate_keypoints(md, loss, obs.sample_t, profile);
    }
    fit.losses.push_back(loss);
    if (observer) observer(it, to_pixel(md, obs.blur));
    if (finished(fit.losses, cfg.tolerance)) {
      fit.converged = true;
      break;
    }
  }
  fit.pixel = to_pixel(md, obs.blur);
  return fit;
}

namespace
{
PixelFit refine_event_fit(Model md, const PixelObservations & obs, const EventData & ev, const ExposureWindow & window,
                          const FitConfig & cfg, std::vector<SpikingPixel> * trace)
{
  auto profile = [&](const Model & trial) { return std::make_pair(event_loss(trial, obs, ev, cfg), trial); };
  PixelFit fit;
  double loss = event_loss(md, obs, ev, cfg);
  const std::vector<double> no_samples;
  for (int it = 1; it <= cfg.outer_iters; ++it) {
    if (loss > 0.0) {
      refine_events_lm(md, obs, ev, cfg);
      loss = event_loss(md, obs, ev, cfg);
    }
    if (!cfg.freeze_keypoints && loss > 0.0) {
      search_keypoints(md, loss, no_samples, window, profile);
    }
    fit.losses.push_back(loss);
    if (trace) trace->push_back(to_pixel(md, obs.blur));
    if (finished(fit.losses, cfg.tolerance)) {
      fit.converged = true;
      break;
    }
  }
  fit.pixel = to_pixel(md, obs.blur);
  return fit;
}

PixelFit replay(PixelFit fit, const std::vector<SpikingPixel> & trace, const IterationObserver & observer)
{
  if (observer) {
    for (std::size_t i = 0; i < trace.size(); ++i) observer(static_cast<int>(i) + 1, trace[i]);
  }
  return fit;
}
}  // namespace

PixelFit fit_pixel_event_only(const PixelObservations & obs, const ExposureWindow & window, const FitConfig & cfg,
                              const std::vector<double> & initial_keypoints, const IterationObserver & observer)
{
  check_config(cfg);
  if (obs.event_t.size() != obs.event_p.size()) {
    throw ShapeError("event times and polarities differ in length");
  }
  const EventData ev = prepare_events(obs, window, cfg);
  std::vector<SpikingPixel> trace, alt_trace;
  std::vector<SpikingPixel> * record = observer ? &trace : nullptr;
  if (!initial_keypoints.empty()) {
    validate_initial_keypoints(initial_keypoints, cfg.n, window);
    return replay(refine_event_fit(initial_model(cfg.n, initial_keypoints), obs, ev, window, cfg, record), trace,
                  observer);
  }
  PixelFit fit =
    refine_event_fit(initial_model(cfg.n, quantile_keypoints(ev, cfg.n, window)), obs, ev, window, cfg, record);
  if (ev.t.empty() || fit.losses.back() <= cfg.tolerance) return replay(std::move(fit), trace, observer);

  // second start from the event-integrated profile; keep the lower loss
  const PixelObservations seed = event_profile(obs, ev, cfg, window);
  Model md = initial_model(cfg.n, cfg.freeze_keypoints ? quantile_keypoints(ev, cfg.n, window)
                                                       : segmentation_keypoints(seed, cfg.n, window));
  solve_supervised_ls(md, seed, !cfg.freeze_keypoints);
  PixelFit alt = refine_event_fit(std::move(md), obs, ev, window, cfg, observer ? &alt_trace : nullptr);
  if (alt.losses.back() < fit.losses.back()) return replay(std::move(alt), alt_trace, observer);
  return replay(std::move(fit), trace, observer);
}

namespace
{
FitReport merge_reports(const std::vector<PixelFit> & fits)
{
  FitReport report;
  std::size_t longest = 0;
  for (const auto & f : fits) longest = std::max(longest, f.losses.size());
  report.losses.assign(longest, 0.0);
  report.converged = true;
  for (const auto & f : fits) {
    for (std::size_t i = 0; i < longest; ++i) {
      report.losses[i] += f.losses.empty() ? 0.0 : f.losses[std::min(i, f.losses.size() - 1)];
    }
    report.converged = report.converged && f.converged;
  }
  for (auto & l : report.losses) l /= static_cast<double>(std::max<std::size_t>(fits.size(), 1));
  report.iterations = static_cast<int>(longest);
  report.final_loss = report.losses.empty() ? 0.0 : report.losses.back();
  return report;
}

void check_hooks(const FitHooks & hooks, std::size_t pixels)
{
  if (!hooks.initial_keypoints.empty() && hooks.initial_keypoints.size() != pixels) {
    throw ShapeError("initial keypoints must be given for every pixel");
  }
}

const std::vector<double> & initial_for(const FitHooks & hooks, std::size_t i)
{
  static const std::vector<double> none;
  return hooks.initial_keypoints.empty() ? none : hooks.initial_keypoints[i];
}
}  // namespace

SupervisedFit fit_supervised(const Frame & blurry, const FrameSequence & targets, const ExposureWindow & window,
                             const FitConfig & config, const FitHooks & hooks)
{
  check_config(config);
  if (targets.empty()) throw ShapeError("supervised fit needs at least one target frame");
  if (!(targets[0].resolution == blurry.resolution)) throw ShapeError("targets and blurry image differ in resolution");
  check_finite(blurry.data, "blurry image");
  for (const Frame & f : targets) {
    if (!window.contains(f.t)) throw RangeError("target timestamp outside exposure window");
    check_finite(f.data, "target frame");
  }
  const std::size_t npix = blurry.resolution.pixels();
  check_hooks(hooks, npix);

  std::vector<double> times;
  for (const Frame & f : targets) times.push_back(f.t);

  std::vector<PixelFit> fits(npix);
  detail::parallel_for(npix, config.threads, [&](std::size_t i) {
    PixelObservations obs;
    obs.blur = blurry.data[i];
    obs.sample_t = times;
    obs.sample_v.reserve(times.size());
    for (const Frame & f : targets) obs.sample_v.push_back(f.data[i]);
    IterationObserver observer;
    if (hooks.on_iterate) observer = [&, i](int it, const SpikingPixel & px) { hooks.on_iterate(i, it, px); };
    fits[i] = fit_pixel_supervised(obs, window, config, initial_for(hooks, i), observer);
  });

  SupervisedFit out;
  out.report = merge_reports(fits);
  if (config.k == 1) {
    SpikingField field{blurry.resolution, window, config.n, {}};
    field.pixels.reserve(npix);
    for (auto & f : fits) field.pixels.push_back(std::move(f.pixel));
    out.field = std::move(field);
    return out;
  }

  // Taps enter the prediction only through sum_tap N_tap * theta_tap; the
  // minimum-norm split of the scalar solution is theta_tap = N_tap theta / |N|^2.
  KernelField field{blurry.resolution, window, config.n, config.k, {}};
  const int taps = config.k * config.k;
  const int n = config.n;
  for (int y = 0; y < blurry.resolution.height; ++y) {
    for (int x = 0; x < blurry.resolution.width; ++x) {
      const SpikingPixel & px = fits[static_cast<std::size_t>(y) * blurry.resolution.width + x].pixel;
      const auto hood = neighborhood(blurry, x, y, config.k);
      double norm2 = 0.0;
      for (double v : hood) norm2 += v * v;
      KernelPixel kpx;
      kpx.keypoints = px.keypoints;
      kpx.slopes.assign(static_cast<std::size_t>(taps * n), 0.0);
      kpx.intercepts.assign(static_cast<std::size_t>(taps * n), 0.0);
      if (norm2 > 0.0) {
        // rendered piece relative to the blur: m t + (b + c - B)
        const double shift = px.c - blurry.at(y, x);
        for (int tap = 0; tap < taps; ++tap) {
          const double share = hood[static_cast<std::size_t>(tap)] / norm2;
          for (int i = 0; i < n; ++i) {
            kpx.slopes[static_cast<std::size_t>(tap * n + i)] = share * px.slopes[i];
            kpx.intercepts[static_cast<std::size_t>(tap * n + i)] = share * (px.intercepts[i] + shift);
          }
        }
      }
      kpx.c = kernel_normalization_constant(kpx.slopes, kpx.intercepts, kpx.keypoints, hood, blurry.at(y, x));
      field.pixels.push_back(std::move(kpx));
    }
  }
  out.field = std::move(field);
  return out;
}

EventOnlyFit fit_event_only(const Frame & blurry, const EventStream & events, const FitConfig & config,
                            const FitHooks & hooks)
{
  check_config(config);
  if (config.k != 1) throw ConfigError("kernel mode is only supported for supervised fitting");
  if (!(events.resolution == blurry.resolution)) throw ShapeError("events and blurry image differ in resolution");
  check_finite(blurry.data, "blurry image");
  const auto report = validate_stream(events);
  if (!report.ok()) throw ConfigError("invalid event stream: " + report.violations.front().message);
  const std::size_t npix = blurry.resolution.pixels();
  check_hooks(hooks, npix);

  std::vector<PixelObservations> obs(npix);
  for (std::size_t i = 0; i < npix; ++i) obs[i].blur = blurry.data[i];
  for (const Event & e : events.events) {
    auto & o = obs[static_cast<std::size_t>(e.y) * blurry.resolution.width + e.x];
    o.event_t.push_back(e.t);
    o.event_p.push_back(e.p);
  }

  std::vector<PixelFit> fits(npix);
  detail::parallel_for(npix, config.threads, [&](std::size_t i) {
    IterationObserver observer;
    if (hooks.on_iterate) observer = [&, i](int it, const SpikingPixel & px) { hooks.on_iterate(i, it, px); };
    fits[i] = fit_pixel_event_only(obs[i], events.window, config, initial_for(hooks, i), observer);
  });

  EventOnlyFit out;
  out.report = merge_reports(fits);
  out.field = SpikingField{blurry.resolution, events.window, config.n, {}};
  out.field.pixels.reserve(npix);
  for (auto & f : fits) out.field.pixels.push_back(std::move(f.pixel));
  return out;
}

}  // namespace spikefit
