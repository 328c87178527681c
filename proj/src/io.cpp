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


#include "spikefit/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "spikefit/errors.hpp"

namespace spikefit
{
namespace
{
namespace fs = std::filesystem;

class Writer
{
public:
  explicit Writer(std::ostream & os) : os_(os) {}

  void bytes(const char * p, std::size_t n) { os_.write(p, static_cast<std::streamsize>(n)); }
  template <class U>
  void uint(U v)
  {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(buf, sizeof(U));
  }
  void u16(std::uint16_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void i8(std::int8_t v) { uint(static_cast<std::uint8_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void check()
  {
    if (!os_) throw ParseError("write failed");
  }

private:
  std::ostream & os_;
};

class Reader
{
public:
  Reader(std::istream & is, const char * what) : is_(is), what_(what) {}

  void bytes(char * p, std::size_t n)
  {
    is_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw ParseError(std::string("truncated ") + what_);
  }
  template <class U>
  U uint()
  {
    unsigned char buf[sizeof(U)];
    bytes(reinterpret_cast<char *>(buf), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return v;
  }
  std::uint16_t u16() { return uint<std::uint16_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  std::int8_t i8() { return static_cast<std::int8_t>(uint<std::uint8_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }

  void magic(const char * expected)
  {
    char buf[4];
    bytes(buf, 4);
    if (std::memcmp(buf, expected, 4) != 0) throw ParseError(std::string("bad magic in ") + what_);
    if (u16() != kFormatVersion) throw ParseError(std::string("unsupported version in ") + what_);
  }
  void expect_end()
  {
    if (is_.peek() != std::char_traits<char>::eof()) throw ParseError(std::string("trailing bytes in ") + what_);
  }

private:
  std::istream & is_;
  const char * what_;
};

std::uint16_t checked_u16(int v, const char * what)
{
  if (v < 0 || v > 0xffff) throw ShapeError(std::string(what) + " does not fit in 16 bits");
  return static_cast<std::uint16_t>(v);
}

ExposureWindow window_from(double length, const char * what)
{
  if (!std::isfinite(length) || !(length > 0.0)) throw ParseError(std::string("invalid exposure length in ") + what);
  return ExposureWindow(length);
}

std::ofstream open_out(const fs::path & path)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const fs::path & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  return is;
}

template <class Fn>
void write_file(const fs::path & path, Fn && fn)
{
  std::ofstream os = open_out(path);
  fn(os);
  os.flush();
  if (!os) throw ParseError("write to '" + path.string() + "' failed");
}

}  // namespace

// ---------------------------------------------------------------------------
// events

void write_events(std::ostream & os, const EventStream & stream)
{
  Writer w(os);
  w.bytes("SEVT", 4);
  w.u16(kFormatVersion);
  w.u16(checked_u16(stream.resolution.width, "width"));
  w.u16(checked_u16(stream.resolution.height, "height"));
  w.f64(stream.window.length());
  w.u64(stream.events.size());
  for (const Event & e : stream.events) {
    w.u16(e.x);
    w.u16(e.y);
    w.f64(e.t);
    w.i8(e.p);
  }
  w.check();
}

EventStream read_events(std::istream & is)
{
  Reader r(is, "event file");
  r.magic("SEVT");
  EventStream s;
  s.resolution.width = r.u16();
  s.resolution.height = r.u16();
  s.window = window_from(r.f64(), "event file");
  const std::uint64_t count = r.u64();
  // grow as records arrive so a corrupt count cannot allocate unbounded memory
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.x = r.u16();
    e.y = r.u16();
    e.t = r.f64();
    e.p = r.i8();
    s.events.push_back(e);
  }
  r.expect_end();
  const ValidationReport report = validate_stream(s);
  if (!report.ok()) throw ParseError("invalid event file: " + report.violations.front().message);
  return s;
}

void write_events(const fs::path & path, const EventStream & stream)
{
  write_file(path, [&](std::ostream & os) { write_events(os, stream); });
}

EventStream read_events(const fs::path & path)
{
  std::ifstream is = open_in(path);
  return read_events(is);
}

// ---------------------------------------------------------------------------
// frames

void write_sfrm(std::ostream & os, const Frame & frame)
{
  Writer w(os);
  w.bytes("SFRM", 4);
  w.u16(kFormatVersion);
  w.u16(checked_u16(frame.resolution.width, "width"));
  w.u16(checked_u16(frame.resolution.height, "height"));
  w.f64(frame.t);
  for (double v : frame.data) w.f32(static_cast<float>(v));
  w.check();
}

Frame read_sfrm(std::istream & is)
{
  Reader r(is, "frame file");
  r.magic("SFRM");
  Resolution res;
  res.width = r.u16();
  res.height = r.u16();
  const double t = r.f64();
  Frame f(res, t);
  for (double & v : f.data) v = r.f32();
  r.expect_end();
  return f;
}

void write_pgm(std::ostream & os, const Frame & frame)
{
  os << "P5\n" << frame.resolution.width << ' ' << frame.resolution.height << "\n65535\n";
  std::vector<char> buf(frame.data.size() * 2);
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    const double v = std::isnan(frame.data[i]) ? 0.0 : std::clamp(frame.data[i], 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    buf[2 * i] = static_cast<char>(q >> 8);
    buf[2 * i + 1] = static_cast<char>(q & 0xff);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw ParseError("write failed");
}

namespace
{
// Reads one header token, skipping whitespace and '#' comments.
long pgm_token(std::istream & is)
{
  int ch = is.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = is.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = is.get();
  }
  if (ch == EOF || !std::isdigit(ch)) throw ParseError("malformed PGM header");
  long v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + (ch - '0');
    if (v > 1000000) throw ParseError("malformed PGM header");
    ch = is.get();
  }
  if (ch == EOF || !std::isspace(ch)) throw ParseError("malformed PGM header");
  return v;
}
}  // namespace

Frame read_pgm(std::istream & is)
{
  char magic[2];
  is.read(magic, 2);
  if (is.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') throw ParseError("bad magic in PGM file");
  const long width = pgm_token(is);
  const long height = pgm_token(is);
  const long maxval = pgm_token(is);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw ParseError("malformed PGM header");
  Frame f(Resolution{static_cast<int>(height), static_cast<int>(width)}, 0.0);
  const bool wide = maxval > 255;
  Reader r(is, "PGM file");
  for (double & v : f.data) {
    unsigned q = 0;
    if (wide) {
      unsigned char b[2];
      r.bytes(reinterpret_cast<char *>(b), 2);
      q = (static_cast<unsigned>(b[0]) << 8) | b[1];
    } else {
      unsigned char b;
      r.bytes(reinterpret_cast<char *>(&b), 1);
      q = b;
    }
    v = static_cast<double>(q) / static_cast<double>(maxval);
  }
  return f;
}

void write_frame(const fs::path & path, const Frame & frame)
{
  const bool pgm = path.extension() == ".pgm";
  write_file(path, [&](std::ostream & os) { pgm ? write_pgm(os, frame) : write_sfrm(os, frame); });
}

Frame read_frame(const fs::path & path)
{
  std::ifstream is = open_in(path);
  const int first = is.peek();
  if (first == 'P') return read_pgm(is);
  return read_sfrm(is);
}

// ---------------------------------------------------------------------------
// fields

std::size_t field_file_size(const Resolution & res, int n, int k)
{
  const auto un = static_cast<std::size_t>(n);
  const auto taps = static_cast<std::size_t>(k) * static_cast<std::size_t>(k);
  return kFieldHeaderBytes + res.pixels() * (8 * (un + 1) + taps * 16 * un + 8);
}

namespace
{
void write_field_header(Writer & w, const Resolution & res, int n, int k, const ExposureWindow & window)
{
  w.bytes("SFLD", 4);
  w.u16(kFormatVersion);
  w.u16(checked_u16(res.height, "height"));
  w.u16(checked_u16(res.width, "width"));
  w.u16(checked_u16(n, "segment count"));
  w.u16(checked_u16(k, "kernel size"));
  w.f64(window.length());
}
}  // namespace

void write_field(std::ostream & os, const FittedField & field)
{
  Writer w(os);
  if (const auto * f = std::get_if<SpikingField>(&field)) {
    check_field(*f);
    write_field_header(w, f->resolution, f->n, 1, f->window);
    for (const SpikingPixel & px : f->pixels) {
      for (double v : px.keypoints) w.f64(v);
      for (double v : px.slopes) w.f64(v);
      for (double v : px.intercepts) w.f64(v);
      w.f64(px.c);
    }
  } else {
    const auto & kf = std::get<KernelField>(field);
    check_field(kf);
    write_field_header(w, kf.resolution, kf.n, kf.k, kf.window);
    const int n = kf.n;
    for (const KernelPixel & px : kf.pixels) {
      for (double v : px.keypoints) w.f64(v);
      for (int tap = 0; tap < kf.taps(); ++tap) {
        for (int i = 0; i < n; ++i) w.f64(px.slopes[static_cast<std::size_t>(tap * n + i)]);
        for (int i = 0; i < n; ++i) w.f64(px.intercepts[static_cast<std::size_t>(tap * n + i)]);
      }
      w.f64(px.c);
    }
  }
  w.check();
}

FittedField read_field(std::istream & is)
{
  Reader r(is, "field file");
  r.magic("SFLD");
  Resolution res;
  res.height = r.u16();
  res.width = r.u16();
  const int n = r.u16();
  const int k = r.u16();
  const ExposureWindow window = window_from(r.f64(), "field file");
  if (n < 1) throw ParseError("field file has zero segments");
  if (k < 1 || k % 2 == 0) throw ParseError("field file has an invalid kernel size");
  const auto un = static_cast<std::size_t>(n);
  const std::size_t taps = static_cast<std::size_t>(k) * static_cast<std::size_t>(k);

  auto read_vec = [&](std::vector<double> & v, std::size_t count) {
    v.resize(count);
    for (double & x : v) x = r.f64();
  };
  try {
    if (k == 1) {
      SpikingField f{res, window, n, {}};
      for (std::size_t p = 0; p < res.pixels(); ++p) {
        SpikingPixel px;
        read_vec(px.keypoints, un + 1);
        read_vec(px.slopes, un);
        read_vec(px.intercepts, un);
        px.c = r.f64();
        f.pixels.push_back(std::move(px));
      }
      r.expect_end();
      check_field(f);
      return f;
    }
    KernelField f{res, window, n, k, {}};
    for (std::size_t p = 0; p < res.pixels(); ++p) {
      KernelPixel px;
      read_vec(px.keypoints, un + 1);
      px.slopes.resize(taps * un);
      px.intercepts.resize(taps * un);
      for (std::size_t tap = 0; tap < taps; ++tap) {
        for (std::size_t i = 0; i < un; ++i) px.slopes[tap * un + i] = r.f64();
        for (std::size_t i = 0; i < un; ++i) px.intercepts[tap * un + i] = r.f64();
      }
      px.c = r.f64();
      f.pixels.push_back(std::move(px));
    }
    r.expect_end();
    check_field(f);
    return f;
  } catch (const ConfigError & e) {
    throw ParseError(std::string("invalid field file: ") + e.what());
  }
}

void write_field(const fs::path & path, const FittedField & field)
{
  write_file(path, [&](std::ostream & os) { write_field(os, field); });
}

FittedField read_field(const fs::path & path)
{
  std::ifstream is = open_in(path);
  return read_field(is);
}

// ---------------------------------------------------------------------------
// frame directories

std::string frame_file_name(std::size_t index, const std::string & extension)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu", index);
  return buf + extension;
}

void write_frame_dir(const fs::path & dir, const FrameSequence & frames, bool pgm)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create directory '" + dir.string() + "': " + ec.message());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    write_frame(dir / frame_file_name(i), frames[i]);
    if (pgm) write_frame(dir / frame_file_name(i, ".pgm"), frames[i]);
  }
}

FrameSequence read_frame_dir(const fs::path & dir)
{
  if (!fs::is_directory(dir)) throw ParseError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto & entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("frame_", 0) == 0 && entry.path().extension() == ".sfrm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  FrameSequence seq;
  for (const auto & p : files) seq.push_back(read_frame(p));
  return seq;
}

}  // namespace spikefit
