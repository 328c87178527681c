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


#ifndef SPIKEFIT_IO_HPP
#define SPIKEFIT_IO_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "spikefit/core.hpp"
#include "spikefit/fitter.hpp"

namespace spikefit
{
/*
 * Binary formats, all little-endian, version 1.
 *
 *   SEVT  "SEVT" u16 version, u16 width, u16 height, f64 T, u64 count
 *         then per event: u16 x, u16 y, f64 t, i8 p           (26 + 13 N)
 *   SFRM  "SFRM" u16 version, u16 width, u16 height, f64 t
 *         then h*w f32, row-major                            (18 + 4 h w)
 *   SFLD  "SFLD" u16 version, u16 h, u16 w, u16 n, u16 k, f64 T
 *         then per pixel: (n+1) f64 keypoints, per tap n f64 slopes and
 *         n f64 intercepts, f64 c               (22 + h w (8(n+1) + 16 k k n + 8))
 *
 * PGM frames are P5 with maxval 65535 (big-endian samples), v -> round(v * 65535)
 * after clamping to [0, 1]. They carry no timestamp.
 */
inline constexpr std::size_t kEventHeaderBytes = 26;
inline constexpr std::size_t kEventRecordBytes = 13;
inline constexpr std::size_t kFrameHeaderBytes = 18;
inline constexpr std::size_t kFieldHeaderBytes = 22;
inline constexpr std::uint16_t kFormatVersion = 1;

void write_events(std::ostream & os, const EventStream & stream);
// Throws ParseError on bad magic/version, truncation, or a stream that fails
// validate_stream.
EventStream read_events(std::istream & is);
void write_events(const std::filesystem::path & path, const EventStream & stream);
EventStream read_events(const std::filesystem::path & path);

// SFRM stores f32; values are rounded to nearest on write.
void write_sfrm(std::ostream & os, const Frame & frame);
Frame read_sfrm(std::istream & is);
void write_pgm(std::ostream & os, const Frame & frame);
Frame read_pgm(std::istream & is);

// Format chosen by extension (".pgm", otherwise SFRM) on write, by magic on read.
void write_frame(const std::filesystem::path & path, const Frame & frame);
Frame read_frame(const std::filesystem::path & path);

void write_field(std::ostream & os, const FittedField & field);
FittedField read_field(std::istream & is);
void write_field(const std::filesystem::path & path, const FittedField & field);
FittedField read_field(const std::filesystem::path & path);
std::size_t field_file_size(const Resolution & res, int n, int k);

// Directories of frames named frame_000000.sfrm, frame_000001.sfrm, ...
// With pgm set, a .pgm copy is written next to each SFRM file.
std::string frame_file_name(std::size_t index, const std::string & extension = ".sfrm");
void write_frame_dir(const std::filesystem::path & dir, const FrameSequence & frames, bool pgm = false);
// Reads every frame_*.sfrm in name order.
FrameSequence read_frame_dir(const std::filesystem::path & dir);

}  // namespace spikefit

#endif  // SPIKEFIT_IO_HPP
