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

#ifndef SPIKEFIT_BASELINE_HPP
#define SPIKEFIT_BASELINE_HPP

#include <span>

#include "spikefit/core.hpp"

namespace spikefit
{
/*
 * Event-based double integral reconstruction. Every event is assumed to be
 * the same log-intensity step c_thr:
 *
 *   L(t) = L0 * exp(c_thr * E(t)),   E(t) = sum of polarities with t_e <= t
 *   L0   = B * T / integral exp(c_thr * E(s)) ds
 *
 * E is piecewise constant, so the integral is summed exactly. Outputs are
 * clamped to [0, 1].
 */
FrameSequence edi_reconstruct(const Frame & blurry, const EventStream & events, double c_thr,
                              std::span<const double> timestamps);

}  // namespace spikefit

#endif  // SPIKEFIT_BASELINE_HPP
