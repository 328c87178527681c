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

#ifndef SPIKEFIT_ERRORS_HPP
#define SPIKEFIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spikefit
{
// timestamp or pixel index outside its valid domain
class RangeError : public std::out_of_range
{
public:
  using std::out_of_range::out_of_range;
};

// resolutions or sequence lengths that do not agree
class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// invalid configuration value or unsupported mode
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// NaN / inf where finite numbers are required
class NumericError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

// malformed file contents
class ParseError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace spikefit

#endif  // SPIKEFIT_ERRORS_HPP
