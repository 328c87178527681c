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


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "spikefit/errors.hpp"
#include "spikefit/metrics.hpp"

using namespace spikefit;

namespace
{
Frame random_frame(std::mt19937_64 & rng, Resolution res, double t = 0.0)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f(res, t);
  for (auto & v : f.data) v = u(rng);
  return f;
}

Frame with_mse(const Frame & a, double target)
{
  // pixel-wise offset of sqrt(target), alternating sign, from a mid-grey
  Frame b = a;
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = a.data[i] + (i % 2 ? 1 : -1) * std::sqrt(target);
  return b;
}

// Reference SSIM: per window, weighted means then centred second moments.
double reference_ssim(const Frame & a, const Frame & b)
{
  const int R = 5;
  std::vector<double> g(11);
  double s = 0.0;
  for (int i = -R; i <= R; ++i) s += g[static_cast<std::size_t>(i + R)] = std::exp(-i * i / 4.5);
  for (auto & v : g) v /= s;
  const double C1 = 1e-4, C2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y = R; y + R < a.resolution.height; ++y) {
    for (int x = R; x + R < a.resolution.width; ++x) {
      double ma = 0, mb = 0;
      for (int j = -R; j <= R; ++j)
        for (int i = -R; i <= R; ++i) {
          const double w = g[static_cast<std::size_t>(j + R)] * g[static_cast<std::size_t>(i + R)];
          ma += w * a.at(y + j, x + i);
          mb += w * b.at(y + j, x + i);
        }
      double va = 0, vb = 0, cv = 0;
      for (int j = -R; j <= R; ++j)
        for (int i = -R; i <= R; ++i) {
          const double w = g[static_cast<std::size_t>(j + R)] * g[static_cast<std::size_t>(i + R)];
          const double da = a.at(y + j, x + i) - ma, db = b.at(y + j, x + i) - mb;
          va += w * da * da;
          vb += w * db * db;
          cv += w * da * db;
        }
      total += (2 * ma * mb + C1) * (2 * cv + C2) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
      ++count;
    }
  }
  return total / count;
}
}  // namespace

TEST(Mse, Examples)
{
  std::mt19937_64 rng(51);
  const Frame a = random_frame(rng, {8, 8});
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(Frame({8, 8}, 0.0, 0.0), Frame({8, 8}, 0.0, 1.0)), 1.0);
  Frame board({8, 8}, 0.0), inverse({8, 8}, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      board.at(y, x) = (x + y) % 2;
      inverse.at(y, x) = 1 - (x + y) % 2;
    }
  EXPECT_EQ(mse(board, inverse), 1.0);
  EXPECT_THROW(mse(a, Frame({8, 9}, 0.0)), ShapeError);
}

TEST(Mse, SymmetricNonNegative)
{
  std::mt19937_64 rng(52);
  for (int i = 0; i < 50; ++i) {
    const Frame a = random_frame(rng, {6, 9}), b = random_frame(rng, {6, 9});
    EXPECT_EQ(mse(a, b), mse(b, a));
    EXPECT_GE(mse(a, b), 0.0);
  }
}

TEST(Psnr, Examples)
{
  const Frame grey({4, 4}, 0.0, 0.5);
  EXPECT_NEAR(psnr(grey, with_mse(grey, 0.01)), 20.0, 1e-12);
  EXPECT_EQ(psnr(grey, grey), std::numeric_limits<double>::infinity());
  EXPECT_EQ(psnr(Frame({4, 4}, 0.0, 0.0), Frame({4, 4}, 0.0, 1.0)), 0.0);
}

TEST(Psnr, ConsistentWithMse)
{
  std::mt19937_64 rng(53);
  for (int i = 0; i < 100; ++i) {
    const Frame a = random_frame(rng, {7, 7}), b = random_frame(rng, {7, 7});
    EXPECT_NEAR(std::pow(10.0, -psnr(a, b) / 10.0), mse(a, b), 1e-12);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
  }
}

TEST(Ssim, Examples)
{
  std::mt19937_64 rng(54);
  const Frame a = random_frame(rng, {16, 16});
  EXPECT_EQ(ssim(a, a), 1.0);
  const double C1 = 1e-4;
  const double constants = ssim(Frame({16, 16}, 0.0, 0.0), Frame({16, 16}, 0.0, 1.0));
  EXPECT_NEAR(constants, C1 / (1.0 + C1), 1e-12);
  EXPECT_LT(constants, 0.05);
  std::normal_distribution<double> noise(0.0, 1e-4);
  Frame b = a;
  for (auto & v : b.data) v += noise(rng);
  EXPECT_GE(ssim(a, b), 0.999);
  EXPECT_THROW(ssim(Frame({10, 16}, 0.0), Frame({10, 16}, 0.0)), ShapeError);
}

TEST(Ssim, MatchesReferenceImplementation)
{
  std::mt19937_64 rng(55);
  for (int i = 0; i < 10; ++i) {
    const Frame a = random_frame(rng, {13 + i, 20});
    Frame b = a;
    std::normal_distribution<double> noise(0.0, 0.05 * (i + 1));
    for (auto & v : b.data) v += noise(rng);
    EXPECT_NEAR(ssim(a, b), reference_ssim(a, b), 1e-10);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
  }
}

TEST(Sequence, MeansAndErrors)
{
  std::mt19937_64 rng(56);
  std::vector<Frame> av, bv;
  for (int i = 0; i < 4; ++i) {
    av.push_back(random_frame(rng, {12, 12}, 0.1 * i));
    bv.push_back(random_frame(rng, {12, 12}, 0.1 * i));
  }
  const FrameSequence a(av), b(bv);
  const auto m = sequence_metrics(a, b);
  double mm = 0, mp = 0, ms = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(m.frames[i].mse, mse(av[i], bv[i]));
    mm += m.frames[i].mse / 4;
    mp += m.frames[i].psnr / 4;
    ms += m.frames[i].ssim / 4;
  }
  EXPECT_NEAR(m.mean.mse, mm, 1e-15);
  EXPECT_NEAR(m.mean.psnr, mp, 1e-12);
  EXPECT_NEAR(m.mean.ssim, ms, 1e-15);
  EXPECT_EQ(sequence_metrics(a, a).mean.ssim, 1.0);
  EXPECT_THROW(sequence_metrics(a, FrameSequence{}), ShapeError);
  EXPECT_THROW(sequence_metrics(a, FrameSequence(std::vector<Frame>(bv.begin(), bv.begin() + 2))), ShapeError);
  std::vector<Frame> shifted = bv;
  for (auto & f : shifted) f.t += 0.05;
  EXPECT_THROW(sequence_metrics(a, FrameSequence(shifted)), ShapeError);
}

TEST(Sequence, CsvLayout)
{
  std::mt19937_64 rng(57);
  std::vector<Frame> av, bv;
  for (int i = 0; i < 3; ++i) {
    av.push_back(random_frame(rng, {11, 11}, 0.25 * i));
    bv.push_back(random_frame(rng, {11, 11}, 0.25 * i));
  }
  const auto m = sequence_metrics(FrameSequence(av), FrameSequence(bv));
  std::ostringstream os;
  write_metrics_csv(os, m);
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "frame_index,t,mse,psnr,ssim");
  EXPECT_EQ(lines[1].rfind("0,0,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("1,0.25,", 0), 0u);
  EXPECT_EQ(lines[4].rfind("mean,,", 0), 0u);
}
