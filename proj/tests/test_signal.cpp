#include <gtest/gtest.h>

#include <random>

#include "painloop/signal.hpp"

using namespace painloop;

namespace {

ForceSample sample(double t, double a, double b = 0, double c = 0, double d = 0) { return {t, {a, b, c, d}}; }

// Straight from the definition: mean of the last `window` values, fewer at the start.
std::vector<double> brute_average(const std::vector<double>& xs, std::size_t window) {
  std::vector<double> out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k <= i; ++k)
      if (i - k < window) {
        s += xs[k];
        ++n;
      }
    out.push_back(s / n);
  }
  return out;
}

}  // namespace

TEST(FuseAndGate, SumsAllFourCells) {
  EXPECT_DOUBLE_EQ(fuse_and_gate(sample(0, 1, 2, 3, 4), {}), 10.0);
}

TEST(FuseAndGate, GateAppliesToTheSum) {
  // each cell is below 0.5 but the total is not
  EXPECT_DOUBLE_EQ(fuse_and_gate(sample(0, 0.2, 0.2, 0.2, 0.2), {}), 0.8);
  EXPECT_EQ(fuse_and_gate(sample(0, 0.1, 0.1, 0.1, 0.1), {}), 0.0);
  EXPECT_EQ(fuse_and_gate(sample(0, 0.49), {}), 0.0);
  EXPECT_EQ(fuse_and_gate(sample(0, 0.5), {}), 0.5);
}

TEST(FuseAndGate, ZeroesEverySumBelowGate) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.125);
  for (int i = 0; i < 10000; ++i) {
    ForceSample s = sample(0, u(rng), u(rng), u(rng), u(rng));
    ASSERT_EQ(fuse_and_gate(s, {}), 0.0);
  }
}

TEST(FuseAndGate, RejectsNonFinite) {
  try {
    fuse_and_gate(sample(0, 1, std::nan(""), 0, 0), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_sample);
    EXPECT_NE(std::string(e.what()).find("channel 1"), std::string::npos);
  }
  EXPECT_THROW(fuse_and_gate(sample(0, INFINITY), {}), Error);
}

TEST(MovingAverage, ConstantSeriesIsFixed) {
  std::vector<double> xs(50, 7.0);
  for (double v : moving_average(xs, 20)) EXPECT_DOUBLE_EQ(v, 7.0);
}

TEST(MovingAverage, PartialLeadingWindow) {
  std::vector<double> xs{2, 4, 6, 8};
  auto out = moving_average(xs, 3);
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_DOUBLE_EQ(out[1], 3.0);
  EXPECT_DOUBLE_EQ(out[2], 4.0);
  EXPECT_DOUBLE_EQ(out[3], 6.0);
}

TEST(MovingAverage, MatchesBruteForceOnRandomSeries) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 300);
  std::uniform_real_distribution<double> v(-50.0, 50.0);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> xs(len(rng));
    for (auto& x : xs) x = v(rng);
    const auto got = moving_average(xs, 20);
    const auto want = brute_average(xs, 20);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i], want[i]) << "rep " << rep << " i " << i;
  }
}

TEST(MovingAverage, WindowOneIsIdentity) {
  std::vector<double> xs{3, -1, 4, 1, 5};
  EXPECT_EQ(moving_average(xs, 1), xs);
}

TEST(MovingAverage, EmptyThrows) {
  try {
    moving_average(std::vector<double>{}, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
}

TEST(PainIntensity, LinearThenSaturates) {
  EXPECT_DOUBLE_EQ(pain_intensity(20.0, {}), 100.0);
  EXPECT_DOUBLE_EQ(pain_intensity(10.0, {}), 50.0);
  EXPECT_DOUBLE_EQ(pain_intensity(0.0, {}), 0.0);
  EXPECT_DOUBLE_EQ(pain_intensity(45.0, {}), 100.0);
}

TEST(PainIntensity, MonotoneAndBounded) {
  double prev = 0;
  for (double f = 0; f < 60; f += 0.01) {
    const double pi = pain_intensity(f, {});
    ASSERT_GE(pi, prev);
    ASSERT_LE(pi, 100.0);
    prev = pi;
  }
}

TEST(PainIntensity, NegativeThrows) {
  try {
    pain_intensity(-0.1, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_force);
  }
}

TEST(Crossing, FirstIndexAtOrAboveTarget) {
  std::vector<double> xs{0, 1, 4.9, 5.0, 6, 2};
  auto t = detect_crossing(xs, 5.0, 1000.0);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(*t, 0.003);
  EXPECT_FALSE(detect_crossing(xs, 6.5, 1000.0));
  EXPECT_THROW(detect_crossing(xs, 0.0, 1000.0), Error);
}

TEST(ProcessTrace, RampCrossesWhenWindowMeanReachesTarget) {
  // 1 N per ms ramp on one cell, window 20: mean at i is i - 9.5 once the window is full
  std::vector<ForceSample> s;
  for (int i = 0; i < 100; ++i) s.push_back(sample(i / 1000.0, i));
  auto tr = process_trace(s, 30.0, {});
  ASSERT_TRUE(tr.crossing_t);
  EXPECT_DOUBLE_EQ(*tr.crossing_t, 0.040);
  EXPECT_DOUBLE_EQ(tr.peak, 89.5);
}

TEST(ForceTracker, MatchesBatchPipeline) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  std::vector<ForceSample> s;
  for (int i = 0; i < 500; ++i) s.push_back(sample(i / 1000.0, u(rng), u(rng), u(rng), u(rng)));
  ForceTracker tr(12.0, {});
  std::vector<double> streamed;
  for (const auto& x : s) streamed.push_back(tr.push(x));
  const auto batch = process_trace(s, 12.0, {});
  EXPECT_EQ(streamed, batch.filtered);
  EXPECT_EQ(tr.peak(), batch.peak);
  EXPECT_EQ(tr.crossing_t(), batch.crossing_t);
}

TEST(PainMapConfig, Validation) {
  PainMapConfig c;
  c.window = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta = 0;
  EXPECT_THROW(c.validate(), Error);
}
