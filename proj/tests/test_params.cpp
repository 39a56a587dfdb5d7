#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "ddemgm/params.hpp"
#include "support/generators.hpp"

namespace ddemgm {
namespace {

// O(N^2) DFT in long double; argmax over bins 1..N/2 of the mean magnitude.
std::size_t naive_dominant_bin(const Series& y) {
  const std::size_t len = y.size();
  std::vector<long double> mag(len / 2 + 1, 0.0L);
  for (std::size_t k = 0; k < y.dim(); ++k) {
    for (std::size_t b = 0; b <= len / 2; ++b) {
      std::complex<long double> acc = 0;
      for (std::size_t t = 0; t < len; ++t) {
        const long double angle = -2.0L * std::numbers::pi_v<long double> * b * t / len;
        acc += static_cast<long double>(y.at(t, k)) * std::complex<long double>(std::cos(angle), std::sin(angle));
      }
      mag[b] += std::abs(acc);
    }
  }
  std::size_t best = 1;
  for (std::size_t b = 2; b < mag.size(); ++b) {
    if (mag[b] > mag[best]) best = b;
  }
  return best;
}

// All-pairs nearest eps-neighbor scan, ascending j.
FnnCount brute_fnn(const Series& y, std::size_t s, std::size_t m, double eps, double r_th) {
  const std::size_t states = y.size() - m * s;
  FnnCount out;
  for (std::size_t i = 0; i < states; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t nearest = states;
    for (std::size_t j = 0; j < states; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (std::size_t q = 0; q < m; ++q) {
        for (std::size_t k = 0; k < y.dim(); ++k) {
          const double diff = y.at(i + q * s, k) - y.at(j + q * s, k);
          sq += diff * diff;
        }
      }
      const double dist = std::sqrt(sq);
      if (dist < eps && dist < best) {
        best = dist;
        nearest = j;
      }
    }
    if (nearest == states) continue;
    ++out.with_neighbor;
    double sq = 0.0;
    for (std::size_t k = 0; k < y.dim(); ++k) {
      const double diff = y.at(i + m * s, k) - y.at(nearest + m * s, k);
      sq += diff * diff;
    }
    const double gap = std::sqrt(sq);
    const double ratio = gap == 0.0 ? 0.0 : (best == 0.0 ? INFINITY : gap / best);
    if (ratio > r_th) ++out.flagged;
  }
  return out;
}

Series sinusoid(std::size_t len, double cycles, double amplitude = 1.0, double phase = 0.3) {
  std::vector<double> v(len);
  for (std::size_t t = 0; t < len; ++t) {
    v[t] = amplitude * std::sin(2.0 * std::numbers::pi * cycles * t / len + phase);
  }
  return Series::from_scalars(v);
}

TEST(DominantFrequency, ExactBinOfSinusoid) {
  const auto y = sinusoid(151, 3.0);
  EXPECT_EQ(naive_dominant_bin(y), 3u);
  EXPECT_EQ(dominant_freq_index(y), 3u);
}

TEST(DominantFrequency, LargerAmplitudeWins) {
  std::vector<double> v(256);
  for (std::size_t t = 0; t < v.size(); ++t) {
    const double x = static_cast<double>(t) / v.size();
    v[t] = std::sin(2 * std::numbers::pi * 5 * x) + 0.1 * std::sin(2 * std::numbers::pi * 20 * x);
  }
  const auto y = Series::from_scalars(v);
  EXPECT_EQ(naive_dominant_bin(y), 5u);
  EXPECT_EQ(dominant_freq_index(y), 5u);
}

TEST(DominantFrequency, AgreesWithNaiveDftOnRandomSeries) {
  testing::Rng rng(99);
  std::uniform_int_distribution<std::size_t> len(8, 200);
  for (int trial = 0; trial < 40; ++trial) {
    const auto y = testing::random_series(rng, len(rng), 1 + trial % 3);
    EXPECT_EQ(dominant_freq_index(y), naive_dominant_bin(y)) << "trial " << trial;
  }
}

TEST(DominantFrequency, ConstantSeriesHasNone) {
  for (double level : {0.0, 3.0, 1e6}) {
    try {
      dominant_freq_index(Series::from_scalars(std::vector<double>(64, level)));
      FAIL() << level;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::NoDominantFrequency);
    }
  }
}

TEST(DominantFrequency, TooShort) {
  EXPECT_THROW(dominant_freq_index(Series::from_scalars({1, 2, 3})), Error);
}

TEST(SelectDelay, WorkedExample) { EXPECT_EQ(select_delay(151, 2, 3), 12u); }

TEST(SelectDelay, SmallCases) {
  EXPECT_EQ(select_delay(12, 2, 3), 1u);
  EXPECT_EQ(select_delay(100, 5, 1), 10u);
  EXPECT_EQ(select_delay(5, 4, 4), 1u);
}

TEST(SelectDelay, MonotoneInDimensionAndFrequency) {
  for (std::size_t len : {10u, 151u, 1000u, 4097u}) {
    for (std::size_t d = 1; d < 10; ++d) {
      for (std::size_t n = 1; n < 10; ++n) {
        EXPECT_GE(select_delay(len, d, n), select_delay(len, d + 1, n));
        EXPECT_GE(select_delay(len, d, n), select_delay(len, d, n + 1));
        EXPECT_EQ(select_delay(len, d, n), std::max<std::size_t>(1, len / (2 * d * n)));
      }
    }
  }
}

TEST(Fnn, InfiniteThresholdNeverFlags) {
  testing::Rng rng(1);
  const auto y = testing::random_series(rng, 300, 2);
  for (std::size_t m = 1; m <= 5; ++m) {
    EXPECT_EQ(fnn_fraction(y, 3, m, 0.5, std::numeric_limits<double>::infinity()), 0.0);
  }
  FnnOptions o;
  o.r_th = std::numeric_limits<double>::infinity();
  EXPECT_EQ(select_dimension(y, 3, o).d, 1u);
}

TEST(Fnn, DuplicatedStatesWithIdenticalFuturesAreNotFlagged) {
  // Period-5 integer sequence: every state has exact duplicates with equal futures.
  const double cycle[] = {0, 2, 7, 3, 1};
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(cycle[i % 5]);
  const auto y = Series::from_scalars(v);
  for (std::size_t m = 1; m <= 4; ++m) {
    const auto c = fnn_count(y, 1, m, 0.1, 10.0);
    EXPECT_GT(c.with_neighbor, 0u);
    EXPECT_EQ(c.flagged, 0u);
  }
}

TEST(Fnn, SweepAgreesExactlyWithBruteForce) {
  testing::Rng rng(5);
  std::uniform_int_distribution<std::size_t> small(1, 4);
  std::uniform_real_distribution<double> eps(0.05, 1.5);
  for (int trial = 0; trial < 60; ++trial) {
    Series y = trial % 2 == 0 ? testing::random_series(rng, 150, small(rng) % 3 + 1)
                              : testing::linear_chirp(200, 1.0, 6.0);
    if (trial % 3 == 0) {
      // Quantize so exact ties and zero distances occur.
      Series q(y.dim());
      for (std::size_t t = 0; t < y.size(); ++t) {
        Sample row(y[t].begin(), y[t].end());
        for (auto& v : row) v = std::round(v * 2.0) / 2.0;
        q.push_back(row);
      }
      y = q;
    }
    const std::size_t s = small(rng);
    const std::size_t m = small(rng);
    const double e = eps(rng);
    const auto fast = fnn_count(y, s, m, e, 10.0);
    const auto slow = brute_fnn(y, s, m, e, 10.0);
    EXPECT_EQ(fast.with_neighbor, slow.with_neighbor) << "trial " << trial;
    EXPECT_EQ(fast.flagged, slow.flagged) << "trial " << trial;
  }
}

TEST(Fnn, CleanSinusoidUnfoldsByEight) {
  const auto y = sinusoid(400, 4.0);
  const std::size_t s = select_delay(y.size(), 2, dominant_freq_index(y));
  const double eps = stats(y).mean_stddev() / 10.0;
  std::optional<std::size_t> first_zero;
  for (std::size_t m = 1; m <= 8 && !first_zero; ++m) {
    if (brute_fnn(y, s, m, eps, 10.0).fraction() == 0.0) first_zero = m;
  }
  ASSERT_TRUE(first_zero.has_value());
  EXPECT_LE(*first_zero, 8u);
  EXPECT_LE(select_dimension(y, s).d, *first_zero);
}

TEST(Fnn, ChirpSelectsModerateDimension) {
  const auto y = testing::linear_chirp(604, 1.0, 15.0);
  ASSERT_EQ(select_delay(y.size(), 2, dominant_freq_index(y)), 12u);
  const auto sel = select_dimension(y, 12);
  EXPECT_GE(sel.d, 4u);
  EXPECT_LE(sel.d, 8u);
  EXPECT_LE(sel.report.fractions.back(), 0.01);
  EXPECT_FALSE(sel.report.vacuous);
  EXPECT_EQ(sel.report.fractions.size(), sel.d);
}

TEST(Fnn, WhiteNoiseNeverReachesNegligibleWithSupport) {
  testing::Rng rng(8);
  std::normal_distribution<double> g;
  std::vector<double> v(2000);
  for (auto& x : v) x = g(rng);
  const auto sel = select_dimension(Series::from_scalars(v), 1);
  // Wherever neighbors exist the false fraction stays large; the selection
  // only happens once the neighbor sets are empty.
  for (std::size_t m = 0; m < sel.report.fractions.size(); ++m) {
    if (sel.report.support[m] > 0) {
      EXPECT_GT(sel.report.fractions[m], 0.01) << "m=" << m + 1;
    }
  }
  EXPECT_TRUE(sel.report.vacuous || sel.report.reached_max);
}

TEST(Fnn, TooShortIsLengthError) {
  try {
    fnn_fraction(Series::from_scalars({1, 2, 3, 4}), 2, 2, 0.1, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Length);
  }
}

TEST(CellSizes, RangeOverBins) {
  const auto sizes = select_cell_sizes(Series::from_scalars({-1, 0.5, 1, 0}), 50);
  ASSERT_EQ(sizes.size(), 1u);
  EXPECT_DOUBLE_EQ(sizes[0], 0.04);
}

TEST(CellSizes, FlatDimensionGetsUnitSize) {
  Series y(2);
  for (double v : {1.0, 3.0, 2.0}) y.push_back(Sample{v, 7.0});
  const auto sizes = select_cell_sizes(y, 10);
  EXPECT_DOUBLE_EQ(sizes[0], 0.2);
  EXPECT_EQ(sizes[1], 1.0);
}

TEST(CellSizes, ScaleWithBinsAndIgnoreOrder) {
  testing::Rng rng(4);
  const auto y = testing::random_series(rng, 100, 3);
  const auto a = select_cell_sizes(y, 20);
  const auto b = select_cell_sizes(y, 50);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a[k] / b[k], 2.5, 1e-12);

  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Series shuffled(3);
  for (std::size_t i : perm) shuffled.push_back(y[i]);
  EXPECT_EQ(select_cell_sizes(shuffled, 50), b);
}

TEST(CellSizes, Errors) {
  EXPECT_THROW(select_cell_sizes(Series(1), 50), Error);
  EXPECT_THROW(select_cell_sizes(Series::from_scalars({1, 2}), 1), Error);
}

TEST(CellSizes, PooledOverDatasetMatchesConcatenatedDerivatives) {
  testing::Rng rng(14);
  Dataset data;
  Series joined(2);
  for (int i = 0; i < 4; ++i) {
    const auto y = testing::random_series(rng, 30 + 20 * i, 2, 1.0 + i);
    data.add({"x" + std::to_string(i), i % 2 ? "a" : "b", y});
    const auto dv = derivative(y);
    for (std::size_t t = 0; t < dv.size(); ++t) joined.push_back(dv[t]);
  }
  data.add({"short", "a", Series::from_rows({{1e9, -1e9}})});
  EXPECT_EQ(pooled_cell_sizes(data, 40), select_cell_sizes(joined, 40));
}

Dataset one_series_dataset(const Series& y) {
  Dataset data;
  data.add({"only", "a", y});
  return data;
}

TEST(SelectParams, SingleSeriesMatchesDirectSelection) {
  testing::Rng rng(12);
  testing::WaveSpec spec;
  spec.period = 37.0;
  spec.noise = 0.02;
  const auto y = testing::sine_wave(rng, 500, spec);
  const auto sel = select_params(one_series_dataset(y));
  const auto deriv = derivative(y);
  const auto direct = select_for_series(deriv);
  EXPECT_EQ(sel.s, direct.s);
  EXPECT_EQ(sel.d, direct.d);
  EXPECT_EQ(sel.cell_sizes, select_cell_sizes(deriv, 50));
  ASSERT_EQ(sel.provenance.size(), 1u);
  EXPECT_EQ(sel.provenance[0].series.size(), 1u);
}

TEST(SelectParams, AveragesAcrossClasses) {
  // Class means of 8 and 12 average to 10; 2 and 3 round half up to 3.
  EXPECT_EQ(round_half_up((8.0 + 12.0) / 2.0), 10u);
  EXPECT_EQ(round_half_up((2.0 + 3.0) / 2.0), 3u);
  EXPECT_EQ(round_half_up(0.2), 1u);

  testing::Rng rng(2);
  const auto data = testing::two_class_dataset(rng, 6, 400, 800);
  SelectOptions opts;
  opts.seed = 3;
  const auto sel = select_params(data, opts);
  ASSERT_EQ(sel.provenance.size(), 2u);
  const double mean_s = (sel.provenance[0].mean_s + sel.provenance[1].mean_s) / 2.0;
  const double mean_d = (sel.provenance[0].mean_d + sel.provenance[1].mean_d) / 2.0;
  EXPECT_EQ(sel.s, round_half_up(mean_s));
  EXPECT_EQ(sel.d, round_half_up(mean_d));
  for (const auto& cls : sel.provenance) EXPECT_LE(cls.series.size(), opts.per_class);
  // Seeded draws are reproducible.
  const auto again = select_params(data, opts);
  EXPECT_EQ(again.s, sel.s);
  EXPECT_EQ(again.d, sel.d);
  EXPECT_EQ(again.cell_sizes, sel.cell_sizes);
}

TEST(SelectParams, ClassWithoutUsableSeriesIsMissingData) {
  Dataset data;
  data.add({"ok", "a", testing::linear_chirp(200, 1, 5)});
  data.add({"flat", "b", Series::from_scalars(std::vector<double>(50, 1.0))});
  try {
    select_params(data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingData);
  }
}

}  // namespace
}  // namespace ddemgm
