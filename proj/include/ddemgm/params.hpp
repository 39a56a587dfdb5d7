#pragma once

// Automatic choice of delay step, embedding dimension and grid cell size.
//
// The delay step comes from the dominant (largest non-DC) DFT bin n of a
// series of length N: s = floor(N / (2 d n)). The embedding dimension is the
// smallest m whose false-nearest-neighbor fraction is negligible. Cell sizes
// split the derivative range of each input dimension into a fixed number of
// bins. Dataset-level settings average the per-class selections.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddemgm/dataset.hpp"
#include "ddemgm/embedding.hpp"
#include "ddemgm/error.hpp"
#include "ddemgm/signal.hpp"

namespace ddemgm {

namespace detail {

// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// |X_k| for k = 0 .. floor(N/2) of a real sequence.
inline std::vector<double> magnitude_spectrum(const std::vector<double>& values) {
  const int len = static_cast<int>(values.size());
  const std::size_t bins = values.size() / 2 + 1;
  std::vector<double> in(values);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)), &fftw_free);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(len, in.data(), out.get(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::vector<double> mag(bins);
  for (std::size_t k = 0; k < bins; ++k) mag[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return mag;
}

}  // namespace detail

/// Index of the largest-magnitude DFT bin among 1 .. floor(N/2). Multivariate
/// series average their per-dimension magnitude spectra first.
inline std::size_t dominant_freq_index(const Series& series) {
  const std::size_t len = series.size();
  if (len < 4) throw Error(ErrorKind::Length, "need at least 4 samples for a spectrum");
  const std::size_t half = len / 2;
  std::vector<double> avg(half + 1, 0.0);
  for (std::size_t k = 0; k < series.dim(); ++k) {
    const auto mag = detail::magnitude_spectrum(series.column(k));
    for (std::size_t b = 0; b <= half; ++b) avg[b] += mag[b] / static_cast<double>(series.dim());
  }
  std::size_t best = 1;
  for (std::size_t b = 2; b <= half; ++b) {
    if (avg[b] > avg[best]) best = b;
  }
  // Rounding noise of a constant series scales with its DC level.
  if (avg[best] <= 1e-12 * std::max(1.0, avg[0] / static_cast<double>(len))) {
    throw Error(ErrorKind::NoDominantFrequency, "spectrum is flat outside DC");
  }
  return best;
}

inline std::size_t select_delay(std::size_t length, std::size_t dim, std::size_t freq_index) {
  if (length == 0 || dim == 0 || freq_index == 0) {
    throw Error(ErrorKind::Shape, "length, dimension and frequency index must be positive");
  }
  return std::max<std::size_t>(1, length / (2 * dim * freq_index));
}

namespace detail {

inline double squared_distance(const Series& y, std::size_t i, std::size_t j, std::size_t s,
                               std::size_t m) {
  double sq = 0.0;
  for (std::size_t q = 0; q < m; ++q) {
    const auto a = y[i + q * s];
    const auto b = y[j + q * s];
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double diff = a[k] - b[k];
      sq += diff * diff;
    }
  }
  return sq;
}

inline double sample_distance(const Series& y, std::size_t i, std::size_t j) {
  double sq = 0.0;
  const auto a = y[i];
  const auto b = y[j];
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

}  // namespace detail

/// Result of the neighbor search for one candidate dimension.
struct FnnCount {
  std::size_t with_neighbor = 0;
  std::size_t flagged = 0;

  double fraction() const {
    return with_neighbor == 0 ? 0.0
                              : static_cast<double>(flagged) / static_cast<double>(with_neighbor);
  }
};

/// Embeds at dimension m and, for every state with a neighbor closer than
/// eps, tests whether its nearest such neighbor separates by more than r_th
/// times their distance once the (m+1)-th coordinate is revealed.
/// The nearest neighbor is found with a sweep over states sorted by their
/// first coordinate; ties go to the lowest index.
inline FnnCount fnn_count(const Series& series, std::size_t s, std::size_t m, double eps,
                          double r_th) {
  if (s == 0 || m == 0) throw Error(ErrorKind::Shape, "s and m must be positive");
  if (!(eps > 0.0) || !(r_th > 0.0)) throw Error(ErrorKind::Shape, "eps and r_th must be positive");
  if (series.size() <= m * s) {
    throw Error(ErrorKind::Length, "series of length " + std::to_string(series.size()) +
                                       " cannot reveal coordinate " + std::to_string(m + 1) +
                                       " at s=" + std::to_string(s));
  }
  const std::size_t states = series.size() - m * s;
  std::vector<std::size_t> order(states);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto lead = [&](std::size_t i) { return series.at(i, 0); };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lead(a) < lead(b); });

  FnnCount out;
  for (std::size_t pos = 0; pos < states; ++pos) {
    const std::size_t i = order[pos];
    std::optional<std::size_t> nearest;
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](std::size_t j) {
      const double dist = std::sqrt(detail::squared_distance(series, i, j, s, m));
      if (dist < eps && (dist < best || (dist == best && j < *nearest))) {
        best = dist;
        nearest = j;
      }
    };
    for (std::size_t q = pos; q-- > 0;) {
      if (!(std::abs(lead(order[q]) - lead(i)) < eps)) break;
      consider(order[q]);
    }
    for (std::size_t q = pos + 1; q < states; ++q) {
      if (!(std::abs(lead(order[q]) - lead(i)) < eps)) break;
      consider(order[q]);
    }
    if (!nearest) continue;
    ++out.with_neighbor;
    const double gap = detail::sample_distance(series, i + m * s, *nearest + m * s);
    const double ratio = gap == 0.0 ? 0.0 : (best == 0.0 ? std::numeric_limits<double>::infinity()
                                                         : gap / best);
    if (ratio > r_th) ++out.flagged;
  }
  return out;
}

inline double fnn_fraction(const Series& series, std::size_t s, std::size_t m, double eps,
                           double r_th) {
  return fnn_count(series, s, m, eps, r_th).fraction();
}

struct FnnReport {
  std::vector<double> fractions;     // fractions[m - 1] for m = 1 .. fractions.size()
  std::vector<std::size_t> support;  // states with an eps-neighbor, per m
  double eps = 0.0;
  bool reached_max = false;  // no candidate fell below the negligible level
  bool vacuous = false;      // the chosen m had no eps-neighbors at all
};

struct DimensionSelection {
  std::size_t d = 1;
  FnnReport report;
};

struct FnnOptions {
  std::optional<double> eps;  // defaults to mean per-dimension std / 10
  double r_th = 10.0;
  double negligible = 0.01;
  std::size_t m_max = 12;
};

inline DimensionSelection select_dimension(const Series& series, std::size_t s,
                                           const FnnOptions& options = {}) {
  if (series.empty()) throw Error(ErrorKind::EmptyInput, "empty series");
  if (options.m_max == 0) throw Error(ErrorKind::Shape, "m_max must be positive");
  DimensionSelection out;
  out.report.eps = options.eps.value_or(stats(series).mean_stddev() / 10.0);
  if (!(out.report.eps > 0.0)) {
    // A flat series has no scale to search at; every state is its own
    // neighbor class, so the smallest dimension is as good as any.
    out.report.eps = std::numeric_limits<double>::min();
  }
  for (std::size_t m = 1; m <= options.m_max; ++m) {
    const auto count = fnn_count(series, s, m, out.report.eps, options.r_th);
    const double frac = count.fraction();
    out.report.fractions.push_back(frac);
    out.report.support.push_back(count.with_neighbor);
    if (frac <= options.negligible) {
      out.d = m;
      out.report.vacuous = count.with_neighbor == 0;
      return out;
    }
  }
  out.d = options.m_max;
  out.report.reached_max = true;
  return out;
}

/// Per-dimension grid spacing: derivative range / bins, or 1 for a flat
/// dimension.
inline std::vector<double> select_cell_sizes(const Series& derivative_series,
                                             std::size_t bins = 50) {
  if (derivative_series.empty()) throw Error(ErrorKind::EmptyInput, "empty derivative series");
  if (bins < 2) throw Error(ErrorKind::Shape, "need at least 2 bins");
  const auto st = stats(derivative_series);
  std::vector<double> sizes(st.min.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double range = st.max[k] - st.min[k];
    sizes[k] = range > 0.0 ? range / static_cast<double>(bins) : 1.0;
  }
  return sizes;
}

/// Selection for one series: dominant bin, seeded delay (d = 2), FNN
/// dimension, then the delay recomputed with that dimension.
struct SeriesSelection {
  std::string id;
  std::size_t freq_index = 0;
  std::size_t s = 1;
  std::size_t d = 1;
  bool reached_max = false;
};

inline SeriesSelection select_for_series(const Series& derivative_series,
                                         const FnnOptions& fnn = {}) {
  SeriesSelection out;
  const std::size_t len = derivative_series.size();
  out.freq_index = dominant_freq_index(derivative_series);
  const std::size_t seed_s = select_delay(len, 2, out.freq_index);
  const auto dim = select_dimension(derivative_series, seed_s, fnn);
  out.d = dim.d;
  out.reached_max = dim.report.reached_max;
  out.s = select_delay(len, out.d, out.freq_index);
  return out;
}

struct ClassSelection {
  std::string label;
  std::vector<SeriesSelection> series;
  std::size_t skipped = 0;  // drawn series too short or flat to analyze
  double mean_s = 0.0;
  double mean_d = 0.0;
};

struct ParamSelection {
  std::size_t s = 1;
  std::size_t d = 1;
  std::vector<double> cell_sizes;  // one per input dimension
  std::vector<ClassSelection> provenance;

  EmbeddingConfig config(std::size_t tau = 1) const {
    return EmbeddingConfig::replicated(s, d, tau, cell_sizes);
  }
};

struct SelectOptions {
  std::size_t per_class = 5;
  std::size_t bins = 50;
  std::size_t tau = 1;
  std::uint64_t seed = 0;
  FnnOptions fnn;
};

inline std::size_t round_half_up(double v) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(v + 0.5)));
}

/// Cell sizes from the derivative range pooled over every series long enough
/// to differentiate; a flat or absent dimension gets size 1.
inline std::vector<double> pooled_cell_sizes(const Dataset& data, std::size_t bins, std::size_t tau = 1) {
  if (bins < 2) throw Error(ErrorKind::Shape, "need at least 2 bins");
  std::vector<double> lo(data.dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(data.dim, -std::numeric_limits<double>::infinity());
  for (const auto& item : data.items) {
    if (item.series.size() <= tau) continue;
    const auto st = stats(derivative(item.series, tau));
    for (std::size_t k = 0; k < data.dim; ++k) {
      lo[k] = std::min(lo[k], st.min[k]);
      hi[k] = std::max(hi[k], st.max[k]);
    }
  }
  std::vector<double> out(data.dim, 1.0);
  for (std::size_t k = 0; k < data.dim; ++k) {
    const double range = hi[k] - lo[k];
    if (range > 0.0 && std::isfinite(range)) out[k] = range / static_cast<double>(bins);
  }
  return out;
}

/// Draws up to `per_class` series per label, selects (s, d) on each
/// derivative series and averages within and then across classes. The grid
/// comes from pooled_cell_sizes over the whole dataset.
inline ParamSelection select_params(const Dataset& data, const SelectOptions& options = {}) {
  if (data.empty()) throw Error(ErrorKind::MissingData, "dataset is empty");
  if (options.per_class == 0) throw Error(ErrorKind::Shape, "per_class must be positive");
  if (options.bins < 2) throw Error(ErrorKind::Shape, "need at least 2 bins");
  std::mt19937_64 rng(options.seed);
  ParamSelection out;

  for (auto& [label, members] : data.by_label()) {
    std::vector<std::size_t> pick = members;
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(std::min(pick.size(), options.per_class));

    ClassSelection cls;
    cls.label = label;
    for (std::size_t idx : pick) {
      const auto& item = data.items[idx];
      if (item.series.size() <= options.tau) {
        ++cls.skipped;
        continue;
      }
      const Series deriv = derivative(item.series, options.tau);
      try {
        auto sel = select_for_series(deriv, options.fnn);
        sel.id = item.id;
        cls.series.push_back(std::move(sel));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Length && e.kind() != ErrorKind::NoDominantFrequency) throw;
        ++cls.skipped;
      }
    }
    if (cls.series.empty()) {
      throw Error(ErrorKind::MissingData, "class '" + label + "' has no analyzable series");
    }
    for (const auto& sel : cls.series) {
      cls.mean_s += static_cast<double>(sel.s);
      cls.mean_d += static_cast<double>(sel.d);
    }
    cls.mean_s /= static_cast<double>(cls.series.size());
    cls.mean_d /= static_cast<double>(cls.series.size());
    out.provenance.push_back(std::move(cls));
  }

  double sum_s = 0.0;
  double sum_d = 0.0;
  for (const auto& cls : out.provenance) {
    sum_s += cls.mean_s;
    sum_d += cls.mean_d;
  }
  const double classes = static_cast<double>(out.provenance.size());
  out.s = round_half_up(sum_s / classes);
  out.d = round_half_up(sum_d / classes);

  out.cell_sizes = pooled_cell_sizes(data, options.bins, options.tau);
  return out;
}

}  // namespace ddemgm
