#pragma once

// Training throughput and model footprint across grid resolutions.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ddemgm/classifier.hpp"
#include "ddemgm/embedding.hpp"
#include "ddemgm/error.hpp"
#include "ddemgm/model_io.hpp"
#include "ddemgm/params.hpp"
#include "ddemgm/signal.hpp"

namespace ddemgm {

inline constexpr std::size_t kBenchPoints = 10000;

struct BenchReport {
  std::size_t bins = 0;
  std::size_t points = 0;
  double seconds = 0.0;  // fastest of the timed repetitions
  double rate = 0.0;     // points / seconds
  std::size_t distinct_cells = 0;
  std::size_t model_bytes = 0;
};

struct BenchOptions {
  std::size_t s = 1;
  std::size_t d = 2;
  std::size_t tau = 1;
  int radius = 1;
  std::vector<std::size_t> bins = {20, 30, 40, 50, 60};
  std::size_t repeats = 5;
};

/// Trains a fresh single-class model on the first 10^4 points once per bins
/// setting (cell size = derivative range / bins) and reports the rate.
inline std::vector<BenchReport> bench_rate(const Series& series, const BenchOptions& options = {}) {
  if (series.size() < kBenchPoints) {
    throw Error(ErrorKind::Length, "benchmark needs at least " + std::to_string(kBenchPoints) +
                                       " points, got " + std::to_string(series.size()));
  }
  const Series stream = series.head(kBenchPoints);
  const Series deriv = derivative(stream, options.tau);
  std::vector<BenchReport> out;
  for (std::size_t bins : options.bins) {
    const auto cfg =
        EmbeddingConfig::replicated(options.s, options.d, options.tau, select_cell_sizes(deriv, bins));
    BenchReport report;
    report.bins = bins;
    report.points = stream.size();
    report.seconds = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < std::max<std::size_t>(options.repeats, 1); ++rep) {
      OnlineClassifier classifier(cfg, options.radius);
      const auto start = std::chrono::steady_clock::now();
      classifier.train_series("stream", stream);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.seconds = std::min(report.seconds, secs);
      if (rep == 0) {
        report.distinct_cells = classifier.distinct_cells();
        report.model_bytes = serialize_model(classifier).size();
      }
    }
    report.rate = static_cast<double>(report.points) / report.seconds;
    out.push_back(report);
  }
  return out;
}

}  // namespace ddemgm
