#pragma once

// Multivariate series storage, finite differences and summary statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ddemgm/error.hpp"

namespace ddemgm {

/// One n-dimensional observation.
using Sample = std::vector<double>;

inline void check_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "sample contains a non-finite value");
  }
}

/// Row-major sequence of n-dimensional samples. Every row has the same
/// dimension and only finite values are accepted.
class Series {
 public:
  Series() = default;
  explicit Series(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorKind::Shape, "series dimension must be positive");
  }

  /// Univariate convenience constructor.
  static Series from_scalars(std::span<const double> values) {
    Series out(1);
    out.reserve(values.size());
    for (double v : values) out.push_back(std::span<const double>(&v, 1));
    return out;
  }
  static Series from_scalars(std::initializer_list<double> values) {
    return from_scalars(std::span<const double>(values.begin(), values.size()));
  }

  static Series from_rows(const std::vector<Sample>& rows) {
    if (rows.empty()) throw Error(ErrorKind::EmptyInput, "no rows");
    Series out(rows.front().size());
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row);
    return out;
  }

  void push_back(std::span<const double> sample) {
    if (sample.size() != dim_) {
      throw Error(ErrorKind::Shape, "sample has dimension " + std::to_string(sample.size()) +
                                        ", expected " + std::to_string(dim_));
    }
    check_finite(sample);
    data_.insert(data_.end(), sample.begin(), sample.end());
  }

  void reserve(std::size_t rows) { data_.reserve(rows * dim_); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t t) const {
    return {data_.data() + t * dim_, dim_};
  }
  double at(std::size_t t, std::size_t k) const { return data_[t * dim_ + k]; }

  /// Values of dimension k across time.
  std::vector<double> column(std::size_t k) const {
    std::vector<double> out(size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = at(t, k);
    return out;
  }

  /// First `count` rows.
  Series head(std::size_t count) const {
    Series out(dim_);
    count = std::min(count, size());
    out.data_.assign(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(count * dim_));
    return out;
  }

  std::span<const double> flat() const noexcept { return data_; }

  friend bool operator==(const Series&, const Series&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Lagged first difference: element t is (y[t+tau] - y[t]) / tau.
inline Series derivative(const Series& series, std::size_t tau = 1) {
  if (tau == 0) throw Error(ErrorKind::Length, "derivative lag must be positive");
  if (series.size() <= tau) {
    throw Error(ErrorKind::Length, "series of length " + std::to_string(series.size()) +
                                       " is too short for derivative lag " + std::to_string(tau));
  }
  const std::size_t n = series.dim();
  const double lag = static_cast<double>(tau);
  Series out(n);
  out.reserve(series.size() - tau);
  Sample row(n);
  for (std::size_t t = 0; t + tau < series.size(); ++t) {
    for (std::size_t k = 0; k < n; ++k) row[k] = (series.at(t + tau, k) - series.at(t, k)) / lag;
    out.push_back(row);
  }
  return out;
}

struct SeriesStats {
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> stddev;  // population convention (divide by N)
  std::size_t length = 0;

  double mean_stddev() const {
    double total = 0.0;
    for (double s : stddev) total += s;
    return stddev.empty() ? 0.0 : total / static_cast<double>(stddev.size());
  }
};

inline SeriesStats stats(const Series& series) {
  if (series.empty()) throw Error(ErrorKind::EmptyInput, "cannot summarize an empty series");
  const std::size_t n = series.dim();
  const std::size_t len = series.size();
  SeriesStats out;
  out.length = len;
  out.min.assign(n, 0.0);
  out.max.assign(n, 0.0);
  out.stddev.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double lo = series.at(0, k);
    double hi = lo;
    double sum = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double v = series.at(t, k);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    const double mean = sum / static_cast<double>(len);
    double sq = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double dv = series.at(t, k) - mean;
      sq += dv * dv;
    }
    out.min[k] = lo;
    out.max[k] = hi;
    out.stddev[k] = std::sqrt(sq / static_cast<double>(len));
  }
  return out;
}

}  // namespace ddemgm
