#pragma once

// Delay embedding of real-valued series and the streaming derivative delay
// embedding that quantizes each embedded state to a sparse grid cell.

#include <cmath>
#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddemgm/error.hpp"
#include "ddemgm/ring_buffer.hpp"
#include "ddemgm/signal.hpp"

namespace ddemgm {

/// Integer coordinates of one grid cell in the D-dimensional embedding space.
class Cell {
 public:
  using index_type = std::int32_t;

  Cell() = default;
  explicit Cell(std::vector<index_type> indices) : indices_(std::move(indices)) {}
  Cell(std::initializer_list<index_type> indices) : indices_(indices) {}

  std::size_t dim() const noexcept { return indices_.size(); }
  index_type operator[](std::size_t k) const { return indices_[k]; }
  index_type& operator[](std::size_t k) { return indices_[k]; }
  const std::vector<index_type>& indices() const noexcept { return indices_; }

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;

 private:
  std::vector<index_type> indices_;
};

struct CellHash {
  std::size_t operator()(const Cell& cell) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ cell.dim();
    for (std::size_t k = 0; k < cell.dim(); ++k) {
      std::uint64_t x = static_cast<std::uint32_t>(cell[k]) + h;
      // splitmix64 finalizer
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      h = x ^ (x >> 31);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Largest per-axis index difference between two cells of equal dimension.
inline std::int64_t chebyshev(const Cell& a, const Cell& b) {
  std::int64_t best = 0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const std::int64_t diff = std::int64_t{a[k]} - std::int64_t{b[k]};
    best = std::max(best, diff < 0 ? -diff : diff);
  }
  return best;
}

/// Delay step, embedding dimension, derivative lag and grid resolution.
/// `cell_sizes` has one entry per embedded axis (D = n * d), ordered as d
/// consecutive blocks of the n underlying dimensions.
struct EmbeddingConfig {
  std::size_t s = 1;
  std::size_t d = 1;
  std::size_t tau = 1;
  std::vector<double> cell_sizes;

  /// Builds the D-axis size vector by replicating one size per underlying
  /// dimension across the d delay copies.
  static EmbeddingConfig replicated(std::size_t s, std::size_t d, std::size_t tau,
                                    const std::vector<double>& per_dim_sizes) {
    EmbeddingConfig cfg{s, d, tau, {}};
    cfg.cell_sizes.reserve(per_dim_sizes.size() * d);
    for (std::size_t j = 0; j < d; ++j) {
      cfg.cell_sizes.insert(cfg.cell_sizes.end(), per_dim_sizes.begin(), per_dim_sizes.end());
    }
    cfg.validate();
    return cfg;
  }

  std::size_t embedded_dim() const noexcept { return cell_sizes.size(); }
  std::size_t input_dim() const noexcept { return d == 0 ? 0 : cell_sizes.size() / d; }
  /// Pushes consumed before the first cell is emitted.
  std::size_t warmup() const noexcept { return (d - 1) * s + tau; }
  /// Raw samples spanned by one derivative delay vector.
  std::size_t window() const noexcept { return warmup() + 1; }

  void validate() const {
    if (s == 0 || d == 0 || tau == 0) {
      throw Error(ErrorKind::Shape, "s, d and tau must all be at least 1");
    }
    if (cell_sizes.empty() || cell_sizes.size() % d != 0) {
      throw Error(ErrorKind::Shape, "cell_sizes must hold n*d entries");
    }
    for (double size : cell_sizes) {
      if (!(size > 0.0) || !std::isfinite(size)) {
        throw Error(ErrorKind::Shape, "cell sizes must be positive and finite");
      }
    }
  }

  friend bool operator==(const EmbeddingConfig&, const EmbeddingConfig&) = default;
};

/// Concatenation (y_t, y_{t+s}, ..., y_{t+(d-1)s}) of delayed observations.
using EmbeddedState = std::vector<double>;

inline std::vector<EmbeddedState> delay_embed(const Series& series, std::size_t s, std::size_t d) {
  if (s == 0 || d == 0) throw Error(ErrorKind::Shape, "s and d must be positive");
  const std::size_t span = (d - 1) * s;
  if (series.size() < span + 1) {
    throw Error(ErrorKind::Length, "series of length " + std::to_string(series.size()) +
                                       " cannot be embedded with s=" + std::to_string(s) +
                                       " d=" + std::to_string(d));
  }
  const std::size_t n = series.dim();
  std::vector<EmbeddedState> out;
  out.reserve(series.size() - span);
  for (std::size_t t = 0; t + span < series.size(); ++t) {
    EmbeddedState state;
    state.reserve(n * d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto row = series[t + j * s];
      state.insert(state.end(), row.begin(), row.end());
    }
    out.push_back(std::move(state));
  }
  return out;
}

/// Rounds a coordinate to its nearest cell index, halves away from zero.
inline Cell::index_type quantize(double coord, double size) {
  const double q = std::round(coord / size);
  if (!(q >= static_cast<double>(std::numeric_limits<Cell::index_type>::min()) &&
        q <= static_cast<double>(std::numeric_limits<Cell::index_type>::max()))) {
    throw Error(ErrorKind::Shape, "cell index out of range");
  }
  return static_cast<Cell::index_type>(q);
}

inline Cell discretize(std::span<const double> state, std::span<const double> cell_sizes) {
  if (state.size() != cell_sizes.size()) {
    throw Error(ErrorKind::Shape, "state has " + std::to_string(state.size()) +
                                      " coordinates but " + std::to_string(cell_sizes.size()) +
                                      " cell sizes were given");
  }
  std::vector<Cell::index_type> idx(state.size());
  for (std::size_t k = 0; k < state.size(); ++k) idx[k] = quantize(state[k], cell_sizes[k]);
  return Cell(std::move(idx));
}

/// Offline reference path: derivative, then delay embedding, then grid
/// quantization. Returns an empty sequence when the series is shorter than
/// one window.
inline std::vector<Cell> dde_offline(const Series& series, const EmbeddingConfig& cfg) {
  cfg.validate();
  if (series.dim() != cfg.input_dim()) throw Error(ErrorKind::Shape, "series dimension mismatch");
  if (series.size() < cfg.window()) return {};
  const auto states = delay_embed(derivative(series, cfg.tau), cfg.s, cfg.d);
  std::vector<Cell> cells;
  cells.reserve(states.size());
  for (const auto& state : states) cells.push_back(discretize(state, cfg.cell_sizes));
  return cells;
}

/// Incremental derivative delay embedding. Holds the last (d-1)s + tau + 1
/// raw samples and emits one cell per push once that window is full.
class DdeStream {
 public:
  DdeStream() = default;
  explicit DdeStream(EmbeddingConfig config) : config_(std::move(config)) {
    config_.validate();
    ring_ = RowRing<double>(config_.window(), config_.input_dim());
    scratch_.resize(config_.embedded_dim());
  }

  const EmbeddingConfig& config() const noexcept { return config_; }

  std::optional<Cell> push(std::span<const double> sample) {
    if (sample.size() != ring_.width()) {
      throw Error(ErrorKind::Shape, "sample has dimension " + std::to_string(sample.size()) +
                                        ", stream expects " + std::to_string(ring_.width()));
    }
    check_finite(sample);
    ring_.push(sample);
    if (!ring_.full()) return std::nullopt;

    const std::size_t n = ring_.width();
    const double lag = static_cast<double>(config_.tau);
    for (std::size_t j = 0; j < config_.d; ++j) {
      const auto older = ring_[j * config_.s];
      const auto newer = ring_[j * config_.s + config_.tau];
      for (std::size_t k = 0; k < n; ++k) scratch_[j * n + k] = (newer[k] - older[k]) / lag;
    }
    Cell cell = discretize(scratch_, config_.cell_sizes);
    last_ = cell;
    return cell;
  }

  /// Most recently emitted cell, if any since the last reset.
  const std::optional<Cell>& last_cell() const noexcept { return last_; }

  void reset() noexcept {
    ring_.clear();
    last_.reset();
  }

  std::size_t buffered() const noexcept { return ring_.size(); }
  std::size_t capacity() const noexcept { return ring_.capacity(); }

 private:
  EmbeddingConfig config_;
  RowRing<double> ring_;
  std::vector<double> scratch_;
  std::optional<Cell> last_;
};

}  // namespace ddemgm
