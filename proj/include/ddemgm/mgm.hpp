#pragma once

// Markov geographic model: per-class sparse cell counts and transition
// counts, the log-count geographic distribution, transition probabilities
// with Chebyshev neighborhood matching, and trajectory similarity scores.

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ddemgm/embedding.hpp"
#include "ddemgm/error.hpp"

namespace ddemgm {

/// Probability returned for transitions the model has never seen, and for
/// neighborhoods with no outgoing evidence.
inline constexpr double kTransitionFloor = 1e-6;

/// Fixed-point scale for log(count + 1) weights. Integer accumulation keeps
/// the normalizer exact, order-independent and identical after a reload.
inline constexpr double kLogWeightScale = 1099511627776.0;  // 2^40

inline std::int64_t log_weight(std::uint64_t count) {
  return std::llround(std::log1p(static_cast<double>(count)) * kLogWeightScale);
}

/// Window sizes up to this many cells are enumerated directly.
inline constexpr std::size_t kMaxEnumeratedWindow = 4096;

enum class NeighborhoodSearch {
  Auto,       // enumerate small windows, otherwise use the sparse index
  Enumerate,  // visit every cell of the Chebyshev window
  Sparse,     // walk learned from-cells through the projected bucket index
};

using CellCounts = std::unordered_map<Cell, std::uint64_t, CellHash>;

/// Outgoing transitions of one from-cell.
struct OutEdges {
  std::uint64_t total = 0;
  CellCounts to;

  friend bool operator==(const OutEdges&, const OutEdges&) = default;
};

using TransitionMap = std::unordered_map<Cell, OutEdges, CellHash>;

/// One class's model. Not internally synchronized; see OnlineClassifier for
/// the shared-store locking used by concurrent training and classification.
class ClassModel {
 public:
  ClassModel() = default;
  explicit ClassModel(EmbeddingConfig config) : config_(std::move(config)) {
    config_.validate();
    projected_axes_ = std::min<std::size_t>(config_.embedded_dim(), 3);
  }

  const EmbeddingConfig& config() const noexcept { return config_; }

  /// Counts one visit to `cell` and, when `prev` is given, the transition
  /// prev -> cell. `prev` must already have been observed.
  void observe(const Cell& cell, const Cell* prev = nullptr) {
    check_dim(cell);
    if (prev != nullptr) {
      check_dim(*prev);
      if (!geo_.contains(*prev)) {
        throw Error(ErrorKind::Protocol, "transition source was never observed");
      }
    }
    auto& count = geo_[cell];
    weight_total_ += log_weight(count + 1) - log_weight(count);
    ++count;
    ++observations_;
    if (prev != nullptr) add_transition(*prev, cell, 1);
  }

  void observe(const Cell& cell, const std::optional<Cell>& prev) {
    observe(cell, prev ? &*prev : nullptr);
  }

  /// log(count + 1) normalized over every visited cell; 0 for unseen cells.
  double geo_prob(const Cell& cell) const {
    require_nonempty();
    const auto it = geo_.find(cell);
    if (it == geo_.end()) return 0.0;
    return static_cast<double>(log_weight(it->second)) / static_cast<double>(weight_total_);
  }

  /// Exact first-order transition probability P(to | from).
  double trans_prob(const Cell& to, const Cell& from) const {
    require_nonempty();
    const auto it = trans_.find(from);
    if (it == trans_.end() || it->second.total == 0) return kTransitionFloor;
    const auto edge = it->second.to.find(to);
    if (edge == it->second.to.end()) return kTransitionFloor;
    return static_cast<double>(edge->second) / static_cast<double>(it->second.total);
  }

  /// Cluster-wise transition probability: transitions leaving the radius-r
  /// Chebyshev ball around `from` that land in the ball around `to`, over all
  /// transitions leaving the ball around `from`.
  double trans_prob_neighborhood(const Cell& to, const Cell& from, int radius,
                                 NeighborhoodSearch search = NeighborhoodSearch::Auto) const {
    const auto [num, den] = neighborhood_counts(to, from, radius, search);
    if (den == 0 || num == 0) return kTransitionFloor;
    return static_cast<double>(num) / static_cast<double>(den);
  }

  struct WindowCounts {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 0;
  };

  WindowCounts neighborhood_counts(const Cell& to, const Cell& from, int radius,
                                   NeighborhoodSearch search = NeighborhoodSearch::Auto) const {
    if (radius < 0) throw Error(ErrorKind::Shape, "neighborhood radius must be non-negative");
    check_dim(to);
    check_dim(from);
    if (search == NeighborhoodSearch::Auto) {
      search = window_size(radius, config_.embedded_dim()) <= kMaxEnumeratedWindow
                   ? NeighborhoodSearch::Enumerate
                   : NeighborhoodSearch::Sparse;
    }
    WindowCounts counts;
    auto accumulate = [&](const OutEdges& edges) {
      counts.denominator += edges.total;
      for (const auto& [dest, n] : edges.to) {
        if (chebyshev(dest, to) <= radius) counts.numerator += n;
      }
    };
    if (radius == 0) {
      if (const auto it = trans_.find(from); it != trans_.end()) accumulate(it->second);
      return counts;
    }
    if (search == NeighborhoodSearch::Enumerate) {
      Cell probe = from;
      for_each_offset(from, radius, config_.embedded_dim(), probe, [&](const Cell& c) {
        if (const auto it = trans_.find(c); it != trans_.end()) accumulate(it->second);
      });
    } else {
      const Cell key = project(from);
      Cell probe = key;
      for_each_offset(key, radius, key.dim(), probe, [&](const Cell& k) {
        const auto bucket = buckets_.find(k);
        if (bucket == buckets_.end()) return;
        for (const Cell& source : bucket->second) {
          if (chebyshev(source, from) <= radius) accumulate(trans_.at(source));
        }
      });
    }
    return counts;
  }

  const CellCounts& geo_counts() const noexcept { return geo_; }
  const TransitionMap& transitions() const noexcept { return trans_; }
  /// Cached sum of log(count + 1) over visited cells.
  double geo_log_total() const noexcept {
    return static_cast<double>(weight_total_) / kLogWeightScale;
  }
  std::uint64_t observations() const noexcept { return observations_; }
  std::size_t distinct_cells() const noexcept { return geo_.size(); }
  bool empty() const noexcept { return observations_ == 0; }

  std::size_t transition_pairs() const noexcept {
    std::size_t pairs = 0;
    for (const auto& [from, edges] : trans_) pairs += edges.to.size();
    return pairs;
  }

  /// Sum of log(count + 1) over visited cells, computed from scratch.
  double recomputed_geo_log_total() const {
    double total = 0.0;
    for (const auto& [cell, count] : geo_) total += std::log(static_cast<double>(count) + 1.0);
    return total;
  }

  /// Bulk insertion used when restoring a persisted model.
  void restore_geo(const Cell& cell, std::uint64_t count) {
    check_dim(cell);
    if (count == 0) throw Error(ErrorKind::Parse, "cell count must be positive");
    auto& slot = geo_[cell];
    weight_total_ += log_weight(slot + count) - log_weight(slot);
    slot += count;
    observations_ += count;
  }

  void restore_transition(const Cell& from, const Cell& to, std::uint64_t count) {
    check_dim(from);
    check_dim(to);
    if (count == 0) throw Error(ErrorKind::Parse, "transition count must be positive");
    if (!geo_.contains(from) || !geo_.contains(to)) {
      throw Error(ErrorKind::Parse, "transition references a cell with no count");
    }
    add_transition(from, to, count);
  }

  /// Structural equality: configuration and every count.
  friend bool operator==(const ClassModel& a, const ClassModel& b) {
    return a.config_ == b.config_ && a.observations_ == b.observations_ && a.geo_ == b.geo_ &&
           a.trans_ == b.trans_;
  }

 private:
  static std::size_t window_size(int radius, std::size_t dims) {
    const std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
    std::size_t total = 1;
    for (std::size_t k = 0; k < dims; ++k) {
      total *= side;
      if (total > kMaxEnumeratedWindow) return kMaxEnumeratedWindow + 1;
    }
    return total;
  }

  // Calls fn(probe) for every cell whose first `dims` indices lie within
  // `radius` of `center`. Offsets that leave the index range are skipped.
  template <typename Fn>
  static void for_each_offset(const Cell& center, int radius, std::size_t dims, Cell& probe,
                              Fn&& fn) {
    std::vector<int> offset(dims, -radius);
    while (true) {
      bool in_range = true;
      for (std::size_t k = 0; k < dims; ++k) {
        const std::int64_t v = std::int64_t{center[k]} + offset[k];
        if (v < std::numeric_limits<Cell::index_type>::min() ||
            v > std::numeric_limits<Cell::index_type>::max()) {
          in_range = false;
          break;
        }
        probe[k] = static_cast<Cell::index_type>(v);
      }
      if (in_range) fn(static_cast<const Cell&>(probe));
      std::size_t k = 0;
      while (k < dims && offset[k] == radius) offset[k++] = -radius;
      if (k == dims) break;
      ++offset[k];
    }
  }

  Cell project(const Cell& cell) const {
    return Cell(std::vector<Cell::index_type>(cell.indices().begin(),
                                              cell.indices().begin() +
                                                  static_cast<std::ptrdiff_t>(projected_axes_)));
  }

  void add_transition(const Cell& from, const Cell& to, std::uint64_t count) {
    auto [it, inserted] = trans_.try_emplace(from);
    if (inserted) buckets_[project(from)].push_back(from);
    it->second.to[to] += count;
    it->second.total += count;
  }

  void check_dim(const Cell& cell) const {
    if (cell.dim() != config_.embedded_dim()) {
      throw Error(ErrorKind::Shape, "cell has dimension " + std::to_string(cell.dim()) +
                                        ", model expects " +
                                        std::to_string(config_.embedded_dim()));
    }
  }

  void require_nonempty() const {
    if (observations_ == 0) throw Error(ErrorKind::EmptyModel, "model has no observations");
  }

  EmbeddingConfig config_;
  CellCounts geo_;
  TransitionMap trans_;
  // from-cells grouped by their first few indices
  std::unordered_map<Cell, std::vector<Cell>, CellHash> buckets_;
  std::size_t projected_axes_ = 0;
  __int128 weight_total_ = 0;
  std::uint64_t observations_ = 0;
};

/// Running similarity of a test trajectory against one class.
struct ScoreState {
  double s_g = 0.0;      // sum of geographic probabilities
  double log_s_m = 0.0;  // sum of log transition probabilities
  std::size_t t = 0;     // states consumed

  /// log(s_g) + log_s_m, or -inf while s_g is zero.
  double log_similarity() const {
    if (!(s_g > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(s_g) + log_s_m;
  }

  friend bool operator==(const ScoreState&, const ScoreState&) = default;
};

inline ScoreState score_init() { return {}; }

/// Folds one more state into a running score. `prev` must be absent on the
/// first update and present on every later one.
inline ScoreState score_update(ScoreState state, const ClassModel& model, const Cell& cell,
                               const Cell* prev, int radius) {
  if ((state.t == 0) != (prev == nullptr)) {
    throw Error(ErrorKind::Protocol, state.t == 0
                                         ? "first score update cannot have a previous state"
                                         : "score update after the first needs a previous state");
  }
  state.s_g += model.geo_prob(cell);
  if (prev != nullptr) state.log_s_m += std::log(model.trans_prob_neighborhood(cell, *prev, radius));
  ++state.t;
  return state;
}

inline ScoreState score_update(ScoreState state, const ClassModel& model, const Cell& cell,
                               const std::optional<Cell>& prev, int radius) {
  return score_update(state, model, cell, prev ? &*prev : nullptr, radius);
}

struct BatchScore {
  double s_g = 0.0;
  double log_s_m = 0.0;
};

inline BatchScore batch_score(const ClassModel& model, std::span<const Cell> trajectory,
                              int radius) {
  if (trajectory.empty()) throw Error(ErrorKind::EmptyInput, "trajectory is empty");
  BatchScore out;
  for (const Cell& cell : trajectory) out.s_g += model.geo_prob(cell);
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    out.log_s_m += std::log(model.trans_prob_neighborhood(trajectory[i], trajectory[i - 1], radius));
  }
  return out;
}

/// Outcome of comparing per-class scores. `best` is empty when every class
/// has zero geographic evidence.
struct Comparison {
  std::optional<std::size_t> best;
  bool decided() const noexcept { return best.has_value(); }
};

inline Comparison compare(std::span<const ScoreState> scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyModel, "no classes to compare");
  Comparison out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double v = scores[i].log_similarity();
    if (v > best) {
      best = v;
      out.best = i;
    }
  }
  return out;
}

}  // namespace ddemgm
