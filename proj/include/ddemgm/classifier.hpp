#pragma once

// Multi-class online modeling and classification over raw samples.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "ddemgm/embedding.hpp"
#include "ddemgm/error.hpp"
#include "ddemgm/mgm.hpp"
#include "ddemgm/signal.hpp"

namespace ddemgm {

struct Prediction {
  std::optional<std::string> label;  // empty when every class scored -inf
  std::vector<std::string> labels;   // class order used for `scores`
  std::vector<ScoreState> scores;
  std::size_t t = 0;                 // states scored since the last reset

  bool decided() const noexcept { return label.has_value(); }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Per-class models trained from labeled streams, plus one test stream scored
/// against every class.
///
/// Training (train_point, end_series) and classification (classify_point,
/// reset_scores) may be driven from two different threads. The model store
/// is guarded by a reader/writer lock: each observed cell is applied under
/// the exclusive lock, and each scored test state reads all classes under one
/// shared lock, so a query sees either all or none of an update. Calls of the
/// same kind must not overlap.
class OnlineClassifier {
 public:
  explicit OnlineClassifier(EmbeddingConfig config, int radius = 1)
      : config_(std::move(config)),
        radius_(radius),
        test_stream_(config_),
        mutex_(std::make_unique<std::shared_mutex>()) {
    if (radius < 0) throw Error(ErrorKind::Shape, "neighborhood radius must be non-negative");
  }

  OnlineClassifier(OnlineClassifier&&) noexcept = default;
  OnlineClassifier& operator=(OnlineClassifier&&) noexcept = default;

  const EmbeddingConfig& config() const noexcept { return config_; }
  int radius() const noexcept { return radius_; }

  void train_point(const std::string& label, std::span<const double> sample) {
    auto& stream = train_streams_.try_emplace(label, config_).first->second;
    std::optional<Cell> prev = stream.last_cell();
    std::optional<Cell> cell = stream.push(sample);
    if (!cell) return;
    std::unique_lock lock(*mutex_);
    auto& model = models_.try_emplace(label, config_).first->second;
    model.observe(*cell, prev);
  }

  /// Marks the end of one training series for `label`; the next point starts
  /// a fresh window and no transition links the two series.
  void end_series(const std::string& label) {
    if (auto it = train_streams_.find(label); it != train_streams_.end()) it->second.reset();
  }

  void train_series(const std::string& label, const Series& series) {
    for (std::size_t t = 0; t < series.size(); ++t) train_point(label, series[t]);
    end_series(label);
  }

  /// Pushes one test sample. Returns the current prediction once at least one
  /// state has been scored since the last reset.
  std::optional<Prediction> classify_point(std::span<const double> sample) {
    {
      std::shared_lock lock(*mutex_);
      if (models_.empty()) throw Error(ErrorKind::EmptyModel, "no trained classes");
    }
    std::optional<Cell> cell = test_stream_.push(sample);
    if (!cell) return scored_ == 0 ? std::nullopt : std::optional<Prediction>(prediction());
    {
      std::shared_lock lock(*mutex_);
      for (const auto& [label, model] : models_) {
        auto& state = scores_[label];
        const Cell* prev = state.t > 0 && test_prev_ ? &*test_prev_ : nullptr;
        state = score_update(state, model, *cell, prev, radius_);
      }
    }
    test_prev_ = std::move(cell);
    ++scored_;
    return prediction();
  }

  /// Classifies a whole series from a clean state; returns the final
  /// prediction, or none if the series is shorter than one window.
  std::optional<Prediction> classify_series(const Series& series) {
    reset_scores();
    std::optional<Prediction> last;
    for (std::size_t t = 0; t < series.size(); ++t) {
      if (auto p = classify_point(series[t])) last = std::move(p);
    }
    return last;
  }

  void reset_scores() {
    scores_.clear();
    test_stream_.reset();
    test_prev_.reset();
    scored_ = 0;
  }

  /// Installs a model restored from storage.
  void add_model(const std::string& label, ClassModel model) {
    if (!(model.config() == config_)) throw Error(ErrorKind::Shape, "model config mismatch");
    std::unique_lock lock(*mutex_);
    models_.insert_or_assign(label, std::move(model));
  }

  /// Read access to the model store under the shared lock.
  template <typename Fn>
  decltype(auto) with_models(Fn&& fn) const {
    std::shared_lock lock(*mutex_);
    return fn(static_cast<const std::map<std::string, ClassModel>&>(models_));
  }

  /// Unsynchronized view; only for single-threaded use.
  const std::map<std::string, ClassModel>& models() const noexcept { return models_; }

  bool has_class(const std::string& label) const {
    std::shared_lock lock(*mutex_);
    return models_.contains(label);
  }

  std::size_t class_count() const {
    std::shared_lock lock(*mutex_);
    return models_.size();
  }

  std::size_t distinct_cells() const {
    std::shared_lock lock(*mutex_);
    std::size_t total = 0;
    for (const auto& [label, model] : models_) total += model.distinct_cells();
    return total;
  }

 private:
  Prediction prediction() const {
    Prediction out;
    out.t = scored_;
    out.labels.reserve(scores_.size());
    out.scores.reserve(scores_.size());
    for (const auto& [label, state] : scores_) {
      out.labels.push_back(label);
      out.scores.push_back(state);
    }
    if (const auto cmp = compare(out.scores); cmp.best) out.label = out.labels[*cmp.best];
    return out;
  }

  EmbeddingConfig config_;
  int radius_ = 1;
  std::map<std::string, ClassModel> models_;
  std::map<std::string, DdeStream> train_streams_;
  DdeStream test_stream_;
  std::optional<Cell> test_prev_;
  std::map<std::string, ScoreState> scores_;
  std::size_t scored_ = 0;
  std::unique_ptr<std::shared_mutex> mutex_;
};

}  // namespace ddemgm
