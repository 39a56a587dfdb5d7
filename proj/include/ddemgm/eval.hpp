#pragma once

// Evaluation protocols: stratified hold-out and alternating online
// (classify each series, then train on it).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddemgm/actors.hpp"
#include "ddemgm/classifier.hpp"
#include "ddemgm/dataset.hpp"
#include "ddemgm/embedding.hpp"
#include "ddemgm/error.hpp"
#include "ddemgm/model_io.hpp"

namespace ddemgm {

/// Predicted label recorded when no class could be decided.
inline const std::string kUndecided = "<undecided>";

struct EvalReport {
  std::string protocol;
  std::uint64_t seed = 0;
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  std::size_t undecided = 0;
  std::size_t excluded = 0;  // online: series whose label had no model yet
  double accuracy = 0.0;
  // confusion[true][predicted]
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  double wall_seconds = 0.0;
  std::size_t model_bytes = 0;
  std::vector<double> curve;  // online: running accuracy after each scored series

  void record(const std::string& truth, const std::optional<Prediction>& prediction) {
    const std::string predicted =
        prediction && prediction->label ? *prediction->label : kUndecided;
    ++confusion[truth][predicted];
    ++evaluated;
    if (predicted == kUndecided) ++undecided;
    if (predicted == truth) ++correct;
    accuracy = static_cast<double>(correct) / static_cast<double>(evaluated);
  }

  std::size_t confusion_total() const {
    std::size_t total = 0;
    for (const auto& [truth, row] : confusion) {
      for (const auto& [pred, n] : row) total += n;
    }
    return total;
  }

  std::size_t confusion_diagonal() const {
    std::size_t total = 0;
    for (const auto& [truth, row] : confusion) {
      if (const auto it = row.find(truth); it != row.end()) total += it->second;
    }
    return total;
  }
};

struct EvalOptions {
  int radius = 1;
  double split = 0.5;
  std::uint64_t seed = 0;
  bool parallel = false;  // run on a training actor and a classification actor
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Runs `train` and `classify` jobs inline, or on two actors in submission
/// order when `parallel` is set.
class Driver {
 public:
  explicit Driver(bool parallel) {
    if (parallel) actors_.emplace(ActorOrdering::Serialized);
  }
  template <typename Fn>
  void train(Fn&& fn) {
    run(Actor::Training, std::forward<Fn>(fn));
  }
  template <typename Fn>
  void classify(Fn&& fn) {
    run(Actor::Classification, std::forward<Fn>(fn));
  }
  void drain() {
    if (actors_) actors_->drain();
  }

 private:
  template <typename Fn>
  void run(Actor actor, Fn&& fn) {
    if (actors_) {
      actors_->submit(actor, std::forward<Fn>(fn));
    } else {
      fn();
    }
  }
  std::optional<ActorPair> actors_;
};

}  // namespace detail

/// Stratified random split; trains on one part and classifies every held-out
/// series from a clean score state.
inline EvalReport eval_holdout(const Dataset& data, const EmbeddingConfig& config,
                               const EvalOptions& options = {}) {
  if (!(options.split > 0.0 && options.split < 1.0)) {
    throw Error(ErrorKind::Shape, "split must lie strictly between 0 and 1");
  }
  const auto groups = data.by_label();
  if (groups.size() < 2) throw Error(ErrorKind::Stratification, "need at least two labels");
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (const auto& [label, members] : groups) {
    if (members.size() < 2) {
      throw Error(ErrorKind::Stratification, "class '" + label + "' has fewer than 2 series");
    }
    std::vector<std::size_t> shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto wanted = static_cast<std::size_t>(
        std::llround(options.split * static_cast<double>(members.size())));
    const std::size_t n_train = std::clamp<std::size_t>(wanted, 1, members.size() - 1);
    train_idx.insert(train_idx.end(), shuffled.begin(), shuffled.begin() + n_train);
    test_idx.insert(test_idx.end(), shuffled.begin() + n_train, shuffled.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  EvalReport report;
  report.protocol = "holdout";
  report.seed = options.seed;
  detail::Stopwatch clock;
  OnlineClassifier classifier(config, options.radius);
  std::vector<std::optional<Prediction>> predictions(test_idx.size());
  {
    detail::Driver driver(options.parallel);
    for (std::size_t idx : train_idx) {
      driver.train([&, idx] { classifier.train_series(data.items[idx].label, data.items[idx].series); });
    }
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      driver.classify([&, i] { predictions[i] = classifier.classify_series(data.items[test_idx[i]].series); });
    }
    driver.drain();
  }
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    report.record(data.items[test_idx[i]].label, predictions[i]);
  }
  report.wall_seconds = clock.seconds();
  report.model_bytes = serialize_model(classifier).size();
  return report;
}

/// Visits series in seeded random order; each is classified against the
/// models learned so far (when its label already has a model) and then used
/// for training.
inline EvalReport eval_online(const Dataset& data, const EmbeddingConfig& config,
                              const EvalOptions& options = {}) {
  if (data.empty()) throw Error(ErrorKind::EmptyInput, "dataset is empty");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  EvalReport report;
  report.protocol = "online";
  report.seed = options.seed;
  detail::Stopwatch clock;
  OnlineClassifier classifier(config, options.radius);
  {
    detail::Driver driver(options.parallel);
    for (std::size_t idx : order) {
      const auto& item = data.items[idx];
      driver.classify([&] {
        if (!classifier.has_class(item.label)) {
          ++report.excluded;
          return;
        }
        report.record(item.label, classifier.classify_series(item.series));
        report.curve.push_back(report.accuracy);
      });
      driver.train([&] { classifier.train_series(item.label, item.series); });
    }
    driver.drain();
  }
  report.wall_seconds = clock.seconds();
  report.model_bytes = serialize_model(classifier).size();
  return report;
}

}  // namespace ddemgm
