#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ddemgm/error.hpp"
#include "ddemgm/signal.hpp"

namespace ddemgm {

struct LabeledSeries {
  std::string id;
  std::string label;
  Series series;

  friend bool operator==(const LabeledSeries&, const LabeledSeries&) = default;
};

/// Labeled collection of series sharing one dimension.
struct Dataset {
  std::vector<LabeledSeries> items;
  std::size_t dim = 0;

  void add(LabeledSeries item) {
    if (items.empty() && dim == 0) dim = item.series.dim();
    if (item.series.dim() != dim) {
      throw Error(ErrorKind::Shape, "series '" + item.id + "' has dimension " +
                                        std::to_string(item.series.dim()) + ", dataset has " +
                                        std::to_string(dim));
    }
    items.push_back(std::move(item));
  }

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }

  /// Sorted distinct labels.
  std::vector<std::string> labels() const {
    std::set<std::string> seen;
    for (const auto& item : items) seen.insert(item.label);
    return {seen.begin(), seen.end()};
  }

  /// Item indices grouped by label, in dataset order within each label.
  std::map<std::string, std::vector<std::size_t>> by_label() const {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < items.size(); ++i) out[items[i].label].push_back(i);
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace ddemgm
