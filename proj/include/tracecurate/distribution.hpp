#pragma once

#include <map>
#include <span>
#include <vector>

#include "tracecurate/corpus.hpp"

namespace tracecurate {

// Relative frequency of each subtrajectory count.
struct CountDistribution {
  std::map<int, double> freq;

  std::vector<int> support() const;
  double at(int count) const;  // 0 outside the support
  Json to_json() const;

  bool operator==(const CountDistribution&) const = default;
};

// Throws DataError on empty input.
CountDistribution distribution_of_counts(std::span<const int> counts);

}  // namespace tracecurate
