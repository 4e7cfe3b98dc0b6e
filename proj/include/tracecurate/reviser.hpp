#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracecurate/judge.hpp"
#include "tracecurate/segmenter.hpp"

namespace tracecurate {

enum class Classification { optimal, suboptimal };

std::string_view classification_name(Classification c);

// Suboptimal iff any of the five criteria fails.
Classification classify(const CriterionVerdicts& verdicts);

struct SubtrajectoryReview {
  CriterionVerdicts verdicts;
  Classification classification = Classification::optimal;
  std::optional<bool> independent;  // only asked for suboptimal, non-final
};

struct RevisedThinking {
  std::vector<std::size_t> retained;
  std::vector<std::size_t> eliminated;
  std::string revised_text;
  std::vector<SubtrajectoryReview> per_subtrajectory;

  Json to_json() const;
};

// Answers "is subtrajectory `index` independent of `subsequent`?". May throw;
// revise() wraps any failure in RevisionError.
using IndependenceProvider =
    std::function<bool(std::size_t index, std::string_view subsequent)>;

class RevisionError : public DataError {
 public:
  using DataError::DataError;
};

// One pass over the original trace: every suboptimal subtrajectory except the
// last is checked for independence against everything after it (later
// slices plus the final answer), and the independent ones are removed
// together. The last subtrajectory is always kept.
RevisedThinking revise(std::span<const Subtrajectory> subs,
                       std::span<const CriterionVerdicts> verdicts,
                       std::string_view final_answer,
                       const IndependenceProvider& independence);

}  // namespace tracecurate
