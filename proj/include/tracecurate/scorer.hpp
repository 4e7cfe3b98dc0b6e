#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/judge.hpp"
#include "tracecurate/reviser.hpp"
#include "tracecurate/segmenter.hpp"
#include "tracecurate/tokenizer.hpp"

namespace tracecurate {

enum class Weighting { token_weighted, equal };

std::string_view weighting_name(Weighting w);
Weighting parse_weighting(std::string_view name);

// Score kept as an exact count of satisfied criteria; score() is that
// count over five.
struct SubtrajectoryScore {
  std::size_t index = 0;
  int satisfied = 0;
  std::size_t token_count = 0;

  double score() const { return satisfied / 5.0; }
};

struct ScoredThinking {
  double quality_score = 0.0;
  // quality_score as a reduced fraction.
  std::uint64_t quality_numerator = 0;
  std::uint64_t quality_denominator = 1;
  Weighting weighting = Weighting::token_weighted;
  std::size_t n = 0;
  std::size_t total_tokens = 0;
  std::vector<SubtrajectoryScore> per_subtrajectory;

  Json to_json() const;
};

// Fraction of the five criteria satisfied.
double score_subtrajectory(const CriterionVerdicts& verdicts);

// Token-weighted: sum_i (t_i / T) * s_i with T = sum_i t_i.
// Equal:          (1/n) sum_i s_i.
// Throws DataError for an empty list, or T == 0 under token weighting.
ScoredThinking aggregate(std::span<const SubtrajectoryScore> scores,
                         Weighting weighting);

// The same aggregation over arbitrary real scores in [0, 1], for callers that
// do not start from verdicts.
double combine_scores(std::span<const std::size_t> token_counts,
                      std::span<const double> scores, Weighting weighting);

// Scores the retained subtrajectories of a revision; eliminated ones do not
// contribute, and T is the token count of the revised thinking.
ScoredThinking quality_score(const RevisedThinking& revised,
                             std::span<const Subtrajectory> subs,
                             const Tokenizer& tokenizer, Weighting weighting);

}  // namespace tracecurate
