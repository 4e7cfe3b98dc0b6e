#include "tracecurate/scorer.hpp"

#include <numeric>

#include <fmt/format.h>

namespace tracecurate {

std::string_view weighting_name(Weighting w) {
  return w == Weighting::token_weighted ? "token_weighted" : "equal";
}

Weighting parse_weighting(std::string_view name) {
  if (name == "token_weighted") return Weighting::token_weighted;
  if (name == "equal") return Weighting::equal;
  throw ConfigError(fmt::format("unknown weighting \"{}\"", name));
}

Json ScoredThinking::to_json() const {
  Json per = Json::array();
  for (const auto& s : per_subtrajectory) {
    per.push_back(Json{{"index", s.index},
                       {"satisfied", s.satisfied},
                       {"score", s.score()},
                       {"token_count", s.token_count}});
  }
  return Json{{"quality_score", quality_score},
              {"quality_numerator", quality_numerator},
              {"quality_denominator", quality_denominator},
              {"weighting", weighting_name(weighting)},
              {"n", n},
              {"total_tokens", total_tokens},
              {"per_subtrajectory", std::move(per)}};
}

double score_subtrajectory(const CriterionVerdicts& verdicts) {
  return verdicts.satisfied_count() / 5.0;
}

ScoredThinking aggregate(std::span<const SubtrajectoryScore> scores,
                         Weighting weighting) {
  if (scores.empty()) throw DataError("no retained subtrajectories to score");
  ScoredThinking out;
  out.weighting = weighting;
  out.n = scores.size();
  out.per_subtrajectory.assign(scores.begin(), scores.end());

  // Integer numerators keep the sums exact; one division at the end.
  std::size_t total_tokens = 0;
  unsigned long long weighted = 0;  // sum t_i * satisfied_i
  long long satisfied = 0;
  for (const auto& s : scores) {
    if (s.satisfied < 0 || s.satisfied > 5) {
      throw DataError(fmt::format("satisfied count {} out of range", s.satisfied));
    }
    total_tokens += s.token_count;
    weighted += static_cast<unsigned long long>(s.token_count) *
                static_cast<unsigned long long>(s.satisfied);
    satisfied += s.satisfied;
  }
  out.total_tokens = total_tokens;

  std::uint64_t num = 0;
  std::uint64_t den = 0;
  if (weighting == Weighting::token_weighted) {
    if (total_tokens == 0) {
      throw DataError("retained subtrajectories contain no tokens");
    }
    num = weighted;
    den = 5ULL * total_tokens;
  } else {
    num = static_cast<std::uint64_t>(satisfied);
    den = 5ULL * scores.size();
  }
  const std::uint64_t g = std::gcd(num, den);
  out.quality_numerator = num / g;
  out.quality_denominator = den / g;
  out.quality_score = static_cast<double>(num) / static_cast<double>(den);
  return out;
}

double combine_scores(std::span<const std::size_t> token_counts,
                      std::span<const double> scores, Weighting weighting) {
  if (scores.empty()) throw DataError("no scores to combine");
  if (token_counts.size() != scores.size()) {
    throw DataError("token and score lists differ in length");
  }
  if (weighting == Weighting::equal) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
  }
  std::size_t total = 0;
  for (std::size_t t : token_counts) total += t;
  if (total == 0) throw DataError("retained subtrajectories contain no tokens");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    sum += static_cast<double>(token_counts[i]) * scores[i];
  }
  return sum / static_cast<double>(total);
}

ScoredThinking quality_score(const RevisedThinking& revised,
                             std::span<const Subtrajectory> subs,
                             const Tokenizer& tokenizer, Weighting weighting) {
  if (revised.retained.empty()) throw DataError("revision retained nothing");
  std::vector<SubtrajectoryScore> scores;
  scores.reserve(revised.retained.size());
  for (std::size_t idx : revised.retained) {
    if (idx >= subs.size() || idx >= revised.per_subtrajectory.size()) {
      throw DataError(fmt::format("retained index {} out of range", idx));
    }
    scores.push_back({idx, revised.per_subtrajectory[idx].verdicts.satisfied_count(),
                      tokenizer.count(subs[idx].text)});
  }
  return aggregate(scores, weighting);
}

}  // namespace tracecurate
