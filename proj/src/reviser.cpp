#include "tracecurate/reviser.hpp"

#include <fmt/format.h>

namespace tracecurate {

std::string_view classification_name(Classification c) {
  return c == Classification::optimal ? "optimal" : "suboptimal";
}

Classification classify(const CriterionVerdicts& v) {
  return v.satisfied_count() == 5 ? Classification::optimal
                                  : Classification::suboptimal;
}

Json RevisedThinking::to_json() const {
  Json per = Json::array();
  for (std::size_t i = 0; i < per_subtrajectory.size(); ++i) {
    const auto& r = per_subtrajectory[i];
    Json item{{"index", i},
              {"classification", classification_name(r.classification)},
              {"satisfied", r.verdicts.satisfied_count()}};
    if (r.independent) item["independent"] = *r.independent;
    per.push_back(std::move(item));
  }
  return Json{{"retained", retained},
              {"eliminated", eliminated},
              {"per_subtrajectory", std::move(per)}};
}

RevisedThinking revise(std::span<const Subtrajectory> subs,
                       std::span<const CriterionVerdicts> verdicts,
                       std::string_view final_answer,
                       const IndependenceProvider& independence) {
  if (subs.empty()) throw RevisionError("no subtrajectories to revise");
  if (verdicts.size() != subs.size()) {
    throw RevisionError(fmt::format("{} verdicts for {} subtrajectories",
                                    verdicts.size(), subs.size()));
  }

  // Suffix of the original trace after each slice; computed once so every
  // independence check sees the unrevised later content.
  std::vector<std::size_t> suffix_len(subs.size() + 1, final_answer.size());
  for (std::size_t i = subs.size(); i-- > 0;) {
    suffix_len[i] = suffix_len[i + 1] + subs[i].text.size();
  }
  std::string original;
  original.reserve(suffix_len[0]);
  for (const auto& s : subs) original += s.text;
  original += final_answer;

  RevisedThinking out;
  out.per_subtrajectory.reserve(subs.size());
  const std::size_t last = subs.size() - 1;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    SubtrajectoryReview review;
    review.verdicts = verdicts[i];
    review.classification = classify(verdicts[i]);
    if (review.classification == Classification::suboptimal && i != last) {
      const std::string_view subsequent =
          std::string_view(original).substr(original.size() - suffix_len[i + 1]);
      try {
        review.independent = independence(i, subsequent);
      } catch (const std::exception& e) {
        throw RevisionError(fmt::format(
            "independence check failed for subtrajectory {}: {}", i, e.what()));
      }
    }
    out.per_subtrajectory.push_back(std::move(review));
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (out.per_subtrajectory[i].independent.value_or(false)) {
      out.eliminated.push_back(i);
    } else {
      out.retained.push_back(i);
      out.revised_text += subs[i].text;
    }
  }
  return out;
}

}  // namespace tracecurate
