#include "tracecurate/scripted_backend.hpp"

#include <mutex>

#include <fmt/format.h>

namespace tracecurate {

std::string render_criteria_reply(const std::array<bool, 5>& v) {
  std::string out;
  for (std::size_t i = 0; i < kCriteria.size(); ++i) {
    out += fmt::format("{}: {}\n", criterion_label(kCriteria[i]),
                       v[i] ? "YES" : "NO");
  }
  return out;
}

std::string render_independence_reply(bool independent) {
  return fmt::format("INDEPENDENT: {}\n", independent ? "YES" : "NO");
}

std::string ScriptedJudge::complete(const JudgeRequest& request) {
  std::unique_lock lock(mu_);
  ++calls_;
  auto it = entries_.find({request.record_id, request.index});
  const bool criteria = request.kind == RequestKind::criteria;
  if (it != entries_.end()) {
    const Entry& e = it->second;
    if (criteria && e.raw_criteria) return *e.raw_criteria;
    if (criteria && e.criteria) return render_criteria_reply(*e.criteria);
    if (!criteria && e.independent) return render_independence_reply(*e.independent);
  }
  throw BackendError(
      fmt::format("no scripted {} verdict for record \"{}\" subtrajectory {}",
                  criteria ? "criteria" : "independence", request.record_id,
                  request.index),
      false);
}

std::string ScriptedJudge::cache_discriminator(const JudgeRequest& r) const {
  return fmt::format("{}#{}", r.record_id, r.index);
}

void ScriptedJudge::set_criteria(const std::string& id, std::size_t index,
                                 const std::array<bool, 5>& verdicts) {
  std::unique_lock lock(mu_);
  entries_[{id, index}].criteria = verdicts;
}

void ScriptedJudge::set_raw_criteria(const std::string& id, std::size_t index,
                                     std::string reply) {
  std::unique_lock lock(mu_);
  entries_[{id, index}].raw_criteria = std::move(reply);
}

void ScriptedJudge::set_independent(const std::string& id, std::size_t index,
                                    bool independent) {
  std::unique_lock lock(mu_);
  entries_[{id, index}].independent = independent;
}

void ScriptedJudge::load(const DatasetRecord& record) {
  if (!record.annotations.is_object()) return;
  auto sit = record.annotations.find("script");
  if (sit == record.annotations.end() || !sit->is_object()) return;
  const Json& script = *sit;

  if (auto c = script.find("criteria"); c != script.end()) {
    if (!c->is_array()) throw DataError("script.criteria must be an array");
    for (std::size_t i = 0; i < c->size(); ++i) {
      const Json& item = (*c)[i];
      if (item.is_string()) {
        set_raw_criteria(record.id, i, item.get<std::string>());
      } else if (item.is_array() && item.size() == 5) {
        std::array<bool, 5> v{};
        for (std::size_t k = 0; k < 5; ++k) v[k] = item[k].get<bool>();
        set_criteria(record.id, i, v);
      } else if (item.is_object()) {
        set_criteria(record.id, i, CriterionVerdicts::from_json(item).as_array());
      } else {
        throw DataError("script.criteria entries must be 5 booleans, an object, "
                        "or a raw reply string");
      }
    }
  }
  if (auto ind = script.find("independent"); ind != script.end()) {
    if (!ind->is_object()) throw DataError("script.independent must be an object");
    for (const auto& [key, value] : ind->items()) {
      set_independent(record.id, std::stoul(key), value.get<bool>());
    }
  }
}

void ScriptedJudge::forget(const std::string& record_id) {
  std::unique_lock lock(mu_);
  auto it = entries_.lower_bound({record_id, 0});
  while (it != entries_.end() && it->first.first == record_id) {
    it = entries_.erase(it);
  }
}

std::size_t ScriptedJudge::calls() const {
  std::shared_lock lock(mu_);
  return calls_;
}

}  // namespace tracecurate
