#pragma once

#include <array>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>

#include "tracecurate/corpus.hpp"
#include "tracecurate/judge.hpp"

namespace tracecurate {

// Canned verdicts per (record id, subtrajectory index). Replies are rendered
// in the same line format a live judge must use, so parsing and repair run
// exactly as they would against a model.
//
// Fixture layout, under annotations.script of a record:
//   "criteria":    [ [bool x5] | {"effort": bool, ...} | "raw reply text", ... ]
//   "independent": { "<index>": bool, ... }
class ScriptedJudge final : public JudgeBackend {
 public:
  struct Entry {
    std::optional<std::array<bool, 5>> criteria;
    std::optional<std::string> raw_criteria;
    std::optional<bool> independent;
  };

  std::string name() const override { return "scripted"; }
  bool deterministic() const override { return true; }
  std::string complete(const JudgeRequest& request) override;
  std::string cache_discriminator(const JudgeRequest& request) const override;

  void set_criteria(const std::string& record_id, std::size_t index,
                    const std::array<bool, 5>& verdicts);
  void set_raw_criteria(const std::string& record_id, std::size_t index,
                        std::string reply);
  void set_independent(const std::string& record_id, std::size_t index,
                       bool independent);
  // Loads annotations.script; a record without one contributes nothing.
  void load(const DatasetRecord& record);
  void forget(const std::string& record_id);

  std::size_t calls() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::size_t>, Entry> entries_;
  std::size_t calls_ = 0;
};

std::string render_criteria_reply(const std::array<bool, 5>& verdicts);
std::string render_independence_reply(bool independent);

}  // namespace tracecurate
