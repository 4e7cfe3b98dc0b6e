#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/judge.hpp"
#include "tracecurate/retry.hpp"
#include "tracecurate/segmenter.hpp"
#include "tracecurate/verdict_cache.hpp"

namespace tracecurate {

enum class RejectReason {
  image_dependent,
  truncated,
  mixed_language,
  too_easy,
  no_boxed_answer,
  contaminated,
  judge_unparseable,
};

std::string_view reject_reason_name(RejectReason r);

struct FilterVerdict {
  bool keep = true;
  std::vector<RejectReason> reasons;
  std::vector<std::string> evidence;

  void reject(RejectReason reason, std::string detail = {});
  // Combines two verdicts; reasons keep first-seen order without repeats.
  void merge(const FilterVerdict& other);
  Json to_json() const;
};

struct BasicFilterConfig {
  // ECMAScript regexes matched case-insensitively against the question.
  std::vector<std::string> image_patterns = default_image_patterns();
  // Share of letters outside the dominant script above which a record is
  // mixed-language.
  double mixed_language_threshold = 0.05;
  Delimiters delimiters;

  static std::vector<std::string> default_image_patterns();
};

// Letter counts by Unicode script. Greek and the mathematical alphanumeric
// block are not counted; they are treated as math notation.
struct ScriptProfile {
  std::size_t letters = 0;
  std::size_t dominant = 0;
  std::string dominant_script;

  // Share of counted letters outside the dominant script.
  double secondary_ratio() const {
    return letters == 0 ? 0.0 : static_cast<double>(letters - dominant) / letters;
  }
};

ScriptProfile script_profile(std::string_view utf8);

// Compiled once; safe to share across threads.
class BasicQualityFilter {
 public:
  explicit BasicQualityFilter(BasicFilterConfig config = {});
  FilterVerdict operator()(const DatasetRecord& record) const;

 private:
  BasicFilterConfig config_;
  std::vector<std::pair<std::string, std::regex>> patterns_;
};

FilterVerdict basic_quality_filter(const DatasetRecord& record,
                                   const BasicFilterConfig& config = {});

// Content of the last well-formed boxed{...}; escaped braces (\{ \}) do not
// count toward nesting.
std::optional<std::string> extract_boxed(std::string_view text);
bool has_boxed_answer(std::string_view text);

// Post-thinking text of an answer (the whole answer when it has no thinking
// block).
std::string solution_text(const DatasetRecord& record,
                          const Delimiters& delimiters = {});

struct SolveRequest {
  std::string record_id;
  std::string question;
  int attempt = 0;
};

class SolverClient {
 public:
  virtual ~SolverClient() = default;
  virtual std::string name() const = 0;
  virtual std::string solve(const SolveRequest& request) = 0;
};

class GraderClient {
 public:
  virtual ~GraderClient() = default;
  virtual std::string name() const = 0;
  virtual bool grade(std::string_view question, std::string_view candidate,
                     std::string_view ground_truth) = 0;
};

// Compares the candidate's boxed answer (or the whole candidate) with the
// ground truth after dropping whitespace, "$" and a trailing period.
class ExactMatchGrader final : public GraderClient {
 public:
  std::string name() const override { return "exact-match"; }
  bool grade(std::string_view question, std::string_view candidate,
             std::string_view ground_truth) override;
};

// Replays attempt outcomes from annotations.script.difficulty, a list of
// booleans indexed solver * attempts_per_solver + attempt. A true entry
// answers with the ground truth, false with a fixed wrong answer.
class ScriptedSolver final : public SolverClient {
 public:
  ScriptedSolver(std::string name, int solver_index, int attempts_per_solver);
  std::string name() const override { return name_; }
  std::string solve(const SolveRequest& request) override;

  void load(const DatasetRecord& record, const Delimiters& delimiters = {});

 private:
  std::string name_;
  int solver_index_;
  int attempts_per_solver_;
  std::mutex mu_;
  std::map<std::string, std::pair<std::string, std::vector<bool>>> script_;
};

class HttpChatBackend;

// Asks a chat model to solve the question and box the answer.
class HttpSolver final : public SolverClient {
 public:
  explicit HttpSolver(HttpChatBackend& backend) : backend_(backend) {}
  std::string name() const override;
  std::string solve(const SolveRequest& request) override;

 private:
  HttpChatBackend& backend_;
};

// Asks a chat model whether a candidate matches the reference answer.
class HttpGrader final : public GraderClient {
 public:
  explicit HttpGrader(HttpChatBackend& backend) : backend_(backend) {}
  std::string name() const override;
  bool grade(std::string_view question, std::string_view candidate,
             std::string_view ground_truth) override;

 private:
  HttpChatBackend& backend_;
};

struct DifficultyOptions {
  int attempts_per_solver = 2;
  RetryPolicy retry;
  VerdictCache* cache = nullptr;  // memoizes generations and grades
  Delimiters delimiters;
};

struct AttemptOutcome {
  std::string solver;
  int attempt = 0;
  bool correct = false;
};

struct DifficultyResult {
  FilterVerdict verdict;
  std::vector<AttemptOutcome> attempts;
};

// Every solver answers attempts_per_solver times; the record is too easy if
// any attempt grades correct. A solution without a boxed answer is rejected
// before any solver runs.
DifficultyResult difficulty_filter(const DatasetRecord& record,
                                   std::span<SolverClient* const> solvers,
                                   GraderClient& grader,
                                   const DifficultyOptions& options = {});

}  // namespace tracecurate
