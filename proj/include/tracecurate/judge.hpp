#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/error.hpp"
#include "tracecurate/retry.hpp"
#include "tracecurate/segmenter.hpp"
#include "tracecurate/tokenizer.hpp"
#include "tracecurate/verdict_cache.hpp"

namespace tracecurate {

enum class Criterion {
  effort,
  effectiveness,
  coherence,
  preliminary_conclusion,
  valid_verification,
};

inline constexpr std::array<Criterion, 5> kCriteria = {
    Criterion::effort, Criterion::effectiveness, Criterion::coherence,
    Criterion::preliminary_conclusion, Criterion::valid_verification};

// snake_case key used in JSON ("preliminary_conclusion").
std::string_view criterion_key(Criterion c);
// Reply label the judge must emit ("PRELIMINARY_CONCLUSION").
std::string_view criterion_label(Criterion c);

struct CriterionVerdicts {
  bool effort = false;
  bool effectiveness = false;
  bool coherence = false;
  bool preliminary_conclusion = false;
  bool valid_verification = false;
  std::string judge_id;
  std::optional<std::string> raw_output;
  // Tokens of earlier context dropped to fit the prompt budget.
  std::size_t context_tokens_omitted = 0;

  static CriterionVerdicts from_bools(const std::array<bool, 5>& v,
                                      std::string judge_id = {});

  bool get(Criterion c) const;
  void set(Criterion c, bool value);
  std::array<bool, 5> as_array() const;
  int satisfied_count() const;

  Json to_json() const;
  static CriterionVerdicts from_json(const Json& j);
};

struct IndependenceVerdict {
  bool independent = false;
  std::string judge_id;
  std::optional<std::string> raw_output;
  std::size_t context_tokens_omitted = 0;
};

// A versioned prompt file: a "version: <tag>" line, a "---" line, then the
// body with {{placeholder}} slots.
struct PromptTemplate {
  std::string version;
  std::string body;

  static PromptTemplate parse(std::string_view file_text);
  static PromptTemplate load(const std::string& path);
  static PromptTemplate builtin_criteria();
  static PromptTemplate builtin_independence();
};

struct PromptOptions {
  // Earlier subtrajectories shown as context.
  std::size_t preceding_window = 2;
  // Token budget for the whole prompt; 0 disables truncation.
  std::size_t max_prompt_tokens = 0;
  const Tokenizer* tokenizer = &default_tokenizer();
};

struct BuiltPrompt {
  std::string text;
  std::size_t omitted_tokens = 0;
  bool truncated() const { return omitted_tokens > 0; }
};

class PromptBudgetExceeded : public DataError {
 public:
  using DataError::DataError;
};

struct JudgeContext {
  std::string_view question;
  // All earlier subtrajectory texts, oldest first.
  std::vector<std::string_view> preceding;
};

// Oldest preceding context is dropped first when over budget.
BuiltPrompt build_criteria_prompt(const Subtrajectory& sub,
                                  const JudgeContext& context,
                                  const PromptTemplate& tmpl,
                                  const PromptOptions& options = {});
// The far end of the later content is dropped first when over budget.
BuiltPrompt build_independence_prompt(const Subtrajectory& sub,
                                      std::string_view subsequent,
                                      const PromptTemplate& tmpl,
                                      const PromptOptions& options = {});

// Reply parsing. Each label must appear on its own line with YES/NO (TRUE/
// FALSE also accepted); missing or contradictory labels yield nullopt.
std::optional<std::array<bool, 5>> parse_criteria_reply(std::string_view reply);
std::optional<bool> parse_independence_reply(std::string_view reply);

enum class RequestKind { criteria, independence, solve, grade };

struct JudgeRequest {
  RequestKind kind = RequestKind::criteria;
  std::string prompt;
  std::string record_id;
  std::size_t index = 0;
  int attempt = 0;  // repair round for judging, attempt number for solving
};

// Anything that turns a prompt into reply text. Throws BackendError on
// transport failure.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string name() const = 0;
  virtual bool deterministic() const { return false; }
  virtual bool supports_batching() const { return false; }
  virtual std::string complete(const JudgeRequest& request) = 0;
  // Extra cache-key material for backends whose reply depends on more than
  // the prompt text.
  virtual std::string cache_discriminator(const JudgeRequest&) const {
    return {};
  }
};

// The reply still failed to parse after the repair attempts.
class JudgeUnparseable : public DataError {
 public:
  JudgeUnparseable(const std::string& message, std::string raw)
      : DataError(message), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

struct JudgeOptions {
  PromptTemplate criteria_template = PromptTemplate::builtin_criteria();
  PromptTemplate independence_template = PromptTemplate::builtin_independence();
  PromptOptions prompt;
  RetryPolicy retry;
  int repair_attempts = 1;
};

// Prompts the backend, parses replies, and memoizes them in the cache.
// Thread-safe when the backend and cache are.
class Judge {
 public:
  Judge(JudgeBackend& backend, VerdictCache* cache, JudgeOptions options = {});

  CriterionVerdicts judge_criteria(const Subtrajectory& sub,
                                   const JudgeContext& context,
                                   std::string_view record_id = {});
  IndependenceVerdict judge_independence(const Subtrajectory& sub,
                                         std::string_view subsequent,
                                         std::string_view record_id = {});

  std::string criteria_judge_id() const;
  std::string independence_judge_id() const;
  std::size_t backend_calls() const noexcept { return calls_.load(); }
  std::size_t cache_hits() const noexcept { return hits_.load(); }
  const JudgeOptions& options() const noexcept { return options_; }

 private:
  // Returns a parseable reply or throws JudgeUnparseable.
  template <class Parser>
  std::string obtain(JudgeRequest request, const std::string& template_version,
                     Parser&& parse);

  JudgeBackend& backend_;
  VerdictCache* cache_;
  JudgeOptions options_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> hits_{0};
};

}  // namespace tracecurate
