#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/filters.hpp"
#include "tracecurate/http_backend.hpp"
#include "tracecurate/judge.hpp"
#include "tracecurate/scorer.hpp"
#include "tracecurate/segmenter.hpp"

namespace tracecurate {

enum class JudgeBackendKind { scripted, http };
enum class DifficultyMode { off, scripted, http };

// Every knob of a pipeline run. The file form is one flat JSON object whose
// keys are listed in config_keys(); unknown keys are rejected.
struct PipelineConfig {
  Delimiters delimiters;
  MarkerConfig markers;

  JudgeBackendKind judge_backend = JudgeBackendKind::scripted;
  HttpBackendConfig judge_http;
  std::string judge_cache_dir;  // empty: in-memory cache
  std::size_t judge_preceding_window = 2;
  std::size_t judge_max_prompt_tokens = 0;
  std::string judge_criteria_template;      // empty: built-in
  std::string judge_independence_template;  // empty: built-in
  int judge_retry_attempts = 4;
  int judge_repair_attempts = 1;

  std::string tokenizer = "rule";  // rule | vocab
  std::string tokenizer_vocab;
  Weighting weighting = Weighting::token_weighted;

  // Exactly one of these sets d; a fraction is rounded to the nearest
  // record count.
  std::optional<std::size_t> sample_size;
  std::optional<double> sample_fraction;
  double kl_epsilon = 1e-9;

  std::vector<std::string> image_patterns =
      BasicFilterConfig::default_image_patterns();
  double mixed_language_threshold = 0.05;
  DifficultyMode difficulty_filter = DifficultyMode::off;
  std::vector<std::string> solver_models = {"solver-a", "solver-b"};
  std::string grader_model = "grader";
  int attempts_per_solver = 2;

  std::vector<std::string> benchmark_paths;
  std::size_t ngram_n = 15;

  ParseMode parse_mode = ParseMode::strict;
  FieldMapping field_mapping;
  bool rewrite_answer = false;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;   // reserved; nothing is random

  static PipelineConfig from_json(const Json& j);
  static PipelineConfig load(const std::string& path);
  Json to_json() const;

  // Applies one "key=value" override. The value is read as JSON when it
  // parses, otherwise as a plain string.
  void set(std::string_view assignment);

  // Throws ConfigError on inconsistent settings.
  void validate() const;

  // SHA-256 over the canonical resolved form.
  std::string hash() const;

  BasicFilterConfig basic_filter() const;
  std::size_t resolve_sample_size(std::size_t corpus_size) const;
};

const std::vector<std::string>& config_keys();

}  // namespace tracecurate
