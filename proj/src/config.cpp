#include "tracecurate/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tracecurate/hash.hpp"

namespace tracecurate {
namespace {

std::string_view backend_name(JudgeBackendKind k) {
  return k == JudgeBackendKind::http ? "http" : "scripted";
}

std::string_view difficulty_name(DifficultyMode m) {
  switch (m) {
    case DifficultyMode::off: return "off";
    case DifficultyMode::scripted: return "scripted";
    case DifficultyMode::http: return "http";
  }
  return "off";
}

template <class T>
T get_as(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config key \"{}\": {}", key, e.what()));
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    const Json defaults = PipelineConfig{}.to_json();
    for (const auto& [k, v] : defaults.items()) out.push_back(k);
    return out;
  }();
  return keys;
}

Json PipelineConfig::to_json() const {
  Json j = Json::object();
  j["delimiter_open"] = delimiters.open;
  j["delimiter_close"] = delimiters.close;
  j["markers"] = markers.markers;
  j["markers_case_sensitive"] = markers.case_sensitive;
  j["markers_require_sentence_start"] = markers.require_line_or_sentence_start;
  j["judge_backend"] = backend_name(judge_backend);
  j["judge_endpoint"] = judge_http.endpoint;
  j["judge_model"] = judge_http.model;
  j["judge_temperature"] = judge_http.temperature;
  j["judge_max_tokens"] = judge_http.max_tokens;
  j["judge_api_key_env"] = judge_http.api_key_env;
  j["judge_concurrency"] = judge_http.concurrency;
  j["judge_timeout_s"] = judge_http.timeout.count();
  j["judge_cache_dir"] = judge_cache_dir;
  j["judge_preceding_window"] = judge_preceding_window;
  j["judge_max_prompt_tokens"] = judge_max_prompt_tokens;
  j["judge_criteria_template"] = judge_criteria_template;
  j["judge_independence_template"] = judge_independence_template;
  j["judge_retry_attempts"] = judge_retry_attempts;
  j["judge_repair_attempts"] = judge_repair_attempts;
  j["tokenizer"] = tokenizer;
  j["tokenizer_vocab"] = tokenizer_vocab;
  j["weighting"] = weighting_name(weighting);
  j["sample_size"] = sample_size ? Json(*sample_size) : Json(nullptr);
  j["sample_fraction"] = sample_fraction ? Json(*sample_fraction) : Json(nullptr);
  j["kl_epsilon"] = kl_epsilon;
  j["image_patterns"] = image_patterns;
  j["mixed_language_threshold"] = mixed_language_threshold;
  j["difficulty_filter"] = difficulty_name(difficulty_filter);
  j["solver_models"] = solver_models;
  j["grader_model"] = grader_model;
  j["attempts_per_solver"] = attempts_per_solver;
  j["benchmark_paths"] = benchmark_paths;
  j["ngram_n"] = ngram_n;
  j["parse_mode"] = parse_mode == ParseMode::lenient ? "lenient" : "strict";
  j["field_mapping"] = field_mapping.to_json();
  j["rewrite_answer"] = rewrite_answer;
  j["threads"] = threads;
  j["seed"] = seed;
  return j;
}

namespace {

PipelineConfig parse_unvalidated(const Json& in) {
  if (!in.is_object()) throw ConfigError("config must be a JSON object");
  Json j = PipelineConfig{}.to_json();
  for (const auto& [k, v] : in.items()) {
    if (!j.contains(k)) throw ConfigError(fmt::format("unknown config key \"{}\"", k));
    j[k] = v;
  }

  PipelineConfig c;
  c.delimiters.open = get_as<std::string>(j, "delimiter_open");
  c.delimiters.close = get_as<std::string>(j, "delimiter_close");
  c.markers.markers = get_as<std::vector<std::string>>(j, "markers");
  c.markers.case_sensitive = get_as<bool>(j, "markers_case_sensitive");
  c.markers.require_line_or_sentence_start =
      get_as<bool>(j, "markers_require_sentence_start");

  const auto backend = get_as<std::string>(j, "judge_backend");
  if (backend == "scripted") {
    c.judge_backend = JudgeBackendKind::scripted;
  } else if (backend == "http") {
    c.judge_backend = JudgeBackendKind::http;
  } else {
    throw ConfigError(fmt::format("unknown judge_backend \"{}\"", backend));
  }
  c.judge_http.endpoint = get_as<std::string>(j, "judge_endpoint");
  c.judge_http.model = get_as<std::string>(j, "judge_model");
  c.judge_http.temperature = get_as<double>(j, "judge_temperature");
  c.judge_http.max_tokens = get_as<int>(j, "judge_max_tokens");
  c.judge_http.api_key_env = get_as<std::string>(j, "judge_api_key_env");
  c.judge_http.concurrency = get_as<int>(j, "judge_concurrency");
  c.judge_http.timeout = std::chrono::seconds(get_as<long long>(j, "judge_timeout_s"));
  c.judge_cache_dir = get_as<std::string>(j, "judge_cache_dir");
  c.judge_preceding_window = get_as<std::size_t>(j, "judge_preceding_window");
  c.judge_max_prompt_tokens = get_as<std::size_t>(j, "judge_max_prompt_tokens");
  c.judge_criteria_template = get_as<std::string>(j, "judge_criteria_template");
  c.judge_independence_template = get_as<std::string>(j, "judge_independence_template");
  c.judge_retry_attempts = get_as<int>(j, "judge_retry_attempts");
  c.judge_repair_attempts = get_as<int>(j, "judge_repair_attempts");

  c.tokenizer = get_as<std::string>(j, "tokenizer");
  c.tokenizer_vocab = get_as<std::string>(j, "tokenizer_vocab");
  c.weighting = parse_weighting(get_as<std::string>(j, "weighting"));
  if (!j.at("sample_size").is_null()) c.sample_size = get_as<std::size_t>(j, "sample_size");
  if (!j.at("sample_fraction").is_null()) {
    c.sample_fraction = get_as<double>(j, "sample_fraction");
  }
  c.kl_epsilon = get_as<double>(j, "kl_epsilon");

  c.image_patterns = get_as<std::vector<std::string>>(j, "image_patterns");
  c.mixed_language_threshold = get_as<double>(j, "mixed_language_threshold");
  const auto diff = get_as<std::string>(j, "difficulty_filter");
  if (diff == "off") {
    c.difficulty_filter = DifficultyMode::off;
  } else if (diff == "scripted") {
    c.difficulty_filter = DifficultyMode::scripted;
  } else if (diff == "http") {
    c.difficulty_filter = DifficultyMode::http;
  } else {
    throw ConfigError(fmt::format("unknown difficulty_filter \"{}\"", diff));
  }
  c.solver_models = get_as<std::vector<std::string>>(j, "solver_models");
  c.grader_model = get_as<std::string>(j, "grader_model");
  c.attempts_per_solver = get_as<int>(j, "attempts_per_solver");
  c.benchmark_paths = get_as<std::vector<std::string>>(j, "benchmark_paths");
  c.ngram_n = get_as<std::size_t>(j, "ngram_n");

  const auto mode = get_as<std::string>(j, "parse_mode");
  if (mode == "strict") {
    c.parse_mode = ParseMode::strict;
  } else if (mode == "lenient") {
    c.parse_mode = ParseMode::lenient;
  } else {
    throw ConfigError(fmt::format("unknown parse_mode \"{}\"", mode));
  }
  try {
    c.field_mapping = FieldMapping::from_json(j.at("field_mapping"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config key \"field_mapping\": {}", e.what()));
  }
  c.rewrite_answer = get_as<bool>(j, "rewrite_answer");
  c.threads = get_as<std::size_t>(j, "threads");
  c.seed = get_as<std::uint64_t>(j, "seed");
  return c;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& in) {
  PipelineConfig c = parse_unvalidated(in);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config file {} is not valid JSON: {}", path, e.what()));
  }
  return from_json(j);
}

void PipelineConfig::set(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override \"{}\" is not key=value", assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  Json j = to_json();
  if (!j.contains(key)) throw ConfigError(fmt::format("unknown config key \"{}\"", key));
  Json parsed = Json::parse(value, nullptr, false);
  j[key] = parsed.is_discarded() ? Json(value) : parsed;
  // cross-key checks wait for validate(); backend=http arrives before its endpoint
  *this = parse_unvalidated(j);
}

void PipelineConfig::validate() const {
  if (delimiters.open.empty() || delimiters.close.empty()) {
    throw ConfigError("thinking delimiters must be nonempty");
  }
  markers.validate();
  if (judge_backend == JudgeBackendKind::http) {
    if (judge_http.endpoint.empty()) throw ConfigError("judge_endpoint is required for http");
    if (judge_http.model.empty()) throw ConfigError("judge_model is required for http");
  }
  if (judge_http.concurrency < 1) throw ConfigError("judge_concurrency must be >= 1");
  if (judge_retry_attempts < 1) throw ConfigError("judge_retry_attempts must be >= 1");
  if (judge_repair_attempts < 0) throw ConfigError("judge_repair_attempts must be >= 0");
  if (tokenizer != "rule" && tokenizer != "vocab") {
    throw ConfigError(fmt::format("unknown tokenizer \"{}\"", tokenizer));
  }
  if (tokenizer == "vocab" && tokenizer_vocab.empty()) {
    throw ConfigError("tokenizer_vocab is required for the vocab tokenizer");
  }
  if (sample_size && sample_fraction) {
    throw ConfigError("set sample_size or sample_fraction, not both");
  }
  if (sample_size && *sample_size == 0) throw ConfigError("sample_size must be > 0");
  if (sample_fraction && !(*sample_fraction > 0.0 && *sample_fraction <= 1.0)) {
    throw ConfigError("sample_fraction must be in (0, 1]");
  }
  if (!(kl_epsilon > 0.0)) throw ConfigError("kl_epsilon must be > 0");
  if (!(mixed_language_threshold >= 0.0 && mixed_language_threshold <= 1.0)) {
    throw ConfigError("mixed_language_threshold must be in [0, 1]");
  }
  if (attempts_per_solver < 1) throw ConfigError("attempts_per_solver must be >= 1");
  if (difficulty_filter != DifficultyMode::off && solver_models.empty()) {
    throw ConfigError("difficulty filtering needs at least one solver model");
  }
  if (ngram_n < 1) throw ConfigError("ngram_n must be >= 1");
}

// Keys that change how a run executes but not what it produces stay out of
// the hash, so the same corpus processed with a different cache directory or
// thread count carries the same provenance.
std::string PipelineConfig::hash() const {
  Json j = to_json();
  for (const char* k : {"judge_cache_dir", "judge_concurrency", "judge_timeout_s",
                        "judge_api_key_env", "threads"}) {
    j.erase(k);
  }
  return sha256_hex(j.dump());
}

BasicFilterConfig PipelineConfig::basic_filter() const {
  BasicFilterConfig b;
  b.image_patterns = image_patterns;
  b.mixed_language_threshold = mixed_language_threshold;
  b.delimiters = delimiters;
  return b;
}

std::size_t PipelineConfig::resolve_sample_size(std::size_t corpus_size) const {
  if (sample_size) return *sample_size;
  if (sample_fraction) {
    const auto d = static_cast<std::size_t>(
        std::llround(*sample_fraction * static_cast<double>(corpus_size)));
    return std::max<std::size_t>(d, corpus_size == 0 ? 0 : 1);
  }
  throw ConfigError("sample stage needs sample_size or sample_fraction");
}

}  // namespace tracecurate
