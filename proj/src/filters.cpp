#include "tracecurate/filters.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include <fmt/format.h>

#include "tracecurate/hash.hpp"
#include "tracecurate/http_backend.hpp"

namespace tracecurate {

std::string_view reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::image_dependent: return "image_dependent";
    case RejectReason::truncated: return "truncated";
    case RejectReason::mixed_language: return "mixed_language";
    case RejectReason::too_easy: return "too_easy";
    case RejectReason::no_boxed_answer: return "no_boxed_answer";
    case RejectReason::contaminated: return "contaminated";
    case RejectReason::judge_unparseable: return "judge_unparseable";
  }
  return "truncated";
}

void FilterVerdict::reject(RejectReason reason, std::string detail) {
  keep = false;
  if (std::find(reasons.begin(), reasons.end(), reason) == reasons.end()) {
    reasons.push_back(reason);
  }
  if (!detail.empty()) evidence.push_back(std::move(detail));
}

void FilterVerdict::merge(const FilterVerdict& other) {
  for (RejectReason r : other.reasons) reject(r);
  evidence.insert(evidence.end(), other.evidence.begin(), other.evidence.end());
  keep = keep && other.keep;
}

Json FilterVerdict::to_json() const {
  Json reasons_json = Json::array();
  for (RejectReason r : reasons) reasons_json.push_back(reject_reason_name(r));
  return Json{{"keep", keep}, {"reasons", std::move(reasons_json)},
              {"evidence", evidence}};
}

std::vector<std::string> BasicFilterConfig::default_image_patterns() {
  return {
      R"(https?://\S+\.(png|jpe?g|gif|svg|webp|bmp)\b)",
      R"(!\[[^\]]*\]\([^)]*\))",
      R"(<img\b)",
      R"(\\includegraphics)",
      R"(\b(shown|depicted|illustrated) (in|on) the (figure|diagram|picture|image|graph)\b)",
      R"(\b(see|refer to) the (figure|diagram|picture|image)\b)",
      R"(\bthe (figure|diagram|picture|image) (below|above)\b)",
      R"(\bin the (figure|diagram|picture|image)\b)",
  };
}

namespace {

// Decodes one code point; advances `i`. Invalid sequences yield U+FFFD and
// consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

// Script of a letter, or nullptr for non-letters and math notation.
const char* script_of(char32_t c) {
  if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z')) return "latin";
  if (c >= 0x00C0 && c <= 0x024F && c != 0x00D7 && c != 0x00F7) return "latin";
  if (c >= 0x1E00 && c <= 0x1EFF) return "latin";
  if (c >= 0x0370 && c <= 0x03FF) return nullptr;  // Greek: math symbols
  if (c >= 0x1F00 && c <= 0x1FFF) return nullptr;
  if (c >= 0x0400 && c <= 0x052F) return "cyrillic";
  if (c >= 0x0530 && c <= 0x058F) return "armenian";
  if (c >= 0x0590 && c <= 0x05FF) return "hebrew";
  if (c >= 0x0600 && c <= 0x06FF) return "arabic";
  if (c >= 0x0900 && c <= 0x097F) return "devanagari";
  if (c >= 0x0E00 && c <= 0x0E7F) return "thai";
  if ((c >= 0x1100 && c <= 0x11FF) || (c >= 0x3130 && c <= 0x318F) ||
      (c >= 0xAC00 && c <= 0xD7AF)) {
    return "hangul";
  }
  if (c >= 0x3040 && c <= 0x30FF) return "kana";
  if ((c >= 0x3400 && c <= 0x4DBF) || (c >= 0x4E00 && c <= 0x9FFF) ||
      (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x20000 && c <= 0x2FA1F)) {
    return "han";
  }
  return nullptr;  // includes U+1D400..1D7FF math alphanumerics
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (is_space(c) || c == '$') continue;
    out.push_back(c);
  }
  while (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

}  // namespace

ScriptProfile script_profile(std::string_view utf8) {
  std::map<std::string_view, std::size_t> counts;
  ScriptProfile p;
  for (std::size_t i = 0; i < utf8.size();) {
    if (const char* s = script_of(next_code_point(utf8, i))) {
      ++counts[s];
      ++p.letters;
    }
  }
  for (const auto& [script, k] : counts) {
    if (k > p.dominant) {
      p.dominant = k;
      p.dominant_script = std::string(script);
    }
  }
  return p;
}

BasicQualityFilter::BasicQualityFilter(BasicFilterConfig config)
    : config_(std::move(config)) {
  for (const auto& p : config_.image_patterns) {
    try {
      patterns_.emplace_back(
          p, std::regex(p, std::regex::ECMAScript | std::regex::icase |
                               std::regex::optimize));
    } catch (const std::regex_error& e) {
      throw ConfigError(fmt::format("bad image pattern \"{}\": {}", p, e.what()));
    }
  }
}

FilterVerdict BasicQualityFilter::operator()(const DatasetRecord& record) const {
  FilterVerdict v;
  for (const auto& [text, re] : patterns_) {
    std::smatch m;
    const std::string& q = record.question;
    if (std::regex_search(q, m, re)) {
      v.reject(RejectReason::image_dependent,
               fmt::format("question matches \"{}\" at {}", m.str(0),
                           m.position(0)));
      break;
    }
  }

  try {
    extract_thinking(record.answer, config_.delimiters);
  } catch (const ThinkingError& e) {
    v.reject(RejectReason::truncated, e.what());
  }

  const ScriptProfile prof = script_profile(record.question + "\n" + record.answer);
  if (prof.secondary_ratio() > config_.mixed_language_threshold) {
    v.reject(RejectReason::mixed_language,
             fmt::format("{:.4f} of letters outside {}", prof.secondary_ratio(),
                         prof.dominant_script));
  }
  return v;
}

FilterVerdict basic_quality_filter(const DatasetRecord& record,
                                   const BasicFilterConfig& config) {
  return BasicQualityFilter(config)(record);
}

std::optional<std::string> extract_boxed(std::string_view text) {
  constexpr std::string_view kTag = "boxed{";
  std::optional<std::string> last;
  std::size_t pos = text.find(kTag);
  while (pos != std::string_view::npos) {
    const std::size_t body = pos + kTag.size();
    int depth = 1;
    std::size_t i = body;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '\\' && i + 1 < text.size() &&
          (text[i + 1] == '{' || text[i + 1] == '}')) {
        ++i;
        continue;
      }
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) break;
      }
    }
    if (depth == 0) last = std::string(text.substr(body, i - body));
    pos = text.find(kTag, body);
  }
  return last;
}

bool has_boxed_answer(std::string_view text) {
  return extract_boxed(text).has_value();
}

std::string solution_text(const DatasetRecord& record, const Delimiters& d) {
  try {
    const ThinkingProcess tp = extract_thinking(record.answer, d);
    return tp.had_delimiters ? tp.final_answer : tp.text;
  } catch (const ThinkingError&) {
    return {};
  }
}

bool ExactMatchGrader::grade(std::string_view, std::string_view candidate,
                             std::string_view ground_truth) {
  const auto boxed = extract_boxed(candidate);
  const std::string_view answer = boxed ? std::string_view(*boxed) : candidate;
  const std::string a = normalize_answer(answer);
  return !a.empty() && a == normalize_answer(ground_truth);
}

ScriptedSolver::ScriptedSolver(std::string name, int solver_index,
                               int attempts_per_solver)
    : name_(std::move(name)),
      solver_index_(solver_index),
      attempts_per_solver_(attempts_per_solver) {}

void ScriptedSolver::load(const DatasetRecord& record, const Delimiters& d) {
  std::vector<bool> outcomes;
  if (record.annotations.is_object()) {
    if (auto s = record.annotations.find("script");
        s != record.annotations.end() && s->is_object()) {
      if (auto diff = s->find("difficulty"); diff != s->end()) {
        for (const auto& b : *diff) outcomes.push_back(b.get<bool>());
      }
    }
  }
  std::string truth = record.ground_truth.value_or(
      extract_boxed(solution_text(record, d)).value_or(""));
  std::lock_guard lock(mu_);
  script_[record.id] = {std::move(truth), std::move(outcomes)};
}

std::string ScriptedSolver::solve(const SolveRequest& request) {
  std::lock_guard lock(mu_);
  auto it = script_.find(request.record_id);
  const std::size_t slot = static_cast<std::size_t>(
      solver_index_ * attempts_per_solver_ + request.attempt);
  if (it == script_.end() || slot >= it->second.second.size()) {
    throw BackendError(fmt::format("no scripted attempt {} of {} for \"{}\"",
                                   request.attempt, name_, request.record_id),
                       false);
  }
  return it->second.second[slot]
             ? fmt::format("The answer is \\boxed{{{}}}.", it->second.first)
             : std::string("The answer is \\boxed{\\text{unknown}}.");
}

std::string HttpSolver::name() const { return backend_.name(); }

std::string HttpSolver::solve(const SolveRequest& request) {
  return backend_.chat(
      "Solve the following problem. Reason step by step and put the final "
      "answer in \\boxed{}.\n\n" +
      request.question);
}

std::string HttpGrader::name() const { return backend_.name(); }

bool HttpGrader::grade(std::string_view question, std::string_view candidate,
                       std::string_view ground_truth) {
  const std::string reply = backend_.chat(fmt::format(
      "Decide whether a candidate solution reaches the reference answer.\n\n"
      "PROBLEM:\n{}\n\nREFERENCE ANSWER:\n{}\n\nCANDIDATE SOLUTION:\n{}\n\n"
      "Reply with exactly one line:\nCORRECT: YES or NO",
      question, ground_truth, candidate));
  const std::size_t at = reply.find("CORRECT:");
  if (at != std::string::npos) {
    std::string_view rest = std::string_view(reply).substr(at + 8);
    while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
    if (rest.substr(0, 3) == "YES") return true;
    if (rest.substr(0, 2) == "NO") return false;
  }
  throw BackendError("grader reply has no CORRECT: YES/NO line", false);
}

DifficultyResult difficulty_filter(const DatasetRecord& record,
                                   std::span<SolverClient* const> solvers,
                                   GraderClient& grader,
                                   const DifficultyOptions& options) {
  DifficultyResult result;
  const auto boxed = extract_boxed(solution_text(record, options.delimiters));
  if (!boxed) {
    result.verdict.reject(RejectReason::no_boxed_answer,
                          "solution has no boxed final answer");
    return result;
  }
  const std::string truth = record.ground_truth.value_or(*boxed);

  for (SolverClient* solver : solvers) {
    for (int a = 0; a < options.attempts_per_solver; ++a) {
      const std::string gen_key = sha256_fields(
          {"solve", solver->name(), record.id, record.question, std::to_string(a)});
      std::string generation;
      if (auto hit = options.cache ? options.cache->get(gen_key) : std::nullopt) {
        generation = *hit;
      } else {
        generation = with_retry(options.retry, [&] {
          return solver->solve({record.id, record.question, a});
        });
        if (options.cache) options.cache->put(gen_key, generation);
      }

      const std::string grade_key = sha256_fields(
          {"grade", grader.name(), record.question, generation, truth});
      bool correct;
      if (auto hit = options.cache ? options.cache->get(grade_key) : std::nullopt) {
        correct = *hit == "1";
      } else {
        correct = with_retry(options.retry, [&] {
          return grader.grade(record.question, generation, truth);
        });
        if (options.cache) options.cache->put(grade_key, correct ? "1" : "0");
      }
      result.attempts.push_back({solver->name(), a, correct});
    }
  }

  const auto n_correct = std::count_if(result.attempts.begin(), result.attempts.end(),
                                       [](const auto& o) { return o.correct; });
  if (n_correct > 0) {
    result.verdict.reject(RejectReason::too_easy,
                          fmt::format("{} of {} attempts graded correct", n_correct,
                                      result.attempts.size()));
  }
  return result;
}

}  // namespace tracecurate
