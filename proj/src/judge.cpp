#include "tracecurate/judge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "builtin_prompts.hpp"
#include "tracecurate/hash.hpp"

namespace tracecurate {
namespace {

constexpr std::string_view kUnparseableTag = "UNPARSEABLE\n";

std::string render(std::string_view body,
                   const std::map<std::string, std::string_view>& values) {
  std::string out;
  out.reserve(body.size() + 256);
  std::size_t i = 0;
  while (i < body.size()) {
    const std::size_t open = body.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(body.substr(i));
      break;
    }
    const std::size_t close = body.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(body.substr(i));
      break;
    }
    out.append(body.substr(i, open - i));
    const std::string key(body.substr(open + 2, close - open - 2));
    if (auto it = values.find(key); it != values.end()) {
      out.append(it->second);
    } else {
      out.append(body.substr(open, close + 2 - open));
    }
    i = close + 2;
  }
  return out;
}

std::string trim_copy(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Reads "LABEL: VALUE" lines, tolerating markdown bullets and emphasis.
// Returns label -> value, or nullopt when a label repeats with a different
// value.
std::optional<std::map<std::string, bool>> parse_labeled_lines(
    std::string_view reply) {
  std::map<std::string, bool> out;
  std::istringstream in{std::string(reply)};
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string label;
    for (char c : line.substr(0, colon)) {
      const auto u = static_cast<unsigned char>(c);
      if (std::isalnum(u)) {
        label.push_back(static_cast<char>(std::toupper(u)));
      } else if ((c == ' ' || c == '_' || c == '-') && !label.empty() &&
                 label.back() != '_') {
        label.push_back('_');
      }
    }
    while (!label.empty() && label.back() == '_') label.pop_back();
    std::string value;
    for (char c : line.substr(colon + 1)) {
      const auto u = static_cast<unsigned char>(c);
      if (std::isalpha(u)) {
        value.push_back(static_cast<char>(std::toupper(u)));
      } else if (!value.empty()) {
        break;
      }
    }
    bool v;
    if (value == "YES" || value == "TRUE") {
      v = true;
    } else if (value == "NO" || value == "FALSE") {
      v = false;
    } else {
      continue;
    }
    auto [it, inserted] = out.emplace(label, v);
    if (!inserted && it->second != v) return std::nullopt;
  }
  return out;
}

// Keeps the last `keep` tokens of `text` (cut at a token start).
std::string keep_tail_tokens(std::string_view text, std::size_t keep,
                             const Tokenizer& tok) {
  if (keep == 0) return {};
  const auto spans = tok.spans(text);
  if (keep >= spans.size()) return std::string(text);
  return std::string(text.substr(spans[spans.size() - keep].begin));
}

std::string keep_head_tokens(std::string_view text, std::size_t keep,
                             const Tokenizer& tok) {
  if (keep == 0) return {};
  const auto spans = tok.spans(text);
  if (keep >= spans.size()) return std::string(text);
  return std::string(text.substr(0, spans[keep - 1].end));
}

// Shared budget loop: `make(kept_tokens, omitted)` renders a prompt keeping
// that many tokens of the elastic part.
template <class Make>
BuiltPrompt fit_budget(std::size_t elastic_tokens, std::size_t budget,
                       const Tokenizer& tok, Make&& make) {
  BuiltPrompt full{make(elastic_tokens, 0), 0};
  if (budget == 0 || tok.count(full.text) <= budget) return full;

  const std::string bare = make(0, elastic_tokens);
  const std::size_t overhead = tok.count(bare);
  if (overhead > budget) {
    throw PromptBudgetExceeded(fmt::format(
        "prompt needs {} tokens without context, budget is {}", overhead,
        budget));
  }
  std::size_t keep = std::min(elastic_tokens, budget - overhead);
  for (;; --keep) {
    std::string text = make(keep, elastic_tokens - keep);
    if (tok.count(text) <= budget) return {std::move(text), elastic_tokens - keep};
    if (keep == 0) break;
  }
  throw PromptBudgetExceeded("prompt does not fit the token budget");
}

}  // namespace

std::string_view criterion_key(Criterion c) {
  switch (c) {
    case Criterion::effort: return "effort";
    case Criterion::effectiveness: return "effectiveness";
    case Criterion::coherence: return "coherence";
    case Criterion::preliminary_conclusion: return "preliminary_conclusion";
    case Criterion::valid_verification: return "valid_verification";
  }
  return "effort";
}

std::string_view criterion_label(Criterion c) {
  switch (c) {
    case Criterion::effort: return "EFFORT";
    case Criterion::effectiveness: return "EFFECTIVENESS";
    case Criterion::coherence: return "COHERENCE";
    case Criterion::preliminary_conclusion: return "PRELIMINARY_CONCLUSION";
    case Criterion::valid_verification: return "VALID_VERIFICATION";
  }
  return "EFFORT";
}

CriterionVerdicts CriterionVerdicts::from_bools(const std::array<bool, 5>& v,
                                                std::string judge_id) {
  CriterionVerdicts out;
  for (std::size_t i = 0; i < kCriteria.size(); ++i) out.set(kCriteria[i], v[i]);
  out.judge_id = std::move(judge_id);
  return out;
}

bool CriterionVerdicts::get(Criterion c) const {
  switch (c) {
    case Criterion::effort: return effort;
    case Criterion::effectiveness: return effectiveness;
    case Criterion::coherence: return coherence;
    case Criterion::preliminary_conclusion: return preliminary_conclusion;
    case Criterion::valid_verification: return valid_verification;
  }
  return false;
}

void CriterionVerdicts::set(Criterion c, bool value) {
  switch (c) {
    case Criterion::effort: effort = value; break;
    case Criterion::effectiveness: effectiveness = value; break;
    case Criterion::coherence: coherence = value; break;
    case Criterion::preliminary_conclusion: preliminary_conclusion = value; break;
    case Criterion::valid_verification: valid_verification = value; break;
  }
}

std::array<bool, 5> CriterionVerdicts::as_array() const {
  return {effort, effectiveness, coherence, preliminary_conclusion,
          valid_verification};
}

int CriterionVerdicts::satisfied_count() const {
  const auto a = as_array();
  return static_cast<int>(std::count(a.begin(), a.end(), true));
}

Json CriterionVerdicts::to_json() const {
  Json j = Json::object();
  for (Criterion c : kCriteria) j[std::string(criterion_key(c))] = get(c);
  j["judge_id"] = judge_id;
  if (raw_output) j["raw_output"] = *raw_output;
  if (context_tokens_omitted > 0) j["context_tokens_omitted"] = context_tokens_omitted;
  return j;
}

CriterionVerdicts CriterionVerdicts::from_json(const Json& j) {
  CriterionVerdicts v;
  for (Criterion c : kCriteria) {
    const auto key = std::string(criterion_key(c));
    if (!j.contains(key) || !j.at(key).is_boolean()) {
      throw DataError(fmt::format("verdict is missing boolean \"{}\"", key));
    }
    v.set(c, j.at(key).get<bool>());
  }
  v.judge_id = j.value("judge_id", std::string{});
  if (auto it = j.find("raw_output"); it != j.end() && it->is_string()) {
    v.raw_output = it->get<std::string>();
  }
  v.context_tokens_omitted = j.value("context_tokens_omitted", std::size_t{0});
  return v;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  constexpr std::string_view kVersion = "version:";
  if (text.substr(0, kVersion.size()) != kVersion) {
    throw ConfigError("prompt template must start with \"version:\"");
  }
  const std::size_t eol = text.find('\n');
  const std::size_t sep = text.find("\n---\n");
  if (eol == std::string_view::npos || sep == std::string_view::npos) {
    throw ConfigError("prompt template needs a \"---\" line after the header");
  }
  PromptTemplate t;
  t.version = trim_copy(text.substr(kVersion.size(), eol - kVersion.size()));
  t.body = std::string(text.substr(sep + 5));
  if (t.version.empty()) throw ConfigError("prompt template version is empty");
  return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read prompt template {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PromptTemplate PromptTemplate::builtin_criteria() {
  static const PromptTemplate t = parse(builtin::kCriteriaTemplate);
  return t;
}

PromptTemplate PromptTemplate::builtin_independence() {
  static const PromptTemplate t = parse(builtin::kIndependenceTemplate);
  return t;
}

BuiltPrompt build_criteria_prompt(const Subtrajectory& sub,
                                  const JudgeContext& context,
                                  const PromptTemplate& tmpl,
                                  const PromptOptions& options) {
  if (sub.text.empty() || context.question.empty()) {
    throw DataError("criteria prompt needs a question and a nonempty subtrajectory");
  }
  const Tokenizer& tok = *options.tokenizer;
  std::string preceding;
  const std::size_t n = context.preceding.size();
  const std::size_t first = n > options.preceding_window ? n - options.preceding_window : 0;
  for (std::size_t i = first; i < n; ++i) preceding.append(context.preceding[i]);
  const std::size_t preceding_tokens = tok.count(preceding);

  auto make = [&](std::size_t keep, std::size_t omitted) {
    const std::string kept = keep_tail_tokens(preceding, keep, tok);
    const std::string note =
        omitted > 0 ? fmt::format("[... {} earlier tokens omitted ...]\n", omitted)
                    : std::string{};
    const std::string_view shown =
        kept.empty() && note.empty() ? std::string_view("(none)") : std::string_view(kept);
    return render(tmpl.body, {{"question", context.question},
                              {"preceding", shown},
                              {"subtrajectory", sub.text},
                              {"truncation_note", note}});
  };
  return fit_budget(preceding_tokens, options.max_prompt_tokens, tok, make);
}

BuiltPrompt build_independence_prompt(const Subtrajectory& sub,
                                      std::string_view subsequent,
                                      const PromptTemplate& tmpl,
                                      const PromptOptions& options) {
  if (sub.text.empty() || subsequent.empty()) {
    throw DataError("independence prompt needs a subtrajectory and later content");
  }
  const Tokenizer& tok = *options.tokenizer;
  const std::size_t later_tokens = tok.count(subsequent);
  auto make = [&](std::size_t keep, std::size_t omitted) {
    const std::string kept = keep_head_tokens(subsequent, keep, tok);
    const std::string note =
        omitted > 0 ? fmt::format("\n[... {} later tokens omitted ...]", omitted)
                    : std::string{};
    return render(tmpl.body, {{"subtrajectory", sub.text},
                              {"subsequent", kept},
                              {"truncation_note", note}});
  };
  return fit_budget(later_tokens, options.max_prompt_tokens, tok, make);
}

std::optional<std::array<bool, 5>> parse_criteria_reply(std::string_view reply) {
  const auto lines = parse_labeled_lines(reply);
  if (!lines) return std::nullopt;
  std::array<bool, 5> out{};
  for (std::size_t i = 0; i < kCriteria.size(); ++i) {
    auto it = lines->find(std::string(criterion_label(kCriteria[i])));
    if (it == lines->end()) return std::nullopt;
    out[i] = it->second;
  }
  return out;
}

std::optional<bool> parse_independence_reply(std::string_view reply) {
  const auto lines = parse_labeled_lines(reply);
  if (!lines) return std::nullopt;
  auto it = lines->find("INDEPENDENT");
  if (it == lines->end()) return std::nullopt;
  return it->second;
}

Judge::Judge(JudgeBackend& backend, VerdictCache* cache, JudgeOptions options)
    : backend_(backend), cache_(cache), options_(std::move(options)) {}

std::string Judge::criteria_judge_id() const {
  return backend_.name() + "/" + options_.criteria_template.version;
}

std::string Judge::independence_judge_id() const {
  return backend_.name() + "/" + options_.independence_template.version;
}

template <class Parser>
std::string Judge::obtain(JudgeRequest request,
                          const std::string& template_version, Parser&& parse) {
  const std::string key =
      sha256_fields({template_version, backend_.name(),
                     backend_.cache_discriminator(request), request.prompt});
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      ++hits_;
      if (hit->rfind(kUnparseableTag, 0) == 0) {
        throw JudgeUnparseable("judge reply unparseable (cached)",
                               hit->substr(kUnparseableTag.size()));
      }
      return *hit;
    }
  }

  const std::string original_prompt = request.prompt;
  std::string reply;
  for (int round = 0; round <= options_.repair_attempts; ++round) {
    request.attempt = round;
    if (round > 0) {
      request.prompt = original_prompt +
                       "\n\nYour previous reply could not be read:\n<<<\n" +
                       reply +
                       "\n>>>\nAnswer again using only the required lines.";
    }
    reply = with_retry(options_.retry, [&] {
      ++calls_;
      return backend_.complete(request);
    });
    if (parse(reply)) {
      if (cache_) cache_->put(key, reply);
      return reply;
    }
  }
  if (cache_) cache_->put(key, std::string(kUnparseableTag) + reply);
  throw JudgeUnparseable("judge reply unparseable after repair", reply);
}

CriterionVerdicts Judge::judge_criteria(const Subtrajectory& sub,
                                        const JudgeContext& context,
                                        std::string_view record_id) {
  const BuiltPrompt prompt = build_criteria_prompt(
      sub, context, options_.criteria_template, options_.prompt);
  JudgeRequest req{RequestKind::criteria, prompt.text, std::string(record_id),
                   sub.index, 0};
  const std::string reply =
      obtain(std::move(req), options_.criteria_template.version,
             [](std::string_view r) { return parse_criteria_reply(r).has_value(); });
  CriterionVerdicts v =
      CriterionVerdicts::from_bools(*parse_criteria_reply(reply), criteria_judge_id());
  v.raw_output = reply;
  v.context_tokens_omitted = prompt.omitted_tokens;
  return v;
}

IndependenceVerdict Judge::judge_independence(const Subtrajectory& sub,
                                              std::string_view subsequent,
                                              std::string_view record_id) {
  const BuiltPrompt prompt = build_independence_prompt(
      sub, subsequent, options_.independence_template, options_.prompt);
  JudgeRequest req{RequestKind::independence, prompt.text,
                   std::string(record_id), sub.index, 0};
  const std::string reply = obtain(
      std::move(req), options_.independence_template.version,
      [](std::string_view r) { return parse_independence_reply(r).has_value(); });
  IndependenceVerdict v;
  v.independent = *parse_independence_reply(reply);
  v.judge_id = independence_judge_id();
  v.raw_output = reply;
  v.context_tokens_omitted = prompt.omitted_tokens;
  return v;
}

}  // namespace tracecurate
