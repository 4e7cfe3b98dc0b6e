#include "tracecurate/stages.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "tracecurate/http_backend.hpp"
#include "tracecurate/ngram_index.hpp"
#include "tracecurate/sampler.hpp"
#include "tracecurate/scripted_backend.hpp"

namespace tracecurate {
namespace {

namespace fs = std::filesystem;

constexpr std::array<Stage, 7> kStageOrder = {
    Stage::filtered, Stage::decontaminated, Stage::segmented, Stage::judged,
    Stage::revised,  Stage::scored,         Stage::sampled,
};

std::size_t stage_rank(Stage s) {
  return static_cast<std::size_t>(
      std::find(kStageOrder.begin(), kStageOrder.end(), s) - kStageOrder.begin());
}

// Removes `from` and every later attachment. A rewritten answer is put back
// when the revision that rewrote it goes.
void detach_from(DatasetRecord& r, Stage from) {
  for (std::size_t i = stage_rank(from); i < kStageOrder.size(); ++i) {
    const Stage s = kStageOrder[i];
    if (s == Stage::revised && r.has(s)) {
      const Json& att = r.annotations.at("revised");
      if (auto p = att.find("payload"); p != att.end() && p->contains("original_answer")) {
        r.answer = p->at("original_answer").get<std::string>();
      }
    }
    r.detach(s);
  }
}

enum class Prior { none, same, other };

Prior prior_state(const DatasetRecord& r, Stage s, const std::string& hash) {
  if (!r.has(s)) return Prior::none;
  const Json& att = r.annotations.at(std::string(stage_name(s)));
  return att.value("config_hash", std::string{}) == hash ? Prior::same : Prior::other;
}

[[noreturn]] void refuse(const DatasetRecord& r, Stage s) {
  throw ConfigError(fmt::format(
      "record \"{}\" already has annotations.{} from a different configuration; "
      "pass --force to redo the stage",
      r.id, stage_name(s)));
}

std::string command_for(Stage s) {
  switch (s) {
    case Stage::segmented: return "segment";
    case Stage::judged: return "judge";
    case Stage::revised: return "revise";
    case Stage::scored: return "score";
    case Stage::sampled: return "sample";
    case Stage::filtered: return "filter";
    case Stage::decontaminated: return "decontaminate";
  }
  return "segment";
}

[[noreturn]] void missing(const DatasetRecord& r, Stage needed) {
  const std::string cmd = command_for(needed);
  throw DependencyError(
      cmd, fmt::format("record \"{}\" has no annotations.{}; run \"{}\" first", r.id,
                       stage_name(needed), cmd));
}

const Json& payload_of(const DatasetRecord& r, Stage s) {
  if (!r.has(s)) missing(r, s);
  const Json& att = r.annotations.at(std::string(stage_name(s)));
  auto it = att.find("payload");
  if (it == att.end()) {
    throw DataError(fmt::format("record \"{}\": annotations.{} has no payload", r.id,
                                stage_name(s)));
  }
  return *it;
}

StageAttachment make_meta(Stage s, const PipelineConfig& c) {
  StageAttachment att;
  att.stage = s;
  att.produced_at = stage_timestamp();
  att.config_hash = c.hash();
  return att;
}

void attach(DatasetRecord& r, const StageAttachment& meta, Json payload,
            std::optional<std::string> flag = std::nullopt) {
  StageAttachment att = meta;
  att.payload = std::move(payload);
  att.flag = std::move(flag);
  r.attach(att);
}

std::string side_path(const std::string& chosen, const std::string& out,
                      std::string_view suffix) {
  return chosen.empty() ? out + std::string(suffix) : chosen;
}

class CorpusInput {
 public:
  CorpusInput(const std::string& path, const PipelineConfig& config)
      : in_(path, std::ios::binary),
        reader_(in_, ReaderOptions{config.parse_mode, config.field_mapping, true}) {
    if (!in_) throw DataError(fmt::format("cannot open input corpus {}", path));
  }

  std::optional<DatasetRecord> next() { return reader_.next(); }
  const std::vector<ReadIssue>& issues() const { return reader_.issues(); }

 private:
  std::ifstream in_;
  RecordReader reader_;
};

// Writes to "<path>.partial" and renames on commit, so a failed stage never
// leaves a truncated file under the final name.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path)
      : path_(std::move(path)), tmp_(path_ + ".partial") {
    if (auto parent = fs::path(path_).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError(fmt::format("cannot open {} for writing", tmp_));
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw DataError(fmt::format("write to {} failed", tmp_));
    out_.close();
    fs::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_rejection(std::ostream& out, const DatasetRecord& r,
                     const FilterVerdict& v) {
  Json reasons = Json::array();
  for (auto reason : v.reasons) reasons.push_back(reject_reason_name(reason));
  Json line{{"id", r.id}, {"reasons", std::move(reasons)}, {"evidence", v.evidence}};
  out << line.dump() << '\n';
}

std::size_t worker_count(const PipelineConfig& c) {
  if (c.threads > 0) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `threads` threads; rethrows the first
// failure after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; !failed && (i = next++) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

struct StageSpec {
  Stage stage;
  std::optional<Stage> requires_stage;
  std::size_t threads = 1;
};

// Shared skeleton of the per-record stages: provenance checks, prerequisite
// checks and pass-through of flagged records happen here; `work` only sees
// records that need processing and returns false when it flagged one.
template <class Work>
StageSummary run_record_stage(const StageSpec& spec, const std::string& in,
                              const std::string& out, const StageOptions& options,
                              Work&& work) {
  const PipelineConfig& config = options.config;
  StageSummary summary;
  summary.stage = command_for(spec.stage);
  summary.config_hash = config.hash();

  CorpusInput input(in, config);
  AtomicFile file(out);
  RecordWriter writer(file.stream());

  const std::size_t chunk_size = std::max<std::size_t>(64, spec.threads * 16);
  std::vector<DatasetRecord> chunk;
  std::vector<std::size_t> todo;
  std::vector<char> ok;

  auto flush = [&] {
    ok.assign(todo.size(), 1);
    parallel_for(todo.size(), spec.threads,
                 [&](std::size_t k) { ok[k] = work(chunk[todo[k]]) ? 1 : 0; });
    for (std::size_t k = 0; k < todo.size(); ++k) {
      ++summary.processed;
      if (!ok[k]) ++summary.flagged;
    }
    for (const auto& r : chunk) writer.write(r);
    summary.records_out += chunk.size();
    chunk.clear();
    todo.clear();
  };

  while (auto rec = input.next()) {
    ++summary.records_in;
    DatasetRecord& r = chunk.emplace_back(std::move(*rec));
    switch (prior_state(r, spec.stage, summary.config_hash)) {
      case Prior::same:
        ++summary.unchanged;
        break;
      case Prior::other:
        if (!options.force) refuse(r, spec.stage);
        detach_from(r, spec.stage);
        [[fallthrough]];
      case Prior::none:
        if (r.flag()) {
          ++summary.passed_through;
        } else {
          if (spec.requires_stage && !r.has(*spec.requires_stage)) {
            missing(r, *spec.requires_stage);
          }
          todo.push_back(chunk.size() - 1);
        }
        break;
    }
    if (chunk.size() >= chunk_size) flush();
  }
  flush();
  summary.extra["read_issues"] = input.issues().size();
  file.commit();
  return summary;
}

std::size_t count_of(const Json& payload, const char* key) {
  auto it = payload.find(key);
  return it == payload.end() ? 0 : it->get<std::size_t>();
}

RecordEfficacy efficacy_original(const DatasetRecord& r, const SegmentedView& view,
                                 const Tokenizer& tok) {
  RecordEfficacy e;
  for (const auto& s : view.subs) e.sub_tokens.push_back(tok.count(s.text));
  if (r.has(Stage::judged)) {
    const auto verdicts = judged_verdicts(r);
    std::vector<bool> sub;
    for (const auto& v : verdicts) sub.push_back(classify(v) == Classification::suboptimal);
    e.suboptimal = std::move(sub);
  }
  return e;
}

RecordEfficacy efficacy_revised(const DatasetRecord& r, const SegmentedView& view,
                                const Tokenizer& tok) {
  const Json& payload = payload_of(r, Stage::revised);
  const auto retained = payload.at("retained").get<std::vector<std::size_t>>();
  const auto verdicts = judged_verdicts(r);
  RecordEfficacy e;
  std::vector<bool> sub;
  for (std::size_t i : retained) {
    if (i >= view.subs.size() || i >= verdicts.size()) {
      throw DataError(fmt::format("record \"{}\": retained index {} out of range", r.id, i));
    }
    e.sub_tokens.push_back(tok.count(view.subs[i].text));
    sub.push_back(classify(verdicts[i]) == Classification::suboptimal);
  }
  e.suboptimal = std::move(sub);
  return e;
}

}  // namespace

ReportView parse_report_view(std::string_view name) {
  if (name == "auto") return ReportView::automatic;
  if (name == "original") return ReportView::original;
  if (name == "revised") return ReportView::revised;
  if (name == "compare") return ReportView::compare;
  throw ConfigError(fmt::format("unknown report view \"{}\"", name));
}

Json StageSummary::to_json() const {
  Json j{{"stage", stage},
         {"records_in", records_in},
         {"records_out", records_out},
         {"processed", processed},
         {"unchanged", unchanged},
         {"passed_through", passed_through},
         {"flagged", flagged},
         {"rejected", rejected},
         {"backend_calls", backend_calls},
         {"cache_hits", cache_hits},
         {"config_hash", config_hash}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

std::string stage_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (*end != '\0' || v < 0) {
      throw ConfigError(fmt::format("SOURCE_DATE_EPOCH \"{}\" is not a timestamp", env));
    }
    t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::string& original_answer(const DatasetRecord& r) {
  if (r.has(Stage::revised)) {
    const Json& att = r.annotations.at("revised");
    if (auto p = att.find("payload"); p != att.end()) {
      if (auto o = p->find("original_answer"); o != p->end() && o->is_string()) {
        return o->get_ref<const std::string&>();
      }
    }
  }
  return r.answer;
}

SegmentedView segmented_view(const DatasetRecord& r, const Delimiters& delimiters) {
  const Json& payload = payload_of(r, Stage::segmented);
  SegmentedView v;
  v.thinking = extract_thinking(original_answer(r), delimiters);
  v.subs = slices_from_spans(v.thinking.text, payload);
  return v;
}

std::vector<CriterionVerdicts> judged_verdicts(const DatasetRecord& r) {
  const Json& payload = payload_of(r, Stage::judged);
  std::vector<CriterionVerdicts> out;
  for (const auto& item : payload.at("verdicts")) {
    out.push_back(CriterionVerdicts::from_json(item));
  }
  return out;
}

bool segment_record(DatasetRecord& r, const PipelineConfig& config,
                    const StageAttachment& meta) {
  ThinkingProcess thinking;
  try {
    thinking = extract_thinking(r.answer, config.delimiters);
  } catch (const ThinkingError& e) {
    const auto flag = e.fault() == ThinkingFault::truncated ? kFlagTruncated
                                                            : kFlagMalformedThinking;
    attach(r, meta, Json{{"error", e.what()}}, std::string(flag));
    return false;
  }
  if (thinking.text.empty()) {
    attach(r, meta, Json{{"error", "thinking block is empty"}},
           std::string(kFlagEmptyThinking));
    return false;
  }
  const auto subs = segment(thinking.text, config.markers);
  attach(r, meta,
         Json{{"had_delimiters", thinking.had_delimiters},
              {"count", subs.size()},
              {"subtrajectories", segmentation_to_json(subs)}});
  return true;
}

bool judge_record(DatasetRecord& r, Judge& judge, const PipelineConfig& config,
                  const StageAttachment& meta) {
  const SegmentedView view = segmented_view(r, config.delimiters);
  const auto& subs = view.subs;

  JudgeContext ctx;
  ctx.question = r.question;
  Json verdicts = Json::array();
  std::vector<bool> suboptimal;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CriterionVerdicts v;
    try {
      v = judge.judge_criteria(subs[i], ctx, r.id);
    } catch (const JudgeUnparseable& e) {
      attach(r, meta,
             Json{{"request", "criteria"}, {"index", i}, {"raw_output", e.raw()}},
             std::string(kFlagJudgeUnparseable));
      return false;
    }
    if (v.context_tokens_omitted == 0) v.raw_output.reset();
    suboptimal.push_back(classify(v) == Classification::suboptimal);
    Json item = v.to_json();
    item["index"] = i;
    item["satisfied"] = v.satisfied_count();
    verdicts.push_back(std::move(item));
    ctx.preceding.push_back(subs[i].text);
  }

  Json independence = Json::object();
  for (std::size_t i = 0; i + 1 < subs.size(); ++i) {
    if (!suboptimal[i]) continue;
    const std::string subsequent =
        view.thinking.text.substr(subs[i + 1].span.begin) + view.thinking.final_answer;
    try {
      independence[std::to_string(i)] =
          judge.judge_independence(subs[i], subsequent, r.id).independent;
    } catch (const JudgeUnparseable& e) {
      attach(r, meta,
             Json{{"request", "independence"}, {"index", i}, {"raw_output", e.raw()}},
             std::string(kFlagJudgeUnparseable));
      return false;
    }
  }

  attach(r, meta,
         Json{{"judge_id", judge.criteria_judge_id()},
              {"independence_judge_id", judge.independence_judge_id()},
              {"verdicts", std::move(verdicts)},
              {"independence", std::move(independence)}});
  return true;
}

bool revise_record(DatasetRecord& r, const PipelineConfig& config,
                   const StageAttachment& meta) {
  const SegmentedView view = segmented_view(r, config.delimiters);
  const auto verdicts = judged_verdicts(r);
  const Json& independence = payload_of(r, Stage::judged).at("independence");

  RevisedThinking revised;
  try {
    revised = revise(view.subs, verdicts, view.thinking.final_answer,
                     [&](std::size_t i, std::string_view) {
                       auto it = independence.find(std::to_string(i));
                       if (it == independence.end()) {
                         throw DataError(fmt::format("no independence verdict for {}", i));
                       }
                       return it->get<bool>();
                     });
  } catch (const RevisionError& e) {
    attach(r, meta, Json{{"error", e.what()}}, std::string(kFlagRevisionFailed));
    return false;
  }

  Json payload = revised.to_json();
  Json spans = Json::array();
  std::size_t pos = 0;
  for (std::size_t i : revised.retained) {
    const std::size_t len = view.subs[i].text.size();
    spans.push_back(Json::array({pos, pos + len}));
    pos += len;
  }
  payload["revised_spans"] = std::move(spans);
  if (config.rewrite_answer) {
    const ThinkingProcess& t = view.thinking;
    std::string rewritten =
        t.had_delimiters
            ? t.prefix + config.delimiters.open + revised.revised_text +
                  config.delimiters.close + t.final_answer
            : revised.revised_text + t.final_answer;
    payload["answer_rewritten"] = true;
    payload["original_answer"] = r.answer;
    r.answer = std::move(rewritten);
  }
  attach(r, meta, std::move(payload));
  return true;
}

bool score_record(DatasetRecord& r, const PipelineConfig& config,
                  const Tokenizer& tokenizer, const StageAttachment& meta) {
  const SegmentedView view = segmented_view(r, config.delimiters);
  const auto verdicts = judged_verdicts(r);
  RevisedThinking revised;
  revised.retained =
      payload_of(r, Stage::revised).at("retained").get<std::vector<std::size_t>>();
  for (const auto& v : verdicts) revised.per_subtrajectory.push_back({v, classify(v), {}});

  ScoredThinking scored;
  try {
    scored = quality_score(revised, view.subs, tokenizer, config.weighting);
  } catch (const DataError& e) {
    attach(r, meta, Json{{"error", e.what()}}, std::string(kFlagZeroTokens));
    return false;
  }
  Json payload = scored.to_json();
  payload["tokenizer"] = tokenizer.name() + "/" + tokenizer.version();
  attach(r, meta, std::move(payload));
  return true;
}

std::unique_ptr<const Tokenizer> make_tokenizer(const PipelineConfig& config) {
  if (config.tokenizer == "vocab") return VocabTokenizer::load(config.tokenizer_vocab);
  return std::make_unique<RuleTokenizer>();
}

JudgeOptions make_judge_options(const PipelineConfig& config,
                                const Tokenizer& tokenizer) {
  JudgeOptions o;
  if (!config.judge_criteria_template.empty()) {
    o.criteria_template = PromptTemplate::load(config.judge_criteria_template);
  }
  if (!config.judge_independence_template.empty()) {
    o.independence_template = PromptTemplate::load(config.judge_independence_template);
  }
  o.prompt.preceding_window = config.judge_preceding_window;
  o.prompt.max_prompt_tokens = config.judge_max_prompt_tokens;
  o.prompt.tokenizer = &tokenizer;
  o.retry.max_attempts = config.judge_retry_attempts;
  o.repair_attempts = config.judge_repair_attempts;
  return o;
}

StageSummary run_segment(const std::string& in, const std::string& out,
                         const StageOptions& options) {
  const auto meta = make_meta(Stage::segmented, options.config);
  return run_record_stage({Stage::segmented, std::nullopt, 1}, in, out, options,
                          [&](DatasetRecord& r) {
                            return segment_record(r, options.config, meta);
                          });
}

StageSummary run_judge(const std::string& in, const std::string& out,
                       const StageOptions& options) {
  const PipelineConfig& config = options.config;
  const auto tokenizer = make_tokenizer(config);
  const auto meta = make_meta(Stage::judged, config);

  std::unique_ptr<JudgeBackend> owned_backend;
  JudgeBackend* backend = options.judge_backend;
  if (!backend) {
    if (config.judge_backend == JudgeBackendKind::http) {
      owned_backend = std::make_unique<HttpChatBackend>(config.judge_http);
    } else {
      owned_backend = std::make_unique<ScriptedJudge>();
    }
    backend = owned_backend.get();
  }
  auto* scripted = dynamic_cast<ScriptedJudge*>(backend);

  std::unique_ptr<VerdictCache> owned_cache;
  VerdictCache* cache = options.cache;
  if (!cache) {
    if (config.judge_cache_dir.empty()) {
      owned_cache = std::make_unique<MemoryCache>();
    } else {
      owned_cache = std::make_unique<SqliteCache>(config.judge_cache_dir);
    }
    cache = owned_cache.get();
  }

  Judge judge(*backend, cache, make_judge_options(config, *tokenizer));
  const std::size_t threads = config.judge_backend == JudgeBackendKind::http
                                  ? static_cast<std::size_t>(config.judge_http.concurrency)
                                  : worker_count(config);
  StageSummary summary = run_record_stage(
      {Stage::judged, Stage::segmented, threads}, in, out, options,
      [&](DatasetRecord& r) {
        if (!scripted) return judge_record(r, judge, config, meta);
        scripted->load(r);
        const std::string id = r.id;
        try {
          const bool ok = judge_record(r, judge, config, meta);
          scripted->forget(id);
          return ok;
        } catch (...) {
          scripted->forget(id);
          throw;
        }
      });
  summary.backend_calls = judge.backend_calls();
  summary.cache_hits = judge.cache_hits();
  summary.extra["judge_id"] = judge.criteria_judge_id();
  return summary;
}

StageSummary run_revise(const std::string& in, const std::string& out,
                        const StageOptions& options) {
  const auto meta = make_meta(Stage::revised, options.config);
  return run_record_stage({Stage::revised, Stage::judged, 1}, in, out, options,
                          [&](DatasetRecord& r) {
                            return revise_record(r, options.config, meta);
                          });
}

StageSummary run_score(const std::string& in, const std::string& out,
                       const StageOptions& options) {
  const auto tokenizer = make_tokenizer(options.config);
  const auto meta = make_meta(Stage::scored, options.config);
  return run_record_stage({Stage::scored, Stage::revised, 1}, in, out, options,
                          [&](DatasetRecord& r) {
                            return score_record(r, options.config, *tokenizer, meta);
                          });
}

StageSummary run_sample(const std::string& in, const std::string& out,
                        const StageOptions& options) {
  const PipelineConfig& config = options.config;
  StageSummary summary;
  summary.stage = "sample";
  summary.config_hash = config.hash();

  AtomicFile rejects(side_path(options.rejects_path, out, ".rejected.jsonl"));
  std::vector<ScoredItem> items;
  {
    CorpusInput input(in, config);
    while (auto r = input.next()) {
      ++summary.records_in;
      if (r->has(Stage::sampled) && !options.force) {
        throw ConfigError(fmt::format(
            "record \"{}\" is already sampled; sampling a sample is refused "
            "(pass --force to resample)",
            r->id));
      }
      if (auto flag = r->flag()) {
        rejects.stream() << Json{{"id", r->id}, {"reasons", Json::array({*flag})},
                                 {"evidence", Json::array()}}.dump()
                         << '\n';
        ++summary.passed_through;
        continue;
      }
      const Json& p = payload_of(*r, Stage::scored);
      items.push_back({r->id, p.at("quality_score").get<double>(),
                       static_cast<int>(count_of(p, "n")),
                       p.value("quality_numerator", std::uint64_t{0}),
                       p.value("quality_denominator", std::uint64_t{0})});
    }
  }
  if (items.empty()) throw DataError("no scored records to sample from");

  const std::size_t d = config.resolve_sample_size(items.size());
  if (d > items.size()) {
    throw ConfigError(fmt::format("sample size {} exceeds the {} eligible records", d,
                                  items.size()));
  }
  const SamplingRun run = select(items, d, config.kl_epsilon);

  std::unordered_map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < run.sampled_ids.size(); ++i) rank[run.sampled_ids[i]] = i;

  const auto meta = make_meta(Stage::sampled, config);
  AtomicFile file(out);
  RecordWriter writer(file.stream());
  {
    CorpusInput input(in, config);
    while (auto r = input.next()) {
      auto it = rank.find(r->id);
      if (it == rank.end() || r->flag()) continue;
      detach_from(*r, Stage::sampled);
      attach(*r, meta,
             Json{{"rank", it->second}, {"chosen_j", run.chosen_j}, {"d", run.d}});
      writer.write(*r);
      ++summary.records_out;
    }
  }
  summary.processed = items.size();
  summary.rejected = items.size() - summary.records_out;

  Json audit = run.audit_json();
  audit["config_hash"] = summary.config_hash;
  audit["tool_version"] = kToolVersion;
  AtomicFile audit_file(side_path(options.audit_path, out, ".audit.json"));
  audit_file.stream() << audit.dump(2) << '\n';
  AtomicFile ids_file(side_path(options.ids_path, out, ".ids.txt"));
  for (const auto& id : run.sampled_ids) ids_file.stream() << id << '\n';

  file.commit();
  rejects.commit();
  audit_file.commit();
  ids_file.commit();

  const auto& chosen = run.candidates.at(static_cast<std::size_t>(run.chosen_j));
  summary.extra["d"] = run.d;
  summary.extra["chosen_j"] = run.chosen_j;
  summary.extra["alpha"] = chosen.alpha;
  summary.extra["kl"] = chosen.kl;
  return summary;
}

StageSummary run_filter(const std::string& in, const std::string& out,
                        const StageOptions& options) {
  const PipelineConfig& config = options.config;
  const BasicQualityFilter basic(config.basic_filter());
  const auto meta = make_meta(Stage::filtered, config);

  // Difficulty clients, built only when the filter is on.
  std::vector<std::unique_ptr<ScriptedSolver>> scripted_solvers;
  std::vector<std::unique_ptr<HttpChatBackend>> http_backends;
  std::vector<std::unique_ptr<SolverClient>> http_solvers;
  std::unique_ptr<GraderClient> owned_grader;
  std::vector<SolverClient*> solvers = options.solvers;
  GraderClient* grader = options.grader;
  std::unique_ptr<VerdictCache> owned_cache;
  VerdictCache* cache = options.cache;

  if (config.difficulty_filter != DifficultyMode::off) {
    if (solvers.empty()) {
      for (std::size_t i = 0; i < config.solver_models.size(); ++i) {
        if (config.difficulty_filter == DifficultyMode::scripted) {
          scripted_solvers.push_back(std::make_unique<ScriptedSolver>(
              config.solver_models[i], static_cast<int>(i), config.attempts_per_solver));
          solvers.push_back(scripted_solvers.back().get());
        } else {
          HttpBackendConfig hc = config.judge_http;
          hc.model = config.solver_models[i];
          hc.temperature = 0.7;
          http_backends.push_back(std::make_unique<HttpChatBackend>(hc));
          http_solvers.push_back(std::make_unique<HttpSolver>(*http_backends.back()));
          solvers.push_back(http_solvers.back().get());
        }
      }
    }
    if (!grader) {
      if (config.difficulty_filter == DifficultyMode::scripted) {
        owned_grader = std::make_unique<ExactMatchGrader>();
      } else {
        HttpBackendConfig hc = config.judge_http;
        hc.model = config.grader_model;
        http_backends.push_back(std::make_unique<HttpChatBackend>(hc));
        owned_grader = std::make_unique<HttpGrader>(*http_backends.back());
      }
      grader = owned_grader.get();
    }
    if (!cache) {
      if (config.judge_cache_dir.empty()) {
        owned_cache = std::make_unique<MemoryCache>();
      } else {
        owned_cache = std::make_unique<SqliteCache>(config.judge_cache_dir);
      }
      cache = owned_cache.get();
    }
  }

  DifficultyOptions dopts;
  dopts.attempts_per_solver = config.attempts_per_solver;
  dopts.retry.max_attempts = config.judge_retry_attempts;
  dopts.cache = cache;
  dopts.delimiters = config.delimiters;

  StageSummary summary;
  summary.stage = "filter";
  summary.config_hash = config.hash();
  CorpusInput input(in, config);
  AtomicFile file(out);
  AtomicFile rejects(side_path(options.rejects_path, out, ".rejected.jsonl"));
  RecordWriter writer(file.stream());
  std::size_t dropped_by[7] = {};

  while (auto rec = input.next()) {
    ++summary.records_in;
    DatasetRecord& r = *rec;
    const Prior prior = prior_state(r, Stage::filtered, summary.config_hash);
    if (prior == Prior::same) {
      ++summary.unchanged;
      writer.write(r);
      ++summary.records_out;
      continue;
    }
    if (prior == Prior::other) {
      if (!options.force) refuse(r, Stage::filtered);
      detach_from(r, Stage::filtered);
    }
    if (r.flag()) {
      ++summary.passed_through;
      writer.write(r);
      ++summary.records_out;
      continue;
    }

    FilterVerdict verdict = basic(r);
    Json attempts = Json::array();
    if (verdict.keep && config.difficulty_filter != DifficultyMode::off) {
      for (auto& s : scripted_solvers) s->load(r, config.delimiters);
      DifficultyResult d = difficulty_filter(r, solvers, *grader, dopts);
      for (const auto& a : d.attempts) {
        attempts.push_back(
            Json{{"solver", a.solver}, {"attempt", a.attempt}, {"correct", a.correct}});
      }
      verdict.merge(d.verdict);
    }
    ++summary.processed;
    if (!verdict.keep) {
      ++summary.rejected;
      for (auto reason : verdict.reasons) ++dropped_by[static_cast<int>(reason)];
      write_rejection(rejects.stream(), r, verdict);
      continue;
    }
    Json payload = verdict.to_json();
    if (config.difficulty_filter != DifficultyMode::off) payload["attempts"] = attempts;
    attach(r, meta, std::move(payload));
    writer.write(r);
    ++summary.records_out;
  }
  Json by_reason = Json::object();
  for (int i = 0; i < 7; ++i) {
    if (dropped_by[i]) {
      by_reason[std::string(reject_reason_name(static_cast<RejectReason>(i)))] =
          dropped_by[i];
    }
  }
  summary.extra["rejected_by_reason"] = std::move(by_reason);
  summary.extra["read_issues"] = input.issues().size();
  file.commit();
  rejects.commit();
  return summary;
}

StageSummary run_decontaminate(const std::string& in, const std::string& out,
                               const StageOptions& options) {
  const PipelineConfig& config = options.config;
  NgramIndex index(config.ngram_n);
  for (const auto& path : config.benchmark_paths) {
    if (!fs::exists(path)) {
      throw ConfigError(fmt::format("benchmark file {} does not exist", path));
    }
    for (const auto& item : read_benchmark_file(path)) index.add(item);
  }
  const auto meta = make_meta(Stage::decontaminated, config);

  StageSummary summary;
  summary.stage = "decontaminate";
  summary.config_hash = config.hash();
  CorpusInput input(in, config);
  AtomicFile file(out);
  AtomicFile rejects(side_path(options.rejects_path, out, ".rejected.jsonl"));
  RecordWriter writer(file.stream());

  while (auto rec = input.next()) {
    ++summary.records_in;
    DatasetRecord& r = *rec;
    const Prior prior = prior_state(r, Stage::decontaminated, summary.config_hash);
    if (prior == Prior::same) {
      ++summary.unchanged;
      writer.write(r);
      ++summary.records_out;
      continue;
    }
    if (prior == Prior::other) {
      if (!options.force) refuse(r, Stage::decontaminated);
      detach_from(r, Stage::decontaminated);
    }
    if (r.flag()) {
      ++summary.passed_through;
      writer.write(r);
      ++summary.records_out;
      continue;
    }
    const FilterVerdict verdict = decontaminate(r, index);
    ++summary.processed;
    if (!verdict.keep) {
      ++summary.rejected;
      write_rejection(rejects.stream(), r, verdict);
      continue;
    }
    attach(r, meta,
           Json{{"keep", true},
                {"n", config.ngram_n},
                {"normalization", kNgramNormalizationVersion},
                {"benchmark_items", index.item_count()}});
    writer.write(r);
    ++summary.records_out;
  }
  summary.extra["benchmark_items"] = index.item_count();
  summary.extra["benchmark_windows"] = index.window_count();
  summary.extra["benchmark_items_below_n"] = index.short_items().size();
  file.commit();
  rejects.commit();
  return summary;
}

StageSummary run_report(const std::string& in, const std::string& out,
                        const StageOptions& options) {
  const PipelineConfig& config = options.config;
  const auto tokenizer = make_tokenizer(config);
  StageSummary summary;
  summary.stage = "report";
  summary.config_hash = config.hash();

  EfficacyAccumulator original;
  EfficacyAccumulator revised;
  bool all_revised = true;
  const bool want_revised = options.report_view != ReportView::original;
  {
    CorpusInput input(in, config);
    while (auto r = input.next()) {
      ++summary.records_in;
      if (r->flag()) {
        ++summary.passed_through;
        continue;
      }
      const SegmentedView view = segmented_view(*r, config.delimiters);
      original.add(efficacy_original(*r, view, *tokenizer));
      if (want_revised) {
        if (r->has(Stage::revised)) {
          revised.add(efficacy_revised(*r, view, *tokenizer));
        } else if (options.report_view == ReportView::automatic) {
          all_revised = false;
        } else {
          missing(*r, Stage::revised);
        }
      }
      ++summary.processed;
    }
  }

  ReportView view = options.report_view;
  if (view == ReportView::automatic) {
    view = all_revised && summary.processed > 0 ? ReportView::compare
                                                : ReportView::original;
  }
  const EfficacyStats before = original.finish();
  std::string text;
  switch (view) {
    case ReportView::original:
    case ReportView::automatic:
      text = render_report(before, options.report_format);
      break;
    case ReportView::revised:
      text = render_report(revised.finish(), options.report_format);
      break;
    case ReportView::compare: {
      const EfficacyStats after = revised.finish();
      const DeltaReport delta = compare(before, after);
      switch (options.report_format) {
        case ReportFormat::json: {
          Json j{{"schema", kReportSchema},
                 {"kind", "comparison"},
                 {"config_hash", summary.config_hash},
                 {"original", before.to_json()},
                 {"revised", after.to_json()},
                 {"delta", delta.to_json()}};
          text = j.dump(2) + "\n";
          break;
        }
        case ReportFormat::markdown:
          text = "## Original\n\n" + render_report(before, ReportFormat::markdown) +
                 "\n## Revised\n\n" + render_report(after, ReportFormat::markdown) +
                 "\n## Change\n\n" + render_report(delta, ReportFormat::markdown);
          break;
        case ReportFormat::csv:
          text = render_report(delta, ReportFormat::csv);
          break;
      }
      break;
    }
  }
  write_text_file(out, text);
  summary.records_out = summary.processed;
  summary.extra["view"] = view == ReportView::compare    ? "compare"
                          : view == ReportView::revised ? "revised"
                                                        : "original";
  return summary;
}

std::vector<StageSummary> run_pipeline(const std::string& in, const std::string& out_dir,
                                       const StageOptions& options) {
  fs::create_directories(out_dir);
  auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  std::vector<StageSummary> out;

  StageOptions o = options;
  o.rejects_path = path("filtered.rejected.jsonl");
  out.push_back(run_filter(in, path("filtered.jsonl"), o));
  o.rejects_path = path("decontaminated.rejected.jsonl");
  out.push_back(run_decontaminate(path("filtered.jsonl"), path("decontaminated.jsonl"), o));
  out.push_back(run_segment(path("decontaminated.jsonl"), path("segmented.jsonl"), o));
  out.push_back(run_judge(path("segmented.jsonl"), path("judged.jsonl"), o));
  out.push_back(run_revise(path("judged.jsonl"), path("revised.jsonl"), o));
  out.push_back(run_score(path("revised.jsonl"), path("scored.jsonl"), o));
  o.rejects_path = path("sampled.rejected.jsonl");
  o.audit_path = path("sampled.audit.json");
  o.ids_path = path("sampled.ids.txt");
  out.push_back(run_sample(path("scored.jsonl"), path("sampled.jsonl"), o));
  const char* report_name = options.report_format == ReportFormat::json ? "report.json"
                            : options.report_format == ReportFormat::csv ? "report.csv"
                                                                         : "report.md";
  out.push_back(run_report(path("sampled.jsonl"), path(report_name), o));
  return out;
}

}  // namespace tracecurate
