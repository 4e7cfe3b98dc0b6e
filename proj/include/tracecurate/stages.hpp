#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tracecurate/config.hpp"
#include "tracecurate/corpus.hpp"
#include "tracecurate/filters.hpp"
#include "tracecurate/judge.hpp"
#include "tracecurate/report.hpp"
#include "tracecurate/reviser.hpp"
#include "tracecurate/scorer.hpp"
#include "tracecurate/segmenter.hpp"
#include "tracecurate/verdict_cache.hpp"

namespace tracecurate {

// Flags set on records a stage could not process.
inline constexpr std::string_view kFlagTruncated = "truncated";
inline constexpr std::string_view kFlagMalformedThinking = "malformed_thinking";
inline constexpr std::string_view kFlagEmptyThinking = "empty_thinking";
inline constexpr std::string_view kFlagJudgeUnparseable = "judge_unparseable";
inline constexpr std::string_view kFlagRevisionFailed = "revision_failed";
inline constexpr std::string_view kFlagZeroTokens = "zero_tokens";

enum class ReportView { automatic, original, revised, compare };

ReportView parse_report_view(std::string_view name);

struct StageOptions {
  PipelineConfig config;
  // Redo a stage whose existing attachment came from a different config.
  bool force = false;
  // Overrides for tests and embedding; when null the config decides.
  JudgeBackend* judge_backend = nullptr;
  VerdictCache* cache = nullptr;
  std::vector<SolverClient*> solvers;
  GraderClient* grader = nullptr;
  // Side outputs. Empty paths fall back to "<out>.rejected.jsonl",
  // "<out>.audit.json" and "<out>.ids.txt".
  std::string rejects_path;
  std::string audit_path;
  std::string ids_path;
  ReportFormat report_format = ReportFormat::json;
  ReportView report_view = ReportView::automatic;
};

struct StageSummary {
  std::string stage;
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  std::size_t processed = 0;
  std::size_t unchanged = 0;  // already carried this stage's attachment
  std::size_t passed_through = 0;  // flagged upstream, left untouched
  std::size_t flagged = 0;
  std::size_t rejected = 0;
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::string config_hash;
  Json extra = Json::object();

  Json to_json() const;
};

// Timestamp stamped on attachments: SOURCE_DATE_EPOCH when set, else now,
// as ISO-8601 UTC.
std::string stage_timestamp();

// Thinking text and slices of a segmented record, read back from its
// attachment. The original answer is used when revision rewrote it.
struct SegmentedView {
  ThinkingProcess thinking;
  std::vector<Subtrajectory> subs;
};

const std::string& original_answer(const DatasetRecord& record);
SegmentedView segmented_view(const DatasetRecord& record,
                             const Delimiters& delimiters);
std::vector<CriterionVerdicts> judged_verdicts(const DatasetRecord& record);

// Per-record transforms. Each returns false when the record was flagged.
bool segment_record(DatasetRecord& record, const PipelineConfig& config,
                    const StageAttachment& meta);
bool judge_record(DatasetRecord& record, Judge& judge,
                  const PipelineConfig& config, const StageAttachment& meta);
bool revise_record(DatasetRecord& record, const PipelineConfig& config,
                   const StageAttachment& meta);
bool score_record(DatasetRecord& record, const PipelineConfig& config,
                  const Tokenizer& tokenizer, const StageAttachment& meta);

// Stage commands: read a corpus from `in`, write the processed corpus to
// `out`. Output is written to a temporary file and renamed on success.
StageSummary run_segment(const std::string& in, const std::string& out,
                         const StageOptions& options);
StageSummary run_judge(const std::string& in, const std::string& out,
                       const StageOptions& options);
StageSummary run_revise(const std::string& in, const std::string& out,
                        const StageOptions& options);
StageSummary run_score(const std::string& in, const std::string& out,
                       const StageOptions& options);
StageSummary run_sample(const std::string& in, const std::string& out,
                        const StageOptions& options);
StageSummary run_filter(const std::string& in, const std::string& out,
                        const StageOptions& options);
StageSummary run_decontaminate(const std::string& in, const std::string& out,
                               const StageOptions& options);
// Writes the efficacy report for the corpus at `in` to `out`.
StageSummary run_report(const std::string& in, const std::string& out,
                        const StageOptions& options);

// filter, decontaminate, segment, judge, revise, score, sample, report, with
// every intermediate kept in `out_dir`.
std::vector<StageSummary> run_pipeline(const std::string& in,
                                       const std::string& out_dir,
                                       const StageOptions& options);

std::unique_ptr<const Tokenizer> make_tokenizer(const PipelineConfig& config);
JudgeOptions make_judge_options(const PipelineConfig& config,
                                const Tokenizer& tokenizer);

}  // namespace tracecurate
