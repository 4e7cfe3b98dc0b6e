#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/distribution.hpp"

namespace tracecurate {

inline constexpr std::string_view kReportSchema = "tracecurate.report/v1";

// Per-record input: token count of each subtrajectory, and optionally which
// ones were judged suboptimal.
struct RecordEfficacy {
  std::vector<std::size_t> sub_tokens;
  std::optional<std::vector<bool>> suboptimal;
};

struct EfficacyStats {
  std::size_t records = 0;
  std::size_t total_subtrajectories = 0;
  std::size_t total_tokens = 0;
  double mean_total_tokens = 0.0;
  double mean_subtrajectories = 0.0;
  // Pooled: total tokens over total subtrajectories.
  double mean_tokens_per_subtrajectory = 0.0;
  // Secondary: mean of the per-record ratios.
  double mean_of_record_tokens_per_subtrajectory = 0.0;
  // Present only when every record carries judgements.
  std::optional<std::size_t> suboptimal_count;
  std::optional<double> suboptimal_rate;
  CountDistribution count_distribution;

  Json to_json() const;
};

// Associative partial aggregate; merge() of partials equals a single pass.
class EfficacyAccumulator {
 public:
  void add(const RecordEfficacy& record);
  void merge(const EfficacyAccumulator& other);
  // Throws DataError for an empty corpus.
  EfficacyStats finish() const;

 private:
  std::size_t records_ = 0;
  std::size_t subs_ = 0;
  std::size_t tokens_ = 0;
  double ratio_sum_ = 0.0;
  std::size_t suboptimal_ = 0;
  std::size_t judged_records_ = 0;
  std::map<int, std::size_t> counts_;
};

EfficacyStats corpus_stats(std::span<const RecordEfficacy> records);

struct MetricDelta {
  std::string metric;
  double before = 0.0;
  double after = 0.0;
  // (after - before) / before * 100; absent when before is 0.
  std::optional<double> percent_change;
  std::string note;
};

struct DeltaReport {
  std::vector<MetricDelta> metrics;
  Json to_json() const;
};

std::optional<double> percent_change(double before, double after);

DeltaReport compare(const EfficacyStats& before, const EfficacyStats& after);

enum class ReportFormat { json, markdown, csv };

ReportFormat parse_report_format(std::string_view name);

// Deterministic rendering; identical input gives identical bytes.
std::string render_report(const EfficacyStats& stats, ReportFormat format);
std::string render_report(const DeltaReport& delta, ReportFormat format);

void write_text_file(const std::string& path, std::string_view contents);

}  // namespace tracecurate
