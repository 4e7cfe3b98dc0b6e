#include "tracecurate/report.hpp"

#include <fstream>

#include <fmt/format.h>

namespace tracecurate {

namespace {

std::string fmt_num(double v) { return fmt::format("{:.6g}", v); }

}  // namespace

Json EfficacyStats::to_json() const {
  Json j = Json::object();
  j["schema"] = kReportSchema;
  j["records"] = records;
  j["total_subtrajectories"] = total_subtrajectories;
  j["total_tokens"] = total_tokens;
  j["mean_total_tokens"] = mean_total_tokens;
  j["mean_subtrajectories"] = mean_subtrajectories;
  j["mean_tokens_per_subtrajectory"] = mean_tokens_per_subtrajectory;
  j["mean_of_record_tokens_per_subtrajectory"] =
      mean_of_record_tokens_per_subtrajectory;
  j["suboptimal_count"] = suboptimal_count ? Json(*suboptimal_count) : Json(nullptr);
  j["suboptimal_rate"] = suboptimal_rate ? Json(*suboptimal_rate) : Json(nullptr);
  j["count_distribution"] = count_distribution.to_json();
  return j;
}

void EfficacyAccumulator::add(const RecordEfficacy& r) {
  if (r.sub_tokens.empty()) throw DataError("record has no subtrajectories");
  std::size_t tokens = 0;
  for (std::size_t t : r.sub_tokens) tokens += t;
  ++records_;
  subs_ += r.sub_tokens.size();
  tokens_ += tokens;
  ratio_sum_ += static_cast<double>(tokens) / static_cast<double>(r.sub_tokens.size());
  ++counts_[static_cast<int>(r.sub_tokens.size())];
  if (r.suboptimal) {
    if (r.suboptimal->size() != r.sub_tokens.size()) {
      throw DataError("suboptimal flags do not match subtrajectory count");
    }
    ++judged_records_;
    for (bool b : *r.suboptimal) suboptimal_ += b ? 1 : 0;
  }
}

void EfficacyAccumulator::merge(const EfficacyAccumulator& o) {
  records_ += o.records_;
  subs_ += o.subs_;
  tokens_ += o.tokens_;
  ratio_sum_ += o.ratio_sum_;
  suboptimal_ += o.suboptimal_;
  judged_records_ += o.judged_records_;
  for (const auto& [count, k] : o.counts_) counts_[count] += k;
}

EfficacyStats EfficacyAccumulator::finish() const {
  if (records_ == 0) throw DataError("efficacy statistics of an empty corpus");
  EfficacyStats s;
  s.records = records_;
  s.total_subtrajectories = subs_;
  s.total_tokens = tokens_;
  const auto n = static_cast<double>(records_);
  s.mean_total_tokens = static_cast<double>(tokens_) / n;
  s.mean_subtrajectories = static_cast<double>(subs_) / n;
  s.mean_tokens_per_subtrajectory =
      static_cast<double>(tokens_) / static_cast<double>(subs_);
  s.mean_of_record_tokens_per_subtrajectory = ratio_sum_ / n;
  if (judged_records_ == records_) {
    s.suboptimal_count = suboptimal_;
    s.suboptimal_rate = static_cast<double>(suboptimal_) / static_cast<double>(subs_);
  }
  for (const auto& [count, k] : counts_) {
    s.count_distribution.freq[count] = static_cast<double>(k) / n;
  }
  return s;
}

EfficacyStats corpus_stats(std::span<const RecordEfficacy> records) {
  EfficacyAccumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finish();
}

std::optional<double> percent_change(double before, double after) {
  if (before == 0.0) return std::nullopt;
  return (after - before) / before * 100.0;
}

DeltaReport compare(const EfficacyStats& before, const EfficacyStats& after) {
  DeltaReport out;
  auto add = [&](std::string name, double b, double a) {
    MetricDelta m{std::move(name), b, a, percent_change(b, a), {}};
    if (!m.percent_change) m.note = "undefined: baseline is zero";
    out.metrics.push_back(std::move(m));
  };
  add("mean_total_tokens", before.mean_total_tokens, after.mean_total_tokens);
  add("mean_subtrajectories", before.mean_subtrajectories, after.mean_subtrajectories);
  add("mean_tokens_per_subtrajectory", before.mean_tokens_per_subtrajectory,
      after.mean_tokens_per_subtrajectory);
  add("mean_of_record_tokens_per_subtrajectory",
      before.mean_of_record_tokens_per_subtrajectory,
      after.mean_of_record_tokens_per_subtrajectory);
  if (before.suboptimal_count && after.suboptimal_count) {
    add("suboptimal_count", static_cast<double>(*before.suboptimal_count),
        static_cast<double>(*after.suboptimal_count));
    add("suboptimal_rate", *before.suboptimal_rate, *after.suboptimal_rate);
  }
  return out;
}

Json DeltaReport::to_json() const {
  Json list = Json::array();
  for (const auto& m : metrics) {
    Json item{{"metric", m.metric}, {"before", m.before}, {"after", m.after}};
    if (m.percent_change) {
      item["percent_change"] = *m.percent_change;
    } else {
      item["percent_change"] = nullptr;
      item["reason"] = m.note;
    }
    list.push_back(std::move(item));
  }
  return Json{{"schema", kReportSchema}, {"kind", "delta"}, {"metrics", std::move(list)}};
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "csv") return ReportFormat::csv;
  throw ConfigError(fmt::format("unknown report format \"{}\"", name));
}

std::string render_report(const EfficacyStats& s, ReportFormat format) {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"records", std::to_string(s.records)},
      {"total_subtrajectories", std::to_string(s.total_subtrajectories)},
      {"total_tokens", std::to_string(s.total_tokens)},
      {"mean_total_tokens", fmt_num(s.mean_total_tokens)},
      {"mean_subtrajectories", fmt_num(s.mean_subtrajectories)},
      {"mean_tokens_per_subtrajectory", fmt_num(s.mean_tokens_per_subtrajectory)},
      {"mean_of_record_tokens_per_subtrajectory",
       fmt_num(s.mean_of_record_tokens_per_subtrajectory)},
      {"suboptimal_count",
       s.suboptimal_count ? std::to_string(*s.suboptimal_count) : "n/a"},
      {"suboptimal_rate", s.suboptimal_rate ? fmt_num(*s.suboptimal_rate) : "n/a"},
  };
  switch (format) {
    case ReportFormat::json:
      return s.to_json().dump(2) + "\n";
    case ReportFormat::markdown: {
      std::string out = "| metric | value |\n|---|---|\n";
      for (const auto& [k, v] : rows) out += fmt::format("| {} | {} |\n", k, v);
      out += "\n| subtrajectories | frequency |\n|---|---|\n";
      for (const auto& [c, f] : s.count_distribution.freq) {
        out += fmt::format("| {} | {} |\n", c, fmt_num(f));
      }
      return out;
    }
    case ReportFormat::csv: {
      std::string out = "metric,value\n";
      for (const auto& [k, v] : rows) out += fmt::format("{},{}\n", k, v);
      for (const auto& [c, f] : s.count_distribution.freq) {
        out += fmt::format("count_distribution.{},{}\n", c, fmt_num(f));
      }
      return out;
    }
  }
  return {};
}

std::string render_report(const DeltaReport& d, ReportFormat format) {
  auto pct = [](const MetricDelta& m) {
    return m.percent_change ? fmt::format("{:.2f}", *m.percent_change)
                            : std::string("undefined");
  };
  switch (format) {
    case ReportFormat::json:
      return d.to_json().dump(2) + "\n";
    case ReportFormat::markdown: {
      std::string out = "| metric | before | after | change % |\n|---|---|---|---|\n";
      for (const auto& m : d.metrics) {
        out += fmt::format("| {} | {} | {} | {} |\n", m.metric, fmt_num(m.before),
                           fmt_num(m.after), pct(m));
      }
      return out;
    }
    case ReportFormat::csv: {
      std::string out = "metric,before,after,percent_change\n";
      for (const auto& m : d.metrics) {
        out += fmt::format("{},{},{},{}\n", m.metric, fmt_num(m.before),
                           fmt_num(m.after), pct(m));
      }
      return out;
    }
  }
  return {};
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open {} for writing", path));
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError(fmt::format("write to {} failed", path));
}

}  // namespace tracecurate
