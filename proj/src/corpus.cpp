#include "tracecurate/corpus.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace tracecurate {
namespace {

constexpr std::array<Stage, 7> kStages = {
    Stage::filtered, Stage::decontaminated, Stage::segmented, Stage::judged,
    Stage::revised,  Stage::scored,         Stage::sampled,
};

std::string required_string(const Json& j, const std::string& key,
                            bool allow_integer, bool allow_empty = false) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw DataError(fmt::format("missing required field \"{}\"", key));
  }
  if (it->is_string()) {
    std::string value = it->get<std::string>();
    if (value.empty() && !allow_empty) {
      throw DataError(fmt::format("field \"{}\" is empty", key));
    }
    return value;
  }
  if (allow_integer && it->is_number_integer()) {
    return it->dump();
  }
  throw DataError(fmt::format("field \"{}\" must be a string", key));
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::segmented: return "segmented";
    case Stage::judged: return "judged";
    case Stage::revised: return "revised";
    case Stage::scored: return "scored";
    case Stage::sampled: return "sampled";
    case Stage::filtered: return "filtered";
    case Stage::decontaminated: return "decontaminated";
  }
  return "segmented";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

Json StageAttachment::to_json() const {
  Json j = Json::object();
  j["payload"] = payload;
  j["produced_at"] = produced_at;
  j["tool_version"] = tool_version;
  j["config_hash"] = config_hash;
  if (flag) j["flag"] = *flag;
  return j;
}

StageAttachment StageAttachment::from_json(Stage stage, const Json& j) {
  if (!j.is_object()) {
    throw DataError(fmt::format("annotations.{} must be an object",
                                stage_name(stage)));
  }
  StageAttachment att;
  att.stage = stage;
  att.payload = j.value("payload", Json::object());
  att.produced_at = j.value("produced_at", std::string{});
  att.tool_version = j.value("tool_version", std::string{});
  att.config_hash = j.value("config_hash", std::string{});
  if (auto it = j.find("flag"); it != j.end() && it->is_string()) {
    att.flag = it->get<std::string>();
  }
  return att;
}

bool DatasetRecord::has(Stage stage) const {
  return annotations.is_object() && annotations.contains(stage_name(stage));
}

std::optional<StageAttachment> DatasetRecord::attachment(Stage stage) const {
  if (!has(stage)) return std::nullopt;
  return StageAttachment::from_json(stage,
                                    annotations.at(std::string(stage_name(stage))));
}

void DatasetRecord::attach(const StageAttachment& att) {
  if (!annotations.is_object()) annotations = Json::object();
  annotations[std::string(stage_name(att.stage))] = att.to_json();
}

void DatasetRecord::detach(Stage stage) {
  if (annotations.is_object()) annotations.erase(std::string(stage_name(stage)));
}

std::optional<std::string> DatasetRecord::flag() const {
  if (!annotations.is_object()) return std::nullopt;
  for (Stage s : kStages) {
    auto it = annotations.find(stage_name(s));
    if (it == annotations.end() || !it->is_object()) continue;
    if (auto f = it->find("flag"); f != it->end() && f->is_string()) {
      return f->get<std::string>();
    }
  }
  return std::nullopt;
}

FieldMapping FieldMapping::from_json(const Json& j) {
  FieldMapping m;
  if (j.is_null()) return m;
  if (!j.is_object()) throw ConfigError("field_mapping must be an object");
  m.id = j.value("id", m.id);
  m.question = j.value("question", m.question);
  m.answer = j.value("answer", m.answer);
  m.source = j.value("source", m.source);
  m.ground_truth = j.value("ground_truth", m.ground_truth);
  return m;
}

Json FieldMapping::to_json() const {
  return Json{{"id", id},
              {"question", question},
              {"answer", answer},
              {"source", source},
              {"ground_truth", ground_truth}};
}

Json record_to_json(const DatasetRecord& r) {
  Json j = Json::object();
  j["id"] = r.id;
  j["question"] = r.question;
  j["answer"] = r.answer;
  j["source"] = r.source;
  if (r.ground_truth) j["ground_truth"] = *r.ground_truth;
  if (r.annotations.is_object() && !r.annotations.empty()) {
    j["annotations"] = r.annotations;
  }
  for (const auto& [key, value] : r.extra.items()) {
    j[key] = value;
  }
  return j;
}

DatasetRecord record_from_json(const Json& j, const FieldMapping& mapping) {
  if (!j.is_object()) throw DataError("line is not a JSON object");
  // Anything carrying annotations was written by a stage, in native names.
  static const FieldMapping native;
  const FieldMapping& m = j.contains("annotations") ? native : mapping;
  DatasetRecord r;
  r.id = required_string(j, m.id, /*allow_integer=*/true);
  r.question = required_string(j, m.question, false, true);
  r.answer = required_string(j, m.answer, false, true);
  if (auto it = j.find(m.source); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("field \"source\" must be a string");
    r.source = it->get<std::string>();
  }
  if (auto it = j.find(m.ground_truth); it != j.end() && !it->is_null()) {
    if (!it->is_string()) {
      throw DataError("field \"ground_truth\" must be a string");
    }
    r.ground_truth = it->get<std::string>();
  }
  if (auto it = j.find("annotations"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw DataError("\"annotations\" must be an object");
    r.annotations = *it;
  }
  for (const auto& [key, value] : j.items()) {
    if (key == m.id || key == m.question || key == m.answer ||
        key == m.source || key == m.ground_truth || key == "annotations") {
      continue;
    }
    r.extra[key] = value;
  }
  return r;
}

Json ReadIssue::to_json() const {
  Json j{{"line", line}, {"kind", issue_kind_name(kind)}, {"message", message}};
  if (!id.empty()) j["id"] = id;
  return j;
}

std::string_view issue_kind_name(ReadIssue::Kind kind) {
  switch (kind) {
    case ReadIssue::Kind::malformed_json: return "malformed_json";
    case ReadIssue::Kind::missing_field: return "missing_field";
    case ReadIssue::Kind::duplicate_id: return "duplicate_id";
  }
  return "malformed_json";
}

CorpusError::CorpusError(ReadIssue issue)
    : DataError(fmt::format("line {}: {}", issue.line, issue.message)),
      issue_(std::move(issue)) {}

RecordReader::RecordReader(std::istream& in, ReaderOptions options)
    : in_(in), options_(std::move(options)) {}

void RecordReader::report(ReadIssue issue) {
  if (options_.mode == ParseMode::strict) throw CorpusError(std::move(issue));
  issues_.push_back(std::move(issue));
}

std::optional<DatasetRecord> RecordReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
    if (buffer_.find_first_not_of(" \t") == std::string::npos) continue;

    Json j;
    try {
      j = Json::parse(buffer_);
    } catch (const Json::parse_error& e) {
      report({line_, ReadIssue::Kind::malformed_json,
              fmt::format("malformed JSON: {}", e.what()), {}});
      continue;
    }

    DatasetRecord record;
    try {
      record = record_from_json(j, options_.mapping);
    } catch (const DataError& e) {
      report({line_, ReadIssue::Kind::missing_field, e.what(), {}});
      continue;
    }

    if (options_.check_duplicates && !seen_.insert(record.id).second) {
      report({line_, ReadIssue::Kind::duplicate_id,
              fmt::format("duplicate id \"{}\"", record.id), record.id});
      // lenient: still yielded, the issue list carries the flag
    }
    record_line_ = line_;
    return record;
  }
  return std::nullopt;
}

std::vector<DatasetRecord> read_records(std::istream& in, ReaderOptions options) {
  RecordReader reader(in, std::move(options));
  std::vector<DatasetRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

std::vector<DatasetRecord> read_records_file(const std::string& path,
                                             ReaderOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  return read_records(in, std::move(options));
}

std::size_t RecordWriter::write(const DatasetRecord& record) {
  std::string line;
  try {
    line = record_to_json(record).dump(-1, ' ', false,
                                       Json::error_handler_t::strict);
  } catch (const Json::exception& e) {
    throw DataError(fmt::format("record \"{}\" is not serializable: {}",
                                record.id, e.what()));
  }
  line.push_back('\n');
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  if (!out_) throw DataError("write failed");
  bytes_ += line.size();
  return line.size();
}

std::size_t write_records(std::span<const DatasetRecord> records,
                          std::ostream& out) {
  RecordWriter writer(out);
  for (const auto& r : records) writer.write(r);
  return writer.bytes_written();
}

}  // namespace tracecurate
