#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tracecurate/error.hpp"

namespace tracecurate {

// Insertion-ordered so unknown fields and annotations round-trip in place.
using Json = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = TRACECURATE_VERSION;

enum class Stage {
  segmented,
  judged,
  revised,
  scored,
  sampled,
  filtered,
  decontaminated,
};

std::string_view stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

// Per-stage result stored inline under "annotations.<stage>".
struct StageAttachment {
  Stage stage = Stage::segmented;
  Json payload = Json::object();
  std::string produced_at;
  std::string tool_version = std::string(kToolVersion);
  std::string config_hash;
  // Set when the stage could not process the record (for example
  // "judge_unparseable"). Flagged records pass through later stages untouched.
  std::optional<std::string> flag;

  Json to_json() const;
  static StageAttachment from_json(Stage stage, const Json& j);

  bool operator==(const StageAttachment&) const = default;
};

struct DatasetRecord {
  std::string id;
  std::string question;
  std::string answer;  // raw answer: delimited thinking block + final answer
  std::string source;
  std::optional<std::string> ground_truth;
  // Keyed by stage name. Non-stage keys (fixture scripts, user data) are
  // preserved as-is.
  Json annotations = Json::object();
  // Unknown top-level fields, preserved verbatim.
  Json extra = Json::object();

  bool has(Stage stage) const;
  std::optional<StageAttachment> attachment(Stage stage) const;
  // Replaces any existing attachment for the same stage.
  void attach(const StageAttachment& att);
  void detach(Stage stage);
  // First flag found on any stage attachment, in stage order.
  std::optional<std::string> flag() const;

  bool operator==(const DatasetRecord&) const = default;
};

// Maps source-dataset keys onto record fields. The default is the native
// schema; adapters for other datasets override individual keys.
struct FieldMapping {
  std::string id = "id";
  std::string question = "question";
  std::string answer = "answer";
  std::string source = "source";
  std::string ground_truth = "ground_truth";

  static FieldMapping from_json(const Json& j);
  Json to_json() const;
};

Json record_to_json(const DatasetRecord& record);
// Throws DataError when a required field is missing or has the wrong type.
// Objects that already carry "annotations" are read with the native names
// regardless of `mapping`.
DatasetRecord record_from_json(const Json& j, const FieldMapping& mapping = {});

enum class ParseMode { strict, lenient };

struct ReadIssue {
  enum class Kind { malformed_json, missing_field, duplicate_id };
  std::size_t line = 0;
  Kind kind = Kind::malformed_json;
  std::string message;
  std::string id;  // set for duplicate_id

  Json to_json() const;
};

std::string_view issue_kind_name(ReadIssue::Kind kind);

// Raised in strict mode on the first bad line.
class CorpusError : public DataError {
 public:
  explicit CorpusError(ReadIssue issue);
  const ReadIssue& issue() const noexcept { return issue_; }

 private:
  ReadIssue issue_;
};

struct ReaderOptions {
  ParseMode mode = ParseMode::strict;
  FieldMapping mapping;
  // Duplicate detection keeps one entry per id seen; disable for
  // constant-memory scans where ids are known unique.
  bool check_duplicates = true;
};

// Pulls one record at a time from a JSONL stream. Blank lines are skipped.
// In lenient mode malformed lines are recorded in issues() and skipped, and
// duplicate ids are recorded but still yielded.
class RecordReader {
 public:
  explicit RecordReader(std::istream& in, ReaderOptions options = {});

  std::optional<DatasetRecord> next();

  // Line number of the record most recently returned by next().
  std::size_t line() const noexcept { return record_line_; }
  const std::vector<ReadIssue>& issues() const noexcept { return issues_; }

 private:
  void report(ReadIssue issue);

  std::istream& in_;
  ReaderOptions options_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
  std::vector<ReadIssue> issues_;
  std::unordered_set<std::string> seen_;
  std::string buffer_;
};

std::vector<DatasetRecord> read_records(std::istream& in,
                                        ReaderOptions options = {});
std::vector<DatasetRecord> read_records_file(const std::string& path,
                                             ReaderOptions options = {});

class RecordWriter {
 public:
  explicit RecordWriter(std::ostream& out) : out_(out) {}

  // Returns the bytes written for this record, newline included.
  std::size_t write(const DatasetRecord& record);
  std::size_t bytes_written() const noexcept { return bytes_; }

 private:
  std::ostream& out_;
  std::size_t bytes_ = 0;
};

std::size_t write_records(std::span<const DatasetRecord> records,
                          std::ostream& out);

}  // namespace tracecurate
