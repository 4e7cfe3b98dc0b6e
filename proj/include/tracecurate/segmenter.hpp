#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/error.hpp"

namespace tracecurate {

struct Delimiters {
  std::string open = "<think>";
  std::string close = "</think>";
};

// The answer split around its thinking block. When delimiters are present,
// prefix + open + text + close + final_answer == answer. Without delimiters
// the whole answer is `text`.
struct ThinkingProcess {
  std::string prefix;
  std::string text;
  std::string final_answer;
  bool had_delimiters = false;

  std::string reconstruct(const Delimiters& delimiters) const;
};

enum class ThinkingFault { truncated, close_before_open };

class ThinkingError : public DataError {
 public:
  ThinkingError(ThinkingFault fault, const std::string& message)
      : DataError(message), fault_(fault) {}
  ThinkingFault fault() const noexcept { return fault_; }

 private:
  ThinkingFault fault_;
};

// Splits at the first open delimiter and the first close after it.
// Throws ThinkingError for an unterminated block or a close that appears
// before any open.
ThinkingProcess extract_thinking(std::string_view answer,
                                 const Delimiters& delimiters = {});

struct MarkerConfig {
  std::vector<std::string> markers = default_markers();
  bool case_sensitive = true;
  // Only split where a marker opens the text, a line, or a sentence.
  bool require_line_or_sentence_start = true;

  static std::vector<std::string> default_markers();

  // Throws ConfigError on an empty list or empty marker.
  void validate() const;
  Json to_json() const;
  static MarkerConfig from_json(const Json& j);
};

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

inline constexpr std::string_view kPreambleMarker = "preamble";

struct Subtrajectory {
  std::size_t index = 0;
  std::string text;
  std::string marker;  // configured phrase that opened it, or "preamble"
  CharSpan span;

  bool operator==(const Subtrajectory&) const = default;
};

// Partitions `text` at marker occurrences. The slices are contiguous and
// cover the text exactly. Markers are tried longest first; a match must end
// at a word boundary. A whitespace-only preamble is folded into the first
// marked slice. Throws DataError on empty text.
std::vector<Subtrajectory> segment(std::string_view text,
                                   const MarkerConfig& config = {});

inline std::vector<Subtrajectory> segment(const ThinkingProcess& thinking,
                                          const MarkerConfig& config = {}) {
  return segment(thinking.text, config);
}

// Rebuilds slices from stored spans over the same thinking text.
std::vector<Subtrajectory> slices_from_spans(std::string_view text,
                                             const Json& segmented_payload);

Json segmentation_to_json(const std::vector<Subtrajectory>& subs);

}  // namespace tracecurate
