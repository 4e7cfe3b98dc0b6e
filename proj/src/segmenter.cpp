#include "tracecurate/segmenter.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

namespace tracecurate {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80 || c == '_';
}

bool is_terminator(char c) {
  return c == '.' || c == '!' || c == '?' || c == '\n';
}

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool matches_at(std::string_view text, std::size_t pos, std::string_view marker,
                bool case_sensitive) {
  if (pos + marker.size() > text.size()) return false;
  if (case_sensitive) return text.compare(pos, marker.size(), marker) == 0;
  for (std::size_t i = 0; i < marker.size(); ++i) {
    if (lower(text[pos + i]) != lower(marker[i])) return false;
  }
  return true;
}

// Position rule: start of text, or after a terminator, each followed only by
// whitespace up to `pos`.
bool at_sentence_start(std::string_view text, std::size_t pos) {
  std::size_t k = pos;
  while (k > 0 && is_space(text[k - 1])) {
    if (text[k - 1] == '\n') return true;
    --k;
  }
  return k == 0 || is_terminator(text[k - 1]);
}

}  // namespace

std::string ThinkingProcess::reconstruct(const Delimiters& d) const {
  if (!had_delimiters) return text;
  return prefix + d.open + text + d.close + final_answer;
}

ThinkingProcess extract_thinking(std::string_view answer, const Delimiters& d) {
  if (d.open.empty() || d.close.empty()) {
    throw ConfigError("thinking delimiters must be nonempty");
  }
  const std::size_t open = answer.find(d.open);
  const std::size_t close_any = answer.find(d.close);

  ThinkingProcess tp;
  if (open == std::string_view::npos) {
    if (close_any != std::string_view::npos) {
      throw ThinkingError(ThinkingFault::close_before_open,
                          "close delimiter appears before any open delimiter");
    }
    tp.text = std::string(answer);
    return tp;
  }
  if (close_any != std::string_view::npos && close_any < open) {
    throw ThinkingError(ThinkingFault::close_before_open,
                        "close delimiter appears before the open delimiter");
  }
  const std::size_t body = open + d.open.size();
  const std::size_t close = answer.find(d.close, body);
  if (close == std::string_view::npos) {
    throw ThinkingError(ThinkingFault::truncated,
                        "thinking block is not terminated");
  }
  tp.prefix = std::string(answer.substr(0, open));
  tp.text = std::string(answer.substr(body, close - body));
  tp.final_answer = std::string(answer.substr(close + d.close.size()));
  tp.had_delimiters = true;
  return tp;
}

std::vector<std::string> MarkerConfig::default_markers() {
  return {"Alternatively",      "Another method", "Another approach",
          "Another way",        "Let me try another",
          "Wait, maybe another"};
}

void MarkerConfig::validate() const {
  if (markers.empty()) throw ConfigError("marker list is empty");
  for (const auto& m : markers) {
    if (m.empty()) throw ConfigError("marker list contains an empty marker");
  }
}

Json MarkerConfig::to_json() const {
  return Json{{"markers", markers},
              {"case_sensitive", case_sensitive},
              {"require_line_or_sentence_start", require_line_or_sentence_start}};
}

MarkerConfig MarkerConfig::from_json(const Json& j) {
  MarkerConfig c;
  c.markers = j.value("markers", c.markers);
  c.case_sensitive = j.value("case_sensitive", c.case_sensitive);
  c.require_line_or_sentence_start =
      j.value("require_line_or_sentence_start", c.require_line_or_sentence_start);
  c.validate();
  return c;
}

std::vector<Subtrajectory> segment(std::string_view text,
                                   const MarkerConfig& config) {
  config.validate();
  if (text.empty()) throw DataError("cannot segment empty thinking text");

  // Longest first so shared prefixes resolve to the longer phrase.
  std::vector<std::string_view> markers(config.markers.begin(),
                                        config.markers.end());
  std::stable_sort(markers.begin(), markers.end(),
                   [](std::string_view a, std::string_view b) {
                     return a.size() > b.size();
                   });

  struct Cut {
    std::size_t pos;
    std::string_view marker;
  };
  std::vector<Cut> cuts;
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    if (pos > 0 && is_word_char(text[pos - 1])) continue;
    if (config.require_line_or_sentence_start && !at_sentence_start(text, pos)) {
      continue;
    }
    for (std::string_view m : markers) {
      if (!matches_at(text, pos, m, config.case_sensitive)) continue;
      const std::size_t end = pos + m.size();
      if (end < text.size() && is_word_char(m.back()) &&
          is_word_char(text[end])) {
        continue;
      }
      cuts.push_back({pos, m});
      pos = end - 1;
      break;
    }
  }

  std::vector<Subtrajectory> subs;
  auto push = [&](std::size_t begin, std::size_t end, std::string_view marker) {
    Subtrajectory s;
    s.index = subs.size();
    s.span = {begin, end};
    s.text = std::string(text.substr(begin, end - begin));
    s.marker = std::string(marker);
    subs.push_back(std::move(s));
  };

  std::size_t first_begin = cuts.empty() ? text.size() : cuts.front().pos;
  const std::string_view preamble = text.substr(0, first_begin);
  const bool blank_preamble =
      std::all_of(preamble.begin(), preamble.end(), is_space);
  if (!blank_preamble) {
    push(0, first_begin, kPreambleMarker);
  }
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const std::size_t begin = (i == 0 && blank_preamble) ? 0 : cuts[i].pos;
    const std::size_t end = i + 1 < cuts.size() ? cuts[i + 1].pos : text.size();
    push(begin, end, cuts[i].marker);
  }
  return subs;
}

Json segmentation_to_json(const std::vector<Subtrajectory>& subs) {
  Json list = Json::array();
  for (const auto& s : subs) {
    list.push_back(Json{{"index", s.index},
                        {"marker", s.marker},
                        {"char_span", Json::array({s.span.begin, s.span.end})}});
  }
  return list;
}

std::vector<Subtrajectory> slices_from_spans(std::string_view text,
                                             const Json& payload) {
  const Json& list = payload.contains("subtrajectories")
                         ? payload.at("subtrajectories")
                         : payload;
  if (!list.is_array() || list.empty()) {
    throw DataError("segmentation payload has no subtrajectories");
  }
  std::vector<Subtrajectory> subs;
  std::size_t expected_begin = 0;
  for (const auto& item : list) {
    Subtrajectory s;
    s.index = item.at("index").get<std::size_t>();
    s.marker = item.at("marker").get<std::string>();
    s.span.begin = item.at("char_span").at(0).get<std::size_t>();
    s.span.end = item.at("char_span").at(1).get<std::size_t>();
    if (s.index != subs.size() || s.span.begin != expected_begin ||
        s.span.end < s.span.begin || s.span.end > text.size()) {
      throw DataError("segmentation spans do not match the thinking text");
    }
    s.text = std::string(text.substr(s.span.begin, s.span.end - s.span.begin));
    expected_begin = s.span.end;
    subs.push_back(std::move(s));
  }
  if (expected_begin != text.size()) {
    throw DataError("segmentation spans do not cover the thinking text");
  }
  return subs;
}

}  // namespace tracecurate
