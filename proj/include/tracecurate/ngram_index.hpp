#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tracecurate/filters.hpp"

namespace tracecurate {

inline constexpr std::string_view kNgramNormalizationVersion = "ngram-norm-v1";

// Lowercase, tokenize with the rule tokenizer, drop punctuation-only tokens.
std::vector<std::string> normalize_for_ngrams(std::string_view text);

struct BenchmarkItem {
  std::string id;
  std::string question;
};

struct NgramMatch {
  std::string benchmark_id;
  std::size_t record_offset = 0;  // token offset of the window in the record
};

// Exact n-gram membership over benchmark questions. Windows are bucketed by
// hash and confirmed by token comparison, so there are no false positives
// or negatives. Immutable after construction.
class NgramIndex {
 public:
  explicit NgramIndex(std::size_t n = 15);

  void add(const BenchmarkItem& item);

  std::size_t n() const noexcept { return n_; }
  std::size_t window_count() const noexcept { return windows_; }
  std::size_t item_count() const noexcept { return items_.size(); }
  // Ids of items shorter than n (they contribute no windows).
  const std::vector<std::string>& short_items() const noexcept { return short_; }

  // All benchmark items sharing at least one window with `text`; one match
  // per benchmark item (its first hit).
  std::vector<NgramMatch> matches(std::string_view text) const;
  bool contains(std::span<const std::string> window) const;

 private:
  std::uint32_t intern(const std::string& token);
  std::uint64_t window_hash(const std::uint32_t* ids) const;

  struct WindowRef {
    std::uint32_t item;
    std::uint32_t offset;
  };

  std::size_t n_;
  std::size_t windows_ = 0;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::vector<BenchmarkItem> items_;
  std::vector<std::vector<std::uint32_t>> item_tokens_;
  std::unordered_map<std::uint64_t, std::vector<WindowRef>> buckets_;
  std::vector<std::string> short_;
};

NgramIndex build_ngram_index(std::span<const BenchmarkItem> items,
                             std::size_t n = 15);

// Reads {"id", "question"} JSONL ("problem" accepted for the question).
std::vector<BenchmarkItem> read_benchmark_file(const std::string& path);

// Rejects with `contaminated` when the question shares any window with the
// index; evidence lists the matched benchmark ids.
FilterVerdict decontaminate(const DatasetRecord& record, const NgramIndex& index);

}  // namespace tracecurate
