#include "tracecurate/ngram_index.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "tracecurate/tokenizer.hpp"

namespace tracecurate {
namespace {

constexpr std::uint32_t kUnknown = std::numeric_limits<std::uint32_t>::max();

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finaliser over a running combination
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

bool has_word_char(std::string_view token) {
  return std::any_of(token.begin(), token.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u >= 0x80 || c == '_';
  });
}

}  // namespace

std::vector<std::string> normalize_for_ngrams(std::string_view text) {
  std::string lowered(text);
  for (char& c : lowered) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  RuleTokenizer tok;
  std::vector<std::string> out;
  for (const auto& span : tok.spans(lowered)) {
    std::string_view t = std::string_view(lowered).substr(span.begin, span.end - span.begin);
    if (has_word_char(t)) out.emplace_back(t);
  }
  return out;
}

NgramIndex::NgramIndex(std::size_t n) : n_(n) {
  if (n_ == 0) throw ConfigError("n-gram length must be at least 1");
}

std::uint32_t NgramIndex::intern(const std::string& token) {
  auto [it, inserted] =
      vocab_.emplace(token, static_cast<std::uint32_t>(vocab_.size()));
  return it->second;
}

std::uint64_t NgramIndex::window_hash(const std::uint32_t* ids) const {
  std::uint64_t h = n_;
  for (std::size_t k = 0; k < n_; ++k) h = mix(h, ids[k]);
  return h;
}

void NgramIndex::add(const BenchmarkItem& item) {
  const auto tokens = normalize_for_ngrams(item.question);
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(intern(t));

  const auto item_index = static_cast<std::uint32_t>(items_.size());
  items_.push_back(item);
  if (ids.size() < n_) {
    short_.push_back(item.id);
  } else {
    for (std::size_t off = 0; off + n_ <= ids.size(); ++off) {
      buckets_[window_hash(ids.data() + off)].push_back(
          {item_index, static_cast<std::uint32_t>(off)});
      ++windows_;
    }
  }
  item_tokens_.push_back(std::move(ids));
}

std::vector<NgramMatch> NgramIndex::matches(std::string_view text) const {
  const auto tokens = normalize_for_ngrams(text);
  std::vector<NgramMatch> out;
  if (tokens.size() < n_) return out;

  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = vocab_.find(t);
    ids.push_back(it == vocab_.end() ? kUnknown : it->second);
  }

  std::set<std::uint32_t> hit_items;
  std::size_t next_unknown = 0;
  for (std::size_t off = 0; off + n_ <= ids.size(); ++off) {
    // Any window containing an unseen token cannot match.
    if (next_unknown < off) next_unknown = off;
    while (next_unknown < off + n_ && ids[next_unknown] != kUnknown) ++next_unknown;
    if (next_unknown < off + n_) continue;

    auto bucket = buckets_.find(window_hash(ids.data() + off));
    if (bucket == buckets_.end()) continue;
    for (const WindowRef& ref : bucket->second) {
      if (hit_items.count(ref.item)) continue;
      const auto& cand = item_tokens_[ref.item];
      if (std::equal(ids.begin() + static_cast<std::ptrdiff_t>(off),
                     ids.begin() + static_cast<std::ptrdiff_t>(off + n_),
                     cand.begin() + ref.offset)) {
        hit_items.insert(ref.item);
        out.push_back({items_[ref.item].id, off});
      }
    }
  }
  return out;
}

bool NgramIndex::contains(std::span<const std::string> window) const {
  if (window.size() != n_) return false;
  std::vector<std::uint32_t> ids;
  for (const auto& t : window) {
    auto it = vocab_.find(t);
    if (it == vocab_.end()) return false;
    ids.push_back(it->second);
  }
  auto bucket = buckets_.find(window_hash(ids.data()));
  if (bucket == buckets_.end()) return false;
  for (const WindowRef& ref : bucket->second) {
    const auto& cand = item_tokens_[ref.item];
    if (std::equal(ids.begin(), ids.end(), cand.begin() + ref.offset)) return true;
  }
  return false;
}

NgramIndex build_ngram_index(std::span<const BenchmarkItem> items, std::size_t n) {
  NgramIndex index(n);
  for (const auto& item : items) index.add(item);
  return index;
}

std::vector<BenchmarkItem> read_benchmark_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open benchmark file {}", path));
  std::vector<BenchmarkItem> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw DataError(fmt::format("{}:{}: malformed JSON: {}", path, lineno, e.what()));
    }
    BenchmarkItem item;
    if (auto id = j.find("id"); id != j.end()) {
      item.id = id->is_string() ? id->get<std::string>() : id->dump();
    } else {
      item.id = fmt::format("{}:{}", path, lineno);
    }
    if (auto q = j.find("question"); q != j.end() && q->is_string()) {
      item.question = q->get<std::string>();
    } else if (auto p = j.find("problem"); p != j.end() && p->is_string()) {
      item.question = p->get<std::string>();
    } else {
      throw DataError(fmt::format("{}:{}: no \"question\" field", path, lineno));
    }
    out.push_back(std::move(item));
  }
  return out;
}

FilterVerdict decontaminate(const DatasetRecord& record, const NgramIndex& index) {
  FilterVerdict v;
  for (const auto& m : index.matches(record.question)) {
    v.reject(RejectReason::contaminated,
             fmt::format("{}-gram shared with benchmark item {} at token {}",
                         index.n(), m.benchmark_id, m.record_offset));
  }
  return v;
}

}  // namespace tracecurate
