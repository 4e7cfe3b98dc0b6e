#pragma once

// Synthetic traces and corpora shared by the unit and acceptance tests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/core.h>

#include "tracecurate/corpus.hpp"
#include "tracecurate/sampler.hpp"

namespace synth {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = fs::temp_directory_path() /
            fmt::format("tracecurate-{}-{}-{}", tag, ::getpid(), counter++);
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void dump(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> w = {
      "the", "sum", "of", "terms", "is", "x", "so", "we", "get", "2", "factor",
      "equation", "gives", "y", "square", "root", "then", "=", "+", "42",
      "check", "value", "both", "sides", "divide"};
  return w;
}

inline std::string filler(std::mt19937_64& rng, int words) {
  std::string s;
  std::uniform_int_distribution<std::size_t> pick(0, filler_words().size() - 1);
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += filler_words()[pick(rng)];
  }
  return s;
}

// Openers that the default marker set recognises.
inline const std::vector<std::string>& openers() {
  static const std::vector<std::string> o = {"Alternatively,", "Another approach:",
                                             "Let me try another way.",
                                             "Wait, maybe another route:",
                                             "Another method is"};
  return o;
}

// Thinking text with exactly `pieces` slices under the default markers:
// an unmarked first piece followed by marked ones, each on its own line.
inline std::string thinking_text(std::mt19937_64& rng, int pieces) {
  std::uniform_int_distribution<std::size_t> pick(0, openers().size() - 1);
  std::uniform_int_distribution<int> len(3, 12);
  std::string t = "First, " + filler(rng, len(rng)) + ".";
  for (int k = 1; k < pieces; ++k) {
    t += "\n" + openers()[pick(rng)] + " " + filler(rng, len(rng)) + ".";
  }
  return t;
}

struct Plan {
  std::string id;
  int pieces = 1;
  std::vector<std::array<bool, 5>> criteria;
  std::vector<bool> independent;  // per piece; last entry unused
  bool boxed = true;
};

inline tracecurate::Json plan_script(const Plan& p) {
  using tracecurate::Json;
  Json crit = Json::array();
  for (const auto& c : p.criteria) crit.push_back(Json(c));
  Json ind = Json::object();
  for (std::size_t i = 0; i + 1 < p.independent.size(); ++i) {
    ind[std::to_string(i)] = static_cast<bool>(p.independent[i]);
  }
  return Json{{"criteria", crit}, {"independent", ind}};
}

inline tracecurate::DatasetRecord make_record(std::mt19937_64& rng, const Plan& p) {
  tracecurate::DatasetRecord r;
  r.id = p.id;
  r.question = "Compute " + filler(rng, 6) + " for " + p.id + ".";
  const std::string final_part = p.boxed ? "The answer is \\boxed{7}." : "The answer is 7.";
  r.answer = "<think>" + thinking_text(rng, p.pieces) + "</think>\n" + final_part;
  r.source = "synthetic";
  r.ground_truth = "7";
  r.annotations["script"] = plan_script(p);
  return r;
}

// Random plan. Bias > 0 tilts long traces toward failing criteria, which
// makes quality fall as the piece count grows.
inline Plan random_plan(std::mt19937_64& rng, const std::string& id, int max_pieces = 8,
                        double bias = 0.0) {
  Plan p;
  p.id = id;
  p.pieces = std::uniform_int_distribution<int>(1, max_pieces)(rng);
  const double fail = std::min(0.9, 0.2 + bias * (p.pieces - 1) / std::max(1, max_pieces - 1));
  std::bernoulli_distribution f(fail), half(0.5);
  for (int i = 0; i < p.pieces; ++i) {
    std::array<bool, 5> c{};
    for (auto& b : c) b = !f(rng);
    p.criteria.push_back(c);
    p.independent.push_back(half(rng));
  }
  return p;
}

inline void write_corpus(const std::string& path, std::size_t n, std::uint64_t seed,
                         int max_pieces = 8, double bias = 0.0) {
  std::mt19937_64 rng(seed);
  std::ofstream out(path, std::ios::binary);
  tracecurate::RecordWriter w(out);
  for (std::size_t i = 0; i < n; ++i) {
    const Plan p = random_plan(rng, fmt::format("rec-{:07d}", i), max_pieces, bias);
    w.write(make_record(rng, p));
  }
}

// Scored items on a grid of fifths so near-ties are common.
inline std::vector<tracecurate::ScoredItem> random_items(std::mt19937_64& rng,
                                                         std::size_t n, int max_count,
                                                         int grid) {
  std::vector<tracecurate::ScoredItem> items;
  std::uniform_int_distribution<int> cnt(1, max_count), q(0, grid);
  for (std::size_t i = 0; i < n; ++i) {
    tracecurate::ScoredItem it;
    it.id = fmt::format("i{:04d}", (i * 7919) % 10007);
    const int num = q(rng);
    it.quality = static_cast<double>(num) / grid;
    it.quality_num = static_cast<std::uint64_t>(num);
    it.quality_den = static_cast<std::uint64_t>(grid);
    it.n = cnt(rng);
    items.push_back(it);
  }
  return items;
}

}  // namespace synth
