#include "tracecurate/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <fmt/format.h>

#include "tracecurate/hash.hpp"

namespace tracecurate {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_word(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

template <class Fn>
void for_each_rule_token(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_word(c)) {
      std::size_t j = i + 1;
      while (j < n && is_word(static_cast<unsigned char>(text[j]))) ++j;
      fn(i, j);
      i = j;
    } else {
      fn(i, i + 1);
      ++i;
    }
  }
}

}  // namespace

std::vector<TokenSpan> RuleTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  for_each_rule_token(text, [&](std::size_t b, std::size_t e) {
    out.push_back({b, e});
  });
  return out;
}

std::size_t RuleTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  for_each_rule_token(text, [&](std::size_t, std::size_t) { ++n; });
  return n;
}

VocabTokenizer::VocabTokenizer(std::vector<std::string> pieces,
                               std::string version)
    : version_(std::move(version)) {
  for (auto& p : pieces) {
    if (p.empty()) continue;
    max_piece_ = std::max(max_piece_, p.size());
    pieces_.insert(std::move(p));
  }
  if (pieces_.empty()) throw ConfigError("tokenizer vocabulary is empty");
}

std::unique_ptr<VocabTokenizer> VocabTokenizer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(fmt::format("cannot read tokenizer vocabulary {}", path));
  }
  std::vector<std::string> pieces;
  std::string line;
  std::string all;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    all += line;
    all.push_back('\n');
    pieces.push_back(line);
  }
  // Version is tied to file content so a changed vocab changes provenance.
  return std::make_unique<VocabTokenizer>(std::move(pieces),
                                          sha256_hex(all).substr(0, 12));
}

std::vector<TokenSpan> VocabTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  for_each_rule_token(text, [&](std::size_t b, std::size_t e) {
    std::size_t i = b;
    while (i < e) {
      std::size_t best = 0;
      const std::size_t limit = std::min(max_piece_, e - i);
      for (std::size_t len = limit; len > 0; --len) {
        if (pieces_.count(std::string(text.substr(i, len)))) {
          best = len;
          break;
        }
      }
      if (best == 0) {
        best = std::min(utf8_length(static_cast<unsigned char>(text[i])), e - i);
      }
      out.push_back({i, i + best});
      i += best;
    }
  });
  return out;
}

const Tokenizer& default_tokenizer() {
  static const RuleTokenizer instance;
  return instance;
}

}  // namespace tracecurate
