#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tracecurate/error.hpp"

namespace tracecurate {

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Counts tokens deterministically: identical text, identical count.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const {
    return spans(text).size();
  }
};

// Whitespace split, then each maximal run of word characters (ASCII letters,
// digits, underscore, any non-ASCII byte) is one token and every other
// character is a token of its own.
class RuleTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "rule"; }
  std::string version() const override { return "1"; }
  std::vector<TokenSpan> spans(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

// Greedy longest-match over a subword vocabulary (one piece per line),
// applied to each word run of the rule tokenizer. Characters not covered by
// any piece count as one token per UTF-8 character.
class VocabTokenizer final : public Tokenizer {
 public:
  // Throws ConfigError when the file cannot be read or holds no pieces.
  static std::unique_ptr<VocabTokenizer> load(const std::string& path);
  explicit VocabTokenizer(std::vector<std::string> pieces,
                          std::string version = "1");

  std::string name() const override { return "vocab"; }
  std::string version() const override { return version_; }
  std::vector<TokenSpan> spans(std::string_view text) const override;

 private:
  std::unordered_set<std::string> pieces_;
  std::size_t max_piece_ = 0;
  std::string version_;
};

const Tokenizer& default_tokenizer();

inline std::size_t count_tokens(std::string_view text,
                                const Tokenizer& tokenizer = default_tokenizer()) {
  return tokenizer.count(text);
}

}  // namespace tracecurate
