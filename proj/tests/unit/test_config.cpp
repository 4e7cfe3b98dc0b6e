#include <doctest.h>

#include "support/synth.hpp"
#include "tracecurate/config.hpp"

using namespace tracecurate;

TEST_SUITE("config") {

TEST_CASE("defaults validate and round-trip") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  const auto back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  for (const auto& k : config_keys()) CHECK_MESSAGE(c.to_json().contains(k), k);
}

TEST_CASE("unknown keys are refused") {
  CHECK_THROWS_AS(PipelineConfig::from_json(Json{{"sample_sise", 3}}), ConfigError);
  PipelineConfig c;
  CHECK_THROWS_AS(c.set("nonsense=1"), ConfigError);
}

TEST_CASE("set parses JSON or falls back to a string") {
  PipelineConfig c;
  c.set("sample_size=12");
  CHECK(c.sample_size == std::optional<std::size_t>(12));
  c.set("judge_model=gpt-x");
  CHECK(c.judge_http.model == "gpt-x");
  c.set("markers=[\"Hmm\"]");
  CHECK(c.markers.markers == std::vector<std::string>{"Hmm"});
  c.set("weighting=equal");
  CHECK(c.weighting == Weighting::equal);
  CHECK_THROWS_AS(c.set("no_equals_sign"), ConfigError);
}

TEST_CASE("overrides are checked together, not one at a time") {
  PipelineConfig c;
  c.set("judge_backend=http");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.set("judge_endpoint=http://127.0.0.1:9/v1/chat/completions");
  c.set("judge_model=m");
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("inconsistent settings are config errors") {
  PipelineConfig c;
  c.sample_size = 3;
  c.sample_fraction = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.sample_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.judge_backend = JudgeBackendKind::http;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.tokenizer = "bpe";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.kl_epsilon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("hash ignores execution-only keys") {
  PipelineConfig a, b;
  b.threads = 7;
  b.judge_cache_dir = "/tmp/x";
  CHECK(a.hash() == b.hash());
  b.weighting = Weighting::equal;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 64);
}

TEST_CASE("sample size resolution") {
  PipelineConfig c;
  CHECK_THROWS_AS(c.resolve_sample_size(10), ConfigError);
  c.sample_fraction = 1.0 / 3;
  CHECK(c.resolve_sample_size(100) == 33);
  CHECK(c.resolve_sample_size(1) == 1);
  c.sample_fraction.reset();
  c.sample_size = 5;
  CHECK(c.resolve_sample_size(100) == 5);
}

TEST_CASE("load from file") {
  synth::TempDir dir("cfg");
  synth::dump(dir.file("c.json"), R"({"sample_size": 4, "ngram_n": 13})");
  const auto c = PipelineConfig::load(dir.file("c.json"));
  CHECK(c.ngram_n == 13);
  CHECK_THROWS_AS(PipelineConfig::load(dir.file("missing.json")), ConfigError);
  synth::dump(dir.file("bad.json"), "{nope");
  CHECK_THROWS_AS(PipelineConfig::load(dir.file("bad.json")), ConfigError);
}

}  // TEST_SUITE
