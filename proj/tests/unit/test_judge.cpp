#include <doctest.h>

#include <deque>

#include "support/synth.hpp"
#include "tracecurate/judge.hpp"
#include "tracecurate/scripted_backend.hpp"
#include "tracecurate/verdict_cache.hpp"

using namespace tracecurate;

namespace {

// Replays a fixed list of replies and counts calls.
class QueueBackend final : public JudgeBackend {
 public:
  std::deque<std::string> replies;
  std::deque<bool> transient_failures;
  int calls = 0;
  std::vector<JudgeRequest> seen;

  std::string name() const override { return "queue"; }
  std::string complete(const JudgeRequest& r) override {
    ++calls;
    seen.push_back(r);
    if (!transient_failures.empty()) {
      const bool fail = transient_failures.front();
      transient_failures.pop_front();
      if (fail) throw BackendError("busy", true);
    }
    REQUIRE(!replies.empty());
    std::string s = replies.front();
    replies.pop_front();
    return s;
  }
};

JudgeOptions quiet_options() {
  JudgeOptions o;
  o.retry.sleep = nullptr;
  return o;
}

Subtrajectory sub(std::size_t index, std::string text) {
  Subtrajectory s;
  s.index = index;
  s.text = std::move(text);
  s.span = {0, s.text.size()};
  return s;
}

}  // namespace

TEST_SUITE("judge") {

TEST_CASE("criteria replies parse label by label") {
  const auto v = parse_criteria_reply(
      "EFFORT: YES\nEFFECTIVENESS: no\nCOHERENCE: TRUE\n"
      "PRELIMINARY_CONCLUSION: FALSE\nVALID_VERIFICATION: YES\n");
  REQUIRE(v);
  CHECK(*v == std::array<bool, 5>{true, false, true, false, true});
  CHECK_FALSE(parse_criteria_reply("EFFORT: YES\n"));
  CHECK_FALSE(parse_criteria_reply("EFFORT: YES\nEFFORT: NO\nEFFECTIVENESS: YES\n"
                                   "COHERENCE: YES\nPRELIMINARY_CONCLUSION: YES\n"
                                   "VALID_VERIFICATION: YES\n"));
  CHECK(parse_independence_reply("INDEPENDENT: NO") == std::optional<bool>(false));
  CHECK_FALSE(parse_independence_reply("maybe"));
}

TEST_CASE("rendered scripted replies parse back") {
  for (int mask = 0; mask < 32; ++mask) {
    std::array<bool, 5> v{};
    for (int k = 0; k < 5; ++k) v[k] = (mask >> k) & 1;
    CHECK(parse_criteria_reply(render_criteria_reply(v)) == v);
  }
}

TEST_CASE("verdicts json round-trip") {
  auto v = CriterionVerdicts::from_bools({true, true, false, true, false}, "j/1");
  CHECK(v.satisfied_count() == 3);
  const auto back = CriterionVerdicts::from_json(v.to_json());
  CHECK(back.as_array() == v.as_array());
}

TEST_CASE("prompt templates need a version header") {
  const auto t = PromptTemplate::parse("version: x7\n---\nHello {{question}}");
  CHECK(t.version == "x7");
  CHECK(t.body == "Hello {{question}}");
  CHECK_THROWS(PromptTemplate::parse("no header"));
  CHECK_FALSE(PromptTemplate::builtin_criteria().version.empty());
  CHECK_FALSE(PromptTemplate::builtin_independence().version.empty());
}

TEST_CASE("criteria prompt keeps the preceding window and trims oldest first") {
  const auto tmpl = PromptTemplate::parse(
      "version: t\n---\nQ={{question}}\nP={{preceding}}{{truncation_note}}\nS={{subtrajectory}}");
  std::string twos;
  for (int i = 0; i < 30; ++i) twos += "two ";
  JudgeContext ctx{"what", {"one one one ", twos, "three "}};
  PromptOptions o;
  o.preceding_window = 2;
  auto p = build_criteria_prompt(sub(3, "now"), ctx, tmpl, o);
  CHECK(p.text.find("one") == std::string::npos);
  CHECK(p.text.find("two two three") != std::string::npos);
  CHECK_FALSE(p.truncated());

  o.max_prompt_tokens = default_tokenizer().count(p.text) - 5;
  p = build_criteria_prompt(sub(3, "now"), ctx, tmpl, o);
  CHECK(p.truncated());
  CHECK(p.text.find("three") != std::string::npos);
  CHECK(default_tokenizer().count(p.text) <= o.max_prompt_tokens);

  o.max_prompt_tokens = 2;
  CHECK_THROWS_AS(build_criteria_prompt(sub(3, "now"), ctx, tmpl, o), PromptBudgetExceeded);
}

TEST_CASE("independence prompt trims the far end of later content") {
  const auto tmpl = PromptTemplate::parse(
      "version: t\n---\nS={{subtrajectory}}\nL={{subsequent}}{{truncation_note}}");
  PromptOptions o;
  std::string later = "near ";
  for (int i = 0; i < 30; ++i) later += "mid ";
  later += "far";
  const auto full = build_independence_prompt(sub(0, "x"), later, tmpl, o);
  o.max_prompt_tokens = default_tokenizer().count(full.text) - 5;
  const auto cut = build_independence_prompt(sub(0, "x"), later, tmpl, o);
  CHECK(cut.truncated());
  CHECK(cut.text.find("near") != std::string::npos);
  CHECK(cut.text.find("far") == std::string::npos);
}

TEST_CASE("cache hits skip the backend") {
  QueueBackend b;
  b.replies = {render_criteria_reply({true, true, true, true, false})};
  MemoryCache cache;
  Judge judge(b, &cache, quiet_options());
  JudgeContext ctx{"q", {}};
  const auto v1 = judge.judge_criteria(sub(0, "step"), ctx, "r");
  const auto v2 = judge.judge_criteria(sub(0, "step"), ctx, "r");
  CHECK(b.calls == 1);
  CHECK(judge.cache_hits() == 1);
  CHECK(v1.as_array() == v2.as_array());
  CHECK(v1.judge_id == judge.criteria_judge_id());
}

TEST_CASE("one repair round recovers a malformed reply") {
  QueueBackend b;
  b.replies = {"I think it is fine", render_criteria_reply({true, true, true, true, true})};
  Judge judge(b, nullptr, quiet_options());
  const auto v = judge.judge_criteria(sub(0, "s"), {"q", {}}, "r");
  CHECK(v.satisfied_count() == 5);
  REQUIRE(b.seen.size() == 2);
  CHECK(b.seen[1].attempt == 1);
  CHECK(b.seen[1].prompt.find("I think it is fine") != std::string::npos);
}

TEST_CASE("unparseable after repair throws and is cached as such") {
  QueueBackend b;
  b.replies = {"nope", "still nope"};
  MemoryCache cache;
  Judge judge(b, &cache, quiet_options());
  CHECK_THROWS_AS(judge.judge_criteria(sub(0, "s"), {"q", {}}, "r"), JudgeUnparseable);
  CHECK_THROWS_AS(judge.judge_criteria(sub(0, "s"), {"q", {}}, "r"), JudgeUnparseable);
  CHECK(b.calls == 2);
}

TEST_CASE("transient backend errors are retried with backoff") {
  QueueBackend b;
  b.transient_failures = {true, true, false};
  b.replies = {render_independence_reply(true)};
  JudgeOptions o = quiet_options();
  std::vector<long long> waits;
  o.retry.sleep = [&](std::chrono::milliseconds d) { waits.push_back(d.count()); };
  Judge judge(b, nullptr, o);
  CHECK(judge.judge_independence(sub(0, "s"), "later", "r").independent);
  CHECK(waits == std::vector<long long>{500, 1000});

  QueueBackend dead;
  dead.transient_failures = {true, true, true, true};
  Judge j2(dead, nullptr, o);
  CHECK_THROWS_AS(j2.judge_independence(sub(0, "s"), "later", "r"), BackendError);
  CHECK(dead.calls == 4);
}

TEST_CASE("scripted judge loads fixtures from annotations") {
  DatasetRecord r;
  r.id = "r1";
  r.annotations["script"] = Json::parse(
      R"({"criteria":[[true,true,true,true,true],{"effort":true,"effectiveness":false,"coherence":false,)"
      R"("preliminary_conclusion":false,"valid_verification":false},"garbage"],)"
      R"("independent":{"1":true}})");
  ScriptedJudge sj;
  sj.load(r);
  JudgeRequest q{RequestKind::criteria, "p", "r1", 0, 0};
  CHECK(parse_criteria_reply(sj.complete(q)) == std::array<bool, 5>{true, true, true, true, true});
  q.index = 1;
  CHECK(parse_criteria_reply(sj.complete(q)) ==
        std::array<bool, 5>{true, false, false, false, false});
  q.index = 2;
  CHECK(sj.complete(q) == "garbage");
  q.kind = RequestKind::independence;
  q.index = 1;
  CHECK(parse_independence_reply(sj.complete(q)) == std::optional<bool>(true));
  q.index = 0;
  CHECK_THROWS_AS(sj.complete(q), BackendError);
  sj.forget("r1");
  q.kind = RequestKind::criteria;
  CHECK_THROWS_AS(sj.complete(q), BackendError);
}

TEST_CASE("sqlite cache persists across handles") {
  synth::TempDir dir("cache");
  {
    SqliteCache c(dir.path());
    c.put("k1", "v1");
    c.put("k1", "v1b");
    c.put("k2", "v2");
  }
  SqliteCache c(dir.path());
  CHECK(c.size() == 2);
  CHECK(c.get("k1") == std::optional<std::string>("v1b"));
  CHECK_FALSE(c.get("nope"));
}

}  // TEST_SUITE
