#include <doctest.h>

#include "tracecurate/filters.hpp"

using namespace tracecurate;

namespace {

DatasetRecord rec(std::string q, std::string a) {
  DatasetRecord r;
  r.id = "r";
  r.question = std::move(q);
  r.answer = std::move(a);
  return r;
}

bool has_reason(const FilterVerdict& v, RejectReason r) {
  return std::find(v.reasons.begin(), v.reasons.end(), r) != v.reasons.end();
}

}  // namespace

TEST_SUITE("filters") {

TEST_CASE("clean record passes") {
  const auto v = basic_quality_filter(rec("Find x if 2x = 6.", "<think>x=3</think> \\boxed{3}"));
  CHECK(v.keep);
  CHECK(v.reasons.empty());
}

TEST_CASE("image references are rejected with evidence") {
  for (const char* q : {"As shown in the figure, find AB.", "See the diagram for details.",
                        "Use ![plot](a.png) to read off y.", "Given http://x.org/a.PNG, compute",
                        "<img src='q.png'> what is the area?"}) {
    const auto v = basic_quality_filter(rec(q, "<think>t</think>a"));
    CHECK_MESSAGE(has_reason(v, RejectReason::image_dependent), q);
    CHECK_FALSE(v.evidence.empty());
  }
  CHECK(basic_quality_filter(rec("Figure out the sum of 2 and 3.", "<think>t</think>5")).keep);
}

TEST_CASE("truncated thinking is rejected") {
  const auto v = basic_quality_filter(rec("q", "<think>runs out"));
  CHECK(has_reason(v, RejectReason::truncated));
}

TEST_CASE("mixed language over the threshold is rejected") {
  const auto v = basic_quality_filter(
      rec("Compute the value", "<think>我们计算一下这个值</think> 5"));
  CHECK(has_reason(v, RejectReason::mixed_language));
  // Greek letters are maths, not a second language
  CHECK(basic_quality_filter(rec("Let alpha be an angle", "<think>α + β = π</think>")).keep);
  const auto p = script_profile("abc дд");
  CHECK(p.letters == 5);
  CHECK(p.dominant == 3);
}

TEST_CASE("bad image pattern is a config error") {
  BasicFilterConfig c;
  c.image_patterns = {"("};
  CHECK_THROWS_AS(BasicQualityFilter{c}, ConfigError);
}

TEST_CASE("boxed extraction handles nesting and escapes") {
  CHECK(extract_boxed("so \\boxed{\\frac{1}{2}}.") == std::optional<std::string>("\\frac{1}{2}"));
  CHECK(extract_boxed("\\boxed{1} then \\boxed{2}") == std::optional<std::string>("2"));
  CHECK(extract_boxed("\\boxed{\\{a\\}}") == std::optional<std::string>("\\{a\\}"));
  CHECK_FALSE(extract_boxed("\\boxed{unclosed"));
  CHECK_FALSE(has_boxed_answer("no box here"));
}

TEST_CASE("exact-match grader normalises lightly") {
  ExactMatchGrader g;
  CHECK(g.grade("", "The answer is \\boxed{ 3 }.", "3"));
  CHECK(g.grade("", "$3$.", "3"));
  CHECK_FALSE(g.grade("", "\\boxed{4}", "3"));
  CHECK_FALSE(g.grade("", "", ""));
}

TEST_CASE("verdict merge keeps first-seen order") {
  FilterVerdict a, b;
  a.reject(RejectReason::truncated, "x");
  b.reject(RejectReason::image_dependent);
  b.reject(RejectReason::truncated);
  a.merge(b);
  CHECK(a.reasons == std::vector<RejectReason>{RejectReason::truncated, RejectReason::image_dependent});
  CHECK(a.to_json()["reasons"][1] == "image_dependent");
}

TEST_CASE("difficulty filter counts any correct attempt") {
  DatasetRecord r = rec("q", "<think>t</think>\\boxed{9}");
  r.id = "d1";
  r.annotations["script"] = Json{{"difficulty", {false, false, false, true}}};
  ScriptedSolver s0("s0", 0, 2), s1("s1", 1, 2);
  s0.load(r);
  s1.load(r);
  ExactMatchGrader g;
  std::vector<SolverClient*> solvers = {&s0, &s1};
  auto res = difficulty_filter(r, solvers, g);
  CHECK(res.attempts.size() == 4);
  CHECK(has_reason(res.verdict, RejectReason::too_easy));

  r.annotations["script"]["difficulty"] = Json{false, false, false, false};
  s0.load(r);
  s1.load(r);
  res = difficulty_filter(r, solvers, g);
  CHECK(res.verdict.keep);
}

TEST_CASE("no boxed answer rejects before any solver runs") {
  DatasetRecord r = rec("q", "<think>t</think>just 9");
  ScriptedSolver s("s", 0, 2);  // unloaded: would throw if asked
  ExactMatchGrader g;
  std::vector<SolverClient*> solvers = {&s};
  const auto res = difficulty_filter(r, solvers, g);
  CHECK(res.attempts.empty());
  CHECK(has_reason(res.verdict, RejectReason::no_boxed_answer));
}

}  // TEST_SUITE
