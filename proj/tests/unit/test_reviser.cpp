#include <doctest.h>

#include <random>

#include "tracecurate/reviser.hpp"

using namespace tracecurate;

namespace {

std::vector<Subtrajectory> slices(const std::vector<std::string>& parts) {
  std::vector<Subtrajectory> out;
  std::size_t at = 0;
  for (const auto& p : parts) {
    Subtrajectory s;
    s.index = out.size();
    s.text = p;
    s.span = {at, at + p.size()};
    at += p.size();
    out.push_back(s);
  }
  return out;
}

CriterionVerdicts ok() { return CriterionVerdicts::from_bools({true, true, true, true, true}); }
CriterionVerdicts bad() { return CriterionVerdicts::from_bools({true, false, true, true, true}); }

}  // namespace

TEST_SUITE("reviser") {

TEST_CASE("classification needs all five criteria") {
  CHECK(classify(ok()) == Classification::optimal);
  CHECK(classify(bad()) == Classification::suboptimal);
  CHECK(classify(CriterionVerdicts{}) == Classification::suboptimal);
}

TEST_CASE("independent suboptimal slices go, dependent ones stay") {
  const auto subs = slices({"A. ", "B. ", "C. ", "D."});
  const std::vector<CriterionVerdicts> v = {bad(), bad(), ok(), bad()};
  std::vector<std::size_t> asked;
  const auto r = revise(subs, v, " final", [&](std::size_t i, std::string_view later) {
    asked.push_back(i);
    if (i == 0) CHECK(later == "B. C. D. final");
    return i == 0;  // slice 1 is relied on later
  });
  CHECK(asked == std::vector<std::size_t>{0, 1});
  CHECK(r.eliminated == std::vector<std::size_t>{0});
  CHECK(r.retained == std::vector<std::size_t>{1, 2, 3});
  CHECK(r.revised_text == "B. C. D.");
  CHECK_FALSE(r.per_subtrajectory[2].independent.has_value());
  CHECK_FALSE(r.per_subtrajectory[3].independent.has_value());
}

TEST_CASE("the last slice is kept even when everything is suboptimal") {
  const auto subs = slices({"a", "b", "c"});
  const std::vector<CriterionVerdicts> v(3, bad());
  const auto r = revise(subs, v, "", [](std::size_t, std::string_view) { return true; });
  CHECK(r.retained == std::vector<std::size_t>{2});
  CHECK(r.revised_text == "c");
}

TEST_CASE("single slice is never judged for independence") {
  const auto subs = slices({"only"});
  const std::vector<CriterionVerdicts> v = {bad()};
  const auto r = revise(subs, v, "", [](std::size_t, std::string_view) -> bool {
    FAIL("should not be asked");
    return true;
  });
  CHECK(r.retained == std::vector<std::size_t>{0});
}

TEST_CASE("failures become RevisionError") {
  const auto subs = slices({"a", "b"});
  const std::vector<CriterionVerdicts> v = {bad(), ok()};
  CHECK_THROWS_AS(revise(subs, v, "", [](std::size_t, std::string_view) -> bool {
                    throw BackendError("down", false);
                  }),
                  RevisionError);
  const std::vector<CriterionVerdicts> short_v = {bad()};
  CHECK_THROWS_AS(revise(subs, short_v, "", [](std::size_t, std::string_view) { return true; }),
                  RevisionError);
  CHECK_THROWS_AS(revise({}, {}, "", [](std::size_t, std::string_view) { return true; }),
                  RevisionError);
}

TEST_CASE("random verdicts keep the elimination rule") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int round = 0; round < 500; ++round) {
    const int n = 1 + static_cast<int>(rng() % 7);
    std::vector<std::string> parts;
    std::vector<CriterionVerdicts> v;
    std::vector<bool> indep;
    for (int i = 0; i < n; ++i) {
      parts.push_back("s" + std::to_string(i) + " ");
      v.push_back(coin(rng) ? ok() : bad());
      indep.push_back(coin(rng));
    }
    const auto subs = slices(parts);
    const auto r = revise(subs, v, "", [&](std::size_t i, std::string_view) { return indep[i]; });
    REQUIRE_FALSE(r.retained.empty());
    std::string expect;
    for (int i = 0; i < n; ++i) {
      const bool gone = classify(v[i]) == Classification::suboptimal && indep[i] && i != n - 1;
      const bool eliminated =
          std::find(r.eliminated.begin(), r.eliminated.end(), i) != r.eliminated.end();
      CHECK(gone == eliminated);
      if (!gone) expect += parts[i];
    }
    CHECK(r.revised_text == expect);
  }
}

}  // TEST_SUITE
