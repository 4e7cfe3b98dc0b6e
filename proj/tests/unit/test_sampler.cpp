#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles/sampler_oracle.hpp"
#include "support/synth.hpp"
#include "tracecurate/sampler.hpp"

using namespace tracecurate;

namespace {

std::vector<oracle::Item> to_oracle(const std::vector<ScoredItem>& items) {
  std::vector<oracle::Item> out;
  for (const auto& it : items) {
    out.push_back({it.id, oracle::Q(it.quality_num, it.quality_den), it.n});
  }
  return out;
}

std::set<std::string> ids_of(const std::vector<ScoredItem>& items,
                             const std::vector<std::size_t>& idx) {
  std::set<std::string> s;
  for (auto i : idx) s.insert(items[i].id);
  return s;
}

ScoredItem item(std::string id, double q, int n) {
  ScoredItem s;
  s.id = std::move(id);
  s.quality = q;
  s.n = n;
  return s;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("alpha sweeps 0.60 to 1.00") {
  CHECK(alpha(0) == doctest::Approx(0.6));
  CHECK(alpha(40) == 1.0);
  CHECK(alpha(25) == doctest::Approx(0.85));
}

TEST_CASE("top-d breaks ties by id") {
  const std::vector<ScoredItem> items = {item("b", 0.5, 1), item("a", 0.5, 1), item("c", 0.9, 1)};
  const std::vector<double> s = {0.5, 0.5, 0.9};
  CHECK(top_d_indices(items, s, 2) == std::vector<std::size_t>{2, 1});
  CHECK(pseudo_sample_init(items, 2) == std::vector<std::string>{"c", "a"});
  CHECK_THROWS_AS(pseudo_sample_init(items, 0), DataError);
  CHECK_THROWS_AS(pseudo_sample_init(items, 4), DataError);
}

TEST_CASE("deltas and their normalisation") {
  CountDistribution full{{{1, 0.5}, {2, 0.25}, {3, 0.25}}};
  CountDistribution init{{{1, 1.0}}};
  const auto d = compute_deltas(full, init);
  CHECK(d.at(1) == doctest::Approx(-1.0));
  CHECK(d.at(2) == doctest::Approx(1.0));
  CHECK(d.at(3) == doctest::Approx(1.0));
  const auto n = normalize_deltas(d);
  CHECK(n.at(1) == 0.0);
  CHECK(n.at(2) == 1.0);
  const auto flat = normalize_deltas({{1, 0.3}, {2, 0.3}});
  CHECK(flat.at(1) == 0.0);
  CHECK(flat.at(2) == 0.0);
}

TEST_CASE("KL basics") {
  CountDistribution p{{{1, 0.2}, {2, 0.8}}};
  CHECK(kl_divergence(p, p) <= 1e-12);
  CountDistribution a{{{1, 1.0}}}, b{{{2, 1.0}}};
  const double eps = 1e-3;
  const double hand = (1.0 / (1.0 + 2 * eps)) * std::log((1.0 + eps) / eps);
  CHECK(std::fabs(kl_divergence(a, b, eps) - hand) <= 1e-9 * hand);
  CHECK_THROWS_AS(kl_divergence(a, b, 0.0), DataError);
}

TEST_CASE("endpoint j=40 is pure quality ranking") {
  std::mt19937_64 rng(9);
  const auto items = synth::random_items(rng, 60, 6, 5);
  const auto run = select(items, 20);
  const auto& last = run.candidates.at(40);
  std::vector<std::string> pure = pseudo_sample_init(items, 20);
  std::vector<std::string> got;
  for (auto i : last.selected) got.push_back(items[i].id);
  CHECK(got == pure);
}

TEST_CASE("matches the brute-force reference on synthetic fixtures") {
  std::mt19937_64 rng(2024);
  int fixtures = 0, ambiguous = 0;
  for (int f = 0; f < 8; ++f) {
    const std::size_t n = 12 + rng() % 189;  // <= 200
    const int grid = (f % 2) ? 5 : 20 + static_cast<int>(rng() % 40);
    const auto items = synth::random_items(rng, n, 2 + static_cast<int>(rng() % 8), grid);
    const auto ref_items = to_oracle(items);
    for (std::size_t d : {std::size_t{1}, n / 3, 2 * n / 3, n}) {
      if (d == 0) continue;
      ++fixtures;
      const auto run = select(items, d);
      const auto ref = oracle::select(ref_items, d, 1e-9);
      REQUIRE(run.candidates.size() == 41);
      for (int j = 0; j <= 40; ++j) {
        CHECK(ids_of(items, run.candidates[j].selected) == ref.candidates[j].ids);
      }
      if (ref.ambiguous) {
        ++ambiguous;
        CHECK(std::fabs(run.candidates[run.chosen_j].kl -
                        static_cast<double>(ref.candidates[ref.chosen_j].kl)) <= 1e-12);
      } else {
        CHECK(run.chosen_j == ref.chosen_j);
      }
      CHECK(run.candidates[run.chosen_j].kl <= run.candidates[40].kl);
      CHECK(run.sampled_ids.size() == d);
    }
  }
  CHECK(fixtures >= 20);
  MESSAGE("fixtures: " << fixtures << ", KL near-ties: " << ambiguous);
}

TEST_CASE("double quality without a fraction is taken as exact") {
  std::vector<ScoredItem> items = {item("x", 0.3, 1), item("y", 0.1 + 0.2, 2),
                                   item("z", 0.7, 3)};
  // 0.1 + 0.2 is a hair above 0.3, so y outranks x in exact arithmetic
  const auto run = select(items, 1);
  CHECK(run.candidates[40].selected == std::vector<std::size_t>{2});
  const auto two = select(items, 2);
  CHECK(ids_of(items, two.candidates[40].selected) == std::set<std::string>{"y", "z"});
}

TEST_CASE("selecting everything gives zero KL") {
  std::mt19937_64 rng(1);
  const auto items = synth::random_items(rng, 30, 4, 5);
  const auto run = select(items, 30);
  CHECK(run.candidates[run.chosen_j].kl == 0.0);
  CHECK(run.chosen_j == 40);
}

TEST_CASE("audit json carries the sweep") {
  std::mt19937_64 rng(4);
  const auto items = synth::random_items(rng, 40, 5, 5);
  const auto a = select(items, 10).audit_json();
  CHECK(a["candidates"].size() == 41);
  CHECK(a["d"] == 10);
  CHECK(a.contains("deltas"));
}

}  // TEST_SUITE
