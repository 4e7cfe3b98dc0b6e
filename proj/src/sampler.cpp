#include "tracecurate/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

namespace tracecurate {

std::vector<int> CountDistribution::support() const {
  std::vector<int> out;
  out.reserve(freq.size());
  for (const auto& [count, f] : freq) out.push_back(count);
  return out;
}

double CountDistribution::at(int count) const {
  auto it = freq.find(count);
  return it == freq.end() ? 0.0 : it->second;
}

Json CountDistribution::to_json() const {
  Json j = Json::object();
  for (const auto& [count, f] : freq) j[std::to_string(count)] = f;
  return j;
}

CountDistribution distribution_of_counts(std::span<const int> counts) {
  if (counts.empty()) throw DataError("count distribution of an empty dataset");
  std::map<int, std::size_t> tally;
  for (int c : counts) ++tally[c];
  CountDistribution out;
  const auto total = static_cast<double>(counts.size());
  for (const auto& [count, k] : tally) {
    out.freq[count] = static_cast<double>(k) / total;
  }
  return out;
}

namespace {

CountDistribution distribution_of(std::span<const ScoredItem> dataset,
                                  std::span<const std::size_t> indices) {
  std::vector<int> counts;
  counts.reserve(indices.size());
  for (std::size_t i : indices) counts.push_back(dataset[i].n);
  return distribution_of_counts(counts);
}

// Position of each item when ids are sorted ascending; lets the hot sort
// compare integers instead of strings.
std::vector<std::size_t> id_ranks(std::span<const ScoredItem> dataset) {
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset[a].id < dataset[b].id;
  });
  std::vector<std::size_t> rank(dataset.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r > 0 && dataset[order[r]].id == dataset[order[r - 1]].id) {
      throw DataError(fmt::format("duplicate id \"{}\" in sampling input",
                                  dataset[order[r]].id));
    }
    rank[order[r]] = r;
  }
  return rank;
}

std::vector<std::size_t> top_d_ranked(std::span<const double> scores,
                                      std::span<const std::size_t> rank,
                                      std::size_t d) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return rank[a] < rank[b];
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(d),
                    idx.end(), better);
  idx.resize(d);
  return idx;
}

using Rational = boost::multiprecision::cpp_rational;

// Rounding in the blended double score is around 1e-16; anything closer than
// this is decided exactly.
constexpr double kNearTie = 1e-9;

Rational exact_quality(const ScoredItem& item) {
  if (item.quality_den > 0) {
    return Rational(boost::multiprecision::cpp_int(item.quality_num),
                    boost::multiprecision::cpp_int(item.quality_den));
  }
  return Rational(item.quality);
}

// Exact normalised delta per count, from integer bin counts.
std::map<int, Rational> exact_norm_deltas(std::span<const ScoredItem> dataset,
                                          std::span<const std::size_t> initial) {
  std::map<int, long long> full;
  std::map<int, long long> init;
  for (const auto& item : dataset) ++full[item.n];
  for (std::size_t i : initial) ++init[dataset[i].n];
  const auto n = static_cast<long long>(dataset.size());
  const auto d = static_cast<long long>(initial.size());
  std::map<int, Rational> delta;
  for (const auto& [count, e] : full) {
    const long long p = init.count(count) ? init.at(count) : 0;
    delta[count] = Rational(d * e - n * p, d * e);
  }
  Rational lo = delta.begin()->second;
  Rational hi = lo;
  for (const auto& [count, v] : delta) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::map<int, Rational> out;
  for (const auto& [count, v] : delta) {
    out[count] = hi == lo ? Rational(0) : Rational((v - lo) / (hi - lo));
  }
  return out;
}

void check_d(std::span<const ScoredItem> dataset, std::size_t d) {
  if (d == 0) throw DataError("sample size must be positive");
  if (d > dataset.size()) {
    throw DataError(fmt::format("sample size {} exceeds dataset size {}", d,
                                dataset.size()));
  }
}

}  // namespace

CountDistribution count_distribution(std::span<const ScoredItem> dataset) {
  std::vector<int> counts;
  counts.reserve(dataset.size());
  for (const auto& item : dataset) counts.push_back(item.n);
  return distribution_of_counts(counts);
}

std::vector<std::size_t> top_d_indices(std::span<const ScoredItem> dataset,
                                       std::span<const double> scores,
                                       std::size_t d) {
  check_d(dataset, d);
  if (scores.size() != dataset.size()) {
    throw DataError("score vector does not match dataset size");
  }
  const auto rank = id_ranks(dataset);
  return top_d_ranked(scores, rank, d);
}

std::vector<std::string> pseudo_sample_init(std::span<const ScoredItem> dataset,
                                            std::size_t d) {
  std::vector<double> q;
  q.reserve(dataset.size());
  for (const auto& item : dataset) q.push_back(item.quality);
  std::vector<std::string> ids;
  for (std::size_t i : top_d_indices(dataset, q, d)) ids.push_back(dataset[i].id);
  return ids;
}

std::map<int, double> compute_deltas(const CountDistribution& full,
                                     const CountDistribution& init) {
  std::map<int, double> deltas;
  for (const auto& [count, f_full] : full.freq) {
    if (!(f_full > 0.0)) {
      throw DataError(fmt::format("full-dataset frequency of count {} is zero",
                                  count));
    }
    deltas[count] = (f_full - init.at(count)) / f_full;
  }
  return deltas;
}

std::map<int, double> normalize_deltas(const std::map<int, double>& deltas) {
  std::map<int, double> out;
  if (deltas.empty()) return out;
  auto [lo, hi] = std::minmax_element(
      deltas.begin(), deltas.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  const double min = lo->second;
  const double range = hi->second - min;
  for (const auto& [count, delta] : deltas) {
    out[count] = range > 0.0 ? (delta - min) / range : 0.0;
  }
  return out;
}

double alpha(int j) {
  if (j < 0 || j > kMaxSweepStep) {
    throw DataError(fmt::format("sweep step {} outside [0, {}]", j, kMaxSweepStep));
  }
  return (60 + j) / 100.0;
}

namespace {

double blend(double quality, double norm_delta, int j) {
  // (40 - j)/100 is exactly 0 at j = 40, so the top step is pure quality.
  return alpha(j) * quality + ((kMaxSweepStep - j) / 100.0) * norm_delta;
}

}  // namespace

double sampling_score(const ScoredItem& item, int j,
                      const std::map<int, double>& deltas) {
  const auto norm = normalize_deltas(deltas);
  auto it = norm.find(item.n);
  if (it == norm.end()) {
    throw DataError(fmt::format("subtrajectory count {} is not in the support",
                                item.n));
  }
  return blend(item.quality, it->second, j);
}

double kl_divergence(const CountDistribution& p, const CountDistribution& q,
                     double epsilon) {
  if (!(epsilon > 0.0)) throw DataError("KL smoothing epsilon must be positive");
  std::set<int> support;
  for (const auto& [c, f] : p.freq) support.insert(c);
  for (const auto& [c, f] : q.freq) support.insert(c);
  if (support.empty()) return 0.0;

  double p_mass = 0.0;
  double q_mass = 0.0;
  for (int c : support) {
    p_mass += p.at(c) + epsilon;
    q_mass += q.at(c) + epsilon;
  }
  double kl = 0.0;
  for (int c : support) {
    const double ps = (p.at(c) + epsilon) / p_mass;
    const double qs = (q.at(c) + epsilon) / q_mass;
    kl += ps * std::log(ps / qs);
  }
  // Rounding can leave a tiny negative residue for equal inputs.
  return std::max(kl, 0.0);
}

Json SamplingRun::audit_json() const {
  Json deltas_json = Json::object();
  for (const auto& [count, delta] : deltas) deltas_json[std::to_string(count)] = delta;
  Json per_j = Json::array();
  for (const auto& c : candidates) {
    per_j.push_back(Json{{"j", c.j}, {"alpha", c.alpha}, {"kl", c.kl}});
  }
  return Json{{"d", d},
              {"epsilon", epsilon},
              {"full_distribution", full.to_json()},
              {"initial_distribution", initial.to_json()},
              {"deltas", std::move(deltas_json)},
              {"candidates", std::move(per_j)},
              {"chosen_j", chosen_j},
              {"alpha", alpha(chosen_j)},
              {"kl", candidates.at(static_cast<std::size_t>(chosen_j)).kl}};
}

SamplingRun select(std::span<const ScoredItem> dataset, std::size_t d,
                   double epsilon) {
  check_d(dataset, d);
  if (!(epsilon > 0.0)) throw DataError("KL smoothing epsilon must be positive");

  SamplingRun run;
  run.d = d;
  run.epsilon = epsilon;
  const auto rank = id_ranks(dataset);
  const std::size_t size = dataset.size();

  // Exact values are built on first use; most runs never need them.
  std::vector<Rational> exact_q;
  std::map<int, Rational> exact_nd;
  std::vector<std::size_t> initial;
  auto ensure_exact = [&](bool with_deltas) {
    if (exact_q.empty()) {
      exact_q.reserve(size);
      for (const auto& item : dataset) exact_q.push_back(exact_quality(item));
    }
    if (with_deltas && exact_nd.empty()) exact_nd = exact_norm_deltas(dataset, initial);
  };

  std::vector<double> scores(size);
  auto top_d = [&](int j, bool quality_only) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
      const double diff = scores[a] - scores[b];
      if (diff > kNearTie) return true;
      if (diff < -kNearTie) return false;
      ensure_exact(!quality_only);
      Rational lhs = exact_q[a] - exact_q[b];
      if (!quality_only) {
        lhs = (60 + j) * lhs +
              (kMaxSweepStep - j) * (exact_nd.at(dataset[a].n) - exact_nd.at(dataset[b].n));
      }
      if (lhs != 0) return lhs > 0;
      return rank[a] < rank[b];
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(d),
                      idx.end(), better);
    idx.resize(d);
    return idx;
  };

  run.full = count_distribution(dataset);
  for (std::size_t i = 0; i < size; ++i) scores[i] = dataset[i].quality;
  initial = top_d(kMaxSweepStep, true);
  run.initial = distribution_of(dataset, initial);
  run.deltas = compute_deltas(run.full, run.initial);
  const auto norm = normalize_deltas(run.deltas);

  std::vector<double> item_norm(size);
  for (std::size_t i = 0; i < size; ++i) item_norm[i] = norm.at(dataset[i].n);

  run.candidates.reserve(kMaxSweepStep + 1);
  for (int j = 0; j <= kMaxSweepStep; ++j) {
    for (std::size_t i = 0; i < size; ++i) {
      scores[i] = blend(dataset[i].quality, item_norm[i], j);
    }
    SamplingCandidate c;
    c.j = j;
    c.alpha = alpha(j);
    c.selected = top_d(j, false);
    c.kl = kl_divergence(run.full, distribution_of(dataset, c.selected), epsilon);
    run.candidates.push_back(std::move(c));
  }

  int best = kMaxSweepStep;
  for (int j = kMaxSweepStep - 1; j >= 0; --j) {
    if (run.candidates[static_cast<std::size_t>(j)].kl <
        run.candidates[static_cast<std::size_t>(best)].kl) {
      best = j;
    }
  }
  run.chosen_j = best;
  for (std::size_t i : run.candidates[static_cast<std::size_t>(best)].selected) {
    run.sampled_ids.push_back(dataset[i].id);
  }
  return run;
}

}  // namespace tracecurate
