#pragma once

// Brute-force reference for the KL-balanced sampler. Written independently of
// src/sampler.cpp: every candidate set is materialised with a full sort over
// exact rationals, and KL is evaluated in long double.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using Q = boost::multiprecision::cpp_rational;

struct Item {
  std::string id;
  Q quality;
  int n = 0;
};

struct Candidate {
  std::set<std::string> ids;
  std::map<int, long long> counts;
  long double kl = 0;
};

struct Result {
  std::vector<Candidate> candidates;  // j = 0..40
  int chosen_j = 40;
  bool ambiguous = false;  // distinct distributions with KL within tolerance
};

inline std::vector<std::size_t> ranked(const std::vector<Item>& items,
                                       const std::vector<Q>& score) {
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return items[a].id < items[b].id;
  });
  return order;
}

inline long double smoothed_kl(const std::map<int, long long>& full, long long n_full,
                               const std::map<int, long long>& part, long long n_part,
                               long double eps) {
  std::set<int> support;
  for (const auto& [k, v] : full) support.insert(k);
  for (const auto& [k, v] : part) support.insert(k);
  const long double k = static_cast<long double>(support.size());
  long double total = 0;
  for (int c : support) {
    const long double pf = full.count(c) ? static_cast<long double>(full.at(c)) / n_full : 0;
    const long double qf = part.count(c) ? static_cast<long double>(part.at(c)) / n_part : 0;
    const long double p = (pf + eps) / (1 + k * eps);
    const long double q = (qf + eps) / (1 + k * eps);
    total += p * std::log(p / q);
  }
  return total;
}

inline Result select(const std::vector<Item>& items, std::size_t d, double eps,
                     long double tolerance = 1e-12L) {
  const auto n = static_cast<long long>(items.size());
  const auto dd = static_cast<long long>(d);
  std::map<int, long long> full;
  for (const auto& it : items) ++full[it.n];

  std::vector<Q> q;
  for (const auto& it : items) q.push_back(it.quality);
  const auto init_order = ranked(items, q);
  std::map<int, long long> init;
  for (std::size_t k = 0; k < d; ++k) ++init[items[init_order[k]].n];

  std::map<int, Q> delta;
  for (const auto& [c, e] : full) {
    const long long p = init.count(c) ? init.at(c) : 0;
    // (F_E - F_PS) / F_E with F_E = e/n and F_PS = p/d
    delta[c] = (Q(e, n) - Q(p, dd)) / Q(e, n);
  }
  Q lo = delta.begin()->second, hi = lo;
  for (const auto& [c, v] : delta) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  std::map<int, Q> norm;
  for (const auto& [c, v] : delta) norm[c] = hi == lo ? Q(0) : Q((v - lo) / (hi - lo));

  Result r;
  for (int j = 0; j <= 40; ++j) {
    const Q a(60 + j, 100);
    std::vector<Q> s;
    for (const auto& it : items) s.push_back(a * it.quality + (Q(1) - a) * norm.at(it.n));
    const auto order = ranked(items, s);
    Candidate c;
    for (std::size_t k = 0; k < d; ++k) {
      c.ids.insert(items[order[k]].id);
      ++c.counts[items[order[k]].n];
    }
    c.kl = smoothed_kl(full, n, c.counts, dd, eps);
    r.candidates.push_back(std::move(c));
  }

  int best = 40;
  for (int j = 39; j >= 0; --j) {
    const auto& cj = r.candidates[j];
    const auto& cb = r.candidates[best];
    if (cj.counts == cb.counts) continue;  // identical distribution: keep larger j
    if (std::fabs(cj.kl - cb.kl) <= tolerance) {
      r.ambiguous = true;
      if (cj.kl < cb.kl) best = j;
    } else if (cj.kl < cb.kl) {
      best = j;
    }
  }
  r.chosen_j = best;
  return r;
}

}  // namespace oracle
