#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tracecurate/corpus.hpp"
#include "tracecurate/distribution.hpp"

namespace tracecurate {

// What the sampler needs from a scored record.
struct ScoredItem {
  std::string id;
  double quality = 0.0;
  int n = 0;  // retained subtrajectory count
  // Exact quality as quality_num / quality_den when den > 0. Used only to
  // settle sampling-score near-ties; without it the double is taken as exact.
  std::uint64_t quality_num = 0;
  std::uint64_t quality_den = 0;
};

inline constexpr int kMaxSweepStep = 40;

CountDistribution count_distribution(std::span<const ScoredItem> dataset);

// Indices of the top-d items by `scores` descending, ties by id ascending.
std::vector<std::size_t> top_d_indices(std::span<const ScoredItem> dataset,
                                       std::span<const double> scores,
                                       std::size_t d);

// Top-d ids by quality. Throws DataError unless 0 < d <= |dataset|.
std::vector<std::string> pseudo_sample_init(std::span<const ScoredItem> dataset,
                                            std::size_t d);

// Relative change of each bin's frequency from the full dataset to the
// initial pseudo-sample: (F_full(i) - F_init(i)) / F_full(i).
std::map<int, double> compute_deltas(const CountDistribution& full,
                                     const CountDistribution& init);

// Min-max normalised deltas; all zero when every delta is equal.
std::map<int, double> normalize_deltas(const std::map<int, double>& deltas);

// Quality weight for sweep step j in [0, 40]: 0.6 + j/100.
double alpha(int j);

// alpha_j * quality + (1 - alpha_j) * normalised delta of the item's count.
double sampling_score(const ScoredItem& item, int j,
                      const std::map<int, double>& deltas);

// KL(p || q) in nats after additive smoothing: both sides get +epsilon on
// every count in the union support and are renormalised.
double kl_divergence(const CountDistribution& p, const CountDistribution& q,
                     double epsilon = 1e-9);

struct SamplingCandidate {
  int j = 0;
  double alpha = 0.0;
  std::vector<std::size_t> selected;  // dataset indices in rank order
  double kl = 0.0;
};

struct SamplingRun {
  std::size_t d = 0;
  double epsilon = 0.0;
  CountDistribution full;
  CountDistribution initial;
  std::map<int, double> deltas;
  std::vector<SamplingCandidate> candidates;  // j = 0..40
  int chosen_j = kMaxSweepStep;
  std::vector<std::string> sampled_ids;  // rank order of the chosen sweep step

  // Everything except the per-candidate id lists.
  Json audit_json() const;
};

// Sweeps j over 0..40, takes the top d by sampling score at each step, and
// keeps the step whose count distribution is closest (KL) to the full
// dataset's. KL ties go to the larger j. Scores closer than 1e-9 are
// compared in exact rational arithmetic before falling back to the id rule.
SamplingRun select(std::span<const ScoredItem> dataset, std::size_t d,
                   double epsilon = 1e-9);

}  // namespace tracecurate
