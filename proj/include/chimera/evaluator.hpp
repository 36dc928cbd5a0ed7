// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chimera/embedding.hpp"
#include "chimera/log_records.hpp"
#include "chimera/model.hpp"

namespace chimera::eval {

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// precision is 0 with no predicted positives; f1 is 0 when p + r == 0.
DetectionMetrics detection_metrics(const std::vector<bool>& predictions, const std::vector<bool>& labels);

// Threshold on y_hat maximizing F1 (predict positive when y_hat >= t).
// Candidates are midpoints between consecutive distinct scores plus
// `fallback`; ties go to the candidate nearest `fallback`. Returns `fallback`
// when there are no positive labels.
double choose_threshold(std::span<const double> y_hat, const std::vector<bool>& labels, double fallback = 0.5);

inline constexpr int kDefaultKsArr[] = {1, 3, 5};
inline constexpr std::span<const int> kDefaultKs{kDefaultKsArr};

struct RankingCase {
  std::vector<double> scores;
  std::vector<bool> truth;
  bool detected = false;
  bool label = false;
};

// Positions by descending score, ties broken by lower index.
std::vector<std::size_t> rank_positions(std::span<const double> scores);

struct RankingMetrics {
  std::vector<int> ks;
  std::map<int, double> hr, pr, map;  // x100
  double mrr = 0.0;                   // x100
  std::size_t cases = 0;              // cases that entered the averages
  std::size_t excluded = 0;           // cases without any true entry
};

// HR@k: any true entry in the top k. PR@k: |true in top k| / min(k, |true|).
// AP@k: mean precision-at-r over hit ranks r <= k (0 without hits); MAP@k
// averages it. MRR: mean of 1 / rank of the first true entry. All averages
// are over cases with at least one true entry, reported x100; an empty set
// reports zeros.
RankingMetrics ranking_metrics(std::span<const RankingCase> cases, std::span<const int> ks = kDefaultKs);

// Flat metric list in report order: HR@k..., PR@k..., MAP@k..., MRR.
std::vector<std::pair<std::string, double>> flatten(const RankingMetrics& m);

struct BiasRow {
  std::string metric;
  double theoretical = 0.0;
  double actual = 0.0;
  double bias = 0.0;
};

struct BiasReport {
  std::vector<BiasRow> rows;
  std::size_t theoretical_cases = 0;  // ground-truth anomalous
  std::size_t actual_cases = 0;       // flagged by the detector
  std::size_t actual_excluded = 0;    // flagged but without a true root cause
  std::vector<std::string> warnings;
};

// Theoretical: every ground-truth anomalous case reaches the localizer.
// Actual: only detector-flagged cases do. bias = actual - theoretical.
BiasReport bias_study(std::span<const RankingCase> cases, std::span<const int> ks = kDefaultKs);

struct QuadrantCounts {
  std::size_t dlf = 0;  // detected and localized
  std::size_t df = 0;   // detected, not localized
  std::size_t lf = 0;   // localized, not detected
  std::size_t mf = 0;   // missed
  std::size_t total() const noexcept { return dlf + df + lf + mf; }
};

// Over ground-truth anomalous cases; localized means a top-k hit.
QuadrantCounts quadrant_study(std::span<const RankingCase> cases, int k = 5);

// Runs the model over `sequences` and packages the verdicts.
std::vector<RankingCase> score_cases(const ModelParams& params, const EventVocabulary& vocab,
                                     std::span<const EventSequence> sequences, double threshold);

}  // namespace chimera::eval
