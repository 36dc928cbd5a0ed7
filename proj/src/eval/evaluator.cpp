// SPDX-License-Identifier: Apache-2.0
#include "chimera/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chimera/error.hpp"

namespace chimera::eval {

DetectionMetrics detection_metrics(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) throw InputError("detection_metrics: length mismatch");
  DetectionMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] && labels[i]) ++m.tp;
    else if (predictions[i]) ++m.fp;
    else if (labels[i]) ++m.fn;
    else ++m.tn;
  }
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double choose_threshold(std::span<const double> y_hat, const std::vector<bool>& labels, double fallback) {
  if (y_hat.size() != labels.size()) throw InputError("choose_threshold: length mismatch");
  if (std::none_of(labels.begin(), labels.end(), [](bool b) { return b; })) return fallback;

  std::vector<double> sorted(y_hat.begin(), y_hat.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> candidates{fallback};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));

  std::vector<bool> pred(y_hat.size());
  double best_t = fallback;
  double best_f1 = -1.0;
  for (double t : candidates) {
    for (std::size_t i = 0; i < y_hat.size(); ++i) pred[i] = y_hat[i] >= t;
    const double f1 = detection_metrics(pred, labels).f1;
    const bool closer = std::abs(t - fallback) < std::abs(best_t - fallback);
    if (f1 > best_f1 || (f1 == best_f1 && closer)) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

std::vector<std::size_t> rank_positions(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

RankingMetrics ranking_metrics(std::span<const RankingCase> cases, std::span<const int> ks) {
  RankingMetrics m;
  m.ks.assign(ks.begin(), ks.end());
  for (int k : ks) {
    if (k < 1) throw ConfigError("k", "ranking cutoffs must be at least 1");
    m.hr[k] = m.pr[k] = m.map[k] = 0.0;
  }
  for (const RankingCase& c : cases) {
    if (c.scores.size() != c.truth.size()) throw InputError("ranking case: scores and truth differ in length");
    const std::size_t n_true = static_cast<std::size_t>(std::count(c.truth.begin(), c.truth.end(), true));
    if (n_true == 0) {
      ++m.excluded;
      continue;
    }
    ++m.cases;
    const std::vector<std::size_t> order = rank_positions(c.scores);
    for (int k : ks) {
      const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
      std::size_t hits = 0;
      double precision_sum = 0.0;
      for (std::size_t r = 0; r < depth; ++r) {
        if (c.truth[order[r]]) {
          ++hits;
          precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
      }
      m.hr[k] += hits > 0 ? 1.0 : 0.0;
      m.pr[k] += static_cast<double>(hits) / static_cast<double>(std::min<std::size_t>(k, n_true));
      m.map[k] += hits > 0 ? precision_sum / static_cast<double>(hits) : 0.0;
    }
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (c.truth[order[r]]) {
        m.mrr += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  }
  if (m.cases > 0) {
    const double scale = 100.0 / static_cast<double>(m.cases);
    for (int k : ks) {
      m.hr[k] *= scale;
      m.pr[k] *= scale;
      m.map[k] *= scale;
    }
    m.mrr *= scale;
  }
  return m;
}

std::vector<std::pair<std::string, double>> flatten(const RankingMetrics& m) {
  std::vector<std::pair<std::string, double>> out;
  for (int k : m.ks) out.emplace_back("HR@" + std::to_string(k), m.hr.at(k));
  for (int k : m.ks) out.emplace_back("PR@" + std::to_string(k), m.pr.at(k));
  for (int k : m.ks) out.emplace_back("MAP@" + std::to_string(k), m.map.at(k));
  out.emplace_back("MRR", m.mrr);
  return out;
}

BiasReport bias_study(std::span<const RankingCase> cases, std::span<const int> ks) {
  std::vector<RankingCase> theoretical, actual;
  for (const RankingCase& c : cases) {
    if (c.label) theoretical.push_back(c);
    if (c.detected) actual.push_back(c);
  }
  const RankingMetrics t = ranking_metrics(theoretical, ks);
  const RankingMetrics a = ranking_metrics(actual, ks);

  BiasReport report;
  report.theoretical_cases = theoretical.size();
  report.actual_cases = actual.size();
  report.actual_excluded = a.excluded;
  if (actual.empty()) report.warnings.push_back("detector flagged no sequences; actual metrics reported as 0");
  if (theoretical.empty()) report.warnings.push_back("no ground-truth anomalous sequences");
  const auto tf = flatten(t);
  const auto af = flatten(a);
  for (std::size_t i = 0; i < tf.size(); ++i) {
    report.rows.push_back(BiasRow{tf[i].first, tf[i].second, af[i].second, af[i].second - tf[i].second});
  }
  return report;
}

QuadrantCounts quadrant_study(std::span<const RankingCase> cases, int k) {
  if (k < 1) throw ConfigError("k", "must be at least 1");
  QuadrantCounts q;
  for (const RankingCase& c : cases) {
    if (!c.label) continue;
    const std::vector<std::size_t> order = rank_positions(c.scores);
    const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    bool localized = false;
    for (std::size_t r = 0; r < depth && !localized; ++r) localized = c.truth[order[r]];
    if (c.detected && localized) ++q.dlf;
    else if (c.detected) ++q.df;
    else if (localized) ++q.lf;
    else ++q.mf;
  }
  return q;
}

std::vector<RankingCase> score_cases(const ModelParams& params, const EventVocabulary& vocab,
                                     std::span<const EventSequence> sequences, double threshold) {
  const std::vector<DiagnosisOutput> outputs = diagnose(params, vocab, sequences);
  std::vector<RankingCase> cases;
  cases.reserve(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    RankingCase c;
    c.scores = outputs[i].p;
    c.truth = sequences[i].root_cause_flags;
    c.detected = outputs[i].y_hat >= threshold;
    c.label = sequences[i].seq_label;
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace chimera::eval
