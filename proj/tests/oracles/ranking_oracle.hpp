// SPDX-License-Identifier: Apache-2.0
#pragma once
// Brute-force ranking metrics, written without sorting so they share no code
// path with the library. Ranks are 1-based: a position is outranked by every
// higher score and by equal scores at lower indices.
#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

namespace chimera::oracle {

inline std::size_t rank_of(const std::vector<double>& s, std::size_t i) {
  std::size_t r = 1;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
  }
  return r;
}

struct CaseMetrics {
  std::map<int, double> hr, pr, ap;
  double rr = 0.0;
};

inline CaseMetrics case_metrics(const std::vector<double>& s, const std::vector<bool>& truth,
                                const std::vector<int>& ks) {
  CaseMetrics m;
  std::vector<std::size_t> true_ranks;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (truth[i]) true_ranks.push_back(rank_of(s, i));
  const double n_true = static_cast<double>(true_ranks.size());
  const std::size_t best = *std::min_element(true_ranks.begin(), true_ranks.end());
  m.rr = 1.0 / static_cast<double>(best);
  for (int k : ks) {
    const std::size_t uk = static_cast<std::size_t>(k);
    double hits = 0, ap = 0;
    for (std::size_t r : true_ranks) {
      if (r > uk) continue;
      ++hits;
      double above = 0;
      for (std::size_t q : true_ranks)
        if (q <= r) ++above;
      ap += above / static_cast<double>(r);
    }
    m.hr[k] = hits > 0 ? 1.0 : 0.0;
    m.pr[k] = hits / std::min(static_cast<double>(k), n_true);
    m.ap[k] = hits > 0 ? ap / hits : 0.0;
  }
  return m;
}

struct Averages {
  std::map<int, double> hr, pr, map;
  double mrr = 0.0;
  std::size_t cases = 0, excluded = 0;
};

// Same x100 averages over cases with at least one true entry.
template <class Case>
Averages averages(const std::vector<Case>& cases, const std::vector<int>& ks) {
  Averages a;
  for (int k : ks) a.hr[k] = a.pr[k] = a.map[k] = 0.0;
  for (const Case& c : cases) {
    if (std::none_of(c.truth.begin(), c.truth.end(), [](bool b) { return b; })) {
      ++a.excluded;
      continue;
    }
    ++a.cases;
    const CaseMetrics m = case_metrics(c.scores, c.truth, ks);
    for (int k : ks) {
      a.hr[k] += m.hr.at(k);
      a.pr[k] += m.pr.at(k);
      a.map[k] += m.ap.at(k);
    }
    a.mrr += m.rr;
  }
  if (a.cases == 0) return a;
  const double n = static_cast<double>(a.cases);
  for (int k : ks) {
    a.hr[k] = 100.0 * a.hr[k] / n;
    a.pr[k] = 100.0 * a.pr[k] / n;
    a.map[k] = 100.0 * a.map[k] / n;
  }
  a.mrr = 100.0 * a.mrr / n;
  return a;
}

}  // namespace chimera::oracle
