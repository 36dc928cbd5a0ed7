// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "../oracles/ranking_oracle.hpp"
#include "chimera/error.hpp"
#include "chimera/evaluator.hpp"

using namespace chimera;
using namespace chimera::eval;

namespace {

const std::vector<int> kKs{1, 3, 5};

void check_against_oracle(const std::vector<RankingCase>& cases, const std::vector<int>& ks) {
  const RankingMetrics got = ranking_metrics(cases, ks);
  const oracle::Averages want = oracle::averages(cases, ks);
  CHECK(got.cases == want.cases);
  CHECK(got.excluded == want.excluded);
  for (int k : ks) {
    CHECK(std::abs(got.hr.at(k) - want.hr.at(k)) <= 1e-9);
    CHECK(std::abs(got.pr.at(k) - want.pr.at(k)) <= 1e-9);
    CHECK(std::abs(got.map.at(k) - want.map.at(k)) <= 1e-9);
  }
  CHECK(std::abs(got.mrr - want.mrr) <= 1e-9);
}

RankingCase make_case(std::vector<double> scores, std::vector<bool> truth, bool detected, bool label) {
  return RankingCase{std::move(scores), std::move(truth), detected, label};
}

}  // namespace

TEST_CASE("detection metrics") {
  const std::vector<bool> labels{true, true, false, false};
  const DetectionMetrics perfect = detection_metrics(labels, labels);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const DetectionMetrics none = detection_metrics({false, false, false, false}, labels);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  std::vector<bool> pred, truth;
  for (int i = 0; i < 8; ++i) pred.push_back(true), truth.push_back(true);
  for (int i = 0; i < 2; ++i) pred.push_back(true), truth.push_back(false);
  for (int i = 0; i < 2; ++i) pred.push_back(false), truth.push_back(true);
  for (int i = 0; i < 5; ++i) pred.push_back(false), truth.push_back(false);
  const DetectionMetrics m = detection_metrics(pred, truth);
  CHECK(m.tp == 8);
  CHECK(m.fp == 2);
  CHECK(m.fn == 2);
  CHECK(m.tn == 5);
  CHECK(std::abs(m.precision - 0.8) <= 1e-15);
  CHECK(std::abs(m.recall - 0.8) <= 1e-15);
  CHECK(std::abs(m.f1 - 0.8) <= 1e-15);
  CHECK_THROWS_AS(detection_metrics({true}, labels), InputError);
}

TEST_CASE("threshold selection") {
  CHECK(choose_threshold(std::vector<double>{0.1, 0.4, 0.6, 0.9}, {false, false, true, true}) == 0.5);
  CHECK(choose_threshold(std::vector<double>{0.2, 0.3, 0.35}, {false, true, true}) == doctest::Approx(0.25));
  CHECK(choose_threshold(std::vector<double>{0.7, 0.8}, {false, false}, 0.4) == 0.4);
}

TEST_CASE("ranking hand example") {
  const std::vector<RankingCase> cases{make_case({0.9, 0.1, 0.8, 0.2, 0.3}, {false, false, true, false, false}, true, true)};
  const RankingMetrics m = ranking_metrics(cases);
  CHECK(m.hr.at(1) == 0.0);
  CHECK(m.hr.at(3) == 100.0);
  CHECK(m.mrr == 50.0);
  CHECK(m.pr.at(3) == 100.0);
  CHECK(m.map.at(3) == 50.0);
}

TEST_CASE("perfect ranking scores 100 everywhere") {
  std::vector<RankingCase> cases;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> s(8, 0.1);
    std::vector<bool> t(8, false);
    s[static_cast<std::size_t>(i)] = 0.9;
    t[static_cast<std::size_t>(i)] = true;
    cases.push_back(make_case(s, t, true, true));
  }
  for (const auto& [name, v] : flatten(ranking_metrics(cases))) {
    CAPTURE(name);
    CHECK(v == 100.0);
  }
}

TEST_CASE("ties rank the lower index first") {
  CHECK(rank_positions(std::vector<double>{0.5, 0.7, 0.5, 0.7}) == std::vector<std::size_t>{1, 3, 0, 2});
  const std::vector<RankingCase> cases{make_case({0.5, 0.5, 0.5}, {false, true, false}, true, true)};
  const RankingMetrics m = ranking_metrics(cases);
  CHECK(m.hr.at(1) == 0.0);
  CHECK(m.mrr == 50.0);
}

TEST_CASE("cases without a true entry are excluded and counted") {
  const std::vector<RankingCase> cases{make_case({0.1, 0.2}, {false, false}, true, true),
                                       make_case({0.1, 0.2}, {false, true}, true, true)};
  const RankingMetrics m = ranking_metrics(cases);
  CHECK(m.cases == 1);
  CHECK(m.excluded == 1);
  CHECK(m.hr.at(1) == 100.0);
  const RankingMetrics empty = ranking_metrics(std::vector<RankingCase>{});
  CHECK(empty.cases == 0);
  CHECK(empty.mrr == 0.0);
}

TEST_CASE("ranking metrics match the brute-force oracle on random cases") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<RankingCase> cases;
  for (int i = 0; i < 200; ++i) {
    RankingCase c;
    for (int j = 0; j < 20; ++j) {
      // Coarse scores force ties.
      c.scores.push_back(std::round(u(rng) * 8) / 8);
      c.truth.push_back(u(rng) < 0.15);
    }
    c.label = true;
    cases.push_back(c);
  }
  check_against_oracle(cases, {1, 2, 3, 5, 10, 20, 25});

  const RankingMetrics m = ranking_metrics(cases, kKs);
  CHECK(m.hr.at(1) <= m.hr.at(3));
  CHECK(m.hr.at(3) <= m.hr.at(5));
  for (int k : kKs) {
    CHECK(m.pr.at(k) >= 0.0);
    CHECK(m.pr.at(k) <= 100.0);
  }
  CHECK(m.mrr > 0.0);
  CHECK(m.mrr <= 100.0);
}

TEST_CASE("ranking metrics match the oracle exhaustively for short windows") {
  const std::vector<int> ks{1, 2, 3, 5};
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t score_patterns = 1;
    for (std::size_t i = 0; i < n; ++i) score_patterns *= 3;
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
      std::vector<RankingCase> batch;
      for (std::size_t code = 0; code < score_patterns; ++code) {
        RankingCase c;
        std::size_t rest = code;
        for (std::size_t i = 0; i < n; ++i) {
          c.scores.push_back(static_cast<double>(rest % 3));
          rest /= 3;
          c.truth.push_back(((mask >> i) & 1U) != 0);
        }
        c.label = true;
        batch.push_back(std::move(c));
      }
      // Each case alone, then the whole pattern family as one average.
      for (const RankingCase& c : batch) check_against_oracle({c}, ks);
      check_against_oracle(batch, ks);
    }
  }
}

TEST_CASE("bias study") {
  std::mt19937_64 rng(4);
  std::vector<RankingCase> cases;
  for (int i = 0; i < 60; ++i) {
    RankingCase c;
    c.label = i % 5 != 0;
    for (int j = 0; j < 10; ++j) {
      c.scores.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
      c.truth.push_back(c.label && j == i % 10);
    }
    c.detected = c.label;
    cases.push_back(c);
  }

  SUBCASE("a perfect detector has zero bias") {
    const BiasReport r = bias_study(cases);
    CHECK(r.theoretical_cases == r.actual_cases);
    for (const BiasRow& row : r.rows) CHECK(row.bias == 0.0);
    CHECK(r.warnings.empty());
  }
  SUBCASE("a half-recall detector against the oracle") {
    std::vector<RankingCase> flagged, anomalous;
    std::size_t seen = 0;
    for (RankingCase& c : cases) {
      if (c.label) c.detected = (seen++ % 2) == 0;
      if (c.label) anomalous.push_back(c);
      if (c.detected) flagged.push_back(c);
    }
    const BiasReport r = bias_study(cases);
    const oracle::Averages t = oracle::averages(anomalous, kKs);
    const oracle::Averages a = oracle::averages(flagged, kKs);
    CHECK(r.theoretical_cases == anomalous.size());
    CHECK(r.actual_cases == flagged.size());
    CHECK(r.actual_cases * 2 == r.theoretical_cases);
    for (const BiasRow& row : r.rows) {
      CAPTURE(row.metric);
      double tv = 0, av = 0;
      for (int k : kKs) {
        const std::string ks = std::to_string(k);
        if (row.metric == "HR@" + ks) tv = t.hr.at(k), av = a.hr.at(k);
        if (row.metric == "PR@" + ks) tv = t.pr.at(k), av = a.pr.at(k);
        if (row.metric == "MAP@" + ks) tv = t.map.at(k), av = a.map.at(k);
      }
      if (row.metric == "MRR") tv = t.mrr, av = a.mrr;
      CHECK(std::abs(row.theoretical - tv) <= 1e-9);
      CHECK(std::abs(row.actual - av) <= 1e-9);
      CHECK(std::abs(row.bias - (av - tv)) <= 1e-9);
    }
  }
  SUBCASE("a silent detector reports zeros with a warning") {
    for (RankingCase& c : cases) c.detected = false;
    const BiasReport r = bias_study(cases);
    CHECK(r.actual_cases == 0);
    REQUIRE_FALSE(r.warnings.empty());
    for (const BiasRow& row : r.rows) CHECK(row.actual == 0.0);
  }
  SUBCASE("false positives without a root cause are excluded from actual") {
    cases[0].detected = true;  // label false
    const BiasReport r = bias_study(cases);
    CHECK(r.actual_excluded == 1);
  }
}

TEST_CASE("quadrant fixture") {
  // k = 2. Expected verdicts are listed per case.
  const std::vector<RankingCase> cases{
      make_case({0.9, 0.2, 0.1}, {true, false, false}, true, true),   // top 1, detected: DLF
      make_case({0.9, 0.5, 0.1}, {false, false, true}, true, true),   // rank 3, detected: DF
      make_case({0.1, 0.8, 0.3}, {false, true, false}, false, true),  // rank 1, missed: LF
      make_case({0.7, 0.6, 0.2}, {false, false, true}, false, true),  // rank 3, missed: MF
      make_case({0.7, 0.6, 0.2}, {false, false, false}, true, false), // normal: not counted
      make_case({0.4, 0.6, 0.2}, {true, false, false}, true, true),   // rank 2, detected: DLF
  };
  const QuadrantCounts q = quadrant_study(cases, 2);
  CHECK(q.dlf == 2);
  CHECK(q.df == 1);
  CHECK(q.lf == 1);
  CHECK(q.mf == 1);
  CHECK(q.total() == 5);
  const QuadrantCounts wide = quadrant_study(cases, 3);
  CHECK(wide.dlf == 3);
  CHECK(wide.lf == 2);
  CHECK(wide.total() == 5);
  CHECK_THROWS_AS(quadrant_study(cases, 0), ConfigError);
}

TEST_CASE("quadrants partition the anomalous cases") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RankingCase> cases;
    std::size_t anomalous = 0;
    bool all_detected = trial % 2 == 0;
    for (int i = 0; i < 30; ++i) {
      RankingCase c;
      c.label = u(rng) < 0.4;
      anomalous += c.label;
      c.detected = all_detected ? c.label : u(rng) < 0.5;
      for (int j = 0; j < 8; ++j) {
        c.scores.push_back(u(rng));
        c.truth.push_back(c.label && j == 3);
      }
      cases.push_back(c);
    }
    const QuadrantCounts q = quadrant_study(cases, 1 + trial % 5);
    CHECK(q.total() == anomalous);
    if (all_detected) {
      CHECK(q.lf == 0);
      CHECK(q.mf == 0);
    }
  }
}
