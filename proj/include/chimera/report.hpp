// SPDX-License-Identifier: Apache-2.0
#pragma once
// Evaluation reports as JSON, aligned text tables and CSV.
#include <string>
#include <utility>
#include <vector>

#include "chimera/pipeline.hpp"

namespace chimera::report {

struct Variant {
  std::string name;
  Evaluation evaluation;
};

struct Report {
  std::string checkpoint_hash;
  Evaluation main;
  bool bias_study = false;
  bool quadrant_study = false;
  std::vector<Variant> ablations;  // the full model is `main`
};

std::string to_json(const Report& r);
std::string to_text(const Report& r);

// Method rows, metric columns (HR@k..., PR@k..., MAP@k..., MRR).
std::string ranking_table(const std::vector<std::pair<std::string, eval::RankingMetrics>>& rows);
// Metric rows with theoretical, actual and bias columns.
std::string bias_table(const eval::BiasReport& bias);
std::string quadrant_csv(const std::vector<std::pair<std::string, eval::QuadrantCounts>>& rows);

}  // namespace chimera::report
