// SPDX-License-Identifier: Apache-2.0
#include "chimera/report.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <sstream>

namespace chimera::report {
namespace {

using nlohmann::ordered_json;

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Left-aligned first column, right-aligned numbers.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const std::string& cell = rows[r][c];
      const std::string pad(width[c] - cell.size(), ' ');
      if (c == 0) {
        os << cell << pad;
      } else {
        os << "  " << pad << cell;
      }
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

ordered_json detection_json(const eval::DetectionMetrics& d) {
  return {{"precision", d.precision}, {"recall", d.recall}, {"f1", d.f1},
          {"tp", d.tp},               {"fp", d.fp},         {"fn", d.fn},
          {"tn", d.tn}};
}

ordered_json ranking_json(const eval::RankingMetrics& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [name, v] : eval::flatten(m)) j[name] = v;
  j["cases"] = m.cases;
  j["excluded"] = m.excluded;
  return j;
}

ordered_json quadrant_json(const eval::QuadrantCounts& q, int k) {
  return {{"k", k}, {"DLF", q.dlf}, {"DF", q.df}, {"LF", q.lf}, {"MF", q.mf}, {"total", q.total()}};
}

ordered_json bias_json(const eval::BiasReport& b) {
  ordered_json rows = ordered_json::array();
  for (const eval::BiasRow& r : b.rows) {
    rows.push_back({{"metric", r.metric}, {"theoretical", r.theoretical}, {"actual", r.actual}, {"bias", r.bias}});
  }
  return {{"theoretical_cases", b.theoretical_cases},
          {"actual_cases", b.actual_cases},
          {"actual_excluded", b.actual_excluded},
          {"rows", rows},
          {"warnings", b.warnings}};
}

}  // namespace

std::string ranking_table(const std::vector<std::pair<std::string, eval::RankingMetrics>>& rows) {
  std::vector<std::vector<std::string>> cells;
  if (rows.empty()) return {};
  std::vector<std::string> header{"Method"};
  for (const auto& [name, v] : eval::flatten(rows.front().second)) header.push_back(name);
  cells.push_back(header);
  for (const auto& [method, m] : rows) {
    std::vector<std::string> row{method};
    for (const auto& [name, v] : eval::flatten(m)) row.push_back(fixed(v));
    cells.push_back(row);
  }
  return render_table(cells);
}

std::string bias_table(const eval::BiasReport& bias) {
  std::vector<std::vector<std::string>> cells{{"Metric", "Theoretical", "Actual", "Bias"}};
  for (const eval::BiasRow& r : bias.rows) {
    cells.push_back({r.metric, fixed(r.theoretical), fixed(r.actual), fixed(r.bias)});
  }
  return render_table(cells);
}

std::string quadrant_csv(const std::vector<std::pair<std::string, eval::QuadrantCounts>>& rows) {
  std::ostringstream os;
  os << "method,DLF,DF,LF,MF,total\n";
  for (const auto& [name, q] : rows) {
    os << name << ',' << q.dlf << ',' << q.df << ',' << q.lf << ',' << q.mf << ',' << q.total() << '\n';
  }
  return os.str();
}

std::string to_json(const Report& r) {
  ordered_json j;
  j["checkpoint"] = r.checkpoint_hash;
  j["test_sequences"] = r.main.sequences;
  j["anomalous_sequences"] = r.main.anomalous;
  j["threshold"] = r.main.threshold;
  j["detection"] = detection_json(r.main.detection);
  j["localization"] = ranking_json(r.main.ranking);
  if (r.bias_study) j["bias_study"] = bias_json(r.main.bias);
  if (r.quadrant_study) j["quadrant_study"] = quadrant_json(r.main.quadrants, r.main.quadrant_k);
  if (!r.ablations.empty()) {
    ordered_json rows = ordered_json::array();
    for (const Variant& v : r.ablations) {
      rows.push_back({{"variant", v.name},
                      {"detection", detection_json(v.evaluation.detection)},
                      {"localization", ranking_json(v.evaluation.ranking)}});
    }
    j["ablation"] = rows;
  }
  return j.dump(2) + "\n";
}

std::string to_text(const Report& r) {
  std::ostringstream os;
  const eval::DetectionMetrics& d = r.main.detection;
  os << "Test sequences: " << r.main.sequences << " (" << r.main.anomalous << " anomalous), threshold "
     << fixed(r.main.threshold, 4) << "\n\n";
  os << "Anomaly detection\n";
  os << render_table({{"Method", "Precision", "Recall", "F1"},
                      {"Chimera", fixed(100 * d.precision), fixed(100 * d.recall), fixed(100 * d.f1)}});
  os << "\nRoot cause localization (all anomalous test sequences)\n";
  os << ranking_table({{"Chimera", r.main.ranking}});
  if (r.bias_study) {
    os << "\nDiagnostic bias (" << r.main.bias.theoretical_cases << " theoretical, " << r.main.bias.actual_cases
       << " actual cases)\n";
    os << bias_table(r.main.bias);
    for (const std::string& w : r.main.bias.warnings) os << "warning: " << w << '\n';
  }
  if (r.quadrant_study) {
    const eval::QuadrantCounts& q = r.main.quadrants;
    os << "\nDiagnosis quadrants (localized = hit in top " << r.main.quadrant_k << ")\n";
    os << render_table({{"Method", "DLF", "DF", "LF", "MF", "Total"},
                        {"Chimera", std::to_string(q.dlf), std::to_string(q.df), std::to_string(q.lf),
                         std::to_string(q.mf), std::to_string(q.total())}});
  }
  if (!r.ablations.empty()) {
    os << "\nAblation (root cause localization)\n";
    std::vector<std::pair<std::string, eval::RankingMetrics>> rows{{"Chimera", r.main.ranking}};
    for (const Variant& v : r.ablations) rows.emplace_back(v.name, v.evaluation.ranking);
    os << ranking_table(rows);
    os << "\nAblation (anomaly detection)\n";
    std::vector<std::vector<std::string>> cells{{"Method", "Precision", "Recall", "F1"},
                                                {"Chimera", fixed(100 * d.precision), fixed(100 * d.recall),
                                                 fixed(100 * d.f1)}};
    for (const Variant& v : r.ablations) {
      const eval::DetectionMetrics& vd = v.evaluation.detection;
      cells.push_back({v.name, fixed(100 * vd.precision), fixed(100 * vd.recall), fixed(100 * vd.f1)});
    }
    os << render_table(cells);
  }
  return os.str();
}

}  // namespace chimera::report
