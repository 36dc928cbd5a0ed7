// SPDX-License-Identifier: Apache-2.0
#include "chimera/log_records.hpp"

#include <fstream>
#include <istream>
#include <regex>
#include <string>

#include "chimera/error.hpp"

namespace chimera::parser {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::pair<std::string, std::string> split_timestamp(std::string_view line) {
  static const std::regex stamp(R"(^(\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d+)?)\s+)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(line.begin(), line.end(), m, stamp)) {
    return {m[1].str(), std::string(trim(line.substr(static_cast<std::size_t>(m.length(0)))))};
  }
  return {std::string(), std::string(trim(line))};
}

std::set<std::size_t> read_label_lines(std::istream& in) {
  std::set<std::size_t> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(std::string(t), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || v < 1) {
      throw InputError("label file line " + std::to_string(row) + ": expected a positive line number");
    }
    out.insert(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<RawLogRecord> read_log(std::istream& in, const LogReadOptions& options) {
  std::vector<RawLogRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    bool marked = false;
    if (options.inline_markers) {
      const std::string_view t = trim(body);
      if (t.empty()) continue;
      if (t[0] != '+' && t[0] != '-') {
        throw InputError("line " + std::to_string(line_no) + ": expected leading '+' or '-' marker");
      }
      marked = t[0] == '+';
      body = t.substr(1);
    }
    auto [stamp, content] = split_timestamp(body);
    if (content.empty()) continue;
    RawLogRecord rec;
    rec.line_no = line_no;
    rec.timestamp = std::move(stamp);
    rec.content = std::move(content);
    rec.anomaly_label = marked || (options.anomalous_lines && options.anomalous_lines->contains(line_no));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawLogRecord> read_log_file(const std::filesystem::path& log,
                                        const std::optional<std::filesystem::path>& labels,
                                        bool inline_markers) {
  std::ifstream in(log);
  if (!in) throw InputError("cannot open log file " + log.string());
  std::set<std::size_t> anomalous;
  if (labels) {
    std::ifstream lin(*labels);
    if (!lin) throw InputError("cannot open label file " + labels->string());
    anomalous = read_label_lines(lin);
  }
  LogReadOptions opts;
  opts.inline_markers = inline_markers;
  opts.anomalous_lines = labels ? &anomalous : nullptr;
  return read_log(in, opts);
}

std::vector<EventSequence> window_sequences(std::span<const RawLogRecord> records,
                                            std::span<const int> template_ids, std::size_t window,
                                            std::size_t stride) {
  if (window < 1) throw ConfigError("window", "must be at least 1");
  if (stride < 1) throw ConfigError("stride", "must be at least 1");
  if (records.size() != template_ids.size()) {
    throw InputError("window_sequences: records and template ids differ in length");
  }
  std::vector<EventSequence> out;
  for (std::size_t start = 0; start + window <= records.size(); start += stride) {
    EventSequence seq;
    seq.event_ids.reserve(window);
    seq.positions.reserve(window);
    seq.root_cause_flags.reserve(window);
    for (std::size_t i = start; i < start + window; ++i) {
      seq.event_ids.push_back(template_ids[i]);
      seq.positions.push_back(records[i].line_no);
      seq.root_cause_flags.push_back(records[i].anomaly_label);
      seq.seq_label = seq.seq_label || records[i].anomaly_label;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace chimera::parser
