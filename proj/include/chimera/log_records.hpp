// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace chimera {

struct RawLogRecord {
  std::size_t line_no = 0;  // 1-based line in the source file
  std::string timestamp;    // opaque; empty when the line has none
  std::string content;
  bool anomaly_label = false;
};

// A fixed-length window of parsed events.
struct EventSequence {
  std::vector<int> event_ids;
  std::vector<std::size_t> positions;
  bool seq_label = false;
  std::vector<bool> root_cause_flags;

  std::size_t size() const noexcept { return event_ids.size(); }
};

namespace parser {

// Splits a leading "YYYY-MM-DD[T ]hh:mm:ss[.frac]" stamp off a raw line.
std::pair<std::string, std::string> split_timestamp(std::string_view line);

// Anomalous line numbers, one integer per line; blank lines ignored.
std::set<std::size_t> read_label_lines(std::istream& in);

struct LogReadOptions {
  // Leading "+ " marks an anomalous line and "- " a normal one.
  bool inline_markers = false;
  const std::set<std::size_t>* anomalous_lines = nullptr;
};

// Blank lines are skipped but still advance the line counter.
std::vector<RawLogRecord> read_log(std::istream& in, const LogReadOptions& options);

std::vector<RawLogRecord> read_log_file(const std::filesystem::path& log,
                                        const std::optional<std::filesystem::path>& labels,
                                        bool inline_markers);

// Consecutive windows of `window` records starting every `stride` records.
// `template_ids[i]` is the parsed event of `records[i]`. The trailing partial
// window is dropped.
std::vector<EventSequence> window_sequences(std::span<const RawLogRecord> records,
                                            std::span<const int> template_ids, std::size_t window,
                                            std::size_t stride);

}  // namespace parser
}  // namespace chimera
