// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON-lines readers and writers for the files exchanged between commands.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "chimera/drain.hpp"
#include "chimera/log_records.hpp"

namespace chimera::formats {

// {event_ids, positions, seq_label, root_cause_flags}
void write_sequences(std::ostream& out, const std::vector<EventSequence>& sequences);
std::vector<EventSequence> read_sequences(std::istream& in);

// {template_id, template_string, match_count}
void write_templates(std::ostream& out, const std::vector<parser::LogTemplate>& templates);
std::vector<parser::LogTemplate> read_templates(std::istream& in);

// {template_id, vector}
std::map<int, std::vector<double>> read_vectors(std::istream& in);

std::vector<EventSequence> load_sequences(const std::filesystem::path& path);
std::vector<parser::LogTemplate> load_templates(const std::filesystem::path& path);

}  // namespace chimera::formats
