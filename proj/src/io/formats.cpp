// SPDX-License-Identifier: Apache-2.0
#include "chimera/formats.hpp"

#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <string>

#include "chimera/error.hpp"

namespace chimera::formats {
namespace {

using nlohmann::json;

template <class F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw InputError("line " + std::to_string(row) + ": " + e.what());
    }
  }
}

}  // namespace

void write_sequences(std::ostream& out, const std::vector<EventSequence>& sequences) {
  for (const EventSequence& s : sequences) {
    json j;
    j["event_ids"] = s.event_ids;
    j["positions"] = s.positions;
    j["seq_label"] = s.seq_label;
    j["root_cause_flags"] = s.root_cause_flags;
    out << j.dump() << '\n';
  }
}

std::vector<EventSequence> read_sequences(std::istream& in) {
  std::vector<EventSequence> out;
  for_each_json_line(in, [&](const json& j) {
    EventSequence s;
    s.event_ids = j.at("event_ids").get<std::vector<int>>();
    s.positions = j.at("positions").get<std::vector<std::size_t>>();
    s.seq_label = j.at("seq_label").get<bool>();
    s.root_cause_flags = j.at("root_cause_flags").get<std::vector<bool>>();
    if (s.positions.size() != s.event_ids.size() || s.root_cause_flags.size() != s.event_ids.size()) {
      throw InputError("sequence fields differ in length");
    }
    bool any = false;
    for (bool f : s.root_cause_flags) any = any || f;
    if (any != s.seq_label) throw InputError("seq_label disagrees with root_cause_flags");
    out.push_back(std::move(s));
  });
  return out;
}

void write_templates(std::ostream& out, const std::vector<parser::LogTemplate>& templates) {
  for (const parser::LogTemplate& t : templates) {
    json j;
    j["template_id"] = t.template_id;
    j["template_string"] = t.text();
    j["match_count"] = t.match_count;
    out << j.dump() << '\n';
  }
}

std::vector<parser::LogTemplate> read_templates(std::istream& in) {
  std::vector<parser::LogTemplate> out;
  for_each_json_line(in, [&](const json& j) {
    parser::LogTemplate t;
    t.template_id = j.at("template_id").get<int>();
    t.tokens = parser::tokenize(j.at("template_string").get<std::string>());
    t.match_count = j.at("match_count").get<std::size_t>();
    if (t.tokens.empty()) throw InputError("empty template_string");
    out.push_back(std::move(t));
  });
  return out;
}

std::map<int, std::vector<double>> read_vectors(std::istream& in) {
  std::map<int, std::vector<double>> out;
  for_each_json_line(in, [&](const json& j) {
    out[j.at("template_id").get<int>()] = j.at("vector").get<std::vector<double>>();
  });
  return out;
}

std::vector<EventSequence> load_sequences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_sequences(in);
}

std::vector<parser::LogTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_templates(in);
}

}  // namespace chimera::formats
