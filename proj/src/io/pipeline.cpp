// SPDX-License-Identifier: Apache-2.0
#include "chimera/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "chimera/error.hpp"

namespace chimera {
namespace {

using nlohmann::ordered_json;

constexpr const char* kFormat = "chimera-checkpoint";
constexpr int kFormatVersion = 1;

ordered_json tensor_json(const Tensor& t) {
  return ordered_json{{"shape", t.shape()}, {"data", t.storage()}};
}

Tensor tensor_from(const ordered_json& j) {
  Shape shape = j.at("shape").get<Shape>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (shape_size(shape) != data.size()) throw InputError("checkpoint: tensor data does not match its shape");
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

ParsedLog parse_records(std::vector<RawLogRecord> records, const parser::DrainOptions& options, std::size_t window,
                        std::size_t stride) {
  ParsedLog out{parser::DrainParser(options), std::move(records), {}, {}};
  out.template_ids.reserve(out.records.size());
  for (const RawLogRecord& r : out.records) out.template_ids.push_back(out.parser.parse(r.content));
  out.sequences = parser::window_sequences(out.records, out.template_ids, window, stride);
  return out;
}

std::string checkpoint_text(const Checkpoint& c) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kFormatVersion;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config_entries(c.config)) cfg[k] = v;
  j["config"] = cfg;
  j["drain"] = {{"depth", c.drain.depth},
                {"similarity_threshold", c.drain.similarity_threshold},
                {"max_children", c.drain.max_children}};
  ordered_json templates = ordered_json::array();
  for (const parser::LogTemplate& t : c.templates) {
    templates.push_back({{"template_id", t.template_id}, {"tokens", t.tokens}, {"match_count", t.match_count}});
  }
  j["templates"] = templates;
  j["vocab"] = c.vocab.template_ids();
  j["threshold"] = c.threshold;
  j["epoch"] = c.epoch;
  ordered_json tensors = ordered_json::object();
  for (const auto& [name, t] : named_parameters(c.params)) tensors[name] = tensor_json(*t);
  j["tensors"] = tensors;
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw InputError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format") != kFormat) throw InputError("checkpoint: unknown format");
    if (j.at("version") != kFormatVersion) throw InputError("checkpoint: unsupported version");
    Checkpoint c;
    for (const auto& [k, v] : j.at("config").items()) set_config_field(c.config, k, v.get<std::string>());
    const ordered_json& d = j.at("drain");
    c.drain = parser::DrainOptions{d.at("depth").get<int>(), d.at("similarity_threshold").get<double>(),
                                   d.at("max_children").get<std::size_t>()};
    for (const ordered_json& t : j.at("templates")) {
      c.templates.push_back(parser::LogTemplate{t.at("template_id").get<int>(),
                                                t.at("tokens").get<std::vector<std::string>>(),
                                                t.at("match_count").get<std::size_t>()});
    }
    c.vocab = EventVocabulary(j.at("vocab").get<std::vector<int>>());
    c.threshold = j.at("threshold").get<double>();
    c.epoch = j.at("epoch").get<std::size_t>();
    const ordered_json& tensors = j.at("tensors");
    for (auto& [name, t] : named_parameters(c.params)) *t = tensor_from(tensors.at(name));
    validate_shapes(c.params);
    if (c.params.embedding.rows() != c.vocab.rows()) throw ShapeError("checkpoint: vocabulary and embedding disagree");
    return c;
  } catch (const ordered_json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << checkpoint_text(ckpt);
  if (!out) throw Error("cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

std::vector<EventSequence> select(std::span<const EventSequence> sequences, std::span<const std::size_t> indices) {
  std::vector<EventSequence> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(sequences[i]);
  return out;
}

Evaluation evaluate(const ModelParams& params, const EventVocabulary& vocab, double threshold,
                    std::span<const EventSequence> sequences, int quadrant_k) {
  Evaluation e;
  e.threshold = threshold;
  e.quadrant_k = quadrant_k;
  e.sequences = sequences.size();
  const std::vector<eval::RankingCase> cases = eval::score_cases(params, vocab, sequences, threshold);
  std::vector<bool> pred, labels;
  std::vector<eval::RankingCase> anomalous;
  for (const eval::RankingCase& c : cases) {
    pred.push_back(c.detected);
    labels.push_back(c.label);
    if (c.label) anomalous.push_back(c);
  }
  e.anomalous = anomalous.size();
  e.detection = eval::detection_metrics(pred, labels);
  e.ranking = eval::ranking_metrics(anomalous);
  e.bias = eval::bias_study(cases);
  e.quadrants = eval::quadrant_study(cases, quadrant_k);
  return e;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

}  // namespace chimera
