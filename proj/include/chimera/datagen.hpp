// SPDX-License-Identifier: Apache-2.0
#pragma once
// Synthetic log corpora with injected fault bursts and exact root-cause
// line numbers.
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace chimera::datagen {

enum class SlotKind { Integer, Hex, Node, Path };

// Inclusive line-count ranges for the parts of one burst.
struct BurstShape {
  std::size_t before_min = 0, before_max = 2;
  std::size_t trigger_min = 1, trigger_max = 2;
  std::size_t after_min = 1, after_max = 3;
};

struct FaultSpec {
  int fault_type = 0;
  std::vector<std::size_t> triggers;  // template indices
  std::vector<std::size_t> symptoms;  // template indices
  // Hard mode only: contexts[i] must directly precede triggers[i] for it to
  // be a root cause.
  std::vector<std::size_t> contexts;
  double rate = 0.0;  // target fraction of labeled lines from this fault
  BurstShape burst;
};

struct CorpusSpec {
  std::size_t num_templates = 50;
  std::size_t num_lines = 40000;
  std::uint64_t seed = 7;
  std::vector<FaultSpec> faults;
  std::vector<SlotKind> slot_kinds{SlotKind::Integer, SlotKind::Hex, SlotKind::Node, SlotKind::Path};
  // Probability that a background line uses a symptom template.
  double symptom_noise = 0.01;
  // Triggers are background templates that only count after their context.
  bool hard_mode = false;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// 50 templates, 40,000 lines, three fault types with two triggers and three
// symptoms each, 5% labeled lines in total.
CorpusSpec default_spec(std::uint64_t seed = 7, bool hard_mode = false);

struct InjectedFault {
  int fault_type = 0;
  std::vector<std::size_t> trigger_lines;  // 1-based, labeled
  std::vector<std::size_t> symptom_lines;
  std::vector<std::size_t> context_lines;  // hard mode
};

struct TemplateInfo {
  std::string text;  // variable slots shown as the wildcard
  std::string role;  // "background", "trigger" or "symptom"
  int fault_type = -1;
};

struct Corpus {
  std::vector<std::string> lines;  // "timestamp content"
  std::vector<std::size_t> labeled_lines;
  std::vector<InjectedFault> faults;
  std::vector<TemplateInfo> templates;
  std::vector<std::size_t> line_templates;  // template index per line
};

Corpus generate_corpus(const CorpusSpec& spec);

// corpus.log, labels.txt (one line number per row), manifest.json.
struct CorpusFiles {
  std::filesystem::path log, labels, manifest;
};
CorpusFiles write_corpus(const Corpus& corpus, const CorpusSpec& spec, const std::filesystem::path& dir);

// Mean lines per burst for a shape, counting hard-mode context lines.
double mean_burst_length(const BurstShape& shape, bool hard_mode);

}  // namespace chimera::datagen
