// SPDX-License-Identifier: Apache-2.0
#pragma once
// Glue shared by the command-line tool and the acceptance suite: raw log to
// windows, checkpoints, and evaluation bundles.
#include <filesystem>
#include <string>
#include <vector>

#include "chimera/drain.hpp"
#include "chimera/embedding.hpp"
#include "chimera/evaluator.hpp"
#include "chimera/log_records.hpp"
#include "chimera/model.hpp"
#include "chimera/trainer.hpp"

namespace chimera {

struct ParsedLog {
  parser::DrainParser parser;
  std::vector<RawLogRecord> records;
  std::vector<int> template_ids;  // per record
  std::vector<EventSequence> sequences;
};

ParsedLog parse_records(std::vector<RawLogRecord> records, const parser::DrainOptions& options, std::size_t window,
                        std::size_t stride);

struct Checkpoint {
  TrainConfig config;
  parser::DrainOptions drain;
  std::vector<parser::LogTemplate> templates;  // may be empty
  EventVocabulary vocab;
  ModelParams params;
  double threshold = 0.5;
  std::size_t epoch = 0;
};

// Self-contained JSON document; doubles round-trip exactly.
std::string checkpoint_text(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct Evaluation {
  eval::DetectionMetrics detection;
  eval::RankingMetrics ranking;  // over every ground-truth anomalous sequence
  eval::BiasReport bias;
  eval::QuadrantCounts quadrants;
  int quadrant_k = 5;
  double threshold = 0.5;
  std::size_t sequences = 0;
  std::size_t anomalous = 0;
};

Evaluation evaluate(const ModelParams& params, const EventVocabulary& vocab, double threshold,
                    std::span<const EventSequence> sequences, int quadrant_k = 5);

std::vector<EventSequence> select(std::span<const EventSequence> sequences, std::span<const std::size_t> indices);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace chimera
