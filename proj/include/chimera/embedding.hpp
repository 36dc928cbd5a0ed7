// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "chimera/autodiff.hpp"
#include "chimera/drain.hpp"
#include "chimera/log_records.hpp"
#include "chimera/tensor.hpp"

namespace chimera {

// Dense row indices for known template ids, plus one reserved unknown row
// at the end.
class EventVocabulary {
 public:
  EventVocabulary() = default;
  explicit EventVocabulary(std::vector<int> template_ids);

  std::size_t row(int template_id) const;
  bool contains(int template_id) const;
  std::size_t unknown_row() const noexcept { return ids_.size(); }
  // Known ids plus the unknown row.
  std::size_t rows() const noexcept { return ids_.size() + 1; }
  const std::vector<int>& template_ids() const noexcept { return ids_; }

 private:
  std::vector<int> ids_;  // sorted, unique
};

struct Embedding {
  EventVocabulary vocab;
  Tensor table;  // [vocab.rows(), dim]
};

// Table drawn from seeded uniform(-0.1, 0.1). Throws on dim 0 or an empty
// template list.
Embedding build_vocab(std::span<const parser::LogTemplate> templates, std::size_t dim, std::uint64_t seed);

Embedding build_vocab(std::vector<int> template_ids, std::size_t dim, std::uint64_t seed);

std::vector<std::size_t> sequence_rows(const EventVocabulary& vocab, const EventSequence& seq);

// [n, dim] lookup; participates in autodiff through `table`.
ad::Var embed_sequence(ad::Var table, const EventVocabulary& vocab, const EventSequence& seq);

// Overwrites rows with imported vectors. Ids outside the vocabulary are
// ignored; returns the number of rows replaced.
std::size_t import_vectors(Embedding& embedding, const std::map<int, std::vector<double>>& vectors);

}  // namespace chimera
