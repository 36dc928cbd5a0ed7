// SPDX-License-Identifier: Apache-2.0
#include "chimera/embedding.hpp"

#include <algorithm>

#include "chimera/error.hpp"
#include "chimera/random.hpp"

namespace chimera {

EventVocabulary::EventVocabulary(std::vector<int> template_ids) : ids_(std::move(template_ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

std::size_t EventVocabulary::row(int template_id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), template_id);
  if (it == ids_.end() || *it != template_id) return unknown_row();
  return static_cast<std::size_t>(it - ids_.begin());
}

bool EventVocabulary::contains(int template_id) const {
  return std::binary_search(ids_.begin(), ids_.end(), template_id);
}

Embedding build_vocab(std::span<const parser::LogTemplate> templates, std::size_t dim, std::uint64_t seed) {
  std::vector<int> ids;
  ids.reserve(templates.size());
  for (const auto& t : templates) ids.push_back(t.template_id);
  return build_vocab(std::move(ids), dim, seed);
}

Embedding build_vocab(std::vector<int> ids, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embed_dim", "must be at least 1");
  if (ids.empty()) throw InputError("build_vocab: empty template list");
  Embedding out{EventVocabulary(std::move(ids)), Tensor()};
  out.table = Tensor(Shape{out.vocab.rows(), dim});
  Rng rng = Rng::derive(seed, "embedding");
  for (double& v : out.table.data()) v = rng.uniform(-0.1, 0.1);
  return out;
}

std::vector<std::size_t> sequence_rows(const EventVocabulary& vocab, const EventSequence& seq) {
  std::vector<std::size_t> rows;
  rows.reserve(seq.size());
  for (int id : seq.event_ids) rows.push_back(vocab.row(id));
  return rows;
}

ad::Var embed_sequence(ad::Var table, const EventVocabulary& vocab, const EventSequence& seq) {
  if (table.shape().size() != 2 || table.shape()[0] != vocab.rows()) {
    throw ShapeError("embed_sequence: table rows do not match vocabulary");
  }
  const std::vector<std::size_t> rows = sequence_rows(vocab, seq);
  return ad::gather_rows(table, rows);
}

std::size_t import_vectors(Embedding& embedding, const std::map<int, std::vector<double>>& vectors) {
  const std::size_t dim = embedding.table.cols();
  std::size_t replaced = 0;
  for (const auto& [id, vec] : vectors) {
    if (!embedding.vocab.contains(id)) continue;
    if (vec.size() != dim) {
      throw ShapeError("imported vector for template " + std::to_string(id) + " has width " +
                       std::to_string(vec.size()) + ", expected " + std::to_string(dim));
    }
    std::copy(vec.begin(), vec.end(), embedding.table.data().begin() + embedding.vocab.row(id) * dim);
    ++replaced;
  }
  return replaced;
}

}  // namespace chimera
