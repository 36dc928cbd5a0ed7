// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared-private encoder network with an attention detector and a scoring
// localizer.
//
// Three GRU encoders read the same embedded window: one private to the
// detector, one private to the localizer, and one shared. The detector sees
// private + shared, as does the localizer. Everything below works on batches:
// a window of n events over B sequences is a list of n tensors of shape
// [B, width], one per position.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chimera/autodiff.hpp"
#include "chimera/embedding.hpp"
#include "chimera/log_records.hpp"
#include "chimera/tensor.hpp"

namespace chimera {

// GRU without biases. Each matrix is [hidden, hidden + input] and is applied
// to the concatenation [H_{t-1}, e_t]. H_0 is zero.
struct GruParams {
  Tensor update;
  Tensor reset;
  Tensor candidate;
};

struct ModelParams {
  GruParams det_private;
  GruParams loc_private;
  GruParams shared;
  Tensor attention;   // [1, hidden]
  Tensor det_weight;  // [1, hidden]
  Tensor det_bias;    // [1]
  Tensor loc_weight;  // [1, hidden]
  Tensor loc_bias;    // [1]
  Tensor embedding;   // [vocab rows, embed dim]

  std::size_t hidden() const { return attention.cols(); }
  std::size_t embed_dim() const { return embedding.cols(); }
};

// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight except the
// embedding table, which is taken as given.
ModelParams init_model(Tensor embedding, std::size_t hidden, std::uint64_t seed);

// Stable name -> tensor listing, in a fixed order.
std::vector<std::pair<std::string, Tensor*>> named_parameters(ModelParams& params);
std::vector<std::pair<std::string, const Tensor*>> named_parameters(const ModelParams& params);

// Throws ShapeError unless every tensor agrees on hidden and embed widths.
void validate_shapes(const ModelParams& params);

// ---------------------------------------------------------------------------
// Tape-level forward pass.

struct BoundGru {
  ad::Var update, reset, candidate;
};

struct BoundModel {
  BoundGru det_private, loc_private, shared;
  ad::Var attention, det_weight, det_bias, loc_weight, loc_bias, embedding;
};

// Registers every parameter on the tape, as trainable leaves or constants.
BoundModel bind(ad::Tape& tape, const ModelParams& params, bool trainable);
std::vector<ad::Var> bound_parameters(const BoundModel& model);

// One [B, dim] tensor per window position. `rows[b][t]` is the embedding row
// of sequence b at position t.
std::vector<ad::Var> embed_batch(ad::Var table, std::span<const std::vector<std::size_t>> rows);

// Hidden states H_1..H_n, each [B, hidden].
std::vector<ad::Var> gru_encode(const BoundGru& gru, std::span<const ad::Var> inputs);

struct EncodedViews {
  std::vector<ad::Var> det_private, loc_private, shared;
  std::vector<ad::Var> det, loc;  // private + shared
};

EncodedViews encode_views(const BoundModel& model, std::span<const ad::Var> inputs);

struct DetectorOutputs {
  ad::Var logit;      // [B, 1]
  ad::Var y_hat;      // [B, 1]
  ad::Var alpha;      // [B, n] raw tanh attention scores
  ad::Var attention;  // [B, n] softmax of alpha
};

DetectorOutputs detect(const BoundModel& model, const EncodedViews& views);

struct LocalizerOutputs {
  ad::Var logits;        // [B, n] pre-sigmoid scores
  ad::Var scores;        // [B, n] sigmoid(logits)
  ad::Var distribution;  // [B, n] softmax(logits)
};

LocalizerOutputs localize(const BoundModel& model, const EncodedViews& views);

// ---------------------------------------------------------------------------
// Inference without gradients.

struct DiagnosisOutput {
  double y_hat = 0.0;
  std::vector<double> p;
  std::vector<double> alpha_raw;
  std::vector<double> attention;
  std::vector<double> root_cause;
};

std::vector<DiagnosisOutput> diagnose(const ModelParams& params, const EventVocabulary& vocab,
                                      std::span<const EventSequence> sequences,
                                      std::size_t batch_size = 256);

}  // namespace chimera
