// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chimera/embedding.hpp"
#include "chimera/log_records.hpp"
#include "chimera/model.hpp"
#include "chimera/objectives.hpp"

namespace chimera {

struct TrainConfig {
  std::size_t window = 20;
  std::size_t stride = 20;
  double ratio_train = 6.0;
  double ratio_test = 3.0;
  double ratio_val = 1.0;
  double learning_rate = 1e-3;
  double lambda1 = 1.0;
  double lambda2 = 2.0;
  double lambda3 = 0.001;
  double lambda4 = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 7;
  bool disable_ilrl = false;
  bool disable_cda = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 5.0;
  std::size_t hidden = 64;
  std::size_t embed_dim = 32;
  // Hinge on pre-sigmoid localizer scores instead of sigmoid outputs.
  bool hinge_on_logits = false;
  // Alignment only over ground-truth anomalous sequences.
  bool align_anomalous_only = true;
  double default_threshold = 0.5;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
  // Weights after the ablation switches are applied.
  objectives::LossWeights weights() const;
};

// Sets one field from its text form. Throws ConfigError on unknown keys or
// unparsable values.
void set_config_field(TrainConfig& config, std::string_view key, std::string_view value);
// Flat "key = value" lines; '#' starts a comment.
TrainConfig parse_config(std::istream& in, TrainConfig base = {});
// Every field as key/value text, in declaration order.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);

struct DatasetSplit {
  std::vector<std::size_t> train, test, val;
};

// Seeded shuffle, then contiguous train/test/val blocks. Sizes are the
// floors of the normalized ratios with the remainder handed out by largest
// fractional part (ties: train, test, val).
DatasetSplit split_dataset(std::size_t count, double ratio_train, double ratio_test, double ratio_val,
                           std::uint64_t seed);

struct AdamWOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;

// Decoupled weight decay: p <- p (1 - lr wd), then the bias-corrected Adam
// update. Throws NonFiniteError naming the first parameter whose gradient is
// not finite, before touching any parameter.
void optimizer_step(const NamedTensors& params, std::span<const Tensor> grads, OptimizerState& state,
                    const AdamWOptions& options);

// Rescales gradients in place when their global L2 norm exceeds max_norm.
// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

// One batch through the network plus every loss term.
struct BatchForward {
  DetectorOutputs detector;
  LocalizerOutputs localizer;
  objectives::LossTerms terms;
  ad::Var total;
  bool localizer_active = false;
  bool align_active = false;
};

BatchForward forward_batch(const BoundModel& model, std::span<const std::vector<std::size_t>> rows,
                           const std::vector<bool>& labels, std::span<const objectives::MilPair> pairs,
                           const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  objectives::LossBreakdown train;
  double val_f1 = 0.0;
  double val_loss = 0.0;
  double threshold = 0.5;
  std::size_t batches = 0;
  std::size_t skipped_localizer = 0;  // batches missing a class
};

struct TrainResult {
  ModelParams params;  // best epoch
  EventVocabulary vocab;
  double threshold = 0.5;
  std::size_t best_epoch = 0;
  DatasetSplit split;
  std::vector<EpochLog> history;
};

struct TrainHooks {
  std::function<void(const EpochLog&, const ModelParams&, const EventVocabulary&)> on_epoch;
};

// One pass over `indices` in seeded mini-batches. Returns per-term averages
// over the batches where each term was active.
EpochLog train_epoch(ModelParams& params, OptimizerState& state, const EventVocabulary& vocab,
                     std::span<const EventSequence> data, std::span<const std::size_t> indices,
                     const TrainConfig& config, Rng& order_rng, Rng& pair_rng);

// Loss terms without parameter updates, with pairing drawn from `seed`.
objectives::LossBreakdown evaluate_losses(const ModelParams& params, const EventVocabulary& vocab,
                                          std::span<const EventSequence> data,
                                          std::span<const std::size_t> indices, const TrainConfig& config,
                                          std::uint64_t seed);

// Full run: split, vocabulary from the training split, initialization, then
// epochs with early stopping on validation F1 (ties: lower validation loss).
// `vectors` optionally overwrites embedding rows before training.
TrainResult train(const TrainConfig& config, std::span<const EventSequence> sequences,
                  const TrainHooks& hooks = {}, const std::map<int, std::vector<double>>* vectors = nullptr);

}  // namespace chimera
