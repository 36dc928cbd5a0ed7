// SPDX-License-Identifier: Apache-2.0
#include "chimera/model.hpp"

#include <algorithm>
#include <cmath>

#include "chimera/error.hpp"
#include "chimera/random.hpp"

namespace chimera {
namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

GruParams init_gru(std::size_t hidden, std::size_t input, Rng& rng) {
  const std::size_t fan_in = hidden + input;
  GruParams g;
  g.update = uniform_init(Shape{hidden, fan_in}, fan_in, rng);
  g.reset = uniform_init(Shape{hidden, fan_in}, fan_in, rng);
  g.candidate = uniform_init(Shape{hidden, fan_in}, fan_in, rng);
  return g;
}

template <class P, class T>
std::vector<std::pair<std::string, T*>> list_params(P& p) {
  return {
      {"enc_private_det.update", &p.det_private.update},
      {"enc_private_det.reset", &p.det_private.reset},
      {"enc_private_det.candidate", &p.det_private.candidate},
      {"enc_private_loc.update", &p.loc_private.update},
      {"enc_private_loc.reset", &p.loc_private.reset},
      {"enc_private_loc.candidate", &p.loc_private.candidate},
      {"enc_shared.update", &p.shared.update},
      {"enc_shared.reset", &p.shared.reset},
      {"enc_shared.candidate", &p.shared.candidate},
      {"attn.weight", &p.attention},
      {"det_head.weight", &p.det_weight},
      {"det_head.bias", &p.det_bias},
      {"loc_head.weight", &p.loc_weight},
      {"loc_head.bias", &p.loc_bias},
      {"embedding.table", &p.embedding},
  };
}

BoundGru bind_gru(ad::Tape& tape, const GruParams& g, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  return BoundGru{put(g.update), put(g.reset), put(g.candidate)};
}

Tensor var_row(const ad::Var& v, std::size_t row) {
  const Tensor& t = v.value();
  const std::size_t n = t.cols();
  return Tensor(Shape{n}, std::vector<double>(t.data().begin() + row * n, t.data().begin() + (row + 1) * n));
}

}  // namespace

ModelParams init_model(Tensor embedding, std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("hidden", "must be at least 1");
  if (embedding.rank() != 2 || embedding.cols() == 0) throw ShapeError("init_model: embedding must be [rows, dim]");
  Rng rng = Rng::derive(seed, "model-init");
  const std::size_t dim = embedding.cols();
  ModelParams p;
  p.det_private = init_gru(hidden, dim, rng);
  p.loc_private = init_gru(hidden, dim, rng);
  p.shared = init_gru(hidden, dim, rng);
  p.attention = uniform_init(Shape{1, hidden}, hidden, rng);
  p.det_weight = uniform_init(Shape{1, hidden}, hidden, rng);
  p.det_bias = uniform_init(Shape{1}, hidden, rng);
  p.loc_weight = uniform_init(Shape{1, hidden}, hidden, rng);
  p.loc_bias = uniform_init(Shape{1}, hidden, rng);
  p.embedding = std::move(embedding);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> named_parameters(ModelParams& params) {
  return list_params<ModelParams, Tensor>(params);
}

std::vector<std::pair<std::string, const Tensor*>> named_parameters(const ModelParams& params) {
  return list_params<const ModelParams, const Tensor>(params);
}

void validate_shapes(const ModelParams& p) {
  const std::size_t h = p.attention.rank() == 2 ? p.attention.cols() : 0;
  const std::size_t d = p.embedding.rank() == 2 ? p.embedding.cols() : 0;
  if (h == 0 || d == 0) throw ShapeError("model: missing attention or embedding tensor");
  const Shape gate{h, h + d};
  for (const GruParams* g : {&p.det_private, &p.loc_private, &p.shared}) {
    for (const Tensor* t : {&g->update, &g->reset, &g->candidate}) {
      if (t->shape() != gate) throw ShapeError("model: GRU matrix " + shape_string(t->shape()) + ", expected " + shape_string(gate));
    }
  }
  const Shape row{1, h};
  if (p.attention.shape() != row || p.det_weight.shape() != row || p.loc_weight.shape() != row) {
    throw ShapeError("model: head weights must be [1, hidden]");
  }
  if (p.det_bias.size() != 1 || p.loc_bias.size() != 1) throw ShapeError("model: head biases must hold one value");
}

BoundModel bind(ad::Tape& tape, const ModelParams& p, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  BoundModel m;
  m.det_private = bind_gru(tape, p.det_private, trainable);
  m.loc_private = bind_gru(tape, p.loc_private, trainable);
  m.shared = bind_gru(tape, p.shared, trainable);
  m.attention = put(p.attention);
  m.det_weight = put(p.det_weight);
  m.det_bias = put(p.det_bias);
  m.loc_weight = put(p.loc_weight);
  m.loc_bias = put(p.loc_bias);
  m.embedding = put(p.embedding);
  return m;
}

std::vector<ad::Var> bound_parameters(const BoundModel& m) {
  // Same order as named_parameters().
  return {m.det_private.update, m.det_private.reset, m.det_private.candidate,
          m.loc_private.update, m.loc_private.reset, m.loc_private.candidate,
          m.shared.update,      m.shared.reset,      m.shared.candidate,
          m.attention,          m.det_weight,        m.det_bias,
          m.loc_weight,         m.loc_bias,          m.embedding};
}

std::vector<ad::Var> embed_batch(ad::Var table, std::span<const std::vector<std::size_t>> rows) {
  if (rows.empty()) throw ShapeError("embed_batch: empty batch");
  const std::size_t n = rows[0].size();
  std::vector<ad::Var> steps;
  steps.reserve(n);
  std::vector<std::size_t> column(rows.size());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (rows[b].size() != n) throw ShapeError("embed_batch: ragged window lengths");
      column[b] = rows[b][t];
    }
    steps.push_back(ad::gather_rows(table, column));
  }
  return steps;
}

std::vector<ad::Var> gru_encode(const BoundGru& gru, std::span<const ad::Var> inputs) {
  if (inputs.empty()) return {};
  const std::size_t hidden = gru.update.shape()[0];
  const std::size_t batch = inputs[0].shape()[0];
  ad::Tape& tape = gru.update.tape();
  ad::Var h = tape.constant(Tensor(Shape{batch, hidden}));
  std::vector<ad::Var> states;
  states.reserve(inputs.size());
  for (const ad::Var& e : inputs) {
    const ad::Var he[] = {h, e};
    const ad::Var joined = ad::concat_cols(he);
    const ad::Var z = ad::sigmoid(ad::matmul_nt(joined, gru.update));
    const ad::Var r = ad::sigmoid(ad::matmul_nt(joined, gru.reset));
    const ad::Var gated[] = {r * h, e};
    const ad::Var candidate = ad::tanh(ad::matmul_nt(ad::concat_cols(gated), gru.candidate));
    // (1 - z) * H_{t-1} + z * candidate == H_{t-1} + z * (candidate - H_{t-1})
    h = h + z * (candidate - h);
    states.push_back(h);
  }
  return states;
}

EncodedViews encode_views(const BoundModel& model, std::span<const ad::Var> inputs) {
  EncodedViews v;
  v.det_private = gru_encode(model.det_private, inputs);
  v.loc_private = gru_encode(model.loc_private, inputs);
  v.shared = gru_encode(model.shared, inputs);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    v.det.push_back(v.det_private[t] + v.shared[t]);
    v.loc.push_back(v.loc_private[t] + v.shared[t]);
  }
  return v;
}

DetectorOutputs detect(const BoundModel& model, const EncodedViews& views) {
  if (views.det.empty()) throw ShapeError("detect: empty window");
  std::vector<ad::Var> alphas;
  alphas.reserve(views.det.size());
  ad::Var pooled;
  for (const ad::Var& h : views.det) {
    const ad::Var a = ad::tanh(ad::matmul_nt(h, model.attention));  // [B, 1]
    const ad::Var weighted = ad::mul_col(h, a);
    pooled = pooled.valid() ? pooled + weighted : weighted;
    alphas.push_back(a);
  }
  DetectorOutputs out;
  out.logit = ad::add_row(ad::matmul_nt(pooled, model.det_weight), model.det_bias);
  out.y_hat = ad::sigmoid(out.logit);
  out.alpha = ad::concat_cols(alphas);
  out.attention = ad::softmax_rows(out.alpha);
  return out;
}

LocalizerOutputs localize(const BoundModel& model, const EncodedViews& views) {
  if (views.loc.empty()) throw ShapeError("localize: empty window");
  std::vector<ad::Var> logits;
  logits.reserve(views.loc.size());
  for (const ad::Var& h : views.loc) {
    logits.push_back(ad::add_row(ad::matmul_nt(h, model.loc_weight), model.loc_bias));
  }
  LocalizerOutputs out;
  out.logits = ad::concat_cols(logits);
  out.scores = ad::sigmoid(out.logits);
  out.distribution = ad::softmax_rows(out.logits);
  return out;
}

std::vector<DiagnosisOutput> diagnose(const ModelParams& params, const EventVocabulary& vocab,
                                      std::span<const EventSequence> sequences, std::size_t batch_size) {
  validate_shapes(params);
  if (params.embedding.rows() != vocab.rows()) throw ShapeError("diagnose: vocabulary does not match embedding");
  std::vector<DiagnosisOutput> out;
  out.reserve(sequences.size());
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (std::size_t start = 0; start < sequences.size(); start += batch_size) {
    const std::size_t end = std::min(sequences.size(), start + batch_size);
    std::vector<std::vector<std::size_t>> rows;
    for (std::size_t i = start; i < end; ++i) rows.push_back(sequence_rows(vocab, sequences[i]));
    ad::Tape tape;
    const BoundModel model = bind(tape, params, false);
    const auto inputs = embed_batch(model.embedding, rows);
    const EncodedViews views = encode_views(model, inputs);
    const DetectorOutputs det = detect(model, views);
    const LocalizerOutputs loc = localize(model, views);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      DiagnosisOutput d;
      d.y_hat = det.y_hat.value()[b];
      d.p = var_row(loc.scores, b).storage();
      d.alpha_raw = var_row(det.alpha, b).storage();
      d.attention = var_row(det.attention, b).storage();
      d.root_cause = var_row(loc.distribution, b).storage();
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace chimera
