// SPDX-License-Identifier: Apache-2.0
#include "chimera/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>

#include "chimera/error.hpp"
#include "chimera/evaluator.hpp"

namespace chimera {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string(key), "expected a number, got '" + t + "'");
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(std::string(key), "expected a non-negative integer, got '" + t + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(std::string(key), "expected a boolean, got '" + t + "'");
}

std::string format_double(double v) {
  // Shortest text that reads back to the same double.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Per-field accessors shared by parsing and printing.
template <class Visitor>
void visit_fields(TrainConfig& c, Visitor&& v) {
  v("window", c.window);
  v("stride", c.stride);
  v("ratio_train", c.ratio_train);
  v("ratio_test", c.ratio_test);
  v("ratio_val", c.ratio_val);
  v("learning_rate", c.learning_rate);
  v("lambda1", c.lambda1);
  v("lambda2", c.lambda2);
  v("lambda3", c.lambda3);
  v("lambda4", c.lambda4);
  v("batch_size", c.batch_size);
  v("epochs", c.epochs);
  v("patience", c.patience);
  v("seed", c.seed);
  v("disable_ilrl", c.disable_ilrl);
  v("disable_cda", c.disable_cda);
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("epsilon", c.epsilon);
  v("weight_decay", c.weight_decay);
  v("clip_norm", c.clip_norm);
  v("hidden", c.hidden);
  v("embed_dim", c.embed_dim);
  v("hinge_on_logits", c.hinge_on_logits);
  v("align_anomalous_only", c.align_anomalous_only);
  v("default_threshold", c.default_threshold);
}

std::vector<std::size_t> labelled_rows(const std::vector<bool>& labels, bool anomalous_only) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] || !anomalous_only) rows.push_back(i);
  return rows;
}

struct BatchData {
  std::vector<std::vector<std::size_t>> rows;
  std::vector<bool> labels;
};

BatchData gather_batch(const EventVocabulary& vocab, std::span<const EventSequence> data,
                       std::span<const std::size_t> indices) {
  BatchData b;
  for (std::size_t idx : indices) {
    b.rows.push_back(sequence_rows(vocab, data[idx]));
    b.labels.push_back(data[idx].seq_label);
  }
  return b;
}

bool all_zero(const objectives::LossWeights& w) {
  return w.detector == 0.0 && w.localizer == 0.0 && w.disentangle == 0.0 && w.align == 0.0;
}

// Running per-term means over the batches where each term was active.
struct TermAverager {
  double sums[4] = {0, 0, 0, 0};
  std::size_t counts[4] = {0, 0, 0, 0};

  void add(const BatchForward& fb, const objectives::LossWeights& w) {
    sums[0] += fb.terms.detector.value().item();
    ++counts[0];
    if (fb.localizer_active) {
      sums[1] += fb.terms.localizer.value().item();
      ++counts[1];
    }
    if (w.disentangle > 0.0) {
      sums[2] += fb.terms.disentangle.value().item();
      ++counts[2];
    }
    if (fb.align_active) {
      sums[3] += fb.terms.align.value().item();
      ++counts[3];
    }
  }

  objectives::LossBreakdown result(const objectives::LossWeights& w) const {
    auto mean = [&](int i) { return counts[i] ? sums[i] / static_cast<double>(counts[i]) : 0.0; };
    objectives::LossBreakdown b{mean(0), mean(1), mean(2), mean(3), 0.0};
    b.total = objectives::total_loss(b, w);
    return b;
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (window < 1) throw ConfigError("window", "must be at least 1");
  if (stride < 1) throw ConfigError("stride", "must be at least 1");
  for (auto [name, v] : {std::pair{"ratio_train", ratio_train}, {"ratio_test", ratio_test}, {"ratio_val", ratio_val}}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name, "split ratios must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  for (auto [name, v] : {std::pair{"lambda1", lambda1}, {"lambda2", lambda2}, {"lambda3", lambda3}, {"lambda4", lambda4}}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name, "loss weights must be non-negative");
  }
  if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (epochs < 1) throw ConfigError("epochs", "must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be non-negative");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", "must be positive");
  if (hidden < 1) throw ConfigError("hidden", "must be at least 1");
  if (embed_dim < 1) throw ConfigError("embed_dim", "must be at least 1");
  if (!(default_threshold > 0.0 && default_threshold < 1.0)) {
    throw ConfigError("default_threshold", "must lie in (0, 1)");
  }
}

objectives::LossWeights TrainConfig::weights() const {
  return objectives::LossWeights{lambda1, lambda2, disable_ilrl ? 0.0 : lambda3, disable_cda ? 0.0 : lambda4};
}

void set_config_field(TrainConfig& config, std::string_view key, std::string_view value) {
  bool found = false;
  visit_fields(config, [&](std::string_view name, auto& field) {
    if (name != key) return;
    found = true;
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, bool>) {
      field = parse_bool(key, value);
    } else if constexpr (std::is_floating_point_v<T>) {
      field = parse_double(key, value);
    } else {
      field = static_cast<T>(parse_uint(key, value));
    }
  });
  if (!found) throw ConfigError(std::string(key), "unknown configuration key");
}

TrainConfig parse_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(row), "expected 'key = value'");
    }
    set_config_field(base, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
  return base;
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  TrainConfig copy = config;
  visit_fields(copy, [&](std::string_view name, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, bool>) {
      out.emplace_back(name, field ? "true" : "false");
    } else if constexpr (std::is_floating_point_v<T>) {
      out.emplace_back(name, format_double(field));
    } else {
      out.emplace_back(name, std::to_string(field));
    }
  });
  return out;
}

DatasetSplit split_dataset(std::size_t count, double ratio_train, double ratio_test, double ratio_val,
                           std::uint64_t seed) {
  if (count == 0) throw InputError("split_dataset: no sequences");
  const double sum = ratio_train + ratio_test + ratio_val;
  if (!(ratio_train > 0 && ratio_test > 0 && ratio_val > 0) || !std::isfinite(sum)) {
    throw ConfigError("ratio", "split ratios must be positive");
  }
  const double shares[3] = {ratio_train / sum, ratio_test / sum, ratio_val / sum};
  std::size_t sizes[3];
  double frac[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = shares[i] * static_cast<double>(count);
    // Guard against 59.99999 style rounding of exact multiples.
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < count) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++sizes[best];
    frac[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, "split");
  rng.shuffle(std::span<std::size_t>(order));

  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
                    order.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), order.end());
  return split;
}

void optimizer_step(const NamedTensors& params, std::span<const Tensor> grads, OptimizerState& state,
                    const AdamWOptions& o) {
  if (grads.size() != params.size()) throw ShapeError("optimizer_step: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].second->shape()) {
      throw ShapeError("optimizer_step: gradient shape mismatch for " + params[i].first);
    }
    if (!grads[i].all_finite()) throw NonFiniteError("non-finite gradient for parameter " + params[i].first);
  }
  if (state.first_moment.empty()) {
    for (const auto& [name, p] : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  const double decay = 1.0 - o.learning_rate * o.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].second;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] = p[j] * decay - o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.data()) v *= s;
  }
  return norm;
}

BatchForward forward_batch(const BoundModel& model, std::span<const std::vector<std::size_t>> rows,
                           const std::vector<bool>& labels, std::span<const objectives::MilPair> pairs,
                           const TrainConfig& config) {
  const objectives::LossWeights w = config.weights();
  ad::Tape& tape = model.embedding.tape();
  const std::vector<ad::Var> inputs = embed_batch(model.embedding, rows);
  const EncodedViews views = encode_views(model, inputs);

  BatchForward fb;
  fb.detector = detect(model, views);
  fb.localizer = localize(model, views);
  const ad::Var zero = tape.constant(Tensor::scalar(0.0));

  fb.terms.detector = objectives::detector_loss(fb.detector.y_hat, labels);
  fb.localizer_active = w.localizer > 0.0 && !pairs.empty();
  fb.terms.localizer =
      fb.localizer_active
          ? objectives::localizer_loss(config.hinge_on_logits ? fb.localizer.logits : fb.localizer.scores, pairs)
          : zero;
  fb.terms.disentangle = w.disentangle > 0.0 ? objectives::disentangle_loss(views) : zero;
  const std::vector<std::size_t> align_rows = labelled_rows(labels, config.align_anomalous_only);
  fb.align_active = w.align > 0.0 && !align_rows.empty();
  fb.terms.align = fb.align_active
                       ? objectives::align_loss(fb.detector.attention, fb.localizer.distribution, align_rows)
                       : zero;
  fb.total = objectives::total_loss(fb.terms, w);
  return fb;
}

EpochLog train_epoch(ModelParams& params, OptimizerState& state, const EventVocabulary& vocab,
                     std::span<const EventSequence> data, std::span<const std::size_t> indices,
                     const TrainConfig& config, Rng& order_rng, Rng& pair_rng) {
  if (indices.empty()) throw InputError("train_epoch: empty training split");
  const objectives::LossWeights w = config.weights();
  const AdamWOptions opt{config.learning_rate, config.beta1, config.beta2, config.epsilon, config.weight_decay};
  const NamedTensors named = named_parameters(params);

  std::vector<std::size_t> order(indices.begin(), indices.end());
  order_rng.shuffle(std::span<std::size_t>(order));

  EpochLog log;
  TermAverager avg;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    const BatchData batch = gather_batch(vocab, data, std::span(order).subspan(start, end - start));
    const std::vector<objectives::MilPair> pairs = objectives::pair_batch(batch.labels, pair_rng);

    ad::Tape tape;
    const BoundModel model = bind(tape, params, true);
    const BatchForward fb = forward_batch(model, batch.rows, batch.labels, pairs, config);
    avg.add(fb, w);
    ++log.batches;
    if (!fb.localizer_active) ++log.skipped_localizer;
    // With every weight at zero there is no objective to step on.
    if (all_zero(w)) continue;

    const ad::GradientMap grads = tape.backward(fb.total);
    std::vector<Tensor> g;
    for (const ad::Var& v : bound_parameters(model)) g.push_back(grads.grad(v));
    clip_global_norm(g, config.clip_norm);
    optimizer_step(named, g, state, opt);
  }
  log.train = avg.result(w);
  return log;
}

objectives::LossBreakdown evaluate_losses(const ModelParams& params, const EventVocabulary& vocab,
                                          std::span<const EventSequence> data,
                                          std::span<const std::size_t> indices, const TrainConfig& config,
                                          std::uint64_t seed) {
  const objectives::LossWeights w = config.weights();
  Rng pair_rng = Rng::derive(seed, "eval-pairs");
  TermAverager avg;
  const std::size_t step = std::max<std::size_t>(config.batch_size, 1);
  for (std::size_t start = 0; start < indices.size(); start += step) {
    const std::size_t end = std::min(indices.size(), start + step);
    const BatchData batch = gather_batch(vocab, data, indices.subspan(start, end - start));
    const auto pairs = objectives::pair_batch(batch.labels, pair_rng);
    ad::Tape tape;
    const BoundModel model = bind(tape, params, false);
    avg.add(forward_batch(model, batch.rows, batch.labels, pairs, config), w);
  }
  return avg.result(w);
}

TrainResult train(const TrainConfig& config, std::span<const EventSequence> sequences, const TrainHooks& hooks,
                  const std::map<int, std::vector<double>>* vectors) {
  config.validate();
  if (sequences.empty()) throw InputError("train: no sequences");
  for (const EventSequence& s : sequences) {
    if (s.size() != sequences[0].size()) throw InputError("train: sequences differ in window length");
  }

  TrainResult result;
  result.split = split_dataset(sequences.size(), config.ratio_train, config.ratio_test, config.ratio_val, config.seed);
  if (result.split.train.empty()) throw InputError("train: empty training split");

  std::vector<int> ids;
  for (std::size_t idx : result.split.train)
    ids.insert(ids.end(), sequences[idx].event_ids.begin(), sequences[idx].event_ids.end());
  Embedding emb = build_vocab(std::move(ids), config.embed_dim, config.seed);
  if (vectors) import_vectors(emb, *vectors);
  result.vocab = emb.vocab;
  ModelParams params = init_model(std::move(emb.table), config.hidden, config.seed);

  OptimizerState state;
  Rng order_rng = Rng::derive(config.seed, "batch-order");
  Rng pair_rng = Rng::derive(config.seed, "mil-pairs");

  std::vector<EventSequence> val;
  for (std::size_t idx : result.split.val) val.push_back(sequences[idx]);
  std::vector<bool> val_labels;
  for (const EventSequence& s : val) val_labels.push_back(s.seq_label);

  double best_f1 = -1.0;
  double best_loss = 0.0;
  std::size_t stale = 0;
  result.params = params;
  result.threshold = config.default_threshold;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog log = train_epoch(params, state, result.vocab, sequences, result.split.train, config, order_rng, pair_rng);
    log.epoch = epoch;

    log.threshold = config.default_threshold;
    if (!val.empty()) {
      const std::vector<DiagnosisOutput> out = diagnose(params, result.vocab, val);
      std::vector<double> y_hat;
      for (const DiagnosisOutput& d : out) y_hat.push_back(d.y_hat);
      log.threshold = eval::choose_threshold(y_hat, val_labels, config.default_threshold);
      std::vector<bool> pred;
      for (double y : y_hat) pred.push_back(y >= log.threshold);
      log.val_f1 = eval::detection_metrics(pred, val_labels).f1;
      log.val_loss = evaluate_losses(params, result.vocab, sequences, result.split.val, config, config.seed).total;
    }
    result.history.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log, params, result.vocab);

    const bool improved = log.val_f1 > best_f1 || (log.val_f1 == best_f1 && log.val_loss < best_loss);
    if (improved) {
      best_f1 = log.val_f1;
      best_loss = log.val_loss;
      result.params = params;
      result.threshold = log.threshold;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace chimera
