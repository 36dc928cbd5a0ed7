// SPDX-License-Identifier: Apache-2.0
#include "chimera/objectives.hpp"

#include <algorithm>

#include "chimera/error.hpp"

namespace chimera::objectives {
namespace {

ad::Var zero(ad::Tape& tape) { return tape.constant(Tensor::scalar(0.0)); }

ad::Var stack_steps(std::span<const ad::Var> steps) {
  const ad::Var flat = ad::concat_cols(steps);
  const std::size_t b = steps[0].shape()[0];
  const std::size_t h = steps[0].shape()[1];
  return ad::reshape(flat, Shape{b, steps.size(), h});
}

// [B, n, h] x [B, n, h] -> [B, 1] of squared Frobenius norms of P S^T.
ad::Var cross_norm(ad::Var p, ad::Var s) {
  const ad::Var prod = ad::bmm_nt(p, s);
  const std::size_t b = prod.shape()[0];
  const std::size_t cells = prod.shape()[1] * prod.shape()[2];
  return ad::sum_rows(ad::reshape(prod * prod, Shape{b, cells}));
}

ad::Var floored_log(ad::Var x) { return ad::log(ad::clamp_min(x, kProbabilityFloor)); }

}  // namespace

ad::Var detector_loss(ad::Var y_hat, const std::vector<bool>& labels) {
  if (y_hat.value().size() != labels.size() || labels.empty()) {
    throw ShapeError("detector_loss: " + std::to_string(labels.size()) + " labels for predictions " +
                     shape_string(y_hat.shape()));
  }
  ad::Tape& tape = y_hat.tape();
  Tensor y(Shape{labels.size(), 1});
  Tensor not_y(Shape{labels.size(), 1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = labels[i] ? 1.0 : 0.0;
    not_y[i] = 1.0 - y[i];
  }
  const ad::Var pred = ad::reshape(y_hat, Shape{labels.size(), 1});
  const ad::Var pos = tape.constant(std::move(y)) * floored_log(pred);
  const ad::Var neg = tape.constant(std::move(not_y)) * floored_log(1.0 + (-1.0 * pred));
  return -1.0 * ad::mean_all(pos + neg);
}

std::vector<MilPair> pair_batch(const std::vector<bool>& labels, Rng& rng) {
  std::vector<std::size_t> normal;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!labels[i]) normal.push_back(i);
  std::vector<MilPair> pairs;
  if (normal.empty()) return pairs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) pairs.push_back(MilPair{i, normal[rng.below(normal.size())]});
  }
  return pairs;
}

ad::Var localizer_loss(ad::Var scores, std::span<const MilPair> pairs) {
  if (scores.shape().size() != 2) throw ShapeError("localizer_loss: scores must be [B, n]");
  if (pairs.empty()) return zero(scores.tape());
  std::vector<std::size_t> anomalous, normal;
  for (const MilPair& p : pairs) {
    if (p.anomalous >= scores.shape()[0] || p.normal >= scores.shape()[0]) {
      throw ShapeError("localizer_loss: pair index out of range");
    }
    anomalous.push_back(p.anomalous);
    normal.push_back(p.normal);
  }
  const ad::Var peak = ad::max_rows(scores);
  const ad::Var gap = ad::gather_rows(peak, normal) - ad::gather_rows(peak, anomalous);
  return ad::mean_all(ad::relu(1.0 + gap));
}

ad::Var disentangle_loss(ad::Var det_private, ad::Var loc_private, ad::Var shared) {
  if (det_private.shape() != shared.shape() || loc_private.shape() != shared.shape() || shared.shape().size() != 3) {
    throw ShapeError("disentangle_loss: views must share one [B, n, hidden] shape");
  }
  return ad::mean_all(cross_norm(det_private, shared) + cross_norm(loc_private, shared));
}

ad::Var disentangle_loss(const EncodedViews& views) {
  if (views.shared.empty()) throw ShapeError("disentangle_loss: empty window");
  return disentangle_loss(stack_steps(views.det_private), stack_steps(views.loc_private),
                          stack_steps(views.shared));
}

ad::Var align_loss(ad::Var attention, ad::Var root_cause, std::span<const std::size_t> rows) {
  if (attention.shape() != root_cause.shape() || attention.shape().size() != 2) {
    throw ShapeError("align_loss: A and R must share one [B, n] shape");
  }
  if (rows.empty()) return zero(attention.tape());
  const ad::Var a = ad::gather_rows(attention, rows);
  const ad::Var r = ad::gather_rows(root_cause, rows);
  const ad::Var log_m = floored_log(0.5 * (a + r));
  const ad::Var terms = a * (floored_log(a) - log_m) + r * (floored_log(r) - log_m);
  return 0.5 * ad::mean_all(ad::sum_rows(terms));
}

ad::Var total_loss(const LossTerms& terms, const LossWeights& w) {
  if (w.detector < 0 || w.localizer < 0 || w.disentangle < 0 || w.align < 0) {
    throw ConfigError("lambda", "loss weights must be non-negative");
  }
  ad::Var total;
  auto accumulate = [&](ad::Var term, double weight) {
    if (weight == 0.0 || !term.valid()) return;
    const ad::Var scaled = weight * term;
    total = total.valid() ? total + scaled : scaled;
  };
  accumulate(terms.detector, w.detector);
  accumulate(terms.localizer, w.localizer);
  accumulate(terms.disentangle, w.disentangle);
  accumulate(terms.align, w.align);
  if (!total.valid()) return zero(terms.detector.tape());
  return total;
}

double total_loss(const LossBreakdown& p, const LossWeights& w) {
  return w.detector * p.detector + w.localizer * p.localizer + w.disentangle * p.disentangle + w.align * p.align;
}

double binary_cross_entropy(const std::vector<bool>& labels, std::span<const double> y_hat) {
  ad::Tape tape;
  const ad::Var pred = tape.constant(Tensor(Shape{y_hat.size(), 1}, std::vector<double>(y_hat.begin(), y_hat.end())));
  return detector_loss(pred, labels).value().item();
}

double mil_hinge(std::span<const double> normal_scores, std::span<const double> anomalous_scores) {
  if (normal_scores.empty() || anomalous_scores.empty()) throw ShapeError("mil_hinge: empty score list");
  const double top_normal = *std::max_element(normal_scores.begin(), normal_scores.end());
  const double top_anomalous = *std::max_element(anomalous_scores.begin(), anomalous_scores.end());
  return std::max(0.0, 1.0 + top_normal - top_anomalous);
}

double disentangle_value(const Tensor& det_private, const Tensor& loc_private, const Tensor& shared) {
  auto lift = [](ad::Tape& tape, const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("disentangle_value: views must be [n, hidden]");
    return tape.constant(Tensor(Shape{1, t.rows(), t.cols()}, t.storage()));
  };
  ad::Tape tape;
  return disentangle_loss(lift(tape, det_private), lift(tape, loc_private), lift(tape, shared)).value().item();
}

double js_divergence(std::span<const double> a, std::span<const double> r) {
  if (a.size() != r.size() || a.empty()) throw ShapeError("js_divergence: distributions differ in length");
  ad::Tape tape;
  const ad::Var av = tape.constant(Tensor(Shape{1, a.size()}, std::vector<double>(a.begin(), a.end())));
  const ad::Var rv = tape.constant(Tensor(Shape{1, r.size()}, std::vector<double>(r.begin(), r.end())));
  const std::size_t row0[] = {0};
  return align_loss(av, rv, row0).value().item();
}

}  // namespace chimera::objectives
