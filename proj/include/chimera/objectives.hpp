// SPDX-License-Identifier: Apache-2.0
#pragma once

// The four training losses and their weighted sum.

#include <cstddef>
#include <span>
#include <vector>

#include "chimera/autodiff.hpp"
#include "chimera/model.hpp"
#include "chimera/random.hpp"

namespace chimera::objectives {

// Probabilities are floored here before any log.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossWeights {
  double detector = 1.0;
  double localizer = 2.0;
  double disentangle = 0.001;
  double align = 0.5;
};

struct LossBreakdown {
  double detector = 0.0;
  double localizer = 0.0;
  double disentangle = 0.0;
  double align = 0.0;
  double total = 0.0;
};

// Mean binary cross-entropy. y_hat is [B, 1]; labels has B entries.
ad::Var detector_loss(ad::Var y_hat, const std::vector<bool>& labels);

// A (anomalous row, normal row) pair of the batch.
struct MilPair {
  std::size_t anomalous = 0;
  std::size_t normal = 0;
};

// Each anomalous sequence gets one normal partner drawn from the same batch.
// Empty when the batch lacks either class.
std::vector<MilPair> pair_batch(const std::vector<bool>& labels, Rng& rng);

// Mean over pairs of max(0, 1 + max(normal scores) - max(anomalous scores)).
// `scores` is [B, n]. Zero (a constant) when there are no pairs.
ad::Var localizer_loss(ad::Var scores, std::span<const MilPair> pairs);

// Per sequence |P_d S^T|_F^2 + |P_l S^T|_F^2 over the n x hidden views,
// averaged over the batch.
ad::Var disentangle_loss(const EncodedViews& views);
// Same on explicit [B, n, hidden] tensors.
ad::Var disentangle_loss(ad::Var det_private, ad::Var loc_private, ad::Var shared);

// Mean Jensen-Shannon divergence (natural log) between rows of A and R
// selected by `rows`. Zero (a constant) when `rows` is empty.
ad::Var align_loss(ad::Var attention, ad::Var root_cause, std::span<const std::size_t> rows);

struct LossTerms {
  ad::Var detector, localizer, disentangle, align;
};

// Terms whose weight is zero are left out of the graph.
ad::Var total_loss(const LossTerms& terms, const LossWeights& weights);
double total_loss(const LossBreakdown& parts, const LossWeights& weights);

// Value-level conveniences over single instances.
double binary_cross_entropy(const std::vector<bool>& labels, std::span<const double> y_hat);
double mil_hinge(std::span<const double> normal_scores, std::span<const double> anomalous_scores);
double disentangle_value(const Tensor& det_private, const Tensor& loc_private, const Tensor& shared);
double js_divergence(std::span<const double> a, std::span<const double> r);

}  // namespace chimera::objectives
