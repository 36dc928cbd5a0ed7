// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "chimera/error.hpp"
#include "chimera/model.hpp"

using namespace chimera;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(std::move(shape));
  for (double& x : t.storage()) x = u(rng);
  return t;
}

ModelParams random_model(std::size_t vocab_rows, std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_model(random_tensor({vocab_rows, dim}, rng), hidden, seed);
}

void zero_gru(GruParams& g) {
  g.update.fill(0.0);
  g.reset.fill(0.0);
  g.candidate.fill(0.0);
}

std::vector<ad::Var> constant_inputs(ad::Tape& tape, const std::vector<Tensor>& steps) {
  std::vector<ad::Var> out;
  for (const Tensor& t : steps) out.push_back(tape.constant(t));
  return out;
}

// Scalar-arithmetic GRU over a single sequence.
std::vector<std::vector<double>> gru_oracle(const GruParams& g, const std::vector<std::vector<double>>& xs) {
  const std::size_t h = g.update.rows();
  std::vector<double> state(h, 0.0);
  std::vector<std::vector<double>> out;
  for (const auto& x : xs) {
    std::vector<double> joined(state);
    joined.insert(joined.end(), x.begin(), x.end());
    std::vector<double> z(h), r(h), cand(h);
    for (std::size_t i = 0; i < h; ++i) {
      double sz = 0, sr = 0;
      for (std::size_t j = 0; j < joined.size(); ++j) {
        sz += g.update.at(i, j) * joined[j];
        sr += g.reset.at(i, j) * joined[j];
      }
      z[i] = sig(sz);
      r[i] = sig(sr);
    }
    for (std::size_t i = 0; i < h; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < h; ++j) s += g.candidate.at(i, j) * r[j] * state[j];
      for (std::size_t j = 0; j < x.size(); ++j) s += g.candidate.at(i, h + j) * x[j];
      cand[i] = std::tanh(s);
    }
    for (std::size_t i = 0; i < h; ++i) state[i] = (1.0 - z[i]) * state[i] + z[i] * cand[i];
    out.push_back(state);
  }
  return out;
}

}  // namespace

TEST_CASE("initialization shapes and bounds") {
  const ModelParams p = random_model(11, 6, 4, 3);
  CHECK(p.hidden() == 4);
  CHECK(p.embed_dim() == 6);
  CHECK(p.shared.update.shape() == Shape{4, 10});
  CHECK(p.det_bias.size() == 1);
  const double bound = 1.0 / std::sqrt(10.0);
  for (double v : p.det_private.candidate.storage()) CHECK(std::abs(v) <= bound);
  CHECK_NOTHROW(validate_shapes(p));
  const ModelParams q = random_model(11, 6, 4, 3);
  for (std::size_t i = 0; i < named_parameters(p).size(); ++i) {
    CHECK(*named_parameters(p)[i].second == *named_parameters(q)[i].second);
  }
  ModelParams bad = p;
  bad.loc_weight = Tensor({1, 5});
  CHECK_THROWS_AS(validate_shapes(bad), ShapeError);
}

TEST_CASE("zero GRU stays at the origin with half-open gates") {
  ModelParams p = random_model(3, 2, 3, 1);
  zero_gru(p.shared);
  ad::Tape tape;
  const BoundModel m = bind(tape, p, false);
  std::mt19937_64 rng(4);
  std::vector<Tensor> steps;
  for (int t = 0; t < 5; ++t) steps.push_back(random_tensor({2, 2}, rng));
  const auto inputs = constant_inputs(tape, steps);
  for (const ad::Var& h : gru_encode(m.shared, inputs)) {
    for (double v : h.value().storage()) CHECK(v == 0.0);
  }
  // Gates are sigmoid of W [H, e], which is zero for zero weights.
  ad::Tape t2;
  const ad::Var joined = t2.constant(random_tensor({2, 5}, rng));
  const Tensor z = ad::sigmoid(ad::matmul_nt(joined, t2.constant(p.shared.update))).value();
  for (double v : z.storage()) CHECK(v == 0.5);
}

TEST_CASE("GRU matches a scalar oracle") {
  SUBCASE("two-dimensional hand case") {
    GruParams g{Tensor::matrix(2, 4, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8}),
                Tensor::matrix(2, 4, {0.2, 0.1, -0.3, 0.5, 0.4, -0.6, 0.1, 0.2}),
                Tensor::matrix(2, 4, {-0.7, 0.3, 0.9, -0.1, 0.2, 0.8, -0.4, 0.6})};
    // One step from H_0 = 0 with e = (1, -1), written out longhand.
    const double z0 = sig(0.3 - 0.4), z1 = sig(0.7 + 0.8);
    const double c0 = std::tanh(0.9 + 0.1), c1 = std::tanh(-0.4 - 0.6);
    const double h0 = z0 * c0, h1 = z1 * c1;

    ad::Tape tape;
    const BoundGru bg{tape.constant(g.update), tape.constant(g.reset), tape.constant(g.candidate)};
    const ad::Var in[] = {tape.constant(Tensor::matrix(1, 2, {1.0, -1.0}))};
    const auto hs = gru_encode(bg, in);
    CHECK(std::abs(hs[0].value()[0] - h0) <= 1e-12);
    CHECK(std::abs(hs[0].value()[1] - h1) <= 1e-12);
  }
  SUBCASE("random multi-step batches") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t h = 3, d = 4, n = 6, batch = 3;
      GruParams g{random_tensor({h, h + d}, rng), random_tensor({h, h + d}, rng), random_tensor({h, h + d}, rng)};
      std::vector<Tensor> steps;
      for (std::size_t t = 0; t < n; ++t) steps.push_back(random_tensor({batch, d}, rng));
      ad::Tape tape;
      const BoundGru bg{tape.constant(g.update), tape.constant(g.reset), tape.constant(g.candidate)};
      const auto hs = gru_encode(bg, constant_inputs(tape, steps));
      for (std::size_t b = 0; b < batch; ++b) {
        std::vector<std::vector<double>> xs;
        for (std::size_t t = 0; t < n; ++t) {
          xs.emplace_back(steps[t].storage().begin() + static_cast<long>(b * d),
                          steps[t].storage().begin() + static_cast<long>((b + 1) * d));
        }
        const auto want = gru_oracle(g, xs);
        for (std::size_t t = 0; t < n; ++t) {
          for (std::size_t i = 0; i < h; ++i) CHECK(std::abs(hs[t].value().at(b, i) - want[t][i]) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("view fusion") {
  std::mt19937_64 rng(8);
  std::vector<Tensor> steps;
  for (int t = 0; t < 4; ++t) steps.push_back(random_tensor({2, 3}, rng));

  SUBCASE("fusion is the elementwise sum") {
    const ModelParams p = random_model(5, 3, 4, 2);
    ad::Tape tape;
    const EncodedViews v = encode_views(bind(tape, p, false), constant_inputs(tape, steps));
    for (std::size_t t = 0; t < steps.size(); ++t) {
      for (std::size_t i = 0; i < v.det[t].value().size(); ++i) {
        CHECK(v.det[t].value()[i] == v.det_private[t].value()[i] + v.shared[t].value()[i]);
        CHECK(v.loc[t].value()[i] == v.loc_private[t].value()[i] + v.shared[t].value()[i]);
      }
    }
  }
  SUBCASE("zeroed shared encoder leaves the private view") {
    ModelParams p = random_model(5, 3, 4, 2);
    zero_gru(p.shared);
    ad::Tape tape;
    const EncodedViews v = encode_views(bind(tape, p, false), constant_inputs(tape, steps));
    for (std::size_t t = 0; t < steps.size(); ++t) CHECK(v.det[t].value() == v.det_private[t].value());
  }
  SUBCASE("identical encoders give identical views") {
    ModelParams p = random_model(5, 3, 4, 2);
    p.loc_private = p.det_private;
    p.shared = p.det_private;
    ad::Tape tape;
    const EncodedViews v = encode_views(bind(tape, p, false), constant_inputs(tape, steps));
    for (std::size_t t = 0; t < steps.size(); ++t) {
      CHECK(v.det_private[t].value() == v.loc_private[t].value());
      CHECK(v.det_private[t].value() == v.shared[t].value());
    }
  }
}

TEST_CASE("detector") {
  SUBCASE("zero attention weights give sigmoid of the bias") {
    ModelParams p = random_model(4, 3, 5, 6);
    p.attention.fill(0.0);
    p.det_bias[0] = 0.7;
    std::vector<EventSequence> seqs(1);
    seqs[0].event_ids = {1, 2, 3, 0};
    const auto out = diagnose(p, EventVocabulary({1, 2, 3}), seqs);
    CHECK(std::abs(out[0].y_hat - sig(0.7)) <= 1e-15);
    for (double a : out[0].alpha_raw) CHECK(a == 0.0);
    for (double a : out[0].attention) CHECK(a == 0.25);
  }
  SUBCASE("a single step attends fully") {
    const ModelParams p = random_model(4, 3, 5, 6);
    std::vector<EventSequence> seqs(1);
    seqs[0].event_ids = {2};
    const auto out = diagnose(p, EventVocabulary({1, 2, 3}), seqs);
    REQUIRE(out[0].attention.size() == 1);
    CHECK(out[0].attention[0] == 1.0);
  }
  SUBCASE("three steps against a scalar oracle") {
    std::mt19937_64 rng(31);
    const std::size_t h = 3;
    std::vector<std::vector<double>> hs(3, std::vector<double>(h));
    for (auto& row : hs)
      for (double& v : row) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    ModelParams p = random_model(2, 2, h, 9);
    ad::Tape tape;
    const BoundModel m = bind(tape, p, false);
    EncodedViews views;
    for (const auto& row : hs) views.det.push_back(tape.constant(Tensor({1, h}, row)));
    const DetectorOutputs out = detect(m, views);

    double alpha[3], pooled[3] = {0, 0, 0};
    for (int t = 0; t < 3; ++t) {
      double s = 0;
      for (std::size_t i = 0; i < h; ++i) s += p.attention[i] * hs[t][i];
      alpha[t] = std::tanh(s);
      for (std::size_t i = 0; i < h; ++i) pooled[i] += alpha[t] * hs[t][i];
    }
    double logit = p.det_bias[0];
    for (std::size_t i = 0; i < h; ++i) logit += p.det_weight[i] * pooled[i];
    CHECK(std::abs(out.y_hat.value()[0] - sig(logit)) <= 1e-12);
    const double norm = std::exp(alpha[0]) + std::exp(alpha[1]) + std::exp(alpha[2]);
    for (int t = 0; t < 3; ++t) {
      CHECK(std::abs(out.alpha.value()[static_cast<std::size_t>(t)] - alpha[t]) <= 1e-12);
      CHECK(std::abs(out.attention.value()[static_cast<std::size_t>(t)] - std::exp(alpha[t]) / norm) <= 1e-12);
    }
  }
}

TEST_CASE("localizer") {
  SUBCASE("zero head scores one half everywhere") {
    ModelParams p = random_model(4, 3, 5, 6);
    p.loc_weight.fill(0.0);
    p.loc_bias.fill(0.0);
    std::vector<EventSequence> seqs(1);
    seqs[0].event_ids = {1, 2, 3, 3, 1};
    const auto out = diagnose(p, EventVocabulary({1, 2, 3}), seqs);
    for (double v : out[0].p) CHECK(v == 0.5);
    for (double v : out[0].root_cause) CHECK(std::abs(v - 0.2) <= 1e-15);
  }
  SUBCASE("dominant position wins both rankings") {
    ModelParams p = random_model(2, 2, 2, 6);
    ad::Tape tape;
    const BoundModel m = bind(tape, p, false);
    EncodedViews views;
    for (int t = 0; t < 4; ++t) views.loc.push_back(tape.constant(Tensor::matrix(1, 2, {0.0, 0.0})));
    const double w0 = p.loc_weight[0] >= 0 ? 50.0 : -50.0;
    views.loc[2] = tape.constant(Tensor::matrix(1, 2, {w0, 0.0}));
    const LocalizerOutputs out = localize(m, views);
    const auto& r = out.distribution.value().storage();
    CHECK(std::max_element(r.begin(), r.end()) - r.begin() == 2);
  }
}

TEST_CASE("diagnosis outputs are proper distributions with matching orders") {
  const ModelParams p = random_model(9, 4, 6, 12);
  const EventVocabulary vocab({1, 2, 3, 4, 5, 6, 7, 8});
  std::mt19937_64 rng(1);
  std::vector<EventSequence> seqs(40);
  for (auto& s : seqs) {
    for (int t = 0; t < 10; ++t) s.event_ids.push_back(1 + static_cast<int>(rng() % 9));
  }
  const auto out = diagnose(p, vocab, seqs, 7);
  const auto again = diagnose(p, vocab, seqs, 40);
  REQUIRE(out.size() == 40);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const DiagnosisOutput& d = out[i];
    CHECK(d.y_hat > 0.0);
    CHECK(d.y_hat < 1.0);
    double sa = 0, sr = 0;
    for (double v : d.attention) sa += v;
    for (double v : d.root_cause) sr += v;
    CHECK(std::abs(sa - 1.0) <= 1e-9);
    CHECK(std::abs(sr - 1.0) <= 1e-9);
    for (std::size_t a = 0; a < d.p.size(); ++a) {
      CHECK(d.p[a] > 0.0);
      CHECK(d.p[a] < 1.0);
      for (std::size_t b = 0; b < d.p.size(); ++b) {
        if (d.p[a] < d.p[b]) CHECK(d.root_cause[a] < d.root_cause[b]);
      }
    }
    CHECK(std::max_element(d.p.begin(), d.p.end()) - d.p.begin() ==
          std::max_element(d.root_cause.begin(), d.root_cause.end()) - d.root_cause.begin());
    // Batch size does not change results beyond rounding.
    CHECK(std::abs(d.y_hat - again[i].y_hat) <= 1e-12);
  }
}

TEST_CASE("diagnosis is deterministic") {
  const ModelParams p = random_model(5, 3, 4, 2);
  const EventVocabulary vocab({1, 2, 3, 4});
  std::vector<EventSequence> seqs(1);
  seqs[0].event_ids = {3, 3, 3};
  const auto out = diagnose(p, vocab, seqs);
  const auto again = diagnose(p, vocab, seqs);
  CHECK(out[0].p == again[0].p);
  CHECK(out[0].y_hat == again[0].y_hat);
}

TEST_CASE("vocabulary must match the embedding") {
  const ModelParams p = random_model(5, 3, 4, 2);
  std::vector<EventSequence> seqs(1);
  seqs[0].event_ids = {1};
  CHECK_THROWS_AS(diagnose(p, EventVocabulary({1, 2}), seqs), ShapeError);
}
