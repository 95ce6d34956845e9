#include "e4g/losses.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "e4g/errors.hpp"
#include "e4g/rng.hpp"

using namespace e4g;

namespace {

Tensor<double> random_logits(Rng& rng, size_t c, size_t t) {
  Tensor<double> x = Tensor<double>::zeros({c, t});
  for (size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.normal();
  return x;
}

LabelMask random_labels(Rng& rng, size_t t) {
  LabelMask y(t);
  for (auto& v : y) v = rng.bernoulli(0.4) ? 1 : 0;
  return y;
}

}  // namespace

TEST_CASE("cross entropy of uniform logits is ln 2") {
  Tape<double> tape(false);
  Tensor<double> logits = Tensor<double>::zeros({2, 100});
  LabelMask labels(100, 1);
  Tensor<double> loss = cross_entropy(tape, logits, labels);
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy matches a hand-computed probability") {
  Tape<double> tape(false);
  // p(class 0) = 0.75 at every time point; labels all 0
  Tensor<double> logits =
      Tensor<double>::from({2, 2}, {std::log(3.0), std::log(3.0), 0.0, 0.0});
  LabelMask labels(2, 0);
  Tensor<double> loss = cross_entropy(tape, logits, labels);
  CHECK(loss.item() == doctest::Approx(0.2876820724517809).epsilon(1e-12));

  LabelMask bad(2, 2);
  CHECK_THROWS_AS(cross_entropy(tape, logits, bad), DataError);
  LabelMask short_labels(1, 0);
  CHECK_THROWS_AS(cross_entropy(tape, logits, short_labels), ShapeError);
}

TEST_CASE("cross entropy of a confident correct prediction approaches zero") {
  Tape<double> tape(false);
  Tensor<double> logits = Tensor<double>::from({2, 1}, {50.0, -50.0});
  LabelMask labels(1, 0);
  CHECK(cross_entropy(tape, logits, labels).item() == doctest::Approx(0.0));
}

TEST_CASE("dice loss at p=0.5 with half-artifact labels") {
  Tape<double> tape(false);
  const size_t t = 2500;
  Tensor<double> logits = Tensor<double>::zeros({2, t});  // softmax -> 0.5
  LabelMask labels(t, 0);
  for (size_t j = 0; j < t / 2; ++j) labels[j] = 1;
  Tensor<double> loss = dice_loss(tape, logits, labels, 1.0);
  // 1 - (2*0.5*1250 + 1) / (1250 + 1250 + 1) = 1250/2501
  CHECK(loss.item() == doctest::Approx(1250.0 / 2501.0).epsilon(1e-12));

  CHECK_THROWS_AS(dice_loss(tape, logits, labels, 0.0), ConfigError);
  Tensor<double> three = Tensor<double>::zeros({3, t});
  CHECK_THROWS_AS(dice_loss(tape, three, labels, 1.0), ShapeError);
}

TEST_CASE("dice loss is zero for a perfect confident prediction") {
  Tape<double> tape(false);
  const size_t t = 64;
  Tensor<double> logits = Tensor<double>::zeros({2, t});
  LabelMask labels(t, 1);
  for (size_t j = 0; j < t; ++j) {
    logits.data()[j] = -60.0;      // class 0 logit
    logits.data()[t + j] = 60.0;   // class 1 logit
  }
  // num = 2*64 + 1, den = 64 + 64 + 1 -> loss = 0 exactly at p=1
  CHECK(dice_loss(tape, logits, labels, 1.0).item() == doctest::Approx(0.0));
}

TEST_CASE("loss weights validate their ranges") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  LossWeights neg_alpha = w;
  neg_alpha.alpha[2] = -0.5;
  CHECK_THROWS_AS(neg_alpha.validate(), ConfigError);
  LossWeights neg_ce = w;
  neg_ce.ce_weight = -1.0;
  CHECK_THROWS_AS(neg_ce.validate(), ConfigError);
  LossWeights zero_smooth = w;
  zero_smooth.dice_smooth = 0.0;
  CHECK_THROWS_AS(zero_smooth.validate(), ConfigError);
}

TEST_CASE("exit loss composes weighted cross entropy and dice") {
  Rng rng(77);
  Tape<double> tape(false);
  Tensor<double> logits = random_logits(rng, 2, 40);
  LabelMask labels = random_labels(rng, 40);

  LossWeights w;
  w.ce_weight = 0.7;
  w.dice_weight = 1.3;
  const double expected = 0.7 * cross_entropy(tape, logits, labels).item() +
                          1.3 * dice_loss(tape, logits, labels, 1.0).item();
  CHECK(exit_loss(tape, logits, labels, w).item() ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ensemble loss is linear in alpha") {
  Rng rng(123);
  Tape<double> tape(false);
  const size_t t = 30;
  LabelMask labels = random_labels(rng, t);

  ExitBundle<double> bundle;
  for (int e = 0; e < 5; ++e) bundle.logits.push_back(random_logits(rng, 2, t));

  LossWeights w;
  std::vector<double> per_exit;
  for (const auto& logits : bundle.logits) {
    per_exit.push_back(exit_loss(tape, logits, labels, w).item());
  }

  SUBCASE("one-hot alpha selects a single exit") {
    w.alpha = {1.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(ensemble_loss(tape, bundle, labels, w).item() ==
          doctest::Approx(per_exit[0]).epsilon(1e-9));
  }
  SUBCASE("arbitrary alpha matches the brute-force sum") {
    w.alpha = {0.5, 2.0, 0.0, 1.0, 0.25};
    double expected = 0.0;
    for (size_t i = 0; i < 5; ++i) expected += w.alpha[i] * per_exit[i];
    CHECK(ensemble_loss(tape, bundle, labels, w).item() ==
          doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("alpha length must match the bundle") {
    w.alpha = {1.0, 1.0};
    CHECK_THROWS_AS(ensemble_loss(tape, bundle, labels, w), ShapeError);
  }
  SUBCASE("per-exit output reports unscaled losses") {
    w.alpha = {0.0, 0.0, 0.0, 0.0, 2.0};
    std::vector<Tensor<double>> out;
    ensemble_loss(tape, bundle, labels, w, &out);
    REQUIRE(out.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
      CHECK(out[i].item() == doctest::Approx(per_exit[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("losses propagate gradients to every exit") {
  Rng rng(5);
  Tape<float> tape(true);
  const size_t t = 25;
  LabelMask labels = random_labels(rng, t);

  ExitBundle<float> bundle;
  for (int e = 0; e < 5; ++e) {
    Tensor<float> logits = Tensor<float>::zeros({2, t});
    for (size_t i = 0; i < logits.numel(); ++i) logits.data()[i] = float(rng.normal());
    logits.set_requires_grad(true);
    bundle.logits.push_back(logits);
  }
  LossWeights w;
  Tensor<float> loss = ensemble_loss(tape, bundle, labels, w);
  CHECK(loss.item() > 0.0f);
  tape.backward(loss);
  for (const auto& logits : bundle.logits) {
    REQUIRE(logits.has_grad());
    float norm = 0.0f;
    for (size_t i = 0; i < logits.numel(); ++i) {
      norm += logits.grad()[i] * logits.grad()[i];
      CHECK(std::isfinite(logits.grad()[i]));
    }
    CHECK(norm > 0.0f);
  }
}

TEST_CASE("batched losses average over the batch") {
  Tape<double> tape(false);
  const size_t t = 10;
  Tensor<double> one = Tensor<double>::zeros({2, t});
  Tensor<double> batch = Tensor<double>::zeros({3, 2, t});
  LabelMask labels(t, 1), batch_labels(3 * t, 1);
  const double single = cross_entropy(tape, one, labels).item();
  CHECK(cross_entropy(tape, batch, batch_labels).item() ==
        doctest::Approx(single).epsilon(1e-12));
  CHECK(dice_loss(tape, batch, batch_labels, 1.0).item() ==
        doctest::Approx(dice_loss(tape, one, labels, 1.0).item()).epsilon(1e-12));
}
