#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mdaforge/adamw.hpp"
#include "mdaforge/error.hpp"
#include "mdaforge/synth.hpp"
#include "mdaforge/trainer.hpp"
#include "support.hpp"

using namespace mdaforge;

namespace {

FeaturizedCorpus toy_data(std::uint64_t seed, std::vector<double> shift = {0.2, 0.6}, double class_signal = 0.5) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.classes = {"CWE-89", "CWE-78", "CWE-190"};
  cfg.shift = std::move(shift);
  cfg.samples_per_domain = 30;
  cfg.tokens_per_sample = 20;
  cfg.class_signal = class_signal;
  FeaturizerConfig fc;
  fc.dim = 256;
  return featurize_corpus(synth_corpus(cfg), fc);
}

TrainConfig toy_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.hidden1 = 16;
  c.hidden2 = 8;
  c.per_domain_batch = 6;
  c.max_epochs = 6;
  c.patience = 100;
  c.optimizer.lr = 3e-3;
  return c;
}

double accuracy_on(const ModelBundle& model, const Matrix& x, const std::vector<int>& y) {
  const auto p = predict(model, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += p[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

struct OracleEpoch {
  double classification = 0.0;
  double val_accuracy = 0.0;
};

// A plain cross-entropy trainer written from the primitives: encoder and
// classifier only, same batches, same optimizer settings, no target terms.
std::vector<OracleEpoch> plain_trainer(const FeaturizedCorpus& data, const TargetSplit& split, const TrainConfig& cfg,
                                       ModelBundle& best) {
  ModelDims dims;
  dims.features = data.features.front().cols();
  dims.hidden1 = cfg.hidden1;
  dims.hidden2 = cfg.hidden2;
  dims.sources = data.num_sources();
  dims.classes = data.num_classes;
  ModelBundle model = init_bundle(dims, cfg.seed);
  AdamW opt(cfg.optimizer);
  std::vector<std::size_t> sizes;
  for (const auto& f : data.features) sizes.push_back(f.rows());
  BatchSampler sampler(sizes, cfg.per_domain_batch, derive_seed(cfg.seed, seed_offset::kBatches));
  const Matrix val_x = select_rows(data.target_features(), split.val);
  std::vector<int> val_y;
  for (std::size_t i : split.val) val_y.push_back(data.target_labels()[i]);

  std::vector<OracleEpoch> epochs;
  double best_acc = -1.0;
  for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
    OracleEpoch rec;
    for (std::size_t b = 0; b < sampler.batches_per_epoch(); ++b) {
      const Batch batch = sampler.next();
      ad::Tape tape;
      const ad::Var w1 = tape.parameter(model.feature_encoder.w1), b1 = tape.parameter(model.feature_encoder.b1);
      const ad::Var w2 = tape.parameter(model.feature_encoder.w2), b2 = tape.parameter(model.feature_encoder.b2);
      const ad::Var cw = tape.parameter(model.classifier.w), cb = tape.parameter(model.classifier.b);
      std::optional<ad::Var> sum;
      for (std::size_t d = 0; d < dims.sources; ++d) {
        const ad::Var x = tape.constant(select_rows(data.features[d], batch.rows[d]));
        const ad::Var h = ad::tanh(ad::add_row_bias(ad::matmul(x, w1), b1));
        const ad::Var z = ad::tanh(ad::add_row_bias(ad::matmul(h, w2), b2));
        const ad::Var lp = ad::log_softmax_rows(ad::add_row_bias(ad::matmul(z, cw), cb));
        std::vector<std::size_t> y;
        for (std::size_t r : batch.rows[d]) y.push_back(static_cast<std::size_t>(data.labels[d][r]));
        const ad::Var ce = ad::neg(ad::mean_all(ad::pick(lp, y)));
        sum = sum ? ad::add(*sum, ce) : ce;
      }
      const ad::Var loss = ad::scale(*sum, 1.0 / static_cast<double>(dims.sources));
      tape.backward(loss);
      Matrix* params[] = {&model.feature_encoder.w1, &model.feature_encoder.b1, &model.feature_encoder.w2,
                          &model.feature_encoder.b2, &model.classifier.w,       &model.classifier.b};
      const Matrix* grads[] = {&w1.grad(), &b1.grad(), &w2.grad(), &b2.grad(), &cw.grad(), &cb.grad()};
      opt.step(params, grads);
      rec.classification += loss.scalar();
    }
    rec.classification /= static_cast<double>(sampler.batches_per_epoch());
    rec.val_accuracy = accuracy_on(model, val_x, val_y);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      best = model;
    }
    epochs.push_back(rec);
  }
  return epochs;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("lambda schedule") {
    CHECK(lambda_schedule(0, 30) == 0.0);
    const double last = lambda_schedule(29, 30);
    CHECK(last == doctest::Approx(2.0 / (1.0 + std::exp(-10.0)) - 1.0).epsilon(1e-15));
    CHECK(last >= 0.9999);
    CHECK(last < 1.0);
    CHECK(lambda_schedule(0, 1) == 1.0);
    double prev = -1.0;
    for (std::size_t e = 0; e < 30; ++e) {
      const double l = lambda_schedule(e, 30);
      CHECK(l > prev);
      prev = l;
    }
    CHECK_THROWS_AS(lambda_schedule(30, 30), Error);
  }

  TEST_CASE("method names and config round trip") {
    TrainConfig c;
    CHECK(c.method_name() == "copilot");
    c.use_at = false;
    CHECK(c.method_name() == "copilot-wo-at");
    c.use_wmmd = false;
    CHECK(c.method_name() == "source-only");
    c.use_at = true;
    CHECK(c.method_name() == "copilot-wo-wmmd");
    c.alpha = 0.3;
    c.kernel.mode = KernelConfig::Bandwidth::kFixed;
    c.kernel.sigma = 0.5;
    c.correlation_mode = CorrelationMode::kSoftmaxThenAverage;
    const TrainConfig back = TrainConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
    CHECK(back.to_json() == c.to_json());
    c.per_domain_batch = 1;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("source-only training equals a plain cross-entropy trainer bit for bit") {
    const FeaturizedCorpus data = toy_data(3);
    const TargetSplit split = split_target(data.target_features().rows(), 8);
    TrainConfig cfg = toy_config(4);
    cfg.use_at = false;
    cfg.use_wmmd = false;
    const TrainResult r = train(data, split, cfg);
    ModelBundle oracle_best;
    const auto oracle = plain_trainer(data, split, cfg, oracle_best);
    REQUIRE(r.report.epochs.size() == oracle.size());
    for (std::size_t e = 0; e < oracle.size(); ++e) {
      CHECK(r.report.epochs[e].classification == oracle[e].classification);
      CHECK(r.report.epochs[e].val_accuracy == oracle[e].val_accuracy);
      CHECK(r.report.epochs[e].domain_adversarial == 0.0);
      CHECK(r.report.epochs[e].discrepancy == 0.0);
    }
    CHECK(r.model.feature_encoder.w1 == oracle_best.feature_encoder.w1);
    CHECK(r.model.feature_encoder.w2 == oracle_best.feature_encoder.w2);
    CHECK(r.model.classifier.w == oracle_best.classifier.w);
    CHECK(r.model.classifier.b == oracle_best.classifier.b);
  }

  TEST_CASE("alternating updates match the combined pass") {
    const FeaturizedCorpus data = toy_data(5);
    const TargetSplit split = split_target(data.target_features().rows(), 2);
    TrainConfig cfg = toy_config(6);
    cfg.max_epochs = 4;
    const TrainResult combined = train(data, split, cfg);
    cfg.alternating = true;
    const TrainResult alternating = train(data, split, cfg);
    REQUIRE(combined.report.epochs.size() == alternating.report.epochs.size());
    for (std::size_t e = 0; e < combined.report.epochs.size(); ++e) {
      const auto& a = combined.report.epochs[e];
      const auto& b = alternating.report.epochs[e];
      CHECK(a.classification == b.classification);
      CHECK(a.domain_adversarial == b.domain_adversarial);
      CHECK(a.discrepancy == b.discrepancy);
      CHECK(a.correlation == b.correlation);
    }
    const auto pa = combined.model.parameters();
    const auto pb = alternating.model.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
  }

  TEST_CASE("correlation is uniform at epoch 0 and without adversarial training") {
    const FeaturizedCorpus data = toy_data(7);
    const TargetSplit split = split_target(data.target_features().rows(), 1);
    TrainConfig cfg = toy_config(1);
    cfg.max_epochs = 3;
    const TrainResult r = train(data, split, cfg);
    CHECK(r.report.epochs[0].correlation == std::vector<double>{0.5, 0.5});
    CHECK(r.report.epochs[1].correlation != std::vector<double>{0.5, 0.5});
    cfg.use_at = false;
    const TrainResult wo = train(data, split, cfg);
    for (const auto& e : wo.report.epochs) CHECK(e.correlation == std::vector<double>{0.5, 0.5});
    CHECK(wo.report.final_correlation == std::vector<double>{0.5, 0.5});
  }

  TEST_CASE("early stopping bound and best checkpoint") {
    const FeaturizedCorpus data = toy_data(9, {0.3, 0.8}, 0.3);
    const TargetSplit split = split_target(data.target_features().rows(), 3);
    const Matrix val_x = select_rows(data.target_features(), split.val);
    std::vector<int> val_y;
    for (std::size_t i : split.val) val_y.push_back(data.target_labels()[i]);
    for (std::size_t patience : {1, 2, 3}) {
      TrainConfig cfg = toy_config(patience);
      cfg.max_epochs = 12;
      cfg.patience = patience;
      const TrainResult r = train(data, split, cfg);
      const auto& epochs = r.report.epochs;
      CHECK(epochs.size() <= r.report.best_epoch + patience + 1);
      std::size_t argmax = 0;
      for (std::size_t e = 1; e < epochs.size(); ++e) {
        if (epochs[e].val_accuracy > epochs[argmax].val_accuracy) argmax = e;
      }
      CHECK(r.report.best_epoch == argmax);
      CHECK(accuracy_on(r.model, val_x, val_y) == epochs[argmax].val_accuracy);
      if (r.report.stop_reason == "early-stopped") CHECK(epochs.size() == r.report.best_epoch + patience + 1);
    }
  }

  TEST_CASE("frozen weights stop after patience non-improving epochs") {
    const FeaturizedCorpus data = toy_data(11);
    const TargetSplit split = split_target(data.target_features().rows(), 5);
    TrainConfig cfg = toy_config(2);
    cfg.max_epochs = 20;
    cfg.patience = 2;
    cfg.freeze_weights = true;
    const TrainResult r = train(data, split, cfg);
    CHECK(r.report.epochs.size() == 3);
    CHECK(r.report.best_epoch == 0);
    CHECK(r.report.stop_reason == "early-stopped");
    for (const auto& e : r.report.epochs) CHECK(e.val_accuracy == r.report.epochs[0].val_accuracy);
  }

  TEST_CASE("deterministic given the seed") {
    const FeaturizedCorpus data = toy_data(12);
    const TargetSplit split = split_target(data.target_features().rows(), 5);
    const TrainConfig cfg = toy_config(3);
    const TrainResult a = train(data, split, cfg), b = train(data, split, cfg);
    CHECK(a.report.to_json() == b.report.to_json());
    CHECK(a.model.feature_encoder.w1 == b.model.feature_encoder.w1);
    TrainConfig other = cfg;
    other.seed = 4;
    CHECK(train(data, split, other).report.to_json() != a.report.to_json());
  }

  TEST_CASE("converged toy model separates its training sources") {
    const FeaturizedCorpus data = toy_data(13, {0.0, 0.0}, 1.0);
    const TargetSplit split = split_target(data.target_features().rows(), 5);
    TrainConfig cfg = toy_config(1);
    cfg.use_at = false;
    cfg.use_wmmd = false;
    cfg.optimizer.lr = 1e-2;
    cfg.max_epochs = 15;
    const TrainResult r = train(data, split, cfg);
    for (std::size_t d = 0; d < data.num_sources(); ++d) {
      CHECK(accuracy_on(r.model, data.features[d], data.labels[d]) > 0.9);
    }
  }

  TEST_CASE("prediction is deterministic and empty in, empty out") {
    const FeaturizedCorpus data = toy_data(14);
    ModelDims dims;
    dims.features = 256;
    dims.hidden1 = 8;
    dims.hidden2 = 4;
    dims.sources = 2;
    dims.classes = 44;
    const ModelBundle m = init_bundle(dims, 1);
    CHECK(predict(m, Matrix(0, 256)).empty());
    CHECK(predict(m, data.features[0]) == predict(m, data.features[0]));
  }

  TEST_CASE("unlabeled sources are rejected") {
    FeaturizedCorpus data = toy_data(15);
    data.labels[0][3] = -1;
    const TargetSplit split = split_target(data.target_features().rows(), 5);
    CHECK_THROWS_AS(train(data, split, toy_config(1)), Error);
  }
}
