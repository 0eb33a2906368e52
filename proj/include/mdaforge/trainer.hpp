#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdaforge/adamw.hpp"
#include "mdaforge/corpus.hpp"
#include "mdaforge/featurize.hpp"
#include "mdaforge/losses.hpp"
#include "mdaforge/model.hpp"

namespace mdaforge {

struct TrainConfig {
  double alpha = 0.01;
  AdamWConfig optimizer;  // lr 5e-5, betas (0.9, 0.999), eps 1e-8, wd 0.01
  std::size_t per_domain_batch = 8;
  std::size_t max_epochs = 30;
  std::size_t patience = 2;
  std::uint64_t seed = 0;
  bool use_at = true;    // domain adversarial term and learned domain correlation
  bool use_wmmd = true;  // weighted MMD term
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 128;
  KernelConfig kernel;
  CorrelationMode correlation_mode = CorrelationMode::kAverageThenSoftmax;
  bool refresh_correlation_per_batch = false;
  bool lambda_per_step = false;
  /// Two separate updates per batch (domain players, then class players)
  /// instead of one combined backward pass.
  bool alternating = false;
  /// Test hook: run everything but never apply optimizer updates.
  bool freeze_weights = false;

  void validate() const;
  /// "copilot", "copilot-wo-at", "copilot-wo-wmmd" or "source-only".
  std::string method_name() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Features and labels per domain, sources first, target last.
struct FeaturizedCorpus {
  std::vector<std::string> domain_names;
  std::vector<Matrix> features;
  std::vector<std::vector<int>> labels;  // registry indices
  std::size_t num_classes = 0;

  std::size_t num_sources() const { return features.size() - 1; }
  const Matrix& target_features() const { return features.back(); }
  const std::vector<int>& target_labels() const { return labels.back(); }
};

FeaturizedCorpus featurize_corpus(const Corpus& corpus, const FeaturizerConfig& config);

/// Rows of `m` listed in `rows`, in that order.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);

struct EpochRecord {
  std::size_t epoch = 0;
  double lambda = 0.0;
  std::vector<double> correlation;  // w used during the epoch
  double domain_adversarial = 0.0;  // mean L_dc over batches
  double discrepancy = 0.0;         // mean L_dis over batches
  double classification = 0.0;      // mean L_C over batches
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;
  /// w from the discriminator as it stands after the last epoch run (uniform
  /// without adversarial training).
  std::vector<double> final_correlation;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  ModelBundle model;  // checkpoint with the best validation accuracy
  TrainReport report;
};

/// 2/(1+exp(−10p)) − 1 with p = epoch/(max_epochs−1); 1 when max_epochs is 1.
double lambda_schedule(std::size_t epoch, std::size_t max_epochs);
/// Same curve at progress p in [0, 1].
double lambda_at_progress(double p);

/// Trains all four networks. Source labels drive L_C; every target sample
/// takes part in L_dc, L_dis and the correlation estimate with its label
/// withheld; target val labels are used only to pick the best epoch.
TrainResult train(const FeaturizedCorpus& data, const TargetSplit& split, const TrainConfig& config);

/// Predicted class column per row (lowest index wins ties). Empty in, empty out.
std::vector<int> predict(const ModelBundle& model, const Matrix& features);

}  // namespace mdaforge
