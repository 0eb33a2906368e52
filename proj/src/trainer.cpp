#include "mdaforge/trainer.hpp"

#include <cmath>
#include <limits>

#include "mdaforge/cwe.hpp"
#include "mdaforge/error.hpp"
#include "mdaforge/rng.hpp"

namespace mdaforge {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0)) throw Error("alpha must be >= 0");
  if (patience < 1) throw Error("patience must be >= 1");
  if (max_epochs < 1) throw Error("max_epochs must be >= 1");
  if (per_domain_batch < 2) throw Error("per_domain_batch must be >= 2");
  if (hidden1 < 1 || hidden2 < 1) throw Error("hidden sizes must be >= 1");
  if (!(optimizer.lr > 0.0)) throw Error("learning rate must be > 0");
  kernel.validate();
}

std::string TrainConfig::method_name() const {
  if (use_at && use_wmmd) return "copilot";
  if (use_at) return "copilot-wo-wmmd";
  if (use_wmmd) return "copilot-wo-at";
  return "source-only";
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method_name();
  j["alpha"] = alpha;
  j["optimizer"] = {{"name", "adamw"},
                    {"lr", optimizer.lr},
                    {"beta1", optimizer.beta1},
                    {"beta2", optimizer.beta2},
                    {"eps", optimizer.eps},
                    {"weight_decay", optimizer.weight_decay}};
  j["per_domain_batch"] = per_domain_batch;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["seed"] = seed;
  j["use_at"] = use_at;
  j["use_wmmd"] = use_wmmd;
  j["hidden1"] = hidden1;
  j["hidden2"] = hidden2;
  j["kernel"] = {{"bandwidth", kernel.mode == KernelConfig::Bandwidth::kMedian ? "median" : "fixed"},
                 {"sigma", kernel.sigma}};
  j["correlation_mode"] =
      correlation_mode == CorrelationMode::kAverageThenSoftmax ? "average-then-softmax" : "softmax-then-average";
  j["refresh_correlation_per_batch"] = refresh_correlation_per_batch;
  j["lambda_per_step"] = lambda_per_step;
  j["alternating"] = alternating;
  j["freeze_weights"] = freeze_weights;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha").get<double>();
  const auto& o = j.at("optimizer");
  c.optimizer = {o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                 o.at("eps").get<double>(), o.at("weight_decay").get<double>()};
  c.per_domain_batch = j.at("per_domain_batch").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.use_at = j.at("use_at").get<bool>();
  c.use_wmmd = j.at("use_wmmd").get<bool>();
  c.hidden1 = j.at("hidden1").get<std::size_t>();
  c.hidden2 = j.at("hidden2").get<std::size_t>();
  const auto& k = j.at("kernel");
  c.kernel.mode = k.at("bandwidth").get<std::string>() == "fixed" ? KernelConfig::Bandwidth::kFixed
                                                                  : KernelConfig::Bandwidth::kMedian;
  c.kernel.sigma = k.at("sigma").get<double>();
  c.correlation_mode = j.at("correlation_mode").get<std::string>() == "softmax-then-average"
                           ? CorrelationMode::kSoftmaxThenAverage
                           : CorrelationMode::kAverageThenSoftmax;
  c.refresh_correlation_per_batch = j.at("refresh_correlation_per_batch").get<bool>();
  c.lambda_per_step = j.at("lambda_per_step").get<bool>();
  c.alternating = j.at("alternating").get<bool>();
  c.freeze_weights = j.at("freeze_weights").get<bool>();
  c.validate();
  return c;
}

FeaturizedCorpus featurize_corpus(const Corpus& corpus, const FeaturizerConfig& config) {
  FeaturizedCorpus out;
  out.domain_names = corpus.domain_names;
  out.num_classes = CweRegistry::kSize;
  for (const auto& domain : corpus.domains) {
    out.features.push_back(featurize_samples(domain, config));
    std::vector<int> labels;
    labels.reserve(domain.size());
    for (const Sample& s : domain) labels.push_back(s.label ? *s.label : -1);
    out.labels.push_back(std::move(labels));
  }
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m.rows()) throw ShapeError("select_rows: row out of range");
    std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
  }
  return out;
}

double lambda_at_progress(double p) { return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0; }

double lambda_schedule(std::size_t epoch, std::size_t max_epochs) {
  if (max_epochs <= 1) return 1.0;
  if (epoch >= max_epochs) throw Error("lambda_schedule: epoch out of range");
  return lambda_at_progress(static_cast<double>(epoch) / static_cast<double>(max_epochs - 1));
}

std::vector<int> predict(const ModelBundle& model, const Matrix& features) {
  if (features.rows() == 0) return {};
  return argmax_rows(class_log_probs(model, features));
}

nlohmann::ordered_json TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["best_epoch"] = best_epoch;
  j["stop_reason"] = stop_reason;
  j["final_correlation"] = final_correlation;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["lambda"] = e.lambda;
    r["correlation"] = e.correlation;
    r["l_dc"] = e.domain_adversarial;
    r["l_dis"] = e.discrepancy;
    r["l_c"] = e.classification;
    r["val_accuracy"] = e.val_accuracy;
    rows.push_back(std::move(r));
  }
  j["epochs"] = std::move(rows);
  return j;
}

namespace {

double accuracy_of(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
}

Matrix stack_rows(std::span<const Matrix* const> parts) {
  std::size_t rows = 0;
  for (const Matrix* p : parts) rows += p->rows();
  Matrix out(rows, parts.front()->cols());
  std::size_t offset = 0;
  for (const Matrix* p : parts) {
    std::copy(p->values().begin(), p->values().end(), out.data() + offset * out.cols());
    offset += p->rows();
  }
  return out;
}

struct StepLosses {
  double domain_adversarial = 0.0;
  double discrepancy = 0.0;
  double classification = 0.0;
};

// Everything one training step needs, gathered from the batch.
struct StepInputs {
  std::vector<Matrix> source_x;
  std::vector<std::vector<int>> source_y;
  Matrix target_x;
};

class Trainer {
 public:
  Trainer(const FeaturizedCorpus& data, const TargetSplit& split, const TrainConfig& config)
      : data_(data), config_(config), optimizer_(config.optimizer), domain_optimizer_(config.optimizer),
        class_optimizer_(config.optimizer) {
    config_.validate();
    if (data.features.size() < 2) throw Error("train: need at least one source and one target domain");
    for (std::size_t d = 0; d < data.features.size(); ++d) {
      if (data.features[d].rows() != data.labels[d].size()) throw Error("train: features and labels disagree");
    }
    for (std::size_t d = 0; d < data.num_sources(); ++d) {
      for (int y : data.labels[d]) {
        if (y < 0 || static_cast<std::size_t>(y) >= data.num_classes) {
          throw Error("train: source domain " + data.domain_names[d] + " has an unlabeled or out-of-range sample");
        }
      }
    }
    ModelDims dims;
    dims.features = data.features.front().cols();
    dims.hidden1 = config.hidden1;
    dims.hidden2 = config.hidden2;
    dims.sources = data.num_sources();
    dims.classes = data.num_classes;
    model_ = init_bundle(dims, config.seed);

    val_x_ = select_rows(data.target_features(), split.val);
    for (std::size_t i : split.val) val_y_.push_back(data.target_labels()[i]);
    if (val_y_.empty()) throw Error("train: empty validation split");
  }

  TrainResult run() {
    std::vector<std::size_t> sizes;
    for (const auto& f : data_.features) sizes.push_back(f.rows());
    BatchSampler sampler(sizes, config_.per_domain_batch, derive_seed(config_.seed, seed_offset::kBatches));
    const std::size_t per_epoch = sampler.batches_per_epoch();
    const std::size_t total_steps = per_epoch * config_.max_epochs;

    TrainResult result{model_, {}};
    double best_acc = -std::numeric_limits<double>::infinity();
    std::size_t since_improvement = 0;
    result.report.stop_reason = "max-epochs";
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config_.max_epochs; ++epoch) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.lambda = lambda_schedule(epoch, config_.max_epochs);
      correlation_ = (epoch == 0 || !config_.use_at) ? DomainCorrelation::uniform(model_.dims.sources)
                                                     : domain_correlation(model_, data_.target_features(),
                                                                          config_.correlation_mode);
      rec.correlation = correlation_.w;

      for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
        const double lambda = config_.lambda_per_step
                                  ? lambda_at_progress(total_steps > 1 ? static_cast<double>(step) /
                                                                             static_cast<double>(total_steps - 1)
                                                                       : 1.0)
                                  : rec.lambda;
        if (config_.refresh_correlation_per_batch && config_.use_at && step > 0) {
          correlation_ = domain_correlation(model_, data_.target_features(), config_.correlation_mode);
        }
        StepLosses losses;
        try {
          losses = train_step(gather(sampler.next()), lambda);
        } catch (const NonFiniteError& e) {
          throw NonFiniteError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
        }
        rec.domain_adversarial += losses.domain_adversarial;
        rec.discrepancy += losses.discrepancy;
        rec.classification += losses.classification;
      }
      const auto n = static_cast<double>(per_epoch);
      rec.domain_adversarial /= n;
      rec.discrepancy /= n;
      rec.classification /= n;
      rec.val_accuracy = accuracy_of(predict(model_, val_x_), val_y_);
      result.report.epochs.push_back(rec);

      if (rec.val_accuracy > best_acc) {
        best_acc = rec.val_accuracy;
        result.report.best_epoch = epoch;
        result.model = model_;
        since_improvement = 0;
      } else if (++since_improvement >= config_.patience) {
        result.report.stop_reason = "early-stopped";
        break;
      }
    }
    result.report.final_correlation =
        config_.use_at ? domain_correlation(model_, data_.target_features(), config_.correlation_mode).w
                       : DomainCorrelation::uniform(model_.dims.sources).w;
    return result;
  }

 private:
  StepInputs gather(const Batch& batch) const {
    StepInputs in;
    const std::size_t m = data_.num_sources();
    for (std::size_t d = 0; d < m; ++d) {
      in.source_x.push_back(select_rows(data_.features[d], batch.rows[d]));
      std::vector<int> y;
      for (std::size_t r : batch.rows[d]) y.push_back(data_.labels[d][r]);
      in.source_y.push_back(std::move(y));
    }
    in.target_x = select_rows(data_.features[m], batch.rows[m]);
    return in;
  }

  // Adds L_dc for all domains of the batch to the tape.
  ad::Var adversarial_term(ad::Tape& tape, const BundleVars& vars, const StepInputs& in, double lambda) const {
    std::vector<const Matrix*> parts;
    std::vector<std::size_t> domain_labels;
    for (std::size_t d = 0; d < in.source_x.size(); ++d) {
      parts.push_back(&in.source_x[d]);
      domain_labels.insert(domain_labels.end(), in.source_x[d].rows(), d);
    }
    parts.push_back(&in.target_x);
    domain_labels.insert(domain_labels.end(), in.target_x.rows(), in.source_x.size());
    const ad::Var x_all = tape.constant(stack_rows(parts));
    return domain_adversarial_loss(vars.domain_encoder, vars.discriminator, x_all, domain_labels, lambda);
  }

  // Adds L_C (and L_dis when enabled) to the tape.
  std::pair<ad::Var, std::optional<ad::Var>> class_terms(ad::Tape& tape, const BundleVars& vars,
                                                         const StepInputs& in) const {
    std::vector<ad::Var> reps, log_probs;
    for (const Matrix& x : in.source_x) {
      reps.push_back(encode(vars.feature_encoder, tape.constant(x)));
      log_probs.push_back(classify(vars.classifier, reps.back()));
    }
    const ad::Var l_c = classification_loss(log_probs, in.source_y);
    if (!config_.use_wmmd) return {l_c, std::nullopt};
    const ad::Var target_reps = encode(vars.feature_encoder, tape.constant(in.target_x));
    std::vector<const Matrix*> all;
    for (const ad::Var& r : reps) all.push_back(&r.value());
    all.push_back(&target_reps.value());
    const double sigma = resolve_bandwidth(config_.kernel, stack_rows(all));
    return {l_c, wmmd_loss(reps, target_reps, correlation_, sigma)};
  }

  void apply(AdamW& opt, ad::Tape& tape, std::span<const ad::Var> vars, std::span<Matrix* const> params) {
    if (config_.freeze_weights) return;
    std::vector<const Matrix*> grads;
    for (const ad::Var& v : vars) grads.push_back(&tape.grad(v));
    opt.step(params, grads);
  }

  StepLosses train_step(const StepInputs& in, double lambda) {
    StepLosses out;
    std::vector<Matrix*> params;
    for (auto& p : model_.parameters()) params.push_back(p.value);

    if (!config_.alternating) {
      ad::Tape tape;
      const BundleVars vars = bind(tape, model_);
      LossTerms terms;
      if (config_.use_at) terms.domain_adversarial = adversarial_term(tape, vars, in, lambda);
      auto [l_c, l_dis] = class_terms(tape, vars, in);
      terms.classification = l_c;
      terms.discrepancy = l_dis;
      const ad::Var loss = total_loss(terms, config_.alpha);
      tape.backward(loss);
      apply(optimizer_, tape, vars.all(), params);
      out.classification = l_c.scalar();
      if (terms.domain_adversarial) out.domain_adversarial = terms.domain_adversarial->scalar();
      if (l_dis) out.discrepancy = l_dis->scalar();
      return out;
    }

    // Parameter order: E_f (0-3), E_d (4-7), D (8-9), C (10-11).
    if (config_.use_at) {
      ad::Tape tape;
      const BundleVars vars = bind(tape, model_);
      const ad::Var l_dc = adversarial_term(tape, vars, in, lambda);
      tape.backward(l_dc);
      const auto all = vars.all();
      const std::vector<ad::Var> domain_vars(all.begin() + 4, all.begin() + 10);
      const std::vector<Matrix*> domain_params(params.begin() + 4, params.begin() + 10);
      apply(domain_optimizer_, tape, domain_vars, domain_params);
      out.domain_adversarial = l_dc.scalar();
    }
    ad::Tape tape;
    const BundleVars vars = bind(tape, model_);
    auto [l_c, l_dis] = class_terms(tape, vars, in);
    const ad::Var loss = total_loss({std::nullopt, l_dis, l_c}, config_.alpha);
    tape.backward(loss);
    const auto all = vars.all();
    const std::vector<ad::Var> class_vars{all[0], all[1], all[2], all[3], all[10], all[11]};
    const std::vector<Matrix*> class_params{params[0], params[1], params[2], params[3], params[10], params[11]};
    apply(class_optimizer_, tape, class_vars, class_params);
    out.classification = l_c.scalar();
    if (l_dis) out.discrepancy = l_dis->scalar();
    return out;
  }

  const FeaturizedCorpus& data_;
  TrainConfig config_;
  ModelBundle model_;
  AdamW optimizer_;
  AdamW domain_optimizer_;
  AdamW class_optimizer_;
  DomainCorrelation correlation_;
  Matrix val_x_;
  std::vector<int> val_y_;
};

}  // namespace

TrainResult train(const FeaturizedCorpus& data, const TargetSplit& split, const TrainConfig& config) {
  return Trainer(data, split, config).run();
}

}  // namespace mdaforge
