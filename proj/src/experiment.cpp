#include "mdaforge/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "mdaforge/checkpoint.hpp"
#include "mdaforge/cwe.hpp"
#include "mdaforge/hash.hpp"
#include "mdaforge/rng.hpp"

namespace mdaforge {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

LogLevel log_level() {
  const char* env = std::getenv("MDAFORGE_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet" || v == "0") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[mdaforge] " << message << '\n';
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[mdaforge:debug] " << message << '\n';
}

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create directory " + dir.string());
}

}  // namespace

ojson CorpusSource::to_json() const {
  if (dir) return {{"kind", "jsonl"}, {"dir", dir->string()}};
  if (synth) return {{"kind", "synth"}, {"config", synth->to_json()}};
  return {{"kind", "none"}};
}

Corpus CorpusSource::load(const std::string& target, std::size_t max_len) const {
  if (dir.has_value() == synth.has_value()) throw UsageError("give exactly one of --corpus or --synth");
  if (dir) return load_corpus(*dir, target, max_len);
  return with_target(synth_corpus(*synth), target);
}

std::vector<std::string> CorpusSource::projects() const {
  std::vector<std::string> names;
  if (dir) {
    if (!fs::is_directory(*dir)) throw CorpusError("corpus directory " + dir->string() + " not found");
    for (const auto& entry : fs::directory_iterator(*dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") names.push_back(entry.path().stem().string());
    }
  } else if (synth) {
    for (std::size_t d = 0; d < synth->shift.size(); ++d) names.push_back(synth_source_name(d));
    names.emplace_back(kSynthTargetName);
  }
  std::sort(names.begin(), names.end());
  return names;
}

Corpus with_target(Corpus corpus, const std::string& target) {
  const auto it = std::find(corpus.domain_names.begin(), corpus.domain_names.end(), target);
  if (it == corpus.domain_names.end()) throw CorpusError("target project '" + target + "' not found");
  std::vector<std::size_t> order(corpus.domain_names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto t = static_cast<std::size_t>(it - corpus.domain_names.begin());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if ((a == t) != (b == t)) return b == t;
    return corpus.domain_names[a] < corpus.domain_names[b];
  });
  Corpus out;
  out.provenance = std::move(corpus.provenance);
  for (std::size_t d = 0; d < order.size(); ++d) {
    out.domain_names.push_back(corpus.domain_names[order[d]]);
    auto samples = std::move(corpus.domains[order[d]]);
    for (auto& s : samples) s.domain = static_cast<int>(d);
    out.domains.push_back(std::move(samples));
  }
  out.provenance["source"] = std::vector<std::string>(out.domain_names.begin(), out.domain_names.end() - 1);
  out.provenance["target"] = target;
  return out;
}

std::string corpus_fingerprint(const Corpus& corpus) {
  std::uint64_t h = kFnvOffsetBasis;
  for (std::size_t d = 0; d < corpus.domains.size(); ++d) {
    h = fnv1a64(corpus.domain_names[d], h);
    h = fnv1a64("\x1e", h);
    for (const auto& s : corpus.domains[d]) {
      for (const auto& tok : s.tokens) {
        h = fnv1a64(tok, h);
        h = fnv1a64("\x1f", h);
      }
      h = fnv1a64(s.label ? std::to_string(*s.label) : "-", h);
      h = fnv1a64("\x1d", h);
    }
  }
  return hex64(h);
}

void ExperimentConfig::validate() const {
  if (corpus.dir.has_value() == corpus.synth.has_value()) throw UsageError("give exactly one of --corpus or --synth");
  if (corpus.synth) corpus.synth->validate();
  if (targets.empty()) throw UsageError("no target project given");
  if (seeds.empty()) throw UsageError("no seed given");
  train.validate();
  featurizer.validate();
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["corpus"] = corpus.to_json();
  j["targets"] = targets;
  j["seeds"] = seeds;
  j["train"] = train.to_json();
  j["featurizer"] = featurizer.to_json();
  j["out_dir"] = out_dir.string();
  return j;
}

ojson run_identity(const ExperimentConfig& config, const std::string& target, std::uint64_t seed,
                   const std::string& data_fingerprint) {
  TrainConfig train = config.train;
  train.seed = seed;
  ojson j;
  j["method"] = train.method_name();
  j["target"] = target;
  j["seed"] = seed;
  j["split_seed"] = derive_seed(seed, seed_offset::kSplit);
  j["corpus_fingerprint"] = data_fingerprint;
  j["train"] = train.to_json();
  j["featurizer"] = config.featurizer.to_json();
  return j;
}

std::string config_hash(const ojson& identity) { return hex64(fnv1a64(identity.dump())); }

fs::path run_directory(const fs::path& out, const std::string& method, const std::string& target, std::uint64_t seed) {
  return out / method / target / ("seed-" + std::to_string(seed));
}

std::vector<fs::path> run_synth(const SynthConfig& config, const fs::path& out) {
  config.validate();
  const Corpus corpus = synth_corpus(config);
  ensure_dir(out);
  write_corpus_jsonl(corpus, out);
  std::vector<fs::path> files;
  for (const auto& name : corpus.domain_names) files.push_back(out / (name + ".jsonl"));
  const fs::path prov = out / "provenance.json";
  write_json(prov, ojson(corpus.provenance));
  files.push_back(prov);
  return files;
}

namespace {

ojson result_json(const RunResult& result, const std::string& hash) {
  ojson j = result.to_json();
  j["config_hash"] = hash;
  return j;
}

std::vector<int> labels_at(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

TrainOutcome train_one(const ExperimentConfig& config, const Corpus& corpus, const FeaturizedCorpus& data,
                       const std::string& data_fp, std::uint64_t seed) {
  const std::string& target = corpus.target_name();
  TrainConfig train_cfg = config.train;
  train_cfg.seed = seed;
  const std::string method = train_cfg.method_name();
  const ojson identity = run_identity(config, target, seed, data_fp);
  const std::string hash = config_hash(identity);
  const std::uint64_t split_seed = derive_seed(seed, seed_offset::kSplit);

  const fs::path dir = run_directory(config.out_dir, method, target, seed);
  ensure_dir(dir);
  std::ofstream log(dir / "run.log");
  log << timestamp() << " start method=" << method << " target=" << target << " seed=" << seed << '\n';
  log_info("train " + method + " target=" + target + " seed=" + std::to_string(seed));

  ojson cfg_json = config.to_json();
  cfg_json["run"] = identity;
  cfg_json["config_hash"] = hash;
  cfg_json["provenance"] = corpus.provenance;
  write_json(dir / "config.json", cfg_json);

  const TargetSplit split = split_target(corpus, split_seed);
  TrainResult trained;
  try {
    trained = train(data, split, train_cfg);
  } catch (const Error& e) {
    log << timestamp() << " failed: " << e.what() << '\n';
    throw Error("train " + method + " target=" + target + " seed=" + std::to_string(seed) + ": " + e.what());
  }
  for (const auto& ep : trained.report.epochs) {
    log << timestamp() << " epoch " << ep.epoch << " val_acc=" << ep.val_accuracy << '\n';
    log_debug("epoch " + std::to_string(ep.epoch) + " val_acc=" + std::to_string(ep.val_accuracy));
  }

  nlohmann::json header;
  header["format"] = "mdaforge-checkpoint";
  header["method"] = method;
  header["target"] = target;
  header["train_seed"] = seed;
  header["split_seed"] = split_seed;
  header["domain_names"] = corpus.domain_names;
  header["featurizer"] = config.featurizer.to_json();
  header["featurizer_fingerprint"] = config.featurizer.fingerprint();
  header["corpus_fingerprint"] = data_fp;
  header["config_hash"] = hash;
  header["train"] = train_cfg.to_json();
  save_checkpoint(dir / "checkpoint.bin", trained.model, header);
  write_json(dir / "train_report.json", trained.report.to_json());

  const Matrix test_x = select_rows(data.target_features(), split.test);
  RunResult result = evaluate_predictions(labels_at(data.target_labels(), split.test), predict(trained.model, test_x));
  result.method = method;
  result.target = target;
  result.seed = seed;
  result.split = "test";
  TrainOutcome outcome{dir, result_json(result, hash)};
  write_json(dir / "result.json", outcome.result);
  log << timestamp() << " done best_epoch=" << trained.report.best_epoch << " stop=" << trained.report.stop_reason
      << " test_acc=" << result.acc << '\n';
  log_info("  acc=" + std::to_string(result.acc) + " -> " + (dir / "result.json").string());
  return outcome;
}

}  // namespace

std::vector<TrainOutcome> run_train(const ExperimentConfig& config) {
  config.validate();
  std::vector<TrainOutcome> outcomes;
  for (const auto& target : config.targets) {
    const Corpus corpus = config.corpus.load(target, config.featurizer.max_len);
    const FeaturizedCorpus data = featurize_corpus(corpus, config.featurizer);
    const std::string data_fp = corpus_fingerprint(corpus);
    for (auto seed : config.seeds) outcomes.push_back(train_one(config, corpus, data, data_fp, seed));
  }
  return outcomes;
}

ojson run_evaluate(const EvaluateOptions& options) {
  const Checkpoint ck = load_checkpoint(options.checkpoint);
  const auto& h = ck.header;
  std::string target, method, hash, want_fp, want_data;
  std::uint64_t train_seed = 0, split_seed = 0;
  std::vector<std::string> domain_names;
  FeaturizerConfig trained_feat;
  try {
    target = h.at("target").get<std::string>();
    method = h.at("method").get<std::string>();
    hash = h.at("config_hash").get<std::string>();
    want_fp = h.at("featurizer_fingerprint").get<std::string>();
    want_data = h.at("corpus_fingerprint").get<std::string>();
    train_seed = h.at("train_seed").get<std::uint64_t>();
    split_seed = h.at("split_seed").get<std::uint64_t>();
    domain_names = h.at("domain_names").get<std::vector<std::string>>();
    trained_feat = FeaturizerConfig::from_json(h.at("featurizer"));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint header incomplete: " + std::string(e.what()));
  }
  if (options.target && *options.target != target) {
    throw Error("checkpoint was trained for target '" + target + "', not '" + *options.target + "'");
  }
  if (options.split != "test" && options.split != "val") throw UsageError("--split must be test or val");

  FeaturizerConfig feat = trained_feat;
  if (options.dim) feat.dim = *options.dim;
  if (options.ngram_max) feat.ngram_max = *options.ngram_max;
  if (options.max_len) feat.max_len = *options.max_len;
  feat.validate();
  if (feat.fingerprint() != want_fp) {
    throw Error("featurizer hash mismatch: checkpoint " + want_fp + " (" + trained_feat.to_json().dump() +
                "), requested " + feat.fingerprint() + " (" + feat.to_json().dump() +
                "); features would not line up with the trained weights");
  }
  if (feat.dim != ck.model.dims.features) {
    throw Error("featurizer dim " + std::to_string(feat.dim) + " does not match model input " +
                std::to_string(ck.model.dims.features));
  }

  const Corpus corpus = options.corpus.load(target, feat.max_len);
  if (corpus.domain_names != domain_names) {
    throw Error("corpus domains do not match the checkpoint's; expected " + nlohmann::json(domain_names).dump());
  }
  const std::string data_fp = corpus_fingerprint(corpus);
  if (data_fp != want_data) {
    throw Error("corpus hash mismatch: checkpoint " + want_data + ", corpus " + data_fp +
                "; the corpus changed since training");
  }

  const FeaturizedCorpus data = featurize_corpus(corpus, feat);
  const TargetSplit split = split_target(corpus, options.split_seed.value_or(split_seed));
  const auto& rows = options.split == "test" ? split.test : split.val;
  const Matrix x = select_rows(data.target_features(), rows);
  RunResult result = evaluate_predictions(labels_at(data.target_labels(), rows), predict(ck.model, x));
  result.method = method;
  result.target = target;
  result.seed = train_seed;
  result.split = options.split;
  return result_json(result, hash);
}

CompareOutput run_compare(const std::vector<fs::path>& result_files, const std::string& metric) {
  if (result_files.empty()) throw UsageError("compare needs at least one result file");
  std::map<std::string, std::vector<double>> by_method;
  std::vector<std::string> order;
  for (const auto& path : result_files) {
    const auto j = read_json(path);
    if (!j.contains("method") || !j["method"].is_string()) throw Error(path.string() + ": no method field");
    if (!j.contains("metrics") || !j["metrics"].contains(metric) || !j["metrics"][metric].is_number()) {
      throw Error(path.string() + ": metric '" + metric + "' absent");
    }
    const auto method = j["method"].get<std::string>();
    if (!by_method.count(method)) order.push_back(method);
    by_method[method].push_back(j["metrics"][metric].get<double>());
  }
  std::vector<ScoreGroup> groups;
  for (const auto& m : order) groups.push_back({m, by_method[m]});

  CompareOutput out{scott_knott_esd(groups), {}, {}};
  out.json["metric"] = metric;
  out.json["files"] = result_files.size();
  ojson counts = ojson::object();
  for (const auto& m : order) counts[m] = by_method[m].size();
  out.json["scores_per_method"] = std::move(counts);
  const ojson table = out.table.to_json();
  out.json["ranks"] = table["ranks"];
  out.json["rows"] = table["rows"];
  ojson pairwise = ojson::array();
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const EffectSize e = cohens_d(by_method[order[a]], by_method[order[b]]);
      ojson row{{"a", order[a]}, {"b", order[b]}};
      row["d"] = std::isfinite(e.d) ? ojson(e.d) : ojson(e.d > 0 ? "inf" : "-inf");
      row["magnitude"] = magnitude_label(e.magnitude);
      pairwise.push_back(std::move(row));
    }
  }
  out.json["pairwise"] = std::move(pairwise);
  out.text = "metric: " + metric + "\n" + out.table.to_text();
  return out;
}

}  // namespace mdaforge
