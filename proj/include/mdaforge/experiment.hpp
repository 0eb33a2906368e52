#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdaforge/corpus.hpp"
#include "mdaforge/error.hpp"
#include "mdaforge/featurize.hpp"
#include "mdaforge/metrics.hpp"
#include "mdaforge/stats.hpp"
#include "mdaforge/synth.hpp"
#include "mdaforge/trainer.hpp"

namespace mdaforge {

/// Bad command-line input; the CLI maps it to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Verbosity from MDAFORGE_LOG: "quiet", "info" (default) or "debug".
enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };
LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);

/// Where the corpus comes from: a directory of JSONL files or a generator config.
struct CorpusSource {
  std::optional<std::filesystem::path> dir;
  std::optional<SynthConfig> synth;

  nlohmann::ordered_json to_json() const;
  /// Loads (or generates) the corpus with `target` as the target domain.
  Corpus load(const std::string& target, std::size_t max_len) const;
  /// All project names available from this source, sorted.
  std::vector<std::string> projects() const;
};

/// Puts `target` last and the remaining domains in lexicographic order.
Corpus with_target(Corpus corpus, const std::string& target);

/// Digest over domain names, tokens and labels.
std::string corpus_fingerprint(const Corpus& corpus);

struct ExperimentConfig {
  CorpusSource corpus;
  std::vector<std::string> targets;
  std::vector<std::uint64_t> seeds{0};
  TrainConfig train;
  FeaturizerConfig featurizer;
  std::filesystem::path out_dir = "runs";

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Everything that determines one run's outputs, independent of where they are written.
nlohmann::ordered_json run_identity(const ExperimentConfig& config, const std::string& target, std::uint64_t seed,
                                    const std::string& data_fingerprint);
std::string config_hash(const nlohmann::ordered_json& identity);

/// <out>/<method>/<target>/seed-<n>
std::filesystem::path run_directory(const std::filesystem::path& out, const std::string& method,
                                    const std::string& target, std::uint64_t seed);

/// Writes one JSONL per project plus provenance.json. Returns the files written.
std::vector<std::filesystem::path> run_synth(const SynthConfig& config, const std::filesystem::path& out);

struct TrainOutcome {
  std::filesystem::path directory;
  nlohmann::ordered_json result;  // as written to result.json
};

/// One training run per (target, seed). Each run owns its output directory:
/// config.json, checkpoint.bin, train_report.json, result.json and run.log
/// (the only file carrying timestamps).
std::vector<TrainOutcome> run_train(const ExperimentConfig& config);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  CorpusSource corpus;
  std::optional<std::string> target;  // must match the checkpoint when given
  std::string split = "test";         // "test" or "val"
  std::optional<std::uint64_t> split_seed;  // defaults to the training split
  // Applied on top of the checkpoint's featurizer; any real change is refused.
  std::optional<std::size_t> dim;
  std::optional<int> ngram_max;
  std::optional<std::size_t> max_len;
};

/// Recomputes a RunResult from a saved model. Refuses when the featurizer,
/// corpus or domain layout differ from what the checkpoint was trained on.
nlohmann::ordered_json run_evaluate(const EvaluateOptions& options);

struct CompareOutput {
  RankTable table;
  nlohmann::ordered_json json;
  std::string text;
};

/// Groups result files by method (duplicates pooled), extracts `metric` and ranks.
CompareOutput run_compare(const std::vector<std::filesystem::path>& result_files, const std::string& metric);

}  // namespace mdaforge
