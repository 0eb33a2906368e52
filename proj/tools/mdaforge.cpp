// mdaforge: synthesize corpora, train, evaluate and compare runs.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdaforge/experiment.hpp"

namespace {

using namespace mdaforge;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CorpusFlags {
  std::string corpus_dir;
  std::string synth_cfg;

  void add(CLI::App* cmd) {
    auto* c = cmd->add_option("--corpus", corpus_dir, "Directory of <project>.jsonl files");
    auto* s = cmd->add_option("--synth", synth_cfg, "Synthetic corpus config (JSON)");
    c->excludes(s);
  }

  CorpusSource source() const {
    CorpusSource src;
    if (!corpus_dir.empty()) src.dir = corpus_dir;
    if (!synth_cfg.empty()) src.synth = SynthConfig::load(synth_cfg);
    if (!src.dir && !src.synth) throw UsageError("one of --corpus or --synth is required");
    return src;
  }
};

struct FeaturizerFlags {
  std::optional<std::size_t> dim;
  std::optional<int> ngram_max;
  std::optional<std::size_t> max_len;

  void add(CLI::App* cmd) {
    cmd->add_option("--dim", dim, "Hashed feature dimension (default 2048)");
    cmd->add_option("--ngram", ngram_max, "Largest n-gram length (default 2)");
    cmd->add_option("--max-len", max_len, "Tokens kept per function (default 800)");
  }

  FeaturizerConfig apply(FeaturizerConfig base) const {
    if (dim) base.dim = *dim;
    if (ngram_max) base.ngram_max = *ngram_max;
    if (max_len) base.max_len = *max_len;
    return base;
  }
};

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source domain adaptation for CWE defect prediction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic multi-project corpus");
  std::string synth_config, synth_out;
  synth->add_option("--config", synth_config, "Generator config (JSON)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train on all sources and report on the target test split");
  CorpusFlags train_corpus;
  train_corpus.add(train);
  FeaturizerFlags train_feat;
  train_feat.add(train);
  std::vector<std::string> targets;
  bool all_targets = false;
  std::vector<std::uint64_t> seeds;
  bool no_at = false, no_wmmd = false, alternating = false;
  std::string baseline;
  ExperimentConfig exp;
  std::string train_out = "runs";
  auto* target_opt = train->add_option("--target", targets, "Target project (repeatable)");
  auto* all_opt = train->add_flag("--all-targets", all_targets, "Use every project as the target in turn");
  target_opt->excludes(all_opt);
  train->add_option("--seed", seeds, "Seed (repeatable; default 0)");
  train->add_flag("--no-at", no_at, "Drop adversarial training and the learned domain correlation");
  train->add_flag("--no-wmmd", no_wmmd, "Drop the weighted MMD term");
  train->add_option("--baseline", baseline, "Baseline method")->check(CLI::IsMember({"source-only"}));
  train->add_option("--alpha", exp.train.alpha, "Weight of the discrepancy loss")->capture_default_str();
  train->add_option("--epochs", exp.train.max_epochs, "Maximum epochs")->capture_default_str();
  train->add_option("--patience", exp.train.patience, "Epochs without validation gain before stopping")->capture_default_str();
  train->add_option("--lr", exp.train.optimizer.lr, "AdamW learning rate")->capture_default_str();
  train->add_option("--weight-decay", exp.train.optimizer.weight_decay, "AdamW weight decay")->capture_default_str();
  train->add_option("--per-domain", exp.train.per_domain_batch, "Samples per domain in each batch")->capture_default_str();
  train->add_option("--hidden1", exp.train.hidden1, "First encoder layer width")->capture_default_str();
  train->add_option("--hidden2", exp.train.hidden2, "Second encoder layer width")->capture_default_str();
  train->add_flag("--alternating", alternating, "Two-phase update (domain players, then class players)");
  train->add_option("--out", train_out, "Output directory")->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Recompute a run's metrics from its checkpoint");
  std::string checkpoint, eval_target, split = "test", eval_out;
  std::optional<std::uint64_t> split_seed;
  CorpusFlags eval_corpus;
  eval_corpus.add(evaluate);
  FeaturizerFlags eval_feat;
  eval_feat.add(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint.bin written by train")->required();
  evaluate->add_option("--target", eval_target, "Target project (must match the checkpoint)");
  evaluate->add_option("--split", split, "Target split to score")->capture_default_str()->check(CLI::IsMember({"test", "val"}));
  evaluate->add_option("--split-seed", split_seed, "Override the training split seed");
  evaluate->add_option("--out", eval_out, "Write the result JSON here instead of stdout");

  // compare
  auto* compare = app.add_subcommand("compare", "Rank methods with Scott-Knott ESD");
  std::vector<std::string> result_files;
  std::string metric = "acc", compare_out;
  compare->add_option("results", result_files, "result.json files")->required();
  compare->add_option("--metric", metric, "Metric to rank")->capture_default_str()->check(CLI::IsMember({"acc", "mcc", "kappa", "wf1"}));
  compare->add_option("--out", compare_out, "Directory for rank_table.json and rank_table.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto files = run_synth(SynthConfig::load(synth_config), synth_out);
      for (const auto& f : files) std::cout << f.string() << '\n';
    } else if (train->parsed()) {
      if (targets.empty() && !all_targets) throw UsageError("--target NAME or --all-targets is required");
      exp.corpus = train_corpus.source();
      exp.targets = all_targets ? exp.corpus.projects() : targets;
      exp.seeds = seeds.empty() ? std::vector<std::uint64_t>{0} : seeds;
      exp.train.use_at = !no_at && baseline.empty();
      exp.train.use_wmmd = !no_wmmd && baseline.empty();
      exp.train.alternating = alternating;
      exp.featurizer = train_feat.apply(exp.featurizer);
      exp.out_dir = train_out;
      for (const auto& o : run_train(exp)) std::cout << (o.directory / "result.json").string() << '\n';
    } else if (evaluate->parsed()) {
      EvaluateOptions opt;
      opt.checkpoint = checkpoint;
      opt.corpus = eval_corpus.source();
      if (!eval_target.empty()) opt.target = eval_target;
      opt.split = split;
      opt.split_seed = split_seed;
      opt.dim = eval_feat.dim;
      opt.ngram_max = eval_feat.ngram_max;
      opt.max_len = eval_feat.max_len;
      const auto result = run_evaluate(opt);
      if (eval_out.empty()) {
        print_json(result);
      } else {
        std::ofstream out(eval_out);
        if (!out) throw Error("cannot write " + eval_out);
        out << result.dump(2) << '\n';
      }
    } else if (compare->parsed()) {
      std::vector<std::filesystem::path> paths(result_files.begin(), result_files.end());
      const auto cmp = run_compare(paths, metric);
      std::cout << cmp.text;
      if (!compare_out.empty()) {
        std::filesystem::create_directories(compare_out);
        std::ofstream j(std::filesystem::path(compare_out) / "rank_table.json");
        std::ofstream t(std::filesystem::path(compare_out) / "rank_table.txt");
        if (!j || !t) throw Error("cannot write to " + compare_out);
        j << cmp.json.dump(2) << '\n';
        t << cmp.text;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
