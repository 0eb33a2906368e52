#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mdaforge {

inline constexpr std::size_t kDefaultMaxTokens = 800;

/// One code function.
struct Sample {
  std::vector<std::string> tokens;
  std::optional<int> label;  // CWE registry index; empty when withheld
  int domain = 0;            // 0..M-1 sources, M target
};

/// Samples grouped by domain. Sources are ordered lexicographically by
/// project name and the target project always sits last, at index M.
struct Corpus {
  std::vector<std::string> domain_names;
  std::vector<std::vector<Sample>> domains;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t num_sources() const { return domains.empty() ? 0 : domains.size() - 1; }
  std::size_t target_index() const { return num_sources(); }
  const std::vector<Sample>& target() const { return domains.back(); }
  const std::string& target_name() const { return domain_names.back(); }
  std::vector<std::size_t> counts() const;
};

/// Splits source text on whitespace and at punctuation, keeping each
/// punctuation character as its own token. Identifier characters are ASCII
/// alphanumerics, '_', '$' and any byte >= 0x80. Keeps the first `max_len`
/// tokens.
std::vector<std::string> tokenize(std::string_view code, std::size_t max_len = kDefaultMaxTokens);

/// Reads every `<project>.jsonl` in `dir`. `target_project` becomes the target
/// domain; the rest are sources in lexicographic order. A `provenance.json`
/// next to the corpus files is attached to the result when present.
Corpus load_corpus(const std::filesystem::path& dir, std::string_view target_project,
                   std::size_t max_len = kDefaultMaxTokens);

/// Writes one `<project>.jsonl` per domain, labels included.
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& dir);

/// Target samples held out for model selection (val) and reporting (test).
struct TargetSplit {
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded uniform shuffle of [0, n); the first ceil(n/3) indices go to val.
TargetSplit split_target(std::size_t target_size, std::uint64_t seed);
TargetSplit split_target(const Corpus& corpus, std::uint64_t seed);

/// Row indices drawn for one step, one list per domain (sources then target).
struct Batch {
  std::vector<std::vector<std::size_t>> rows;

  std::size_t total() const;
};

/// Endless per-domain batch stream. Each domain keeps its own seeded
/// permutation and reshuffles when it runs out, independently of the others.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> domain_sizes, std::size_t per_domain, std::uint64_t seed);

  /// ceil(max domain size / per_domain).
  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  std::size_t per_domain() const { return per_domain_; }

  Batch next();

 private:
  struct Stream {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::uint64_t seed = 0;
    std::uint64_t reshuffles = 0;
  };

  void reshuffle(Stream& s);

  std::size_t per_domain_;
  std::size_t batches_per_epoch_ = 0;
  std::vector<Stream> streams_;
};

BatchSampler make_batches(const Corpus& corpus, std::size_t per_domain, std::uint64_t seed);

}  // namespace mdaforge
