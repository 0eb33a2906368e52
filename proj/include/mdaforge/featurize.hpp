#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdaforge/corpus.hpp"
#include "mdaforge/matrix.hpp"

namespace mdaforge {

struct FeaturizerConfig {
  std::size_t dim = 2048;
  int ngram_max = 2;
  std::size_t max_len = kDefaultMaxTokens;

  void validate() const;
  nlohmann::json to_json() const;
  static FeaturizerConfig from_json(const nlohmann::json& j);
  /// Hex digest identifying this configuration in checkpoints.
  std::string fingerprint() const;
};

/// Bucket and sign of one hashed n-gram. The n-gram's tokens are joined with
/// U+001F and hashed with FNV-1a 64; bucket = hash mod dim, sign = bit 63.
struct HashedFeature {
  std::size_t bucket;
  double sign;
};
HashedFeature hash_ngram(std::span<const std::string> tokens, std::size_t dim);

/// Signed feature hashing of all n-grams with n = 1..ngram_max, scaled to unit
/// L2 norm. Throws on an empty token list. If the signed counts cancel to the
/// zero vector, the unsigned counts are used instead.
std::vector<double> featurize(std::span<const std::string> tokens, const FeaturizerConfig& config);

/// One row per sample. Parallel over samples.
Matrix featurize_samples(const std::vector<Sample>& samples, const FeaturizerConfig& config);

}  // namespace mdaforge
