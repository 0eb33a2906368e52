#include "mdaforge/featurize.hpp"

#include <algorithm>
#include <cmath>

#include "mdaforge/error.hpp"
#include "mdaforge/hash.hpp"

namespace mdaforge {

void FeaturizerConfig::validate() const {
  if (dim < 16) throw Error("featurizer dim must be >=16, got " + std::to_string(dim));
  if (ngram_max < 1 || ngram_max > 3) throw Error("ngram_max must be 1, 2 or 3, got " + std::to_string(ngram_max));
  if (max_len < 1) throw Error("max_len must be >=1");
}

nlohmann::json FeaturizerConfig::to_json() const {
  return {{"dim", dim}, {"ngram_max", ngram_max}, {"max_len", max_len}, {"hash", "fnv1a64-signed"}};
}

FeaturizerConfig FeaturizerConfig::from_json(const nlohmann::json& j) {
  FeaturizerConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.ngram_max = j.at("ngram_max").get<int>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.validate();
  return c;
}

std::string FeaturizerConfig::fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

HashedFeature hash_ngram(std::span<const std::string> tokens, std::size_t dim) {
  std::uint64_t h = kFnvOffsetBasis;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) h = fnv1a64("\x1f", h);
    h = fnv1a64(tokens[i], h);
  }
  return {static_cast<std::size_t>(h % dim), (h >> 63) ? -1.0 : 1.0};
}

std::vector<double> featurize(std::span<const std::string> tokens, const FeaturizerConfig& config) {
  config.validate();
  if (tokens.empty()) throw Error("featurize: empty token sequence");
  tokens = tokens.first(std::min(tokens.size(), config.max_len));
  std::vector<double> signed_counts(config.dim, 0.0);
  std::vector<double> counts(config.dim, 0.0);
  for (int n = 1; n <= config.ngram_max; ++n) {
    const auto width = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
      const HashedFeature f = hash_ngram(tokens.subspan(i, width), config.dim);
      signed_counts[f.bucket] += f.sign;
      counts[f.bucket] += 1.0;
    }
  }
  double norm2 = 0.0;
  for (double v : signed_counts) norm2 += v * v;
  std::vector<double>& out = norm2 > 0.0 ? signed_counts : counts;
  if (norm2 == 0.0) {
    for (double v : counts) norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : out) v *= inv;
  return std::move(out);
}

Matrix featurize_samples(const std::vector<Sample>& samples, const FeaturizerConfig& config) {
  config.validate();
  Matrix out(samples.size(), config.dim);
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  bool failed = false;
  std::string message;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto v = featurize(samples[static_cast<std::size_t>(i)].tokens, config);
      std::copy(v.begin(), v.end(), out.row(static_cast<std::size_t>(i)).begin());
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (!failed) message = "sample " + std::to_string(i) + ": " + e.what();
        failed = true;
      }
    }
  }
  if (failed) throw Error(message);
  return out;
}

}  // namespace mdaforge
