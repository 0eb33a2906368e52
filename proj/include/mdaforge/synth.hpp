#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdaforge/corpus.hpp"

namespace mdaforge {

/// Synthetic multi-domain corpus.
///
/// Every class c owns a base token distribution: with probability
/// `class_signal` a token is drawn uniformly from the class's own vocabulary
/// slice, otherwise uniformly from the shared background vocabulary. Source
/// domain d replaces each token, with probability shift[d], by a draw from its
/// private distribution: with probability `private_class_signal` from the
/// class's sub-slice of the domain's private vocabulary, otherwise uniformly
/// from the whole private vocabulary. The target draws from its own private
/// vocabulary with probability `target_shift` (0 by default), so with
/// target_shift 0 a source with shift 0 is distributed exactly like the
/// target.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> classes;  // CWE ids
  std::vector<double> shift;         // one per source domain, each in [0, 1]
  std::size_t samples_per_domain = 200;
  std::size_t tokens_per_sample = 40;
  std::size_t shared_vocab = 200;
  std::size_t class_vocab = 20;
  std::size_t private_vocab = 60;
  double class_signal = 0.3;
  double private_class_signal = 0.0;
  double target_shift = 0.0;

  void validate() const;
  /// Every field, always; nothing is left to defaults when read back.
  nlohmann::ordered_json to_json() const;
  /// Requires every field to be present.
  static SynthConfig from_json(const nlohmann::json& j);
  static SynthConfig load(const std::string& path);
};

/// Project name of source domain `d`: "source00", "source01", ...
std::string synth_source_name(std::size_t d);
inline constexpr const char* kSynthTargetName = "target";

/// Deterministic given the config. Provenance records the config and shifts.
Corpus synth_corpus(const SynthConfig& config);

}  // namespace mdaforge
