#include "mdaforge/synth.hpp"

#include <cstdio>
#include <fstream>

#include "mdaforge/cwe.hpp"
#include "mdaforge/error.hpp"
#include "mdaforge/rng.hpp"

namespace mdaforge {

void SynthConfig::validate() const {
  if (classes.empty()) throw Error("synth: at least one class required");
  if (classes.size() > CweRegistry::kSize) {
    throw Error("synth: " + std::to_string(classes.size()) + " classes exceeds the registry size 44");
  }
  for (const auto& c : classes) CweRegistry::standard().label(c);
  if (shift.empty()) throw Error("synth: at least one source domain required");
  for (double d : shift) {
    if (!(d >= 0.0 && d <= 1.0)) throw Error("synth: shift values must lie in [0, 1]");
  }
  if (samples_per_domain < 3) throw Error("synth: samples_per_domain must be >=3");
  if (tokens_per_sample < 1) throw Error("synth: tokens_per_sample must be >=1");
  if (shared_vocab < 1 || class_vocab < 1) throw Error("synth: vocabularies must be non-empty");
  if (private_vocab < classes.size()) throw Error("synth: private_vocab must be >= number of classes");
  if (!(class_signal >= 0.0 && class_signal <= 1.0)) throw Error("synth: class_signal must lie in [0, 1]");
  if (!(private_class_signal >= 0.0 && private_class_signal <= 1.0)) {
    throw Error("synth: private_class_signal must lie in [0, 1]");
  }
  if (!(target_shift >= 0.0 && target_shift <= 1.0)) throw Error("synth: target_shift must lie in [0, 1]");
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["classes"] = classes;
  j["shift"] = shift;
  j["samples_per_domain"] = samples_per_domain;
  j["tokens_per_sample"] = tokens_per_sample;
  j["shared_vocab"] = shared_vocab;
  j["class_vocab"] = class_vocab;
  j["private_vocab"] = private_vocab;
  j["class_signal"] = class_signal;
  j["private_class_signal"] = private_class_signal;
  j["target_shift"] = target_shift;
  return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.classes = j.at("classes").get<std::vector<std::string>>();
    c.shift = j.at("shift").get<std::vector<double>>();
    c.samples_per_domain = j.at("samples_per_domain").get<std::size_t>();
    c.tokens_per_sample = j.at("tokens_per_sample").get<std::size_t>();
    c.shared_vocab = j.at("shared_vocab").get<std::size_t>();
    c.class_vocab = j.at("class_vocab").get<std::size_t>();
    c.private_vocab = j.at("private_vocab").get<std::size_t>();
    c.class_signal = j.at("class_signal").get<double>();
    c.private_class_signal = j.at("private_class_signal").get<double>();
    c.target_shift = j.at("target_shift").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open synth config " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("synth config " + path + ": " + e.what());
  }
}

std::string synth_source_name(std::size_t d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "source%02zu", d);
  return buf;
}

namespace {

std::string token(char kind, std::size_t owner, std::size_t j) {
  return std::string(1, kind) + std::to_string(owner) + "x" + std::to_string(j);
}

}  // namespace

Corpus synth_corpus(const SynthConfig& config) {
  config.validate();
  const auto& registry = CweRegistry::standard();
  const std::size_t num_classes = config.classes.size();
  const std::size_t num_sources = config.shift.size();
  std::vector<int> label_index;
  for (const auto& c : config.classes) label_index.push_back(registry.label(c).index);

  Corpus corpus;
  for (std::size_t d = 0; d < num_sources; ++d) corpus.domain_names.push_back(synth_source_name(d));
  corpus.domain_names.push_back(kSynthTargetName);

  const std::size_t sub_slice = config.private_vocab / num_classes;
  for (std::size_t d = 0; d <= num_sources; ++d) {
    const double delta = d < num_sources ? config.shift[d] : config.target_shift;
    Rng rng(derive_seed(config.seed, d));
    std::vector<Sample> samples;
    samples.reserve(config.samples_per_domain);
    for (std::size_t i = 0; i < config.samples_per_domain; ++i) {
      const std::size_t cls = i % num_classes;
      Sample s;
      s.domain = static_cast<int>(d);
      s.label = label_index[cls];
      s.tokens.reserve(config.tokens_per_sample);
      // The draw sequence is the same for every domain, so a zero-shift
      // domain reproduces the target's generative process exactly.
      for (std::size_t t = 0; t < config.tokens_per_sample; ++t) {
        const bool private_draw = rng.uniform() < delta;
        const double u_kind = rng.uniform();
        const double u_pick = rng.uniform();
        if (private_draw) {
          if (u_kind < config.private_class_signal) {
            const std::size_t j = cls * sub_slice + static_cast<std::size_t>(u_pick * static_cast<double>(sub_slice));
            s.tokens.push_back(token('p', d, j));
          } else {
            const auto j = static_cast<std::size_t>(u_pick * static_cast<double>(config.private_vocab));
            s.tokens.push_back(token('p', d, j));
          }
        } else if (u_kind < config.class_signal) {
          const auto j = static_cast<std::size_t>(u_pick * static_cast<double>(config.class_vocab));
          s.tokens.push_back(token('k', cls, j));
        } else {
          const auto j = static_cast<std::size_t>(u_pick * static_cast<double>(config.shared_vocab));
          s.tokens.push_back(token('b', 0, j));
        }
      }
      samples.push_back(std::move(s));
    }
    corpus.domains.push_back(std::move(samples));
  }

  corpus.provenance = {
      {"generator", {{"kind", "mdaforge-synth"}, {"version", 1}, {"config", config.to_json()}}},
      {"shift", config.shift},
      {"seed", config.seed},
  };
  return corpus;
}

}  // namespace mdaforge
