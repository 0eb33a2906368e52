#include "mdaforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "mdaforge/cwe.hpp"
#include "mdaforge/error.hpp"
#include "mdaforge/rng.hpp"

namespace mdaforge {

namespace fs = std::filesystem;

std::vector<std::size_t> Corpus::counts() const {
  std::vector<std::size_t> out;
  out.reserve(domains.size());
  for (const auto& d : domains) out.push_back(d.size());
  return out;
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view code, std::size_t max_len) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < code.size() && tokens.size() < max_len) {
    const auto c = static_cast<unsigned char>(code[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      const std::size_t start = i;
      while (i < code.size() && is_word_byte(static_cast<unsigned char>(code[i]))) ++i;
      tokens.emplace_back(code.substr(start, i - start));
    } else {
      tokens.emplace_back(1, code[i]);
      ++i;
    }
  }
  return tokens;
}

namespace {

std::vector<Sample> read_project(const fs::path& file, const std::string& project, int domain, std::size_t max_len) {
  std::ifstream in(file);
  if (!in) throw CorpusError("cannot open " + file.string());
  const auto& registry = CweRegistry::standard();
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = file.filename().string() + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(where + ": malformed line: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("code") || !obj["code"].is_string() || !obj.contains("cwe") ||
        !obj["cwe"].is_string()) {
      throw CorpusError(where + ": malformed line: expected string fields \"code\" and \"cwe\"");
    }
    if (obj.contains("project") && obj["project"] != project) {
      throw CorpusError(where + ": project field does not match file name '" + project + "'");
    }
    const std::string cwe = obj["cwe"].get<std::string>();
    if (!CweRegistry::well_formed(cwe)) throw CorpusError(where + ": malformed CWE id '" + cwe + "'");
    const auto index = registry.index_of(cwe);
    if (!index) throw CorpusError(where + ": unknown CWE id '" + cwe + "'");
    Sample s;
    s.tokens = tokenize(obj["code"].get<std::string>(), max_len);
    if (s.tokens.empty()) throw CorpusError(where + ": code has no tokens");
    s.label = *index;
    s.domain = domain;
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw CorpusError("empty domain: " + file.string() + " has no samples");
  return samples;
}

}  // namespace

Corpus load_corpus(const fs::path& dir, std::string_view target_project, std::size_t max_len) {
  if (!fs::is_directory(dir)) throw CorpusError("corpus directory not found: " + dir.string());
  std::map<std::string, fs::path> files;  // sorted by project name
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.emplace(entry.path().stem().string(), entry.path());
    }
  }
  const std::string target(target_project);
  if (!files.contains(target)) {
    throw CorpusError("target project '" + target + "' not found in " + dir.string());
  }
  if (files.size() < 2) throw CorpusError("need >=2 projects, found " + std::to_string(files.size()));

  Corpus corpus;
  for (const auto& [name, path] : files) {
    if (name == target) continue;
    corpus.domain_names.push_back(name);
  }
  corpus.domain_names.push_back(target);
  for (std::size_t d = 0; d < corpus.domain_names.size(); ++d) {
    const auto& name = corpus.domain_names[d];
    corpus.domains.push_back(read_project(files.at(name), name, static_cast<int>(d), max_len));
  }

  corpus.provenance = {{"source", dir.string()}, {"target", target}};
  const fs::path prov = dir / "provenance.json";
  if (fs::exists(prov)) {
    std::ifstream in(prov);
    try {
      corpus.provenance["generator"] = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError("malformed provenance.json: " + std::string(e.what()));
    }
  }
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t d = 0; d < corpus.domains.size(); ++d) counts[corpus.domain_names[d]] = corpus.domains[d].size();
  corpus.provenance["counts"] = counts;
  return corpus;
}

void write_corpus_jsonl(const Corpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  const auto& registry = CweRegistry::standard();
  for (std::size_t d = 0; d < corpus.domains.size(); ++d) {
    const fs::path file = dir / (corpus.domain_names[d] + ".jsonl");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write " + file.string());
    for (const Sample& s : corpus.domains[d]) {
      if (!s.label) throw Error("write_corpus_jsonl: sample without label in " + corpus.domain_names[d]);
      std::string code;
      for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        if (i) code += ' ';
        code += s.tokens[i];
      }
      nlohmann::ordered_json line;
      line["project"] = corpus.domain_names[d];
      line["code"] = code;
      line["cwe"] = std::string(registry.id(*s.label));
      out << line.dump() << '\n';
    }
    if (!out) throw Error("write failed for " + file.string());
  }
}

TargetSplit split_target(std::size_t target_size, std::uint64_t seed) {
  if (target_size < 3) {
    throw CorpusError("target domain needs >=3 samples to split, has " + std::to_string(target_size));
  }
  std::vector<std::size_t> order(target_size);
  for (std::size_t i = 0; i < target_size; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_val = (target_size + 2) / 3;
  TargetSplit split;
  split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

TargetSplit split_target(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.domains.empty()) throw CorpusError("split_target: empty corpus");
  return split_target(corpus.target().size(), seed);
}

std::size_t Batch::total() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

BatchSampler::BatchSampler(std::vector<std::size_t> domain_sizes, std::size_t per_domain, std::uint64_t seed)
    : per_domain_(per_domain) {
  if (per_domain < 2) throw CorpusError("per_domain batch size must be >=2, got " + std::to_string(per_domain));
  if (domain_sizes.empty()) throw CorpusError("batch sampler needs at least one domain");
  std::size_t largest = 0;
  for (std::size_t d = 0; d < domain_sizes.size(); ++d) {
    if (domain_sizes[d] < 2) {
      throw CorpusError("domain " + std::to_string(d) + " has " + std::to_string(domain_sizes[d]) +
                        " samples; batching needs >=2");
    }
    largest = std::max(largest, domain_sizes[d]);
    Stream s;
    s.order.resize(domain_sizes[d]);
    for (std::size_t i = 0; i < domain_sizes[d]; ++i) s.order[i] = i;
    s.seed = derive_seed(seed, d);
    reshuffle(s);
    streams_.push_back(std::move(s));
  }
  batches_per_epoch_ = (largest + per_domain - 1) / per_domain;
}

void BatchSampler::reshuffle(Stream& s) {
  Rng rng(derive_seed(s.seed, s.reshuffles++));
  rng.shuffle(s.order);
  s.cursor = 0;
}

Batch BatchSampler::next() {
  Batch batch;
  batch.rows.resize(streams_.size());
  for (std::size_t d = 0; d < streams_.size(); ++d) {
    Stream& s = streams_[d];
    auto& rows = batch.rows[d];
    rows.reserve(per_domain_);
    while (rows.size() < per_domain_) {
      if (s.cursor == s.order.size()) reshuffle(s);
      rows.push_back(s.order[s.cursor++]);
    }
  }
  return batch;
}

BatchSampler make_batches(const Corpus& corpus, std::size_t per_domain, std::uint64_t seed) {
  return BatchSampler(corpus.counts(), per_domain, seed);
}

}  // namespace mdaforge
