#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mdaforge {

/// K×K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}
  static ConfusionMatrix from_counts(const std::vector<std::vector<std::int64_t>>& rows);
  static ConfusionMatrix from_predictions(std::size_t classes, std::span<const int> truth, std::span<const int> predicted);

  void add(std::size_t truth, std::size_t predicted, std::int64_t count = 1);

  std::size_t classes() const { return k_; }
  std::int64_t operator()(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(std::size_t i) const;
  std::int64_t col_sum(std::size_t j) const;

  nlohmann::json to_json() const;

 private:
  std::size_t k_;
  std::vector<std::int64_t> counts_;
};

/// trace / total.
double accuracy(const ConfusionMatrix& cm);
/// Multi-class (R_K) Matthews correlation; 0 when the denominator vanishes.
double mcc(const ConfusionMatrix& cm);
/// Multi-class Cohen's kappa; when 1 − Q = 0 it is 1 for perfect accuracy, else 0.
double kappa(const ConfusionMatrix& cm);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// One-vs-rest precision, recall and F1; every 0/0 becomes 0.
ClassScores per_class_prf(const ConfusionMatrix& cm, std::size_t cls);

/// Risk scores of the four severe categories; weight_i = score_i / Σ scores.
struct SeverityWeights {
  std::map<std::string, double> scores;

  static SeverityWeights standard();
  double total() const;
  double weight(const std::string& cwe) const;
};

/// Σ_i weight_i · {P_i, R_i, F1_i} over the weighted classes. A class missing
/// from `per_class` contributes 0.
ClassScores severity_weighted_prf(const std::map<std::string, ClassScores>& per_class, const SeverityWeights& weights);

/// One evaluated (method, target, seed) run.
struct RunResult {
  std::string method;
  std::string target;
  std::uint64_t seed = 0;
  std::string split = "test";
  double acc = 0.0, mcc = 0.0, kappa = 0.0, wf1 = 0.0, wp = 0.0, wr = 0.0;
  std::map<std::string, ClassScores> per_class;
  ConfusionMatrix confusion{0};

  nlohmann::ordered_json to_json() const;
};

/// Metrics over registry-indexed labels. Per-class entries cover every
/// registry class.
RunResult evaluate_predictions(std::span<const int> truth, std::span<const int> predicted);

}  // namespace mdaforge
