#include "mdaforge/metrics.hpp"

#include <cmath>

#include "mdaforge/cwe.hpp"
#include "mdaforge/error.hpp"

namespace mdaforge {

ConfusionMatrix ConfusionMatrix::from_counts(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw ShapeError("confusion matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) cm.add(i, j, rows[i][j]);
  }
  return cm;
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::size_t classes, std::span<const int> truth,
                                                  std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error("confusion matrix: truth and prediction lengths differ");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0) throw Error("confusion matrix: negative class index");
    cm.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::int64_t count) {
  if (truth >= k_ || predicted >= k_) throw Error("confusion matrix: class index out of range");
  if (count < 0) throw Error("confusion matrix: negative count");
  counts_[truth * k_ + predicted] += count;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, i);
  return s;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t i) const {
  std::int64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += (*this)(i, j);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, j);
  return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < k_; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < k_; ++j) row.push_back((*this)(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

double require_total(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n <= 0) throw Error("metric on an empty confusion matrix");
  return static_cast<double>(n);
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double accuracy(const ConfusionMatrix& cm) {
  const double s = require_total(cm);
  return static_cast<double>(cm.trace()) / s;
}

double mcc(const ConfusionMatrix& cm) {
  const double s = require_total(cm);
  const double c = static_cast<double>(cm.trace());
  double pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const double p = static_cast<double>(cm.col_sum(k));
    const double t = static_cast<double>(cm.row_sum(k));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const double den = (s * s - pp) * (s * s - tt);
  if (den <= 0.0) return 0.0;
  return (c * s - pt) / std::sqrt(den);
}

double kappa(const ConfusionMatrix& cm) {
  const double s = require_total(cm);
  double q = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    q += static_cast<double>(cm.row_sum(k)) * static_cast<double>(cm.col_sum(k));
  }
  q /= s * s;
  const double acc = accuracy(cm);
  if (1.0 - q == 0.0) return acc == 1.0 ? 1.0 : 0.0;
  return (acc - q) / (1.0 - q);
}

ClassScores per_class_prf(const ConfusionMatrix& cm, std::size_t cls) {
  if (cls >= cm.classes()) throw Error("per_class_prf: class out of range");
  const double tp = static_cast<double>(cm(cls, cls));
  const double fp = static_cast<double>(cm.col_sum(cls)) - tp;
  const double fn = static_cast<double>(cm.row_sum(cls)) - tp;
  ClassScores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

SeverityWeights SeverityWeights::standard() {
  return {{{"CWE-89", 22.11}, {"CWE-190", 6.53}, {"CWE-400", 3.56}, {"CWE-78", 17.53}}};
}

double SeverityWeights::total() const {
  double t = 0.0;
  for (const auto& [id, score] : scores) t += score;
  return t;
}

double SeverityWeights::weight(const std::string& cwe) const {
  const auto it = scores.find(cwe);
  return it == scores.end() ? 0.0 : it->second / total();
}

ClassScores severity_weighted_prf(const std::map<std::string, ClassScores>& per_class, const SeverityWeights& weights) {
  ClassScores out;
  const double total = weights.total();
  for (const auto& [id, score] : weights.scores) {
    if (!(score > 0.0)) throw Error("severity score for " + id + " must be > 0");
    const auto it = per_class.find(id);
    if (it == per_class.end()) continue;
    const double w = score / total;
    out.precision += w * it->second.precision;
    out.recall += w * it->second.recall;
    out.f1 += w * it->second.f1;
  }
  return out;
}

nlohmann::ordered_json RunResult::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["target"] = target;
  j["seed"] = seed;
  j["split"] = split;
  j["metrics"] = {{"acc", acc}, {"mcc", mcc}, {"kappa", kappa}, {"wf1", wf1}, {"wp", wp}, {"wr", wr}};
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  const auto& registry = CweRegistry::standard();
  for (std::size_t k = 0; k < registry.size(); ++k) {
    const std::string id(registry.id(static_cast<int>(k)));
    const auto it = per_class.find(id);
    if (it == per_class.end()) continue;
    pc[id] = {{"p", it->second.precision}, {"r", it->second.recall}, {"f1", it->second.f1}};
  }
  j["per_class"] = std::move(pc);
  j["confusion"] = confusion.to_json();
  j["conventions"] = {{"mcc", "multiclass-rk"}, {"kappa", "multiclass-cohen"}, {"zero_division", 0}};
  return j;
}

RunResult evaluate_predictions(std::span<const int> truth, std::span<const int> predicted) {
  const auto& registry = CweRegistry::standard();
  RunResult r;
  r.confusion = ConfusionMatrix::from_predictions(registry.size(), truth, predicted);
  r.acc = accuracy(r.confusion);
  r.mcc = mcc(r.confusion);
  r.kappa = kappa(r.confusion);
  for (std::size_t k = 0; k < registry.size(); ++k) {
    r.per_class[std::string(registry.id(static_cast<int>(k)))] = per_class_prf(r.confusion, k);
  }
  const ClassScores w = severity_weighted_prf(r.per_class, SeverityWeights::standard());
  r.wp = w.precision;
  r.wr = w.recall;
  r.wf1 = w.f1;
  return r;
}

}  // namespace mdaforge
