#include "mdaforge/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mdaforge/error.hpp"
#include "mdaforge/kernels.hpp"

namespace mdaforge {

DomainCorrelation DomainCorrelation::uniform(std::size_t sources) {
  if (sources == 0) throw Error("domain correlation needs at least one source");
  return {std::vector<double>(sources, 1.0 / static_cast<double>(sources))};
}

void KernelConfig::validate() const {
  if (mode == Bandwidth::kFixed && !(sigma > 0.0)) throw Error("kernel sigma must be > 0");
}

ad::Var cross_entropy(ad::Var log_probs, std::span<const std::size_t> labels) {
  if (labels.empty()) throw Error("cross_entropy: empty batch");
  return ad::neg(ad::mean_all(ad::pick(log_probs, labels)));
}

ad::Var domain_adversarial_loss(const EncoderVars& domain_encoder, const HeadVars& discriminator, ad::Var x,
                                std::span<const std::size_t> domain_labels, double lambda) {
  const std::size_t domains = discriminator.w.cols();
  std::vector<bool> seen(domains, false);
  for (std::size_t d : domain_labels) {
    if (d >= domains) throw Error("domain label " + std::to_string(d) + " out of range");
    seen[d] = true;
  }
  for (std::size_t d = 0; d < domains; ++d) {
    if (!seen[d]) throw Error("domain adversarial loss: batch has no samples of domain " + std::to_string(d));
  }
  const ad::Var reps = encode(domain_encoder, x);
  return cross_entropy(discriminate(discriminator, ad::grl(reps, lambda)), domain_labels);
}

DomainCorrelation correlation_from_probs(const Matrix& probs, CorrelationMode mode) {
  if (probs.rows() == 0) throw Error("domain correlation: no target samples");
  if (probs.cols() < 2) throw Error("domain correlation: need at least one source column");
  const std::size_t m = probs.cols() - 1;
  const double n = static_cast<double>(probs.rows());
  auto softmax = [](std::vector<double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (double& x : v) total += (x = std::exp(x - mx));
    for (double& x : v) x /= total;
    return v;
  };
  std::vector<double> w(m, 0.0);
  if (mode == CorrelationMode::kAverageThenSoftmax) {
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      for (std::size_t i = 0; i < m; ++i) w[i] += probs(r, i);
    }
    for (double& v : w) v /= n;
    w = softmax(std::move(w));
  } else {
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      const auto row = softmax(std::vector<double>(probs.row(r).begin(), probs.row(r).begin() + m));
      for (std::size_t i = 0; i < m; ++i) w[i] += row[i];
    }
    for (double& v : w) v /= n;
  }
  return {std::move(w)};
}

DomainCorrelation domain_correlation(const ModelBundle& model, const Matrix& target_features,
                                     CorrelationMode mode) {
  if (target_features.rows() == 0) throw Error("domain correlation: no target samples");
  return correlation_from_probs(domain_probs(model, target_features), mode);
}

ad::Var mmd2(ad::Var a, ad::Var b, double sigma) {
  if (a.rows() < 2 || b.rows() < 2) {
    throw Error("mmd2: each group needs >=2 rows, got " + std::to_string(a.rows()) + " and " +
                std::to_string(b.rows()));
  }
  if (!(sigma > 0.0)) throw Error("mmd2: sigma must be > 0");
  const ad::Var kaa = ad::gaussian_kernel_mean(a, a, sigma);
  const ad::Var kbb = ad::gaussian_kernel_mean(b, b, sigma);
  // The cross term always sees its operands in the same order, so swapping
  // a and b reproduces the result bit for bit.
  const bool swap = std::lexicographical_compare(b.value().values().begin(), b.value().values().end(),
                                                 a.value().values().begin(), a.value().values().end());
  const ad::Var kab = swap ? ad::gaussian_kernel_mean(b, a, sigma) : ad::gaussian_kernel_mean(a, b, sigma);
  return ad::sub(ad::add(kaa, kbb), ad::scale(kab, 2.0));
}

double median_bandwidth(const Matrix& reps) {
  if (reps.rows() < 2) throw Error("median_bandwidth: need >=2 rows");
  Matrix d(reps.rows(), reps.rows());
  kernels::pairwise_sq_dist(reps, reps, d);
  std::vector<double> pairs;
  pairs.reserve(reps.rows() * (reps.rows() - 1) / 2);
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    for (std::size_t j = i + 1; j < reps.rows(); ++j) pairs.push_back(d(i, j));
  }
  const std::size_t mid = pairs.size() / 2;
  std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(mid), pairs.end());
  double median = pairs[mid];
  if (pairs.size() % 2 == 0) {
    const double lower = *std::max_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return std::max(std::sqrt(median / 2.0), kMinBandwidth);
}

double resolve_bandwidth(const KernelConfig& kernel, const Matrix& reps) {
  kernel.validate();
  return kernel.mode == KernelConfig::Bandwidth::kFixed ? kernel.sigma : median_bandwidth(reps);
}

ad::Var wmmd_loss(std::span<const ad::Var> source_reps, ad::Var target_reps, const DomainCorrelation& w,
                  double sigma) {
  if (source_reps.empty()) throw Error("wmmd_loss: no source domains");
  if (w.w.size() != source_reps.size()) {
    throw Error("wmmd_loss: " + std::to_string(w.w.size()) + " weights for " + std::to_string(source_reps.size()) +
                " sources");
  }
  std::optional<ad::Var> total;
  for (std::size_t i = 0; i < source_reps.size(); ++i) {
    const ad::Var term = ad::scale(mmd2(source_reps[i], target_reps, sigma), w.w[i]);
    total = total ? ad::add(*total, term) : term;
  }
  return *total;
}

ad::Var classification_loss(std::span<const ad::Var> log_probs_by_domain,
                            std::span<const std::vector<int>> labels_by_domain) {
  if (log_probs_by_domain.empty()) throw Error("classification_loss: no source domains");
  if (log_probs_by_domain.size() != labels_by_domain.size()) {
    throw Error("classification_loss: label groups do not match domains");
  }
  std::optional<ad::Var> total;
  for (std::size_t i = 0; i < log_probs_by_domain.size(); ++i) {
    std::vector<std::size_t> labels;
    labels.reserve(labels_by_domain[i].size());
    for (int y : labels_by_domain[i]) {
      if (y < 0) throw Error("classification_loss: unlabeled sample in source domain " + std::to_string(i));
      labels.push_back(static_cast<std::size_t>(y));
    }
    const ad::Var term = cross_entropy(log_probs_by_domain[i], labels);
    total = total ? ad::add(*total, term) : term;
  }
  return ad::scale(*total, 1.0 / static_cast<double>(log_probs_by_domain.size()));
}

ad::Var total_loss(const LossTerms& terms, double alpha) {
  if (!(alpha >= 0.0)) throw Error("alpha must be >= 0");
  ad::Var loss = terms.classification;
  if (terms.domain_adversarial) loss = ad::add(*terms.domain_adversarial, loss);
  if (terms.discrepancy) loss = ad::add(loss, ad::scale(*terms.discrepancy, alpha));
  return loss;
}

}  // namespace mdaforge
