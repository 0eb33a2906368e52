#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdaforge/model.hpp"
#include "mdaforge/tape.hpp"

namespace mdaforge {

/// Per-source weights w (a probability vector over the M sources).
struct DomainCorrelation {
  std::vector<double> w;

  static DomainCorrelation uniform(std::size_t sources);
};

/// How discriminator probabilities on target samples become w.
enum class CorrelationMode {
  kAverageThenSoftmax,  // mean over samples of the source columns, then softmax
  kSoftmaxThenAverage,  // softmax of each sample's source columns, then mean
};

struct KernelConfig {
  enum class Bandwidth { kMedian, kFixed };
  Bandwidth mode = Bandwidth::kMedian;
  double sigma = 1.0;  // used when mode == kFixed

  void validate() const;
};

inline constexpr double kMinBandwidth = 1e-6;

/// Mean cross-entropy −(1/n) Σ log_probs(i, labels[i]).
ad::Var cross_entropy(ad::Var log_probs, std::span<const std::size_t> labels);

/// L_dc = −(1/n) Σ_j log D(GRL_λ(E_d(x_j)))[domain_j]. The reversal layer
/// sits between encoder and discriminator, so the loss value does not depend
/// on λ; only the gradient reaching E_d does. Every discriminator output
/// (0..M) must occur among `domain_labels`.
ad::Var domain_adversarial_loss(const EncoderVars& domain_encoder, const HeadVars& discriminator, ad::Var x,
                                std::span<const std::size_t> domain_labels, double lambda);

/// Evaluates D(E_d(x)) on target samples without gradients and turns the
/// source columns into w.
DomainCorrelation domain_correlation(const ModelBundle& model, const Matrix& target_features,
                                     CorrelationMode mode = CorrelationMode::kAverageThenSoftmax);

/// Same reduction from precomputed n×(M+1) probabilities.
DomainCorrelation correlation_from_probs(const Matrix& probs, CorrelationMode mode);

/// Biased squared MMD with a Gaussian kernel:
/// mean K(A,A) − 2 mean K(A,B) + mean K(B,B), K = exp(−d²/(2σ²)).
/// Both sets need at least two rows.
ad::Var mmd2(ad::Var a, ad::Var b, double sigma);

/// sqrt(median pairwise squared distance / 2) over distinct row pairs,
/// floored at kMinBandwidth.
double median_bandwidth(const Matrix& reps);

/// Bandwidth to use for a batch whose combined representations are `reps`.
double resolve_bandwidth(const KernelConfig& kernel, const Matrix& reps);

/// L_dis = Σ_i w_i mmd2(S_i, T). w enters as constants.
ad::Var wmmd_loss(std::span<const ad::Var> source_reps, ad::Var target_reps, const DomainCorrelation& w,
                  double sigma);

/// L_C = (1/M) Σ_i mean_j CE(log_probs_i(j), label_ij). One entry per source
/// domain; a negative label marks an unlabeled sample and is rejected.
ad::Var classification_loss(std::span<const ad::Var> log_probs_by_domain,
                            std::span<const std::vector<int>> labels_by_domain);

struct LossTerms {
  std::optional<ad::Var> domain_adversarial;  // L_dc
  std::optional<ad::Var> discrepancy;         // L_dis
  ad::Var classification;                     // L_C
};

/// LOSS = L_dc + α L_dis + L_C; absent terms are dropped.
ad::Var total_loss(const LossTerms& terms, double alpha);

}  // namespace mdaforge
