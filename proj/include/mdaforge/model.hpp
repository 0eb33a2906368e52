#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdaforge/matrix.hpp"
#include "mdaforge/tape.hpp"

namespace mdaforge {

/// Layer widths. The dimension chain is F -> H1 -> H2 -> {M+1, K}.
struct ModelDims {
  std::size_t features = 2048;  // F
  std::size_t hidden1 = 256;    // H1
  std::size_t hidden2 = 128;    // H2
  std::size_t sources = 7;      // M
  std::size_t classes = 44;     // K

  void validate() const;
  nlohmann::json to_json() const;
  static ModelDims from_json(const nlohmann::json& j);
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Two-layer tanh MLP: tanh(tanh(X W1 + b1) W2 + b2). Biases are 1×width.
struct MlpEncoder {
  Matrix w1, b1, w2, b2;
};

/// Linear layer followed by a row log-softmax.
struct LinearHead {
  Matrix w, b;
};

/// E_f (feature encoder), E_d (domain encoder), D (domain discriminator with
/// M+1 outputs) and C (category classifier with K outputs).
struct ModelBundle {
  ModelDims dims;
  std::uint64_t seed = 0;
  MlpEncoder feature_encoder;
  MlpEncoder domain_encoder;
  LinearHead discriminator;
  LinearHead classifier;

  struct NamedParameter {
    std::string name;
    Matrix* value;
  };
  /// Fixed order; checkpoints and the optimizer rely on it.
  std::vector<NamedParameter> parameters();
  std::vector<const Matrix*> parameters() const;

  /// Throws ShapeError if any matrix disagrees with `dims`.
  void check_shapes() const;
};

/// Glorot-uniform weights, zero biases. Each network draws from its own
/// stream derived from `seed`, so adding or removing one network never
/// changes the others' initial weights.
ModelBundle init_bundle(const ModelDims& dims, std::uint64_t seed);

/// Parameters of one network bound to a tape.
struct EncoderVars {
  ad::Var w1, b1, w2, b2;
};
struct HeadVars {
  ad::Var w, b;
};
struct BundleVars {
  EncoderVars feature_encoder;
  EncoderVars domain_encoder;
  HeadVars discriminator;
  HeadVars classifier;
  /// Same order as ModelBundle::parameters().
  std::vector<ad::Var> all() const;
};

/// Binds every parameter of `model` by reference. `model` must outlive `tape`.
BundleVars bind(ad::Tape& tape, const ModelBundle& model);

ad::Var encode(const EncoderVars& encoder, ad::Var x);
/// n×(M+1) log-probabilities over domains.
ad::Var discriminate(const HeadVars& discriminator, ad::Var reps);
/// n×K log-probabilities over classes.
ad::Var classify(const HeadVars& classifier, ad::Var reps);

/// Per-row argmax; ties go to the lowest column.
std::vector<int> argmax_rows(const Matrix& scores);

/// Inference without gradients.
Matrix encode_values(const MlpEncoder& encoder, const Matrix& x);
Matrix class_log_probs(const ModelBundle& model, const Matrix& features);
Matrix domain_probs(const ModelBundle& model, const Matrix& features);

}  // namespace mdaforge
