#include "mdaforge/model.hpp"

#include <cmath>

#include "mdaforge/error.hpp"
#include "mdaforge/rng.hpp"

namespace mdaforge {

void ModelDims::validate() const {
  if (features < 1 || hidden1 < 1 || hidden2 < 1 || sources < 1 || classes < 1) {
    throw Error("model dims must all be >=1: " + to_json().dump());
  }
}

nlohmann::json ModelDims::to_json() const {
  return {{"features", features}, {"hidden1", hidden1}, {"hidden2", hidden2}, {"sources", sources}, {"classes", classes}};
}

ModelDims ModelDims::from_json(const nlohmann::json& j) {
  ModelDims d;
  d.features = j.at("features").get<std::size_t>();
  d.hidden1 = j.at("hidden1").get<std::size_t>();
  d.hidden2 = j.at("hidden2").get<std::size_t>();
  d.sources = j.at("sources").get<std::size_t>();
  d.classes = j.at("classes").get<std::size_t>();
  d.validate();
  return d;
}

std::vector<ModelBundle::NamedParameter> ModelBundle::parameters() {
  return {
      {"feature_encoder.w1", &feature_encoder.w1}, {"feature_encoder.b1", &feature_encoder.b1},
      {"feature_encoder.w2", &feature_encoder.w2}, {"feature_encoder.b2", &feature_encoder.b2},
      {"domain_encoder.w1", &domain_encoder.w1},   {"domain_encoder.b1", &domain_encoder.b1},
      {"domain_encoder.w2", &domain_encoder.w2},   {"domain_encoder.b2", &domain_encoder.b2},
      {"discriminator.w", &discriminator.w},       {"discriminator.b", &discriminator.b},
      {"classifier.w", &classifier.w},             {"classifier.b", &classifier.b},
  };
}

std::vector<const Matrix*> ModelBundle::parameters() const {
  return {&feature_encoder.w1, &feature_encoder.b1, &feature_encoder.w2, &feature_encoder.b2,
          &domain_encoder.w1,  &domain_encoder.b1,  &domain_encoder.w2,  &domain_encoder.b2,
          &discriminator.w,    &discriminator.b,    &classifier.w,       &classifier.b};
}

namespace {

void expect(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(name) + " is " + m.shape() + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

MlpEncoder init_encoder(const ModelDims& d, std::uint64_t seed) {
  Rng rng(seed);
  MlpEncoder e;
  e.w1 = glorot(d.features, d.hidden1, rng);
  e.b1 = Matrix(1, d.hidden1);
  e.w2 = glorot(d.hidden1, d.hidden2, rng);
  e.b2 = Matrix(1, d.hidden2);
  return e;
}

LinearHead init_head(std::size_t in, std::size_t out, std::uint64_t seed) {
  Rng rng(seed);
  return {glorot(in, out, rng), Matrix(1, out)};
}

}  // namespace

void ModelBundle::check_shapes() const {
  for (const MlpEncoder* e : {&feature_encoder, &domain_encoder}) {
    expect(e->w1, dims.features, dims.hidden1, "encoder.w1");
    expect(e->b1, 1, dims.hidden1, "encoder.b1");
    expect(e->w2, dims.hidden1, dims.hidden2, "encoder.w2");
    expect(e->b2, 1, dims.hidden2, "encoder.b2");
  }
  expect(discriminator.w, dims.hidden2, dims.sources + 1, "discriminator.w");
  expect(discriminator.b, 1, dims.sources + 1, "discriminator.b");
  expect(classifier.w, dims.hidden2, dims.classes, "classifier.w");
  expect(classifier.b, 1, dims.classes, "classifier.b");
}

ModelBundle init_bundle(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  ModelBundle m;
  m.dims = dims;
  m.seed = seed;
  m.feature_encoder = init_encoder(dims, derive_seed(seed, seed_offset::kFeatureEncoder));
  m.domain_encoder = init_encoder(dims, derive_seed(seed, seed_offset::kDomainEncoder));
  m.discriminator = init_head(dims.hidden2, dims.sources + 1, derive_seed(seed, seed_offset::kDiscriminator));
  m.classifier = init_head(dims.hidden2, dims.classes, derive_seed(seed, seed_offset::kClassifier));
  m.check_shapes();
  return m;
}

std::vector<ad::Var> BundleVars::all() const {
  return {feature_encoder.w1, feature_encoder.b1, feature_encoder.w2, feature_encoder.b2,
          domain_encoder.w1,  domain_encoder.b1,  domain_encoder.w2,  domain_encoder.b2,
          discriminator.w,    discriminator.b,    classifier.w,       classifier.b};
}

BundleVars bind(ad::Tape& tape, const ModelBundle& model) {
  auto enc = [&](const MlpEncoder& e) {
    return EncoderVars{tape.parameter(e.w1), tape.parameter(e.b1), tape.parameter(e.w2), tape.parameter(e.b2)};
  };
  auto head = [&](const LinearHead& h) { return HeadVars{tape.parameter(h.w), tape.parameter(h.b)}; };
  return {enc(model.feature_encoder), enc(model.domain_encoder), head(model.discriminator), head(model.classifier)};
}

ad::Var encode(const EncoderVars& e, ad::Var x) {
  const ad::Var h = ad::tanh(ad::add_row_bias(ad::matmul(x, e.w1), e.b1));
  return ad::tanh(ad::add_row_bias(ad::matmul(h, e.w2), e.b2));
}

ad::Var discriminate(const HeadVars& d, ad::Var reps) {
  return ad::log_softmax_rows(ad::add_row_bias(ad::matmul(reps, d.w), d.b));
}

ad::Var classify(const HeadVars& c, ad::Var reps) {
  return ad::log_softmax_rows(ad::add_row_bias(ad::matmul(reps, c.w), c.b));
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

Matrix encode_values(const MlpEncoder& encoder, const Matrix& x) {
  ad::Tape tape;
  const EncoderVars vars{tape.parameter(encoder.w1), tape.parameter(encoder.b1), tape.parameter(encoder.w2),
                         tape.parameter(encoder.b2)};
  return encode(vars, tape.constant(x)).value();
}

Matrix class_log_probs(const ModelBundle& model, const Matrix& features) {
  if (features.cols() != model.dims.features) {
    throw ShapeError("feature dim mismatch: samples have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(model.dims.features));
  }
  if (features.rows() == 0) return Matrix(0, model.dims.classes);
  ad::Tape tape;
  const BundleVars vars = bind(tape, model);
  return classify(vars.classifier, encode(vars.feature_encoder, tape.constant(features))).value();
}

Matrix domain_probs(const ModelBundle& model, const Matrix& features) {
  if (features.cols() != model.dims.features) {
    throw ShapeError("feature dim mismatch: samples have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(model.dims.features));
  }
  ad::Tape tape;
  const BundleVars vars = bind(tape, model);
  Matrix p = discriminate(vars.discriminator, encode(vars.domain_encoder, tape.constant(features))).value();
  for (double& v : p.values()) v = std::exp(v);
  return p;
}

}  // namespace mdaforge
