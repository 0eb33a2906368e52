#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <functional>
#include <vector>

#include "mdaforge/losses.hpp"
#include "mdaforge/matrix.hpp"
#include "mdaforge/model.hpp"
#include "mdaforge/rng.hpp"
#include "mdaforge/tape.hpp"

namespace testing {

using mdaforge::Matrix;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto stamp = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    path_ = std::filesystem::temp_directory_path() /
            ("mdaforge-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, mdaforge::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
// gradient is ~0 from reporting a huge relative error on rounding noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

// Central differences of `f` with respect to every entry of every matrix in
// `params`; compared against `analytic` (same layout). Returns the worst
// relative error.
inline double max_fd_error(const std::function<double()>& f, const std::vector<Matrix*>& params,
                           const std::vector<Matrix>& analytic, double h) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p]->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f();
      values[i] = saved - h;
      const double down = f();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic[p].values()[i], numeric));
    }
  }
  return worst;
}

// Random-weighted scalarization l^T Y r, so every entry of Y gets a distinct
// upstream gradient.
struct Scalarizer {
  Matrix left, right;

  Scalarizer(std::size_t rows, std::size_t cols, mdaforge::Rng& rng)
      : left(random_matrix(1, rows, rng)), right(random_matrix(cols, 1, rng)) {}

  mdaforge::ad::Var operator()(mdaforge::ad::Var y) const {
    auto& tape = y.tape();
    return mdaforge::ad::sum(mdaforge::ad::matmul(mdaforge::ad::matmul(tape.constant(left), y), tape.constant(right)));
  }
};

// Toy batch for whole-loss checks: `per_domain` rows per source and for the
// target, features in [0, 1), labels cycling through the classes.
struct ToyBatch {
  std::vector<Matrix> source_x;
  std::vector<std::vector<int>> source_y;
  Matrix target_x;
};

inline ToyBatch make_toy_batch(std::size_t sources, std::size_t per_domain, std::size_t features, std::size_t classes,
                               mdaforge::Rng& rng) {
  ToyBatch b;
  for (std::size_t d = 0; d < sources; ++d) {
    b.source_x.push_back(random_matrix(per_domain, features, rng, 0.0, 1.0));
    std::vector<int> y;
    for (std::size_t i = 0; i < per_domain; ++i) y.push_back(static_cast<int>((i + d) % classes));
    b.source_y.push_back(std::move(y));
  }
  b.target_x = random_matrix(per_domain, features, rng, 0.0, 1.0);
  return b;
}

// Full loss L_dc + alpha * L_dis + L_C on a toy batch, recorded on `tape`.
// sigma is held fixed, as the trainer does within one step.
inline mdaforge::ad::Var toy_full_loss(mdaforge::ad::Tape& tape, const mdaforge::BundleVars& vars, const ToyBatch& b,
                                       const mdaforge::DomainCorrelation& w, double sigma, double lambda, double alpha) {
  using namespace mdaforge;
  std::vector<ad::Var> xs;
  std::vector<std::size_t> domains;
  for (std::size_t d = 0; d < b.source_x.size(); ++d) {
    xs.push_back(tape.constant(b.source_x[d]));
    domains.insert(domains.end(), b.source_x[d].rows(), d);
  }
  const ad::Var xt = tape.constant(b.target_x);
  domains.insert(domains.end(), b.target_x.rows(), b.source_x.size());
  std::vector<ad::Var> all = xs;
  all.push_back(xt);
  const ad::Var l_dc =
      domain_adversarial_loss(vars.domain_encoder, vars.discriminator, ad::concat_rows(all), domains, lambda);
  std::vector<ad::Var> reps, log_probs;
  for (const auto& x : xs) {
    reps.push_back(encode(vars.feature_encoder, x));
    log_probs.push_back(classify(vars.classifier, reps.back()));
  }
  const ad::Var l_c = classification_loss(log_probs, b.source_y);
  const ad::Var l_dis = wmmd_loss(reps, encode(vars.feature_encoder, xt), w, sigma);
  return total_loss({l_dc, l_dis, l_c}, alpha);
}

// Bandwidth the trainer would pick for this batch at the current parameters.
inline double toy_bandwidth(const mdaforge::ModelBundle& model, const ToyBatch& b) {
  using namespace mdaforge;
  std::vector<Matrix> reps;
  std::size_t rows = 0;
  for (const auto& x : b.source_x) {
    reps.push_back(encode_values(model.feature_encoder, x));
    rows += x.rows();
  }
  reps.push_back(encode_values(model.feature_encoder, b.target_x));
  rows += b.target_x.rows();
  Matrix stacked(rows, model.dims.hidden2);
  std::size_t r = 0;
  for (const auto& m : reps) {
    for (std::size_t i = 0; i < m.rows(); ++i, ++r) std::copy(m.row(i).begin(), m.row(i).end(), stacked.row(r).begin());
  }
  return median_bandwidth(stacked);
}

// Reverse-mode vs central differences for the full loss. The domain encoder's
// true gradient is reversed by the GRL, so its analytic gradient is compared
// against -lambda times the numeric one.
inline double full_loss_gradient_error(std::uint64_t seed, double h = 1e-4) {
  using namespace mdaforge;
  ModelDims dims;
  dims.features = 32;
  dims.hidden1 = 8;
  dims.hidden2 = 8;
  dims.sources = 2;
  dims.classes = 3;
  ModelBundle model = init_bundle(dims, seed);
  Rng rng(derive_seed(seed, 99));
  // Non-zero biases so their gradients are exercised away from the init point.
  for (auto& p : model.parameters()) {
    if (p.value->rows() == 1) {
      for (double& v : p.value->values()) v = rng.uniform(-0.1, 0.1);
    }
  }
  const ToyBatch batch = make_toy_batch(dims.sources, 4, dims.features, dims.classes, rng);
  const DomainCorrelation w{{0.3, 0.7}};
  const double sigma = toy_bandwidth(model, batch);
  const double lambda = 1.0, alpha = 0.01;

  ad::Tape tape;
  const BundleVars vars = bind(tape, model);
  tape.backward(toy_full_loss(tape, vars, batch, w, sigma, lambda, alpha));
  std::vector<Matrix> analytic;
  for (const auto& v : vars.all()) analytic.push_back(v.grad());
  std::vector<Matrix*> params;
  for (auto& p : model.parameters()) params.push_back(p.value);
  // Domain-encoder parameters sit at positions 4..7.
  for (std::size_t i = 4; i < 8; ++i) {
    for (double& g : analytic[i].values()) g = -g / lambda;
  }
  const auto f = [&] {
    ad::Tape t;
    return toy_full_loss(t, bind(t, model), batch, w, sigma, lambda, alpha).scalar();
  };
  return max_fd_error(f, params, analytic, h);
}

}  // namespace testing
