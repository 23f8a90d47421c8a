#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semnav/error.hpp"
#include "semnav/rng.hpp"

namespace semnav {

/// Fully connected network: ReLU on hidden layers, identity on the output.
/// Batches are row-major in spirit: one sample per row.
template <typename Scalar = double>
struct Mlp {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // fan_out x fan_in
    Vector bias;
  };

  std::vector<int> layer_sizes;
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }

  static Mlp zeros(std::vector<int> sizes);
  /// weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)) drawn layer by layer in
  /// row-major order; biases zero.
  static Mlp he_uniform(std::vector<int> sizes, std::uint64_t seed);

  bool all_zero() const;
  bool all_finite() const;

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layer_sizes != b.layer_sizes || a.seed != b.seed) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l)
      if (a.layers[l].weight != b.layers[l].weight || a.layers[l].bias != b.layers[l].bias) return false;
    return true;
  }
};

using MlpModel = Mlp<double>;

/// Cached activations of a batch forward pass.
template <typename Scalar>
struct MlpTape {
  using Matrix = typename Mlp<Scalar>::Matrix;
  std::vector<Matrix> inputs;  // input to each layer (batch x fan_in)
  std::vector<Matrix> pre;     // pre-activation of each layer (batch x fan_out)
  Matrix output;
};

template <typename Scalar>
struct MlpGradients {
  std::vector<typename Mlp<Scalar>::Layer> layers;
  typename Mlp<Scalar>::Matrix input;  // batch x fan_in of layer 0
};

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros(std::vector<int> sizes) {
  if (sizes.size() < 2) fail(ErrorKind::InvalidArgument, "mlp needs at least an input and an output size");
  Mlp m;
  m.layer_sizes = std::move(sizes);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    if (m.layer_sizes[l] <= 0 || m.layer_sizes[l + 1] <= 0) fail(ErrorKind::InvalidArgument, "mlp layer sizes must be positive");
    m.layers.push_back({Matrix::Zero(m.layer_sizes[l + 1], m.layer_sizes[l]), Vector::Zero(m.layer_sizes[l + 1])});
  }
  return m;
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::he_uniform(std::vector<int> sizes, std::uint64_t seed) {
  Mlp m = zeros(std::move(sizes));
  m.seed = seed;
  SplitMix64 rng(seed);
  for (auto& layer : m.layers) {
    const double limit = std::sqrt(6.0 / double(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = Scalar((2.0 * rng.uniform() - 1.0) * limit);
  }
  return m;
}

template <typename Scalar>
bool Mlp<Scalar>::all_zero() const {
  for (const auto& l : layers)
    if (!l.weight.isZero(0) || !l.bias.isZero(0)) return false;
  return true;
}

template <typename Scalar>
bool Mlp<Scalar>::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

template <typename Scalar, typename Derived>
MlpTape<Scalar> mlp_forward_tape(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& batch) {
  if (batch.cols() != model.input_dim())
    fail(ErrorKind::DimensionMismatch, "mlp input has dimension " + std::to_string(batch.cols()) + ", expected " +
                                           std::to_string(model.input_dim()));
  MlpTape<Scalar> tape;
  typename Mlp<Scalar>::Matrix a = batch.template cast<Scalar>();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    typename Mlp<Scalar>::Matrix z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    tape.inputs.push_back(std::move(a));
    a = (l + 1 < model.layers.size()) ? typename Mlp<Scalar>::Matrix(z.cwiseMax(Scalar(0))) : z;
    tape.pre.push_back(std::move(z));
  }
  tape.output = std::move(a);
  return tape;
}

/// Batch logits, one row per sample.
template <typename Scalar, typename Derived>
typename Mlp<Scalar>::Matrix mlp_forward_batch(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& batch) {
  return mlp_forward_tape(model, batch).output;
}

template <typename Scalar>
typename Mlp<Scalar>::Vector mlp_forward(const Mlp<Scalar>& model, const typename Mlp<Scalar>::Vector& x) {
  return mlp_forward_batch(model, x.transpose()).row(0).transpose();
}

/// Reverse pass: parameter gradients are summed over the batch.
template <typename Scalar, typename Derived>
MlpGradients<Scalar> mlp_backward_tape(const Mlp<Scalar>& model, const MlpTape<Scalar>& tape,
                                       const Eigen::MatrixBase<Derived>& upstream) {
  if (upstream.rows() != tape.output.rows() || upstream.cols() != tape.output.cols())
    fail(ErrorKind::DimensionMismatch, "upstream gradient shape does not match mlp output");
  MlpGradients<Scalar> grads;
  grads.layers.resize(model.layers.size());
  typename Mlp<Scalar>::Matrix delta = upstream.template cast<Scalar>();
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    if (l + 1 < model.layers.size()) delta = delta.cwiseProduct((tape.pre[l].array() > Scalar(0)).template cast<Scalar>().matrix());
    grads.layers[l].weight = delta.transpose() * tape.inputs[l];
    grads.layers[l].bias = delta.colwise().sum().transpose();
    delta = delta * model.layers[l].weight;
  }
  grads.input = std::move(delta);
  return grads;
}

template <typename Scalar>
MlpGradients<Scalar> mlp_backward(const Mlp<Scalar>& model, const typename Mlp<Scalar>::Vector& x,
                                  const typename Mlp<Scalar>::Vector& upstream) {
  const auto tape = mlp_forward_tape(model, x.transpose());
  return mlp_backward_tape(model, tape, upstream.transpose());
}

/// Plain SGD with L2 decay on weights (biases undecayed):
///   w <- w - lr * (g / batch + l2 * w)
template <typename Scalar>
void sgd_step(Mlp<Scalar>& model, const MlpGradients<Scalar>& grads, Scalar learning_rate, Scalar l2, Scalar batch_size) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    layer.weight -= learning_rate * (grads.layers[l].weight / batch_size + l2 * layer.weight);
    layer.bias -= learning_rate * (grads.layers[l].bias / batch_size);
  }
}

template <typename Scalar>
struct CrossEntropy {
  Scalar loss = 0;
  typename Mlp<Scalar>::Vector gradient;
};

/// -log softmax(logits)[target], via max subtraction; gradient is
/// softmax(logits) - one_hot(target).
template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(const typename Mlp<Scalar>::Vector& logits, int target) {
  if (target < 0 || target >= logits.size())
    fail(ErrorKind::InvalidArgument, "class id " + std::to_string(target) + " out of range for " +
                                         std::to_string(logits.size()) + " logits");
  const Scalar peak = logits.maxCoeff();
  typename Mlp<Scalar>::Vector e = (logits.array() - peak).exp().matrix();
  const Scalar total = e.sum();
  CrossEntropy<Scalar> out;
  out.loss = std::log(total) - (logits(target) - peak);
  out.gradient = e / total;
  out.gradient(target) -= Scalar(1);
  return out;
}

/// Row-wise cross entropy. Returns the summed loss and writes the per-row
/// logit gradients into `grad`.
template <typename Scalar>
Scalar batch_cross_entropy(const typename Mlp<Scalar>::Matrix& logits, const std::vector<int>& targets,
                           typename Mlp<Scalar>::Matrix& grad) {
  if (std::size_t(logits.rows()) != targets.size())
    fail(ErrorKind::DimensionMismatch, "one target per logit row is required");
  for (int t : targets)
    if (t < 0 || t >= logits.cols())
      fail(ErrorKind::InvalidArgument, "class id " + std::to_string(t) + " out of range for " +
                                           std::to_string(logits.cols()) + " logits");
  const auto peak = logits.rowwise().maxCoeff();
  grad = (logits.colwise() - peak).array().exp().matrix();
  const auto total = grad.rowwise().sum().eval();
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[std::size_t(i)];
    loss += std::log(total(i)) - (logits(i, t) - peak(i));
    grad.row(i) /= total(i);
    grad(i, t) -= Scalar(1);
  }
  return loss;
}

/// Argmax with ties toward the smallest index.
template <typename Derived>
int argmax_first(const Eigen::MatrixBase<Derived>& row) {
  int best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = int(i);
  return best;
}

}  // namespace semnav
