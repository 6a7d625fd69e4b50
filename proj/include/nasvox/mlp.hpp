#ifndef NASVOX_MLP_HPP
#define NASVOX_MLP_HPP

#include "nasvox/arch.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace nasvox {

class NumericOverflow : public std::runtime_error {
 public:
  NumericOverflow() : std::runtime_error("numeric overflow") {}
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Positions = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

/// Element-wise activation over a pre-activation block.
template <typename Scalar>
MatrixX<Scalar> apply_activation(const Activation& act, const MatrixX<Scalar>& z) {
  const auto za = z.array();
  switch (act.kind) {
    case ActivationKind::ReLU:
      return za.max(Scalar(0)).matrix();
    case ActivationKind::ELU: {
      const auto alpha = static_cast<Scalar>(act.alpha);
      return (za >= Scalar(0)).select(za, alpha * (za.min(Scalar(0)).exp() - Scalar(1))).matrix();
    }
    case ActivationKind::Swish: {
      const auto beta = static_cast<Scalar>(act.beta);
      return (za / (Scalar(1) + (-beta * za).exp())).matrix();
    }
  }
  throw std::logic_error("unknown activation");
}

/// d activation / d z, evaluated at the pre-activation block.
template <typename Scalar>
MatrixX<Scalar> activation_derivative(const Activation& act, const MatrixX<Scalar>& z) {
  const auto za = z.array();
  switch (act.kind) {
    case ActivationKind::ReLU:
      return (za > Scalar(0)).template cast<Scalar>().matrix();
    case ActivationKind::ELU: {
      const auto alpha = static_cast<Scalar>(act.alpha);
      return (za >= Scalar(0)).select(Scalar(1), alpha * za.min(Scalar(0)).exp()).matrix();
    }
    case ActivationKind::Swish: {
      const auto beta = static_cast<Scalar>(act.beta);
      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> s = Scalar(1) / (Scalar(1) + (-beta * za).exp());
      return (s + beta * za * s * (Scalar(1) - s)).matrix();
    }
  }
  throw std::logic_error("unknown activation");
}

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;
  Activation activation;
};

/// A 3 -> hidden... -> 1 perceptron whose output is an occupancy probability.
template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;

  /// All parameters zero.
  explicit Mlp(const ArchSpec& arch) : arch_(arch) {
    validate_structure(arch);
    Eigen::Index fan_in = kInputDim;
    for (const auto& spec : arch.hidden) {
      layers_.push_back({MatrixX<Scalar>::Zero(spec.width, fan_in), VectorX<Scalar>::Zero(spec.width), spec.activation});
      fan_in = spec.width;
    }
    head_weight_ = RowVectorX<Scalar>::Zero(fan_in);
  }

  /// Uniform He-style init: hidden weights in +-sqrt(6/fan_in), head in +-sqrt(1/fan_in), zero biases.
  static Mlp random(const ArchSpec& arch, std::uint64_t seed) {
    Mlp net(arch);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto& m, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
    };
    for (auto& layer : net.layers_) fill(layer.weight, std::sqrt(6.0 / static_cast<double>(layer.weight.cols())));
    fill(net.head_weight_, std::sqrt(1.0 / static_cast<double>(net.head_weight_.size())));
    return net;
  }

  const ArchSpec& arch() const { return arch_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  RowVectorX<Scalar>& head_weight() { return head_weight_; }
  const RowVectorX<Scalar>& head_weight() const { return head_weight_; }
  Scalar& head_bias() { return head_bias_; }
  Scalar head_bias() const { return head_bias_; }

  /// Scalars actually stored.
  std::int64_t allocated_parameters() const {
    std::int64_t n = head_weight_.size() + 1;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Pre-sigmoid outputs, one per column of `x`.
  RowVectorX<Scalar> logits(const Positions<Scalar>& x) const {
    MatrixX<Scalar> a = x;
    for (const auto& l : layers_) {
      MatrixX<Scalar> z = l.weight * a;
      z.colwise() += l.bias;
      a = apply_activation(l.activation, z);
    }
    RowVectorX<Scalar> out = head_weight_ * a;
    out.array() += head_bias_;
    if (!out.allFinite()) throw NumericOverflow();
    return out;
  }

  /// Parameters in model-file order: per layer, weights row-major then biases; then the head.
  VectorX<Scalar> flatten() const {
    VectorX<Scalar> flat(allocated_parameters());
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat[k++] = l.weight(r, c);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat[k++] = l.bias[r];
    }
    for (Eigen::Index c = 0; c < head_weight_.size(); ++c) flat[k++] = head_weight_[c];
    flat[k] = head_bias_;
    return flat;
  }

  void assign(const VectorX<Scalar>& flat) {
    if (flat.size() != allocated_parameters()) throw std::invalid_argument("parameter vector size mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
    }
    for (Eigen::Index c = 0; c < head_weight_.size(); ++c) head_weight_[c] = flat[k++];
    head_bias_ = flat[k];
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(arch_);
    out.assign(flatten().template cast<Other>());
    return out;
  }

 private:
  ArchSpec arch_;
  std::vector<DenseLayer<Scalar>> layers_;
  RowVectorX<Scalar> head_weight_;
  Scalar head_bias_ = Scalar(0);
};

template <typename Scalar>
RowVectorX<Scalar> sigmoid(const RowVectorX<Scalar>& logits) {
  return (Scalar(1) / (Scalar(1) + (-logits.array()).exp())).matrix();
}

/// Occupancy probabilities in (0, 1) for each column of `x`.
template <typename Scalar>
RowVectorX<Scalar> forward(const Mlp<Scalar>& net, const Positions<Scalar>& x) {
  return sigmoid<Scalar>(net.logits(x));
}

inline constexpr double kLossEpsilon = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
template <typename DerivedP, typename DerivedY>
double bce_loss(const Eigen::MatrixBase<DerivedP>& predictions, const Eigen::MatrixBase<DerivedY>& labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
  if (predictions.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < predictions.size(); ++i) {
    const double f = std::clamp(static_cast<double>(predictions(i)), kLossEpsilon, 1.0 - kLossEpsilon);
    const double y = static_cast<double>(labels(i));
    sum -= y * std::log(f) + (1.0 - y) * std::log(1.0 - f);
  }
  return sum / static_cast<double>(predictions.size());
}

/// Gradient with the same layout as the network.
template <typename Scalar>
struct MlpGradient {
  std::vector<MatrixX<Scalar>> weight;
  std::vector<VectorX<Scalar>> bias;
  RowVectorX<Scalar> head_weight;
  Scalar head_bias = Scalar(0);

  VectorX<Scalar> flatten() const {
    std::int64_t n = head_weight.size() + 1;
    for (std::size_t i = 0; i < weight.size(); ++i) n += weight[i].size() + bias[i].size();
    VectorX<Scalar> flat(n);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      for (Eigen::Index r = 0; r < weight[i].rows(); ++r)
        for (Eigen::Index c = 0; c < weight[i].cols(); ++c) flat[k++] = weight[i](r, c);
      for (Eigen::Index r = 0; r < bias[i].size(); ++r) flat[k++] = bias[i][r];
    }
    for (Eigen::Index c = 0; c < head_weight.size(); ++c) flat[k++] = head_weight[c];
    flat[k] = head_bias;
    return flat;
  }
};

/// Mean cross-entropy over the batch and its gradient by backpropagation.
template <typename Scalar>
double loss_and_gradient(const Mlp<Scalar>& net, const Positions<Scalar>& x, const RowVectorX<Scalar>& labels,
                         MlpGradient<Scalar>& grad) {
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  std::vector<MatrixX<Scalar>> pre(depth);
  std::vector<MatrixX<Scalar>> post(depth + 1);
  post[0] = x;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = layers[l].weight * post[l];
    pre[l].colwise() += layers[l].bias;
    post[l + 1] = apply_activation(layers[l].activation, pre[l]);
  }
  RowVectorX<Scalar> logit = net.head_weight() * post[depth];
  logit.array() += net.head_bias();
  if (!logit.allFinite()) throw NumericOverflow();
  const RowVectorX<Scalar> prob = sigmoid<Scalar>(logit);
  const double loss = bce_loss(prob, labels);

  const auto batch = static_cast<Scalar>(x.cols());
  const RowVectorX<Scalar> dlogit = (prob - labels) / batch;
  grad.weight.resize(depth);
  grad.bias.resize(depth);
  grad.head_weight = dlogit * post[depth].transpose();
  grad.head_bias = dlogit.sum();
  MatrixX<Scalar> upstream = net.head_weight().transpose() * dlogit;
  for (std::size_t l = depth; l-- > 0;) {
    const MatrixX<Scalar> dz = (upstream.array() * activation_derivative(layers[l].activation, pre[l]).array()).matrix();
    grad.weight[l].noalias() = dz * post[l].transpose();
    grad.bias[l] = dz.rowwise().sum();
    if (l > 0) upstream.noalias() = layers[l].weight.transpose() * dz;
  }
  return loss;
}

}  // namespace nasvox

#endif  // NASVOX_MLP_HPP
