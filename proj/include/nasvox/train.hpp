#ifndef NASVOX_TRAIN_HPP
#define NASVOX_TRAIN_HPP

#include "nasvox/mlp.hpp"
#include "nasvox/sampling.hpp"
#include "nasvox/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nasvox {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 2048;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  }
};

/// First and second moment estimates for Adam, shaped like the network.
template <typename Scalar>
struct AdamState {
  MlpGradient<Scalar> m;
  MlpGradient<Scalar> v;
  std::int64_t step = 0;

  explicit AdamState(const Mlp<Scalar>& net) {
    for (const auto& l : net.layers()) {
      m.weight.push_back(MatrixX<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
      m.bias.push_back(VectorX<Scalar>::Zero(l.bias.size()));
    }
    m.head_weight = RowVectorX<Scalar>::Zero(net.head_weight().size());
    v = m;
  }
};

template <typename Scalar>
void adam_step(Mlp<Scalar>& net, const MlpGradient<Scalar>& g, AdamState<Scalar>& st, const TrainConfig& cfg) {
  ++st.step;
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const auto eps = static_cast<Scalar>(cfg.adam_epsilon);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(st.step)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(st.step)));
  const auto lr = static_cast<Scalar>(cfg.learning_rate);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, g.weight[l], st.m.weight[l], st.v.weight[l]);
    update(layers[l].bias, g.bias[l], st.m.bias[l], st.v.bias[l]);
  }
  update(net.head_weight(), g.head_weight, st.m.head_weight, st.v.head_weight);
  st.m.head_bias = b1 * st.m.head_bias + (Scalar(1) - b1) * g.head_bias;
  st.v.head_bias = b2 * st.v.head_bias + (Scalar(1) - b2) * g.head_bias * g.head_bias;
  net.head_bias() -= lr * (st.m.head_bias / c1) / (std::sqrt(st.v.head_bias / c2) + eps);
}

/// Thrown when the loss stops being finite; carries the network as of the last completed epoch.
template <typename Scalar>
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(Mlp<Scalar> last_good, int epoch)
      : std::runtime_error("training diverged in epoch " + std::to_string(epoch)),
        last_good_(std::move(last_good)),
        epoch_(epoch) {}
  const Mlp<Scalar>& last_good() const { return last_good_; }
  int epoch() const { return epoch_; }

 private:
  Mlp<Scalar> last_good_;
  int epoch_;
};

template <typename Scalar>
struct TrainResult {
  Mlp<Scalar> net;
  std::vector<double> loss_history;  // sample-weighted mean loss per epoch
};

/// Adam on seeded shuffled mini-batches.
template <typename Scalar>
TrainResult<Scalar> train(Mlp<Scalar> net, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult<Scalar> result{std::move(net), {}};
  if (cfg.epochs == 0) return result;
  const Eigen::Index k = data.size();
  if (k == 0) throw std::invalid_argument("empty training set");

  AdamState<Scalar> adam(result.net);
  MlpGradient<Scalar> grad;
  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Positions<Scalar> xb;
  RowVectorX<Scalar> yb;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Mlp<Scalar> checkpoint = result.net;
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (Eigen::Index start = 0; start < k; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, k - start);
      xb.resize(3, len);
      yb.resize(len);
      for (Eigen::Index j = 0; j < len; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + j)];
        xb.col(j) = data.positions.col(src).template cast<Scalar>();
        yb[j] = static_cast<Scalar>(data.labels[src]);
      }
      double loss = 0.0;
      try {
        loss = loss_and_gradient(result.net, xb, yb, grad);
      } catch (const NumericOverflow&) {
        throw TrainingDiverged<Scalar>(std::move(checkpoint), epoch);
      }
      if (!std::isfinite(loss)) throw TrainingDiverged<Scalar>(std::move(checkpoint), epoch);
      weighted += loss * static_cast<double>(len);
      adam_step(result.net, grad, adam, cfg);
    }
    const double epoch_loss = weighted / static_cast<double>(k);
    if (!std::isfinite(epoch_loss) || !result.net.flatten().allFinite())
      throw TrainingDiverged<Scalar>(std::move(checkpoint), epoch);
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

namespace detail {

// Calls visit(first_index, occupancy_predictions) over the grid in chunks.
template <typename Scalar, typename Visit>
void predict_grid(const Mlp<Scalar>& net, int resolution, Visit&& visit) {
  const VoxelGrid shape(resolution);
  const auto total = static_cast<Eigen::Index>(shape.size());
  constexpr Eigen::Index kChunk = 32768;
  Positions<Scalar> x;
  for (Eigen::Index start = 0; start < total; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, total - start);
    x.resize(3, len);
    for (Eigen::Index j = 0; j < len; ++j)
      x.col(j) = shape.center(static_cast<std::size_t>(start + j)).template cast<Scalar>();
    const RowVectorX<Scalar> p = forward(net, x);
    visit(static_cast<std::size_t>(start), p);
  }
}

}  // namespace detail

/// Voxel occupied iff the predicted probability at its center is >= 0.5.
template <typename Scalar>
VoxelGrid reconstruct(const Mlp<Scalar>& net, int resolution) {
  if (resolution < 8) throw std::invalid_argument("resolution >= 8 required");
  VoxelGrid out(resolution);
  detail::predict_grid(net, resolution, [&](std::size_t first, const RowVectorX<Scalar>& p) {
    for (Eigen::Index j = 0; j < p.size(); ++j) out.set(first + static_cast<std::size_t>(j), p[j] >= Scalar(0.5));
  });
  return out;
}

/// Fraction of all voxels whose thresholded prediction matches the grid.
template <typename Scalar>
double full_grid_accuracy(const Mlp<Scalar>& net, const VoxelGrid& grid) {
  std::size_t correct = 0;
  detail::predict_grid(net, grid.resolution(), [&](std::size_t first, const RowVectorX<Scalar>& p) {
    for (Eigen::Index j = 0; j < p.size(); ++j)
      correct += (p[j] >= Scalar(0.5)) == grid[first + static_cast<std::size_t>(j)];
  });
  return static_cast<double>(correct) / static_cast<double>(grid.size());
}

}  // namespace nasvox

#endif  // NASVOX_TRAIN_HPP
