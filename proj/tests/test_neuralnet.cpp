#include "doctest.h"

#include "nasvox/model_io.hpp"
#include "nasvox/sampling.hpp"
#include "nasvox/train.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

using namespace nasvox;

namespace {

const Activation kRelu{ActivationKind::ReLU};
const Activation kElu{ActivationKind::ELU};
const Activation kSwish{ActivationKind::Swish};

Positions<double> random_positions(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Positions<double> x(3, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

ArchSpec mixed_arch() { return parse_arch("16:relu,12:elu,8:swish"); }

}  // namespace

TEST_CASE("activation values") {
  CHECK(activate(kRelu, -1.0) == 0.0);
  CHECK(activate(kRelu, 2.5) == 2.5);
  CHECK(activate(kElu, 0.0) == 0.0);
  CHECK(activate(kSwish, 0.0) == 0.0);
  CHECK(activate(kSwish, 1.0) == doctest::Approx(0.7310586).epsilon(1e-7));
  CHECK(activate(kElu, -1.0) == doctest::Approx(-0.6321206).epsilon(1e-7));
  CHECK(activate(kElu, 3.0) == 3.0);
}

TEST_CASE("activation derivatives agree with central differences") {
  const double h = 1e-6;
  for (const auto& a : {kRelu, kElu, kSwish, Activation{ActivationKind::Swish, 1.0, 2.0},
                        Activation{ActivationKind::ELU, 0.5, 1.0}}) {
    for (double x : {-3.0, -1.2, -0.3, 0.4, 1.1, 2.7}) {
      const double fd = (activate(a, x + h) - activate(a, x - h)) / (2 * h);
      CHECK(activate_derivative(a, x) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("vectorized activation matches scalar activation") {
  const MatrixX<double> z = random_positions(40, 2) * 3.0;
  for (const auto& a : {kRelu, kElu, kSwish}) {
    const MatrixX<double> v = apply_activation(a, z);
    const MatrixX<double> d = activation_derivative(a, z);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      CHECK(v.data()[i] == doctest::Approx(activate(a, z.data()[i])).epsilon(1e-12));
      CHECK(d.data()[i] == doctest::Approx(activate_derivative(a, z.data()[i])).epsilon(1e-12));
    }
  }
}

TEST_CASE("activation names") {
  CHECK(parse_activation("swish") == ActivationKind::Swish);
  CHECK(to_string(ActivationKind::ELU) == "elu");
  CHECK_THROWS(parse_activation("tanh"));
  CHECK(to_string(parse_arch("32:relu,16:swish")) == "32:relu,16:swish");
  CHECK_THROWS(parse_arch(""));
  CHECK(parse_arch("32") == parse_arch("32:relu"));
  CHECK_THROWS(parse_arch("32:"));
  CHECK_THROWS(parse_arch("0:relu"));
}

TEST_CASE("parameter counts") {
  CHECK(parameter_count(uniform_arch(8, 32)) == 7553);
  CHECK(parameter_count(uniform_arch(6, 64)) == 21121);
  CHECK(parameter_count(uniform_arch(8, 42)) == 12853);
  CHECK(parameter_count(uniform_arch(1, 8)) == 41);
}

TEST_CASE("parameter_count equals allocated scalars for every width and depth") {
  for (int w : kSearchWidths)
    for (int d = 1; d <= kMaxHidden; ++d) {
      const ArchSpec arch = uniform_arch(d, w);
      const Mlp<float> net(arch);
      REQUIRE(net.allocated_parameters() == parameter_count(arch));
      REQUIRE(net.flatten().size() == parameter_count(arch));
      CHECK(within_search_caps(arch));
    }
  CHECK_FALSE(within_search_caps(uniform_arch(7, 32)));
  CHECK_FALSE(within_search_caps(uniform_arch(2, 33)));
}

TEST_CASE("zero network predicts one half") {
  const Mlp<double> net(mixed_arch());
  const RowVectorX<double> p = forward(net, random_positions(50, 1));
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p[i] == 0.5);
}

TEST_CASE("forward agrees with a straight-line implementation") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Mlp<double> net = Mlp<double>::random(mixed_arch(), seed);
    const Positions<double> x = random_positions(200, seed + 10);
    const RowVectorX<double> p = forward(net, x);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      const double expect = oracle::forward_scalar(net, x(0, i), x(1, i), x(2, i));
      REQUIRE(std::abs(p[i] - expect) < 1e-6);
      REQUIRE(p[i] > 0.0);
      REQUIRE(p[i] < 1.0);
    }
  }
}

TEST_CASE("batched output equals single-sample output") {
  const Mlp<float> net = Mlp<float>::random(mixed_arch(), 7);
  const Positions<float> x = random_positions(1000, 8).cast<float>();
  const RowVectorX<float> all = forward(net, x);
  for (Eigen::Index i : {0, 17, 500, 999}) {
    const Positions<float> one = x.col(i);
    CHECK(std::abs(forward(net, one)[0] - all[i]) <= 1e-6f);
  }
}

TEST_CASE("forward is permutation-equivariant over the batch") {
  const Mlp<double> net = Mlp<double>::random(mixed_arch(), 4);
  const Positions<double> x = random_positions(300, 5);
  std::vector<Eigen::Index> perm(300);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(6));
  Positions<double> xp(3, 300);
  for (Eigen::Index i = 0; i < 300; ++i) xp.col(i) = x.col(perm[static_cast<std::size_t>(i)]);
  const RowVectorX<double> p = forward(net, x);
  const RowVectorX<double> pp = forward(net, xp);
  for (Eigen::Index i = 0; i < 300; ++i) CHECK(pp[i] == p[perm[static_cast<std::size_t>(i)]]);
}

TEST_CASE("non-finite activations raise numeric overflow") {
  Mlp<double> net = Mlp<double>::random(uniform_arch(1, 8), 1);
  net.layers()[0].bias[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH(forward(net, random_positions(4, 1)), "numeric overflow");
}

TEST_CASE("loss closed forms") {
  Eigen::VectorXd y(4);
  y << 1, 0, 1, 0;
  CHECK(bce_loss(y, y) <= 1e-6);
  CHECK(bce_loss(Eigen::VectorXd::Constant(4, 0.5), y) == doctest::Approx(0.6931472).epsilon(1e-7));
  Eigen::VectorXd f(1), z(1);
  f << 0.9;
  z << 0.0;
  CHECK(bce_loss(f, z) == doctest::Approx(2.3025851).epsilon(1e-7));
  CHECK_THROWS(bce_loss(Eigen::VectorXd::Zero(3), y));
}

TEST_CASE("loss is bounded by -ln eps") {
  const double bound = -std::log(kLossEpsilon);
  Eigen::VectorXd f(4), y(4);
  f << 0.0, 1.0, 0.0, 1.0;
  y << 1, 0, 1, 0;
  CHECK(bce_loss(f, y) <= bound + 1e-9);
  CHECK(bce_loss(f, y) == doctest::Approx(bound).epsilon(1e-6));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    for (int i = 0; i < 4; ++i) {
      f[i] = u(rng);
      y[i] = u(rng) < 0.5 ? 0.0 : 1.0;
    }
    REQUIRE(bce_loss(f, y) <= bound);
  }
}

TEST_CASE("backprop gradients match central differences") {
  const double h = 1e-4;
  std::size_t total = 0, good = 0;
  std::uint64_t seed = 100;
  for (const auto kind : {ActivationKind::ReLU, ActivationKind::ELU, ActivationKind::Swish})
    for (int depth = 1; depth <= 3; ++depth) {
      const Mlp<double> net = Mlp<double>::random(uniform_arch(depth, 8, kind), ++seed);
      const Positions<double> x = random_positions(32, ++seed);
      RowVectorX<double> y(32);
      for (Eigen::Index i = 0; i < 32; ++i) y[i] = x(0, i) + 0.5 * x(1, i) > 0.1 ? 1.0 : 0.0;

      MlpGradient<double> grad;
      const double loss = loss_and_gradient(net, x, y, grad);
      CHECK(loss == doctest::Approx(bce_loss(forward(net, x), y)).epsilon(1e-12));
      const VectorX<double> analytic = grad.flatten();
      const VectorX<double> theta = net.flatten();
      Mlp<double> probe = net;
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        VectorX<double> t = theta;
        t[k] += h;
        probe.assign(t);
        const double up = bce_loss(forward(probe, x), y);
        t[k] -= 2 * h;
        probe.assign(t);
        const double down = bce_loss(forward(probe, x), y);
        const double numeric = (up - down) / (2 * h);
        ++total;
        good += oracle::relative_error(analytic[k], numeric) < 1e-4;
      }
    }
  INFO("good " << good << " of " << total);
  CHECK(static_cast<double>(good) > 0.99 * static_cast<double>(total));
}

TEST_CASE("half-space occupancy is learned by a single hidden layer") {
  VoxelGrid grid(32);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::Vector3d c = grid.center(i);
    grid.set(i, c.x() + 0.5 * c.y() - 0.25 * c.z() > 0.1);
  }
  const TrainingSet data = build_training_set(grid, support_set(grid), 3);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.seed = 4;
  const auto result = train(Mlp<float>::random(uniform_arch(1, 8), 5), data, cfg);
  CHECK(result.loss_history.size() == 10);
  CHECK(result.loss_history.back() < result.loss_history.front());
  CHECK(full_grid_accuracy(result.net, grid) >= 0.999);
}

TEST_CASE("training is deterministic and zero epochs is the identity") {
  std::mt19937_64 rng(9);
  const VoxelGrid grid = oracle::random_grid(10, 0.3, rng);
  const TrainingSet data = build_training_set(grid, support_set(grid), 1);
  const Mlp<float> init = Mlp<float>::random(parse_arch("16:swish,8:elu"), 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 64;
  cfg.seed = 3;
  const auto a = train(init, data, cfg);
  const auto b = train(init, data, cfg);
  CHECK(a.net.flatten() == b.net.flatten());
  CHECK(a.loss_history == b.loss_history);
  CHECK_FALSE(a.net.flatten() == init.flatten());

  cfg.epochs = 0;
  const auto same = train(init, data, cfg);
  CHECK(same.net.flatten() == init.flatten());
  CHECK(same.loss_history.empty());
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("full-grid accuracy") {
  VoxelGrid grid(10);
  for (std::size_t i = 0; i < 100; ++i) grid.set(i * 10, true);
  Mlp<float> constant(uniform_arch(1, 8));
  constant.head_bias() = -1e-4f;
  CHECK(full_grid_accuracy(constant, grid) == 0.9);
  constant.head_bias() = 1.0f;
  CHECK(reconstruct(constant, 12).count() == 12 * 12 * 12);

  std::mt19937_64 rng(2);
  const VoxelGrid g = oracle::random_grid(12, 0.4, rng);
  const Mlp<double> net = Mlp<double>::random(mixed_arch(), 11);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Eigen::Vector3d c = g.center(i);
    correct += (oracle::forward_scalar(net, c.x(), c.y(), c.z()) >= 0.5) == g[i];
  }
  CHECK(full_grid_accuracy(net, g) == static_cast<double>(correct) / static_cast<double>(g.size()));
  CHECK(full_grid_accuracy(net, reconstruct(net, 12)) == 1.0);
  CHECK(reconstruct(net, 12) == reconstruct(net, 12));
  CHECK_THROWS(reconstruct(net, 7));
}

TEST_CASE("NASV byte layout") {
  Mlp<float> net(parse_arch("8:swish"));
  VectorX<float> flat(41);
  for (Eigen::Index i = 0; i < 41; ++i) flat[i] = 0.25f * static_cast<float>(i) - 3.0f;
  net.assign(flat);
  const auto bytes = encode_model(net);
  REQUIRE(bytes.size() == 4 + 1 + 1 + 3 + 4 * 41);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NASV");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 8);
  CHECK(bytes[7] == 0);
  CHECK(bytes[8] == 2);
  // First parameter is W[0][0] = -3.0f = 0xC0400000, little-endian.
  CHECK(bytes[9] == 0x00);
  CHECK(bytes[10] == 0x00);
  CHECK(bytes[11] == 0x40);
  CHECK(bytes[12] == 0xC0);
  // W is row-major: the second scalar is W[0][1].
  float second;
  std::memcpy(&second, &bytes[13], 4);
  CHECK(second == net.layers()[0].weight(0, 1));
  float last;
  std::memcpy(&last, &bytes[bytes.size() - 4], 4);
  CHECK(last == net.head_bias());
}

TEST_CASE("NASV round trip and rejection") {
  const Mlp<float> net = Mlp<float>::random(parse_arch("64:relu,40:elu,12:swish"), 3);
  const Mlp<float> back = decode_model(encode_model(net));
  CHECK(back.arch() == net.arch());
  CHECK(back.flatten() == net.flatten());

  const auto path = std::filesystem::temp_directory_path() / "nasvox_test_model.nasv";
  write_model(net, path);
  CHECK(read_model(path).flatten() == net.flatten());
  std::filesystem::remove(path);

  auto bytes = encode_model(net);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_model(bytes), FormatError);
  bytes = encode_model(net);
  bytes[4] = 2;
  CHECK_THROWS_AS(decode_model(bytes), FormatError);
  bytes = encode_model(net);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_model(bytes), FormatError);
  bytes = encode_model(net);
  bytes[8] = 7;
  CHECK_THROWS_AS(decode_model(bytes), FormatError);
}
