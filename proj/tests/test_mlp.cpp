#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "semnav/mlp.hpp"

using namespace semnav;

TEST_CASE("zero model gives zero logits") {
  const auto m = MlpModel::zeros({3, 4, 2});
  Eigen::VectorXd x(3);
  x << 0.3, -1.0, 2.0;
  CHECK(mlp_forward(m, x).isZero(0));
}

TEST_CASE("identity linear layer") {
  auto m = MlpModel::zeros({3, 3});
  m.layers[0].weight.setIdentity();
  Eigen::VectorXd x(3);
  x << 0.5, -2.0, 7.0;
  CHECK(mlp_forward(m, x) == x);
}

TEST_CASE("2-2-2 hand computation") {
  // W1 = [[1, -1], [0.5, 2]], b1 = [0, -1]; W2 = [[1, 1], [-1, 3]], b2 = [0.5, 0]
  // x = [2, 1]: z1 = [1, 2], h = relu = [1, 2]; z2 = [1+2+0.5, -1+6] = [3.5, 5]
  // x = [0, 1]: z1 = [-1, 1], h = [0, 1]; z2 = [1.5, 3]
  auto m = MlpModel::zeros({2, 2, 2});
  m.layers[0].weight << 1, -1, 0.5, 2;
  m.layers[0].bias << 0, -1;
  m.layers[1].weight << 1, 1, -1, 3;
  m.layers[1].bias << 0.5, 0;
  Eigen::VectorXd x(2), y(2);
  x << 2, 1;
  y << 3.5, 5;
  CHECK(mlp_forward(m, x) == y);
  x << 0, 1;
  y << 1.5, 3;
  CHECK(mlp_forward(m, x) == y);
}

TEST_CASE("backward") {
  const auto m = MlpModel::he_uniform({4, 5, 3}, 11);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1, 1);
  SUBCASE("zero upstream") {
    const auto g = mlp_backward(m, x, Eigen::VectorXd::Zero(3));
    for (const auto& l : g.layers) {
      CHECK(l.weight.isZero(0));
      CHECK(l.bias.isZero(0));
    }
    CHECK(g.input.isZero(0));
  }
  SUBCASE("linear layer input gradient is W^T u") {
    const auto lin = MlpModel::he_uniform({4, 3}, 2);
    Eigen::VectorXd u(3);
    u << 1, -2, 0.5;
    const auto g = mlp_backward(lin, x, u);
    CHECK(g.input.row(0).transpose().isApprox(lin.layers[0].weight.transpose() * u));
  }
  SUBCASE("finite differences") {
    Eigen::MatrixXd batch = Eigen::MatrixXd::Random(6, 4);
    Eigen::MatrixXd up = Eigen::MatrixXd::Random(6, 3);
    CHECK(oracle::mlp_gradient_error(m, batch, up) < 1e-5);
  }
}

TEST_CASE("softmax cross entropy") {
  SUBCASE("uniform logits give ln C") {
    const auto ce = softmax_cross_entropy<double>(Eigen::VectorXd::Constant(5, 0.3), 2);
    CHECK(ce.loss == doctest::Approx(std::log(5.0)).epsilon(1e-15));
    CHECK(std::abs(ce.gradient.sum()) < 1e-15);
  }
  SUBCASE("large logits stay finite") {
    Eigen::VectorXd z(2);
    z << 1000, 0;
    const auto ce = softmax_cross_entropy<double>(z, 0);
    CHECK(std::isfinite(ce.loss));
    CHECK(ce.loss == doctest::Approx(0.0));
    CHECK(std::abs(ce.gradient.sum()) < 1e-15);
  }
  SUBCASE("batch version agrees with the row version") {
    Eigen::MatrixXd logits = Eigen::MatrixXd::Random(5, 3) * 4.0;
    std::vector<int> t = {0, 2, 1, 1, 0};
    Eigen::MatrixXd grad;
    const double total = batch_cross_entropy<double>(logits, t, grad);
    double expect = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto ce = softmax_cross_entropy<double>(logits.row(i).transpose(), t[std::size_t(i)]);
      expect += ce.loss;
      CHECK(grad.row(i).transpose().isApprox(ce.gradient, 1e-14));
    }
    CHECK(total == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("bad target") {
    CHECK_THROWS_AS(softmax_cross_entropy<double>(Eigen::VectorXd::Zero(3), 3), Error);
  }
}

TEST_CASE("argmax ties go to the smallest index") {
  Eigen::RowVectorXd r(4);
  r << 1, 3, 3, 2;
  CHECK(argmax_first(r) == 1);
  CHECK(argmax_first(Eigen::RowVectorXd::Zero(3)) == 0);
}

TEST_CASE("float instantiation") {
  const auto m = Mlp<float>::he_uniform({3, 4, 2}, 1);
  Eigen::MatrixXf batch = Eigen::MatrixXf::Random(2, 3);
  const auto out = mlp_forward_batch(m, batch);
  CHECK(out.rows() == 2);
  CHECK(out.allFinite());
}
