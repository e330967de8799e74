#include <doctest.h>

#include <cmath>

#include "causarm/matrix.hpp"
#include "causarm/mlp.hpp"
#include "test_util.hpp"

using namespace causarm;

TEST_CASE("matmul matches a hand-computed product") {
  Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  Matrix b = Matrix::from_rows({{7, 8}, {9, 10}, {11, 12}});
  Matrix c = matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == doctest::Approx(58));
  CHECK(c(0, 1) == doctest::Approx(64));
  CHECK(c(1, 0) == doctest::Approx(139));
  CHECK(c(1, 1) == doctest::Approx(154));
  CHECK_THROWS_AS(matmul(a, a), InvalidInput);
}

TEST_CASE("transpose round trip") {
  Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(transpose(transpose(a)) == a);
}

TEST_CASE("solve_linear recovers a known solution") {
  Matrix a = Matrix::from_rows({{4, 1}, {1, 3}});
  std::vector<double> x_true{1.0, -2.0};
  std::vector<double> rhs = matvec(a, x_true);
  auto x = solve_linear(a, rhs);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(-2.0).epsilon(1e-12));

  Matrix singular = Matrix::from_rows({{1, 2}, {2, 4}});
  CHECK_THROWS(solve_linear(singular, {1.0, 1.0}));
}

TEST_CASE("mlp_init: shapes, Glorot bound, zero biases, determinism") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_widths = {5};
  spec.heads = {{"y", 2}};

  MlpParams p = mlp_init(spec, 42);
  REQUIRE(p.hidden.size() == 1);
  REQUIRE(p.heads.size() == 1);
  CHECK(p.hidden[0].w.rows() == 5);
  CHECK(p.hidden[0].w.cols() == 3);
  CHECK(p.heads[0].w.rows() == 2);
  CHECK(p.heads[0].w.cols() == 5);
  CHECK(p.hidden[0].b.size() == 5);
  CHECK(p.heads[0].b.size() == 2);

  const double hidden_bound = std::sqrt(6.0 / (3 + 5));
  const double head_bound = std::sqrt(6.0 / (5 + 2));
  for (double w : p.hidden[0].w.data()) CHECK(std::fabs(w) <= hidden_bound);
  for (double w : p.heads[0].w.data()) CHECK(std::fabs(w) <= head_bound);
  for (double b : p.hidden[0].b) CHECK(b == 0.0);

  MlpParams q = mlp_init(spec, 42);
  CHECK(p.hidden[0].w == q.hidden[0].w);
  CHECK(p.heads[0].w == q.heads[0].w);

  MlpSpec bad = spec;
  bad.hidden_widths = {0};
  CHECK_THROWS_AS(mlp_init(bad, 1), InvalidInput);
  MlpSpec dup = spec;
  dup.heads = {{"y", 1}, {"y", 1}};
  CHECK_THROWS_AS(mlp_init(dup, 1), InvalidInput);
}

TEST_CASE("mlp_forward: zero weights give bias, identity passes input through") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_widths = {4};
  spec.heads = {{"y", 3}};
  MlpParams p = mlp_init(spec, 7);
  for (auto& l : p.hidden) {
    l.w.fill(0.0);
    l.b.assign(l.b.size(), 0.0);
  }
  p.heads[0].w.fill(0.0);
  p.heads[0].b = {0.5, -1.5, 2.0};
  auto out = mlp_forward(p, std::vector<double>{3.0, -9.0});
  CHECK(out[0][0] == 0.5);
  CHECK(out[0][1] == -1.5);
  CHECK(out[0][2] == 2.0);

  // no hidden layers, single head with identity weights
  MlpSpec lin;
  lin.input_dim = 3;
  lin.heads = {{"y", 3}};
  MlpParams id = mlp_init(lin, 0);
  id.heads[0].w.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) id.heads[0].w(i, i) = 1.0;
  id.heads[0].b.assign(3, 0.0);
  auto echoed = mlp_forward(id, std::vector<double>{1.0, 2.0, 3.0});
  CHECK(echoed[0] == std::vector<double>{1.0, 2.0, 3.0});

  CHECK_THROWS_AS(mlp_forward(id, std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("mlp_forward: 1-1 tanh chain evaluates tanh(x)") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.hidden_widths = {1};
  spec.heads = {{"y", 1}};
  MlpParams p = mlp_init(spec, 0);
  p.hidden[0].w(0, 0) = 1.0;
  p.hidden[0].b[0] = 0.0;
  p.heads[0].w(0, 0) = 1.0;
  p.heads[0].b[0] = 0.0;
  auto out = mlp_forward(p, std::vector<double>{1.0});
  CHECK(out[0][0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
  CHECK(out[0][0] == doctest::Approx(0.761594).epsilon(1e-6));
}

TEST_CASE("single-sample forward is bit-identical to the batched row") {
  MlpSpec spec;
  spec.input_dim = 4;
  spec.hidden_widths = {6, 5};
  spec.heads = {{"a", 2}, {"b", 3}};
  MlpParams p = mlp_init(spec, 11);
  Rng rng(99);
  Matrix batch(8, 4);
  for (double& v : batch.data()) v = rng.uniform(-2.0, 2.0);
  ForwardTrace t = mlp_forward_batch(p, batch);
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    auto single = mlp_forward(p, batch.row_span(r));
    for (std::size_t h = 0; h < single.size(); ++h)
      for (std::size_t j = 0; j < single[h].size(); ++j)
        CHECK(single[h][j] == t.head_out[h](r, j));
  }
}

TEST_CASE("mlp_backward: zero upstream and linear single-weight cases") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"y", 1}};
  MlpParams p = mlp_init(spec, 3);
  p.heads[0].w(0, 0) = 1.7;
  p.heads[0].b[0] = 0.0;

  auto zero = mlp_backward(p, std::vector<double>{2.5}, {{0.0}});
  CHECK(zero.heads[0].w(0, 0) == 0.0);
  CHECK(zero.heads[0].b[0] == 0.0);
  CHECK(zero.input_grad(0, 0) == 0.0);

  auto g = mlp_backward(p, std::vector<double>{2.5}, {{1.0}});
  CHECK(g.heads[0].w(0, 0) == doctest::Approx(2.5));  // dL/dw = x
  CHECK(g.heads[0].b[0] == doctest::Approx(1.0));
  CHECK(g.input_grad(0, 0) == doctest::Approx(1.7));  // dL/dx = w
}

TEST_CASE("mlp_backward matches central finite differences on a random net") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_widths = {8, 8};
  spec.heads = {{"y", 2}};
  MlpParams p = mlp_init(spec, 2024);
  Rng rng(5);
  std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  std::vector<std::vector<double>> upstream{{rng.uniform(-1, 1), rng.uniform(-1, 1)}};

  double worst = 0.0;
  testutil::fd_check_params(p, x, upstream, 1e-5, [&](double a, double n) {
    worst = std::max(worst, testutil::rel_err(a, n));
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("relu hidden variant: forward and gradients away from the kink") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_widths = {3};
  spec.hidden_activation = Activation::kRelu;
  spec.heads = {{"y", 1}};
  MlpParams p = mlp_init(spec, 77);
  // push pre-activations away from zero so the FD probe stays on one side
  for (double& b : p.hidden[0].b) b = 0.9;

  std::vector<double> x{0.3, -0.2};
  double worst = 0.0;
  testutil::fd_check_params(p, x, {{1.0}}, 1e-6, [&](double a, double n) {
    worst = std::max(worst, testutil::rel_err(a, n));
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("backward rejects upstream shapes forward did not produce") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_widths = {3};
  spec.heads = {{"y", 2}};
  MlpParams p = mlp_init(spec, 1);
  CHECK_THROWS_AS(mlp_backward(p, std::vector<double>{1.0, 2.0}, {{1.0}}),
                  InvalidInput);
  CHECK_THROWS_AS(mlp_backward(p, std::vector<double>{1.0, 2.0}, {{1.0}, {1.0}}),
                  InvalidInput);
}
