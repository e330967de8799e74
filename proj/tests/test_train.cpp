#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "causarm/model_io.hpp"
#include "causarm/optim.hpp"
#include "causarm/train.hpp"
#include "test_util.hpp"

using namespace causarm;

TEST_CASE("mse: zero at equality, hand value, finite-difference gradient") {
  std::vector<double> a{1.0, 2.0};
  auto same = mse(a, a);
  CHECK(same.loss == 0.0);
  CHECK(same.grad == std::vector<double>{0.0, 0.0});

  auto r = mse(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0});
  CHECK(r.loss == doctest::Approx(2.5));

  // gradient vs central differences of the scalar loss
  std::vector<double> pred{0.4, -1.2, 2.0};
  std::vector<double> target{1.0, 0.0, -0.5};
  auto base = mse(pred, target);
  const double h = 1e-6;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto up = pred, down = pred;
    up[i] += h;
    down[i] -= h;
    const double fd = (mse(up, target).loss - mse(down, target).loss) / (2 * h);
    CHECK(base.grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }

  CHECK_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                  InvalidInput);
}

TEST_CASE("total_loss weighting") {
  CHECK(total_loss(std::vector<double>{3.0}, std::vector<double>{1.0}) == 3.0);
  CHECK(total_loss(std::vector<double>{1.0, 3.0}, std::vector<double>{1.0, 1.0}) == 4.0);
  CHECK(total_loss(std::vector<double>{1.0, 3.0}, std::vector<double>{0.0, 1.0}) == 3.0);
  CHECK_THROWS_AS(total_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 1.0}),
                  InvalidInput);
}

namespace {

MlpParams scalar_net(double w) {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"y", 1}};
  MlpParams p = mlp_init(spec, 0);
  p.heads[0].w(0, 0) = w;
  p.heads[0].b[0] = 0.0;
  return p;
}

MlpGrads scalar_grads(const MlpParams& like, double gw, double gb) {
  MlpGrads g;
  g.heads.resize(1);
  g.heads[0].w = Matrix(1, 1);
  g.heads[0].w(0, 0) = gw;
  g.heads[0].b = {gb};
  g.input_grad = Matrix(1, 1);
  (void)like;
  return g;
}

}  // namespace

TEST_CASE("optimizer_step: zero gradient leaves adam parameters unchanged") {
  MlpParams p = scalar_net(0.75);
  OptimizerState s = OptimizerState::like(p);
  OptimizerConfig cfg;
  optimizer_step(p, scalar_grads(p, 0.0, 0.0), s, cfg);
  CHECK(p.heads[0].w(0, 0) == 0.75);
  CHECK(s.t == 1);
}

TEST_CASE("optimizer_step: first adam step has the closed form") {
  MlpParams p = scalar_net(1.0);
  OptimizerState s = OptimizerState::like(p);
  OptimizerConfig cfg;  // eta 1e-3, betas (0.9, 0.999), eps 1e-8
  optimizer_step(p, scalar_grads(p, 2.0, 0.0), s, cfg);
  // m_hat = g, v_hat = g^2  =>  dw = -eta * g / (|g| + eps)
  const double expected = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8);
  CHECK(p.heads[0].w(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("optimizer_step: adamw decoupled decay with zero gradient") {
  MlpParams p = scalar_net(1.0);
  OptimizerState s = OptimizerState::like(p);
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kAdamW;
  cfg.lambda = 0.004;
  optimizer_step(p, scalar_grads(p, 0.0, 0.0), s, cfg);
  CHECK(p.heads[0].w(0, 0) == doctest::Approx(0.999996).epsilon(1e-12));
}

TEST_CASE("adamw with lambda=0 is bit-identical to adam on one gradient stream") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_widths = {4};
  spec.heads = {{"y", 2}};
  MlpParams pa = mlp_init(spec, 5);
  MlpParams pw = pa;
  OptimizerState sa = OptimizerState::like(pa);
  OptimizerState sw = OptimizerState::like(pw);
  OptimizerConfig ca;
  OptimizerConfig cw;
  cw.kind = OptimizerKind::kAdamW;
  cw.lambda = 0.0;

  Rng rng(31);
  for (int step = 0; step < 25; ++step) {
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<std::vector<double>> up{{rng.uniform(-1, 1), rng.uniform(-1, 1)}};
    MlpGrads ga = mlp_backward(pa, x, up);
    MlpGrads gw = mlp_backward(pw, x, up);
    optimizer_step(pa, ga, sa, ca);
    optimizer_step(pw, gw, sw, cw);
  }
  CHECK(pa.hidden[0].w == pw.hidden[0].w);
  CHECK(pa.hidden[0].b == pw.hidden[0].b);
  CHECK(pa.heads[0].w == pw.heads[0].w);
  CHECK(pa.heads[0].b == pw.heads[0].b);
}

TEST_CASE("optimizer_step rejects non-finite gradients") {
  MlpParams p = scalar_net(1.0);
  OptimizerState s = OptimizerState::like(p);
  OptimizerConfig cfg;
  CHECK_THROWS_AS(
      optimizer_step(p, scalar_grads(p, std::nan(""), 0.0), s, cfg),
      TrainingDiverged);
}

namespace {

TrainData linear_regression_data(std::size_t n, double slope, std::uint64_t seed) {
  TrainData d;
  d.inputs = Matrix(n, 1);
  Matrix y(n, 1);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    d.inputs(i, 0) = x;
    y(i, 0) = slope * x;
  }
  d.targets = {y};
  return d;
}

}  // namespace

TEST_CASE("train: config invariants") {
  TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  TrainConfig neg;
  neg.head_loss_weights = {-1.0};
  CHECK_THROWS_AS(neg.validate(), InvalidInput);
}

TEST_CASE("train: linear regression recovers the slope") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"y", 1}};
  TrainData data = linear_regression_data(100, 2.0, 9);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 10;
  cfg.seed = 4;
  OptimizerConfig opt;
  opt.eta = 1e-2;

  TrainResult r = train(spec, data, cfg, opt);
  CHECK(std::fabs(r.params.heads[0].w(0, 0) - 2.0) < 0.05);
  CHECK(r.history.size() == 200);
  CHECK(r.history.back().total < r.history.front().total);
}

TEST_CASE("train: deterministic for a fixed seed") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"y", 1}};
  TrainData data = linear_regression_data(64, -1.3, 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 123;
  OptimizerConfig opt;

  TrainResult a = train(spec, data, cfg, opt);
  TrainResult b = train(spec, data, cfg, opt);
  CHECK(a.params.heads[0].w == b.params.heads[0].w);
  CHECK(a.params.heads[0].b == b.params.heads[0].b);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e)
    CHECK(a.history[e].total == b.history[e].total);
}

TEST_CASE("train: full-batch convex loss is non-increasing after epoch 2") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"y", 1}};
  TrainData data = linear_regression_data(100, 2.0, 77);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 256;  // full batch
  cfg.seed = 1;
  OptimizerConfig opt;
  opt.eta = 1e-3;
  TrainResult r = train(spec, data, cfg, opt);
  for (std::size_t e = 2; e < r.history.size(); ++e)
    CHECK(r.history[e].total <= r.history[e - 1].total + 1e-15);
}

TEST_CASE("train: divergence aborts with the epoch index") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"y", 1}};
  TrainData data = linear_regression_data(32, 1e150, 3);
  for (double& v : data.targets[0].data()) v *= 1e150;  // force overflow
  TrainConfig cfg;
  cfg.epochs = 5;
  OptimizerConfig opt;
  opt.eta = 1.0;
  CHECK_THROWS_AS(train(spec, data, cfg, opt), TrainingError);
}

TEST_CASE("kfold_split: balance, coverage, determinism, bad k") {
  auto folds = kfold_split(10, 5, 42);
  REQUIRE(folds.size() == 5);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(f.size() == 2);
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 10);

  auto uneven = kfold_split(7, 5, 1);
  std::multiset<std::size_t> sizes;
  std::set<std::size_t> all;
  for (const auto& f : uneven) {
    sizes.insert(f.size());
    all.insert(f.begin(), f.end());
  }
  CHECK(sizes == std::multiset<std::size_t>{1, 1, 1, 2, 2});
  CHECK(all.size() == 7);

  CHECK(kfold_split(20, 4, 9) == kfold_split(20, 4, 9));
  CHECK(kfold_split(20, 4, 9) != kfold_split(20, 4, 10));

  CHECK_THROWS_AS(kfold_split(3, 5, 0), InvalidInput);
  CHECK_THROWS_AS(kfold_split(10, 1, 0), InvalidInput);
}

TEST_CASE("mae_by_slice: hand values and the equal-slice identity") {
  Matrix pred = Matrix::from_rows({{1.0, 2.0}});
  Matrix zeros = Matrix::from_rows({{0.0, 0.0}});
  auto one = mae_by_slice(pred, zeros, {{"all", 0, 2}});
  CHECK(one[0].second == doctest::Approx(1.5));

  auto same = mae_by_slice(pred, pred, {{"all", 0, 2}});
  CHECK(same[0].second == 0.0);

  // two slices with equal per-slice MAE equal the full MAE
  Matrix p4 = Matrix::from_rows({{1.0, 3.0, 2.0, 1.0}});
  Matrix t4 = Matrix::from_rows({{0.0, 1.0, 0.0, 0.0}});
  auto split = mae_by_slice(p4, t4, {{"a", 0, 2}, {"b", 2, 2}});
  auto full = mae_by_slice(p4, t4, {{"all", 0, 4}});
  CHECK(split[0].second == doctest::Approx(split[1].second));
  CHECK(split[0].second == doctest::Approx(full[0].second));
}

TEST_CASE("model file round trip preserves every bit") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_widths = {4, 2};
  spec.heads = {{"pos", 2}, {"rot", 1}};
  ModelFile m;
  m.role = "fm";
  m.schema_hash = "deadbeef";
  m.params = mlp_init(spec, 31337);
  m.norm.enabled = true;
  m.norm.mean = {0.1, -0.2, 0.3};
  m.norm.stddev = {1.0, 2.0, 0.5};

  auto path = std::filesystem::temp_directory_path() / "causarm_model_test.json";
  save_model(m, path);
  ModelFile r = load_model(path);
  CHECK(r.role == "fm");
  CHECK(r.schema_hash == "deadbeef");
  CHECK(r.norm.enabled);
  CHECK(r.norm.mean == m.norm.mean);
  REQUIRE(r.params.hidden.size() == 2);
  CHECK(r.params.hidden[0].w == m.params.hidden[0].w);
  CHECK(r.params.hidden[1].w == m.params.hidden[1].w);
  CHECK(r.params.heads[0].w == m.params.heads[0].w);
  CHECK(r.params.heads[1].b == m.params.heads[1].b);
  std::filesystem::remove(path);
}

TEST_CASE("model load rejects malformed documents") {
  auto path = std::filesystem::temp_directory_path() / "causarm_model_bad.json";
  write_text_file(path, "{\"format\": \"causarm-model-v1\", \"spec\": 3}");
  CHECK_THROWS_AS(load_model(path), MalformedFile);
  write_text_file(path, "not json at all");
  CHECK_THROWS_AS(load_model(path), MalformedFile);
  std::filesystem::remove(path);
}

TEST_CASE("normalizer: fit and apply") {
  Matrix x = Matrix::from_rows({{1.0, 10.0}, {3.0, 30.0}});
  Normalizer n = Normalizer::fit(x);
  CHECK(n.mean[0] == doctest::Approx(2.0));
  CHECK(n.mean[1] == doctest::Approx(20.0));
  Matrix z = n.apply(x);
  CHECK(z(0, 0) == doctest::Approx(-1.0));
  CHECK(z(1, 0) == doctest::Approx(1.0));

  Normalizer off;
  CHECK(off.apply(x) == x);
}

TEST_CASE("loss history CSV carries one column per head") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.heads = {{"pos", 1}, {"rot", 1}};
  std::vector<EpochLoss> hist{{1.5, {1.0, 0.5}}, {0.75, {0.5, 0.25}}};
  std::string csv = loss_history_csv(spec, hist);
  CHECK(csv.find("epoch,total_loss,pos_loss,rot_loss\n") == 0);
  CHECK(csv.find("0,1.5,1,0.5\n") != std::string::npos);
  CHECK(csv.find("1,0.75,0.5,0.25\n") != std::string::npos);
}
