#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causarm/mlp.hpp"
#include "causarm/optim.hpp"
#include "causarm/rng.hpp"

namespace causarm {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::vector<double> head_loss_weights;  // empty = equally weighted (all 1)

  void validate() const {
    if (epochs < 1) throw InvalidInput("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw InvalidInput("TrainConfig: batch_size must be >= 1");
    for (double w : head_loss_weights)
      if (!(w >= 0.0) || !std::isfinite(w))
        throw InvalidInput("TrainConfig: head loss weights must be finite and >= 0");
  }

  double head_weight(std::size_t h) const {
    return head_loss_weights.empty() ? 1.0 : head_loss_weights.at(h);
  }
};

// MSE over one vector pair plus its gradient w.r.t. pred.
struct MseResult {
  double loss = 0.0;
  std::vector<double> grad;
};

inline MseResult mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw InvalidInput("mse: shape mismatch");
  if (pred.empty()) throw InvalidInput("mse: empty vectors");
  MseResult r;
  r.grad.resize(pred.size());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d * inv_n;
    r.grad[i] = 2.0 * d * inv_n;
  }
  return r;
}

inline double total_loss(std::span<const double> per_head_losses,
                         std::span<const double> weights) {
  if (per_head_losses.size() != weights.size())
    throw InvalidInput("total_loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < per_head_losses.size(); ++i)
    s += weights[i] * per_head_losses[i];
  return s;
}

// Inputs plus one target matrix per head, rows aligned.
struct TrainData {
  Matrix inputs;
  std::vector<Matrix> targets;

  void validate_against(const MlpSpec& spec) const {
    if (inputs.rows() == 0) throw InvalidInput("train: empty dataset");
    if (inputs.cols() != spec.input_dim)
      throw InvalidInput("train: input dim does not match spec");
    if (targets.size() != spec.heads.size())
      throw InvalidInput("train: target head count mismatch");
    for (std::size_t h = 0; h < targets.size(); ++h)
      if (targets[h].rows() != inputs.rows() ||
          targets[h].cols() != spec.heads[h].width)
        throw InvalidInput("train: target shape mismatch for head '" +
                           spec.heads[h].name + "'");
  }
};

// Split a concatenated target matrix into per-head blocks (schema order).
inline std::vector<Matrix> split_targets(const MlpSpec& spec, const Matrix& full) {
  if (full.cols() != spec.output_dim())
    throw InvalidInput("split_targets: width mismatch");
  std::vector<Matrix> out;
  std::size_t off = 0;
  for (const auto& h : spec.heads) {
    Matrix t(full.rows(), h.width);
    for (std::size_t i = 0; i < full.rows(); ++i)
      for (std::size_t j = 0; j < h.width; ++j) t(i, j) = full(i, off + j);
    out.push_back(std::move(t));
    off += h.width;
  }
  return out;
}

struct EpochLoss {
  double total = 0.0;
  std::vector<double> per_head;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochLoss> history;
};

// Mini-batch training loop: epoch-level shuffled batching, per-head MSE,
// equally weighted total loss unless configured otherwise. Deterministic
// given (spec, data, configs).
inline TrainResult train(const MlpSpec& spec, const TrainData& data,
                         const TrainConfig& cfg, const OptimizerConfig& opt) {
  cfg.validate();
  opt.validate();
  data.validate_against(spec);
  if (!cfg.head_loss_weights.empty() && cfg.head_loss_weights.size() != spec.heads.size())
    throw InvalidInput("train: head weight count mismatch");

  const std::size_t n = data.inputs.rows();
  const std::size_t n_heads = spec.heads.size();

  TrainResult result;
  result.params = mlp_init(spec, derive_seed(cfg.seed, 0));
  OptimizerState state = OptimizerState::like(result.params);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * batches_per_epoch;
  std::size_t step_index = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      Rng rng(derive_seed(cfg.seed, 1 + epoch));
      rng.shuffle(order);
    }
    EpochLoss epoch_loss;
    epoch_loss.per_head.assign(n_heads, 0.0);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, n - start);

      Matrix xb(bsz, spec.input_dim);
      for (std::size_t r = 0; r < bsz; ++r) {
        const double* src = data.inputs.row(order[start + r]);
        double* dst = xb.row(r);
        for (std::size_t j = 0; j < spec.input_dim; ++j) dst[j] = src[j];
      }

      ForwardTrace trace = mlp_forward_batch(result.params, xb);

      std::vector<Matrix> upstream(n_heads);
      double batch_total = 0.0;
      for (std::size_t h = 0; h < n_heads; ++h) {
        const Matrix& pred = trace.head_out[h];
        const std::size_t elems = pred.rows() * pred.cols();
        const double inv = 1.0 / static_cast<double>(elems);
        const double wh = cfg.head_weight(h);
        Matrix up(pred.rows(), pred.cols());
        double loss_h = 0.0;
        for (std::size_t i = 0; i < pred.rows(); ++i) {
          const double* tr = data.targets[h].row(order[start + i]);
          for (std::size_t j = 0; j < pred.cols(); ++j) {
            const double d = pred(i, j) - tr[j];
            loss_h += d * d * inv;
            up(i, j) = wh * 2.0 * d * inv;
          }
        }
        upstream[h] = std::move(up);
        batch_total += wh * loss_h;
        epoch_loss.per_head[h] += loss_h * static_cast<double>(bsz);
      }

      if (!std::isfinite(batch_total))
        throw TrainingDiverged("train: loss is not finite",
                               static_cast<long>(epoch));

      MlpGrads grads = mlp_backward_batch(result.params, trace, upstream);
      OptimizerConfig step_opt = opt;
      if (opt.cosine_eta_decay) {
        const double phase = static_cast<double>(step_index) /
                             static_cast<double>(total_steps);
        step_opt.eta = opt.eta * 0.5 * (1.0 + std::cos(3.14159265358979323846 * phase));
      }
      optimizer_step(result.params, grads, state, step_opt);
      ++step_index;

      epoch_loss.total += batch_total * static_cast<double>(bsz);
    }

    epoch_loss.total /= static_cast<double>(n);
    for (double& v : epoch_loss.per_head) v /= static_cast<double>(n);
    result.history.push_back(std::move(epoch_loss));
  }
  return result;
}

// Seeded partition of 0..n-1 into k folds whose sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                         std::uint64_t seed) {
  if (k < 2) throw InvalidInput("kfold_split: k must be >= 2");
  if (k > n) throw InvalidInput("kfold_split: k exceeds sample count");
  Rng rng(seed);
  std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t sz = base + (f < extra ? 1 : 0);
    folds[f].assign(perm.begin() + pos, perm.begin() + pos + sz);
    pos += sz;
  }
  return folds;
}

// Named contiguous slice of a feature vector.
struct SliceDef {
  std::string name;
  std::size_t offset = 0;
  std::size_t dims = 0;
};

// Per-slice mean absolute error over all samples.
inline std::vector<std::pair<std::string, double>> mae_by_slice(
    const Matrix& pred, const Matrix& target, const std::vector<SliceDef>& slices) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw InvalidInput("mae_by_slice: shape mismatch");
  if (pred.rows() == 0) throw InvalidInput("mae_by_slice: empty input");
  std::vector<std::pair<std::string, double>> out;
  for (const auto& s : slices) {
    if (s.offset + s.dims > pred.cols())
      throw InvalidInput("mae_by_slice: slice '" + s.name + "' out of range");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.rows(); ++i)
      for (std::size_t j = s.offset; j < s.offset + s.dims; ++j)
        acc += std::fabs(pred(i, j) - target(i, j));
    out.emplace_back(s.name, acc / static_cast<double>(pred.rows() * s.dims));
  }
  return out;
}

inline double mae_all(const Matrix& pred, const Matrix& target) {
  return mae_by_slice(pred, target, {{"all", 0, pred.cols()}}).front().second;
}

}  // namespace causarm
