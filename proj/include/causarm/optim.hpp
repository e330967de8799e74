#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "causarm/mlp.hpp"

namespace causarm {

enum class OptimizerKind { kAdam, kAdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double eta = 1e-3;  // initial learning rate
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lambda = 0.0;  // decoupled weight decay, AdamW only
  // Cosine decay of eta to zero over the training run. Off by default;
  // constant-eta Adam plateaus at a parameter-jitter floor proportional
  // to eta, so longer regression runs enable this.
  bool cosine_eta_decay = false;

  void validate() const {
    if (!(eta > 0.0)) throw InvalidInput("OptimizerConfig: eta must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw InvalidInput("OptimizerConfig: betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw InvalidInput("OptimizerConfig: epsilon must be > 0");
    if (lambda < 0.0) throw InvalidInput("OptimizerConfig: lambda must be >= 0");
  }

  double effective_lambda() const {
    return kind == OptimizerKind::kAdamW ? lambda : 0.0;
  }
};

// First and second moment accumulators, shaped like the parameters.
struct OptimizerState {
  std::vector<DenseLayer> m_hidden, v_hidden;
  std::vector<DenseLayer> m_heads, v_heads;
  std::uint64_t t = 0;

  static OptimizerState like(const MlpParams& params) {
    OptimizerState s;
    auto zero_like = [](const std::vector<DenseLayer>& src) {
      std::vector<DenseLayer> out;
      out.reserve(src.size());
      for (const auto& l : src) {
        DenseLayer z;
        z.w = Matrix(l.w.rows(), l.w.cols());
        z.b.assign(l.b.size(), 0.0);
        out.push_back(std::move(z));
      }
      return out;
    };
    s.m_hidden = zero_like(params.hidden);
    s.v_hidden = zero_like(params.hidden);
    s.m_heads = zero_like(params.heads);
    s.v_heads = zero_like(params.heads);
    return s;
  }
};

namespace detail {

inline void adam_update_span(std::span<double> w, std::span<const double> g,
                             std::span<double> m, std::span<double> v,
                             const OptimizerConfig& cfg, double bc1, double bc2,
                             double decay) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    w[i] -= cfg.eta * mhat / (std::sqrt(vhat) + cfg.epsilon);
    if (decay != 0.0) w[i] -= decay * w[i];
  }
}

}  // namespace detail

// One Adam/AdamW step. AdamW applies decoupled decay w -= eta*lambda*w to
// every parameter along with the step.
inline void optimizer_step(MlpParams& params, const MlpGrads& grads,
                           OptimizerState& state, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!grads.all_finite())
    throw TrainingDiverged("optimizer_step: non-finite gradient");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const double decay = cfg.eta * cfg.effective_lambda();

  auto step_group = [&](std::vector<DenseLayer>& ws, const std::vector<DenseLayer>& gs,
                        std::vector<DenseLayer>& ms, std::vector<DenseLayer>& vs) {
    if (gs.size() != ws.size())
      throw InvalidInput("optimizer_step: gradient shape mismatch");
    for (std::size_t l = 0; l < ws.size(); ++l) {
      if (gs[l].w.rows() != ws[l].w.rows() || gs[l].w.cols() != ws[l].w.cols())
        throw InvalidInput("optimizer_step: gradient shape mismatch");
      detail::adam_update_span(ws[l].w.data(), gs[l].w.data(), ms[l].w.data(),
                               vs[l].w.data(), cfg, bc1, bc2, decay);
      detail::adam_update_span(ws[l].b, gs[l].b, ms[l].b, vs[l].b, cfg, bc1, bc2,
                               decay);
    }
  };
  step_group(params.hidden, grads.hidden, state.m_hidden, state.v_hidden);
  step_group(params.heads, grads.heads, state.m_heads, state.v_heads);
}

}  // namespace causarm
