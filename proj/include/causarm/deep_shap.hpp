#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "causarm/mlp.hpp"
#include "causarm/model_io.hpp"

namespace causarm {

namespace detail {

// Rescale-rule multiplier of one activation unit: delta-out over delta-in,
// falling back to the local derivative when the deltas vanish.
inline double rescale_multiplier(double pre_x, double pre_r, double act_x, double act_r,
                                 Activation act, double tol = 1e-7) {
  const double dpre = pre_x - pre_r;
  if (std::fabs(dpre) > tol) return (act_x - act_r) / dpre;
  if (act == Activation::kTanh) return 1.0 - act_x * act_x;
  return pre_x > 0.0 ? 1.0 : 0.0;
}

// Stacked head weights: one multiplier row per concatenated output.
inline Matrix stacked_head_weights(const MlpParams& params) {
  const std::size_t width = params.spec.last_hidden_width();
  Matrix m(params.spec.output_dim(), width);
  std::size_t row = 0;
  for (const auto& head : params.heads)
    for (std::size_t r = 0; r < head.w.rows(); ++r, ++row)
      for (std::size_t c = 0; c < width; ++c) m(row, c) = head.w(r, c);
  return m;
}

}  // namespace detail

// Per-reference traces cached once so a whole sample of instances can be
// attributed against the same background cheaply.
struct DeepShapBackground {
  Matrix rows;  // raw background inputs, B x in
  std::vector<ForwardTrace> traces;

  static DeepShapBackground prepare(const MlpParams& params, const Normalizer& norm,
                                    const Matrix& background) {
    DeepShapBackground bg;
    bg.rows = background;
    bg.traces.reserve(background.rows());
    for (std::size_t r = 0; r < background.rows(); ++r) {
      Matrix one(1, background.cols());
      for (std::size_t c = 0; c < background.cols(); ++c) one(0, c) = background(r, c);
      bg.traces.push_back(mlp_forward_batch(params, norm.apply(one)));
    }
    return bg;
  }
};

// DeepLIFT rescale-rule attributions for every output at once:
// phi[out][in], averaged over the background references. Supports the
// dense tanh/relu hidden stack with linear heads, plus an optional z-score
// input normalizer (handled as one more linear layer).
inline Matrix deep_shap_all(const MlpParams& params, const Normalizer& norm,
                            std::span<const double> x,
                            const DeepShapBackground& bg) {
  if (x.size() != params.spec.input_dim)
    throw InvalidInput("deep_shap: input dim mismatch");
  if (bg.rows.cols() != x.size())
    throw InvalidInput("deep_shap: background shape mismatch");
  const std::size_t n_out = params.spec.output_dim();
  const std::size_t n_in = x.size();

  Matrix xin(1, n_in);
  for (std::size_t i = 0; i < n_in; ++i) xin(0, i) = x[i];
  const ForwardTrace trace_x = mlp_forward_batch(params, norm.apply(xin));

  Matrix phi(n_out, n_in);
  const Matrix head_w = detail::stacked_head_weights(params);

  for (std::size_t r = 0; r < bg.traces.size(); ++r) {
    const ForwardTrace& trace_r = bg.traces[r];
    Matrix mult = head_w;  // out x last_hidden
    for (std::size_t l = params.hidden.size(); l-- > 0;) {
      const Matrix& pre_x = trace_x.pre[l];
      const Matrix& pre_r = trace_r.pre[l];
      const Matrix& act_x = trace_x.act[l];
      const Matrix& act_r = trace_r.act[l];
      for (std::size_t o = 0; o < mult.rows(); ++o)
        for (std::size_t j = 0; j < mult.cols(); ++j)
          mult(o, j) *= detail::rescale_multiplier(
              pre_x(0, j), pre_r(0, j), act_x(0, j), act_r(0, j),
              params.spec.hidden_activation);
      mult = matmul(mult, params.hidden[l].w);
    }
    // through the normalizer (x - mu)/sigma and times the raw input delta
    for (std::size_t o = 0; o < n_out; ++o)
      for (std::size_t i = 0; i < n_in; ++i) {
        const double scale = norm.enabled ? 1.0 / norm.stddev[i] : 1.0;
        phi(o, i) += mult(o, i) * scale * (x[i] - bg.rows(r, i));
      }
  }
  const double inv = 1.0 / static_cast<double>(bg.traces.size());
  for (double& v : phi.data()) v *= inv;
  return phi;
}

// Single-output convenience in the oracle interface style.
inline std::vector<double> deep_shap(const MlpParams& params, std::span<const double> x,
                                     const Matrix& background,
                                     std::size_t output_index,
                                     const Normalizer& norm = {}) {
  if (output_index >= params.spec.output_dim())
    throw InvalidInput("deep_shap: output index out of range");
  DeepShapBackground bg = DeepShapBackground::prepare(params, norm, background);
  Matrix phi = deep_shap_all(params, norm, x, bg);
  return {phi.row(output_index), phi.row(output_index) + phi.cols()};
}

}  // namespace causarm
