#pragma once

#include <string>
#include <vector>

#include "causarm/fit.hpp"
#include "causarm/transition.hpp"

namespace causarm {

// The IM family shares one wrapper; role tells the constructions apart.
//   im-mono : [s(t), s'(t+1)]            -> a(t)
//   im-pre  : [s(t), s'(t+1)]            -> theta(t+1)
//   im-base : [s(t), s'(t+1), theta(t+1)] -> a(t)   (theta slot last)
struct InverseModel {
  std::string role;
  StateSchema state_schema;
  ActionSchema action_schema;
  std::vector<std::size_t> hidden_widths;
  TrainedModel core;

  std::string schema_hash() const {
    return schema_pair_hash(state_schema, action_schema);
  }
};

struct ImAssembly {
  InverseModel pre;
  InverseModel base;
};

namespace detail {

inline std::size_t theta_dims(const StateSchema& s) {
  return s.slice_def("joints").dims;
}

}  // namespace detail

// x = [s, strip_theta(s_next)]; used by the monolithic IM and the pre-network.
inline Matrix im_mono_inputs(const TransitionSet& set) {
  const StateSchema& schema = set.manifest.state;
  const std::size_t sd = schema.total_dim();
  const SliceDef js = schema.slice_def("joints");
  Matrix x(set.records.size(), 2 * sd - js.dims);
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    const auto& t = set.records[r];
    double* row = x.row(r);
    std::size_t c = 0;
    for (std::size_t i = 0; i < sd; ++i) row[c++] = t.s[i];
    for (std::size_t i = 0; i < sd; ++i)
      if (i < js.offset || i >= js.offset + js.dims) row[c++] = t.s_next[i];
  }
  return x;
}

// x = [s, strip_theta(s_next), theta(s_next)]; the theta slot sits last so
// an assembly can splice the pre-network output in.
inline Matrix im_base_inputs(const TransitionSet& set) {
  const StateSchema& schema = set.manifest.state;
  const std::size_t sd = schema.total_dim();
  const SliceDef js = schema.slice_def("joints");
  Matrix x(set.records.size(), 2 * sd);
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    const auto& t = set.records[r];
    double* row = x.row(r);
    std::size_t c = 0;
    for (std::size_t i = 0; i < sd; ++i) row[c++] = t.s[i];
    for (std::size_t i = 0; i < sd; ++i)
      if (i < js.offset || i >= js.offset + js.dims) row[c++] = t.s_next[i];
    for (std::size_t i = 0; i < js.dims; ++i) row[c++] = t.s_next[js.offset + i];
  }
  return x;
}

inline Matrix im_action_targets(const TransitionSet& set) {
  Matrix y(set.records.size(), set.manifest.action.total_dim());
  for (std::size_t r = 0; r < set.records.size(); ++r)
    for (std::size_t i = 0; i < y.cols(); ++i) y(r, i) = set.records[r].a[i];
  return y;
}

inline Matrix im_theta_targets(const TransitionSet& set) {
  const SliceDef js = set.manifest.state.slice_def("joints");
  Matrix y(set.records.size(), js.dims);
  for (std::size_t r = 0; r < set.records.size(); ++r)
    for (std::size_t i = 0; i < js.dims; ++i)
      y(r, i) = set.records[r].s_next[js.offset + i];
  return y;
}

inline InverseModel train_im_monolithic(const TransitionSet& set,
                                        const TrainConfig& cfg,
                                        const OptimizerConfig& opt,
                                        std::size_t kfold = 5,
                                        std::vector<std::size_t> hidden = {256, 256,
                                                                           256, 256},
                                        Activation act = Activation::kTanh) {
  InverseModel m;
  m.role = "im-mono";
  m.state_schema = set.manifest.state;
  m.action_schema = set.manifest.action;
  m.hidden_widths = hidden;
  Matrix x = im_mono_inputs(set);
  Matrix y = im_action_targets(set);
  m.core = fit_supervised(x, y, m.action_schema.all_slices(), hidden, act, cfg, opt,
                          kfold);
  return m;
}

inline InverseModel train_base_im(const TransitionSet& set, const TrainConfig& cfg,
                                  const OptimizerConfig& opt, std::size_t kfold = 5,
                                  std::vector<std::size_t> hidden = {128, 128},
                                  Activation act = Activation::kTanh) {
  InverseModel m;
  m.role = "im-base";
  m.state_schema = set.manifest.state;
  m.action_schema = set.manifest.action;
  m.hidden_widths = hidden;
  Matrix x = im_base_inputs(set);
  Matrix y = im_action_targets(set);
  m.core = fit_supervised(x, y, m.action_schema.all_slices(), hidden, act, cfg, opt,
                          kfold);
  return m;
}

// Pre-network: regresses theta(t+1); four stacked tanh layers by default.
inline InverseModel train_pre_network(const TransitionSet& set, const TrainConfig& cfg,
                                      const OptimizerConfig& opt, std::size_t kfold = 5,
                                      std::vector<std::size_t> hidden = {256, 256, 256,
                                                                         256}) {
  InverseModel m;
  m.role = "im-pre";
  m.state_schema = set.manifest.state;
  m.action_schema = set.manifest.action;
  m.hidden_widths = hidden;
  Matrix x = im_mono_inputs(set);
  Matrix y = im_theta_targets(set);
  const SliceDef js = set.manifest.state.slice_def("joints");
  m.core = fit_supervised(x, y, {{"theta_next", 0, js.dims}}, hidden,
                          Activation::kTanh, cfg, opt, kfold);
  return m;
}

// The assembly itself is never trained; it splices the pre-network output
// into the base model's theta slot at inference time.
inline ImAssembly assemble(InverseModel pre, InverseModel base) {
  if (pre.role != "im-pre" || base.role != "im-base")
    throw InvalidInput("assemble: wrong model roles");
  const std::size_t theta = detail::theta_dims(base.state_schema);
  if (pre.core.params.spec.output_dim() != theta)
    throw InvalidInput("assemble: pre output does not fit the base theta slot");
  if (pre.core.params.spec.input_dim + theta != base.core.params.spec.input_dim)
    throw InvalidInput("assemble: input widths do not line up");
  return {std::move(pre), std::move(base)};
}

struct ImEval {
  std::vector<std::pair<std::string, double>> per_head;
  double overall = 0.0;
};

namespace detail {

inline ImEval im_eval_from(const Matrix& pred, const Matrix& truth,
                           const ActionSchema& action) {
  ImEval ev;
  ev.per_head = mae_by_slice(pred, truth, action.all_slices());
  ev.overall = mae_all(pred, truth);
  return ev;
}

}  // namespace detail

inline ImEval eval_im(const InverseModel& m, const TransitionSet& set) {
  Matrix x = m.role == "im-base" ? im_base_inputs(set) : im_mono_inputs(set);
  if (m.role == "im-pre") {
    Matrix pred = predict_batch(m.core.params, m.core.norm, x);
    Matrix truth = im_theta_targets(set);
    ImEval ev;
    ev.per_head = {{std::string("theta_next"), mae_all(pred, truth)}};
    ev.overall = ev.per_head.front().second;
    return ev;
  }
  Matrix pred = predict_batch(m.core.params, m.core.norm, x);
  return detail::im_eval_from(pred, im_action_targets(set), m.action_schema);
}

inline ImEval eval_assembly(const ImAssembly& im, const TransitionSet& set) {
  Matrix x_pre = im_mono_inputs(set);
  Matrix theta_hat = predict_batch(im.pre.core.params, im.pre.core.norm, x_pre);
  Matrix x_base(x_pre.rows(), x_pre.cols() + theta_hat.cols());
  for (std::size_t r = 0; r < x_pre.rows(); ++r) {
    double* row = x_base.row(r);
    for (std::size_t c = 0; c < x_pre.cols(); ++c) row[c] = x_pre(r, c);
    for (std::size_t c = 0; c < theta_hat.cols(); ++c)
      row[x_pre.cols() + c] = theta_hat(r, c);
  }
  Matrix pred = predict_batch(im.base.core.params, im.base.core.norm, x_base);
  return detail::im_eval_from(pred, im_action_targets(set), im.base.action_schema);
}

enum class ThetaSubstitution { kZeros, kSampled };

// Feed the base IM a theta(t+1) slot that bypasses the pre-network:
// all-zeros, or per-coordinate draws from the dataset's empirical values.
inline ImEval eval_theta_substitution(const InverseModel& base, const TransitionSet& set,
                                      ThetaSubstitution mode, std::uint64_t seed = 0) {
  if (base.role != "im-base")
    throw InvalidInput("eval_theta_substitution: base IM required");
  Matrix x = im_base_inputs(set);
  Matrix theta = im_theta_targets(set);
  const std::size_t slot = x.cols() - theta.cols();
  Rng rng(seed);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < theta.cols(); ++j)
      x(r, slot + j) =
          mode == ThetaSubstitution::kZeros ? 0.0 : theta(rng.index(theta.rows()), j);
  Matrix pred = predict_batch(base.core.params, base.core.norm, x);
  return detail::im_eval_from(pred, im_action_targets(set), base.action_schema);
}

inline ModelFile im_to_model_file(const InverseModel& m) {
  return {m.role, m.schema_hash(), m.core.norm, m.core.params};
}

inline InverseModel im_from_model_file(const ModelFile& file, const StateSchema& state,
                                       const ActionSchema& action) {
  if (file.role != "im-mono" && file.role != "im-pre" && file.role != "im-base")
    throw InvalidInput("model file role is not an inverse model");
  if (file.schema_hash != schema_pair_hash(state, action))
    throw InvalidInput("model schema hash does not match the dataset");
  InverseModel m;
  m.role = file.role;
  m.state_schema = state;
  m.action_schema = action;
  m.hidden_widths = file.params.spec.hidden_widths;
  m.core.params = file.params;
  m.core.norm = file.norm;
  return m;
}

}  // namespace causarm
