#pragma once

#include <string>
#include <vector>

#include "causarm/fit.hpp"
#include "causarm/transition.hpp"

namespace causarm {

// Output heads of the forward model: one per state subvector, with the
// object and 6D effector fields split into position/rotation(/color) heads.
inline std::vector<SliceDef> fm_head_slices(const StateSchema& schema) {
  std::vector<SliceDef> out;
  std::size_t off = 0;
  for (const auto& f : schema.fields) {
    if (f.name == "object" && f.dims == 9) {
      out.push_back({"object_position", off, 3});
      out.push_back({"object_rotation", off + 3, 3});
      out.push_back({"object_color", off + 6, 3});
    } else if (f.name == "effector" && f.dims == 6) {
      out.push_back({"effector_position", off, 3});
      out.push_back({"effector_rotation", off + 3, 3});
    } else if (f.name == "effector" && f.dims == 3) {
      out.push_back({"effector_position", off, 3});
    } else {
      out.push_back({f.name, off, f.dims});
    }
    off += f.dims;
  }
  return out;
}

inline std::vector<std::size_t> default_fm_widths(const std::string& schema_version) {
  return schema_version == "phys-v1" ? std::vector<std::size_t>{256, 256}
                                     : std::vector<std::size_t>{160, 160};
}

// FM: [s(t), a(t)] -> s(t+1) with one linear head per state subvector.
struct ForwardModel {
  StateSchema state_schema;
  ActionSchema action_schema;
  std::vector<std::size_t> hidden_widths;
  TrainedModel core;

  std::size_t input_dim() const {
    return state_schema.total_dim() + action_schema.total_dim();
  }

  std::string schema_hash() const {
    return schema_pair_hash(state_schema, action_schema);
  }

  // concatenated [s, a] feature labels, for attribution reports
  std::vector<std::string> input_labels() const {
    auto out = state_schema.component_labels();
    for (auto& l : action_schema.component_labels()) out.push_back(std::move(l));
    return out;
  }

  std::vector<std::string> output_labels() const {
    return state_schema.component_labels();
  }

  std::vector<double> predict_next(std::span<const double> s,
                                   std::span<const double> a) const {
    if (s.size() != state_schema.total_dim() || a.size() != action_schema.total_dim())
      throw InvalidInput("predict_next: dimension mismatch");
    std::vector<double> x(s.begin(), s.end());
    x.insert(x.end(), a.begin(), a.end());
    return mlp_forward_concat(core.params, core.norm.apply(x));
  }

  Matrix predict_batch(const Matrix& inputs) const {
    return causarm::predict_batch(core.params, core.norm, inputs);
  }
};

inline ForwardModel build_fm(const StateSchema& state, const ActionSchema& action,
                             std::vector<std::size_t> hidden_widths,
                             std::uint64_t seed = 0) {
  state.validate();
  action.validate();
  ForwardModel fm;
  fm.state_schema = state;
  fm.action_schema = action;
  fm.hidden_widths = std::move(hidden_widths);
  MlpSpec spec;
  spec.input_dim = fm.input_dim();
  spec.hidden_widths = fm.hidden_widths;
  for (const auto& s : fm_head_slices(state)) spec.heads.push_back({s.name, s.dims});
  fm.core.params = mlp_init(spec, seed);
  return fm;
}

// Matrix view of a transition set for FM training: x = [s, a], y = s_next.
inline void fm_view(const TransitionSet& set, Matrix& inputs, Matrix& targets) {
  const std::size_t sd = set.manifest.state.total_dim();
  const std::size_t ad = set.manifest.action.total_dim();
  inputs = Matrix(set.records.size(), sd + ad);
  targets = Matrix(set.records.size(), sd);
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    const auto& t = set.records[r];
    double* x = inputs.row(r);
    for (std::size_t i = 0; i < sd; ++i) x[i] = t.s[i];
    for (std::size_t i = 0; i < ad; ++i) x[sd + i] = t.a[i];
    double* y = targets.row(r);
    for (std::size_t i = 0; i < sd; ++i) y[i] = t.s_next[i];
  }
}

// Cross-validated training; leaves the final all-data model in fm.core.
inline void train_fm(ForwardModel& fm, const TransitionSet& set, const TrainConfig& cfg,
                     const OptimizerConfig& opt, std::size_t kfold = 5,
                     bool normalize = false) {
  if (!(fm.state_schema == set.manifest.state) ||
      !(fm.action_schema == set.manifest.action))
    throw InvalidInput("train_fm: dataset schema does not match the model");
  Matrix inputs, targets;
  fm_view(set, inputs, targets);
  fm.core = fit_supervised(inputs, targets, fm_head_slices(fm.state_schema),
                           fm.hidden_widths, Activation::kTanh, cfg, opt, kfold,
                           normalize);
}

// Chained inference s(t) = FM[s(t-1), a(t-1)].
inline std::vector<std::vector<double>> mental_rollout(
    const ForwardModel& fm, std::span<const double> s0,
    const std::vector<std::vector<double>>& actions) {
  std::vector<std::vector<double>> predictions;
  predictions.reserve(actions.size());
  std::vector<double> state(s0.begin(), s0.end());
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (actions[t].size() != fm.action_schema.total_dim())
      throw InvalidInput("mental_rollout: action dim mismatch at step " +
                         std::to_string(t));
    state = fm.predict_next(state, actions[t]);
    predictions.push_back(state);
  }
  return predictions;
}

// Ground-truth windows cut from consecutive records of one episode.
struct Trajectory {
  std::vector<double> s0;
  std::vector<std::vector<double>> actions;  // a(0..T-1)
  std::vector<std::vector<double>> states;   // s(1..T)
};

inline std::vector<Trajectory> extract_trajectories(const TransitionSet& set,
                                                    std::size_t horizon,
                                                    std::size_t max_count,
                                                    std::size_t* skipped = nullptr) {
  if (horizon == 0) throw InvalidInput("extract_trajectories: horizon must be >= 1");
  std::vector<Trajectory> out;
  std::size_t skip_count = 0;
  std::size_t i = 0;
  while (i < set.records.size() && out.size() < max_count) {
    // find the contiguous run starting at i
    std::size_t j = i;
    while (j + 1 < set.records.size() &&
           set.records[j + 1].episode == set.records[j].episode &&
           set.records[j + 1].step == set.records[j].step + 1)
      ++j;
    const std::size_t run_len = j - i + 1;
    if (run_len < horizon) ++skip_count;
    std::size_t pos = i;
    while (pos + horizon <= i + run_len && out.size() < max_count) {
      Trajectory tr;
      tr.s0 = set.records[pos].s;
      for (std::size_t t = 0; t < horizon; ++t) {
        tr.actions.push_back(set.records[pos + t].a);
        tr.states.push_back(set.records[pos + t].s_next);
      }
      out.push_back(std::move(tr));
      pos += horizon;  // non-overlapping windows
    }
    i = j + 1;
  }
  if (skipped) *skipped = skip_count;
  return out;
}

// Mean and deviation of the per-step rollout MAE across trajectories,
// per state subvector.
struct RolloutEval {
  std::size_t horizon = 0;
  std::vector<std::string> subvectors;
  Matrix mae_mean;  // horizon x subvectors
  Matrix mae_std;
  std::size_t trajectories = 0;
  std::size_t skipped = 0;
};

inline RolloutEval eval_rollout(const ForwardModel& fm, const TransitionSet& set,
                                std::size_t horizon, std::size_t max_trajectories) {
  if (!(fm.state_schema == set.manifest.state))
    throw InvalidInput("eval_rollout: schema mismatch");
  RolloutEval ev;
  ev.horizon = horizon;
  const auto slices = fm.state_schema.all_slices();
  for (const auto& s : slices) ev.subvectors.push_back(s.name);

  std::size_t skipped = 0;
  auto trajectories = extract_trajectories(set, horizon, max_trajectories, &skipped);
  ev.skipped = skipped;
  ev.trajectories = trajectories.size();
  if (trajectories.empty())
    throw DataError("eval_rollout: no trajectory long enough for the horizon");

  Matrix acc(horizon, slices.size());
  Matrix acc2(horizon, slices.size());
  for (const auto& tr : trajectories) {
    auto pred = mental_rollout(fm, tr.s0, tr.actions);
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t k = 0; k < slices.size(); ++k) {
        double mae = 0.0;
        for (std::size_t d = 0; d < slices[k].dims; ++d)
          mae += std::fabs(pred[t][slices[k].offset + d] -
                           tr.states[t][slices[k].offset + d]);
        mae /= static_cast<double>(slices[k].dims);
        acc(t, k) += mae;
        acc2(t, k) += mae * mae;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(trajectories.size());
  ev.mae_mean = Matrix(horizon, slices.size());
  ev.mae_std = Matrix(horizon, slices.size());
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t k = 0; k < slices.size(); ++k) {
      ev.mae_mean(t, k) = acc(t, k) * inv;
      const double var = acc2(t, k) * inv - ev.mae_mean(t, k) * ev.mae_mean(t, k);
      ev.mae_std(t, k) = var > 0.0 ? std::sqrt(var) : 0.0;
    }
  return ev;
}

// step,subvector,mae_mean,mae_std
inline std::string rollout_csv(const RolloutEval& ev) {
  std::string out = "step,subvector,mae_mean,mae_std\n";
  for (std::size_t t = 0; t < ev.horizon; ++t)
    for (std::size_t k = 0; k < ev.subvectors.size(); ++k)
      out += std::to_string(t + 1) + "," + ev.subvectors[k] + "," +
             fmt_double(ev.mae_mean(t, k)) + "," + fmt_double(ev.mae_std(t, k)) + "\n";
  return out;
}

inline ModelFile fm_to_model_file(const ForwardModel& fm) {
  return {"fm", fm.schema_hash(), fm.core.norm, fm.core.params};
}

inline ForwardModel fm_from_model_file(const ModelFile& file, const StateSchema& state,
                                       const ActionSchema& action) {
  if (file.role != "fm") throw InvalidInput("model file role is not fm");
  if (file.schema_hash != schema_pair_hash(state, action))
    throw InvalidInput("model schema hash does not match the dataset");
  ForwardModel fm;
  fm.state_schema = state;
  fm.action_schema = action;
  fm.hidden_widths = file.params.spec.hidden_widths;
  fm.core.params = file.params;
  fm.core.norm = file.norm;
  return fm;
}

}  // namespace causarm
