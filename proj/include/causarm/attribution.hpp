#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "causarm/deep_shap.hpp"
#include "causarm/forward_model.hpp"
#include "causarm/shapley.hpp"

namespace causarm {

enum class AttributionMethod { kExact, kKernel, kDeep };

inline AttributionMethod attribution_method_from_name(const std::string& s) {
  if (s == "exact") return AttributionMethod::kExact;
  if (s == "kernel") return AttributionMethod::kKernel;
  if (s == "deep") return AttributionMethod::kDeep;
  throw InvalidInput("unknown attribution method '" + s + "'");
}

// Columns reported by the tensor. Shapley values are always computed over
// the full input game; actions-only merely slices the action columns out
// afterwards (restricting the game itself would change the values).
enum class AttributionScope { kActionsOnly, kAllInputs };

struct AttributionSettings {
  AttributionMethod method = AttributionMethod::kDeep;
  AttributionScope scope = AttributionScope::kActionsOnly;
  std::size_t sample_size = 200;
  std::size_t background_size = 100;
  std::size_t coalition_budget = 2048;
  std::uint64_t seed = 0;
};

// phi[instance](output, input) with the instance inputs and the background
// recorded alongside.
struct AttributionTensor {
  std::vector<std::string> output_labels;
  std::vector<std::string> input_labels;  // labels of the reported columns
  std::size_t input_offset = 0;           // reported columns start here in x
  Matrix instance_inputs;                 // N x full input dim
  Matrix background;                      // B x full input dim
  std::vector<Matrix> phi;

  std::size_t instances() const { return phi.size(); }
};

// Restrict a full-input tensor to the columns from new_offset on (e.g. the
// action block). The Shapley game itself is unchanged.
inline AttributionTensor slice_tensor(const AttributionTensor& full,
                                      std::size_t new_offset) {
  if (full.input_offset != 0)
    throw InvalidInput("slice_tensor: tensor is already sliced");
  if (new_offset >= full.input_labels.size())
    throw InvalidInput("slice_tensor: offset out of range");
  AttributionTensor out;
  out.output_labels = full.output_labels;
  out.input_labels.assign(full.input_labels.begin() + new_offset,
                          full.input_labels.end());
  out.input_offset = new_offset;
  out.instance_inputs = full.instance_inputs;
  out.background = full.background;
  const std::size_t keep = full.input_labels.size() - new_offset;
  for (const auto& phi : full.phi) {
    Matrix m(phi.rows(), keep);
    for (std::size_t o = 0; o < phi.rows(); ++o)
      for (std::size_t i = 0; i < keep; ++i) m(o, i) = phi(o, new_offset + i);
    out.phi.push_back(std::move(m));
  }
  return out;
}

inline AttributionTensor attribute_dataset(const ForwardModel& fm,
                                           const TransitionSet& set,
                                           const AttributionSettings& st) {
  if (!(fm.state_schema == set.manifest.state) ||
      !(fm.action_schema == set.manifest.action))
    throw InvalidInput("attribute_dataset: dataset schema does not match the model");
  if (set.records.empty()) throw DataError("attribute_dataset: empty dataset");

  Matrix inputs, targets;
  fm_view(set, inputs, targets);

  Rng sample_rng(derive_seed(st.seed, 1));
  Rng bg_rng(derive_seed(st.seed, 2));
  const std::size_t n = std::min(st.sample_size, inputs.rows());
  const std::size_t b = std::min(st.background_size, inputs.rows());

  AttributionTensor t;
  t.instance_inputs = Matrix(n, inputs.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const double* src = inputs.row(sample_rng.index(inputs.rows()));
    for (std::size_t c = 0; c < inputs.cols(); ++c) t.instance_inputs(r, c) = src[c];
  }
  t.background = Matrix(b, inputs.cols());
  Matrix& background = t.background;
  for (std::size_t r = 0; r < b; ++r) {
    const double* src = inputs.row(bg_rng.index(inputs.rows()));
    for (std::size_t c = 0; c < inputs.cols(); ++c) background(r, c) = src[c];
  }

  const std::size_t n_out = fm.state_schema.total_dim();
  const std::size_t full_in = fm.input_dim();
  const std::size_t action_off = fm.state_schema.total_dim();
  t.output_labels = fm.output_labels();
  {
    auto full_labels = fm.input_labels();
    if (st.scope == AttributionScope::kActionsOnly) {
      t.input_offset = action_off;
      t.input_labels.assign(full_labels.begin() + action_off, full_labels.end());
    } else {
      t.input_offset = 0;
      t.input_labels = std::move(full_labels);
    }
  }
  const std::size_t keep = full_in - t.input_offset;

  auto slice_phi = [&](const Matrix& full) {
    Matrix out(n_out, keep);
    for (std::size_t o = 0; o < n_out; ++o)
      for (std::size_t i = 0; i < keep; ++i) out(o, i) = full(o, t.input_offset + i);
    return out;
  };

  if (st.method == AttributionMethod::kDeep) {
    DeepShapBackground bg =
        DeepShapBackground::prepare(fm.core.params, fm.core.norm, background);
    for (std::size_t r = 0; r < n; ++r)
      t.phi.push_back(
          slice_phi(deep_shap_all(fm.core.params, fm.core.norm,
                                  t.instance_inputs.row_span(r), bg)));
    return t;
  }

  BatchModelFn model = [&fm](const Matrix& rows) { return fm.predict_batch(rows); };
  for (std::size_t r = 0; r < n; ++r) {
    Matrix full(n_out, full_in);
    for (std::size_t o = 0; o < n_out; ++o) {
      std::vector<double> phi =
          st.method == AttributionMethod::kExact
              ? exact_shapley(model, t.instance_inputs.row_span(r), background, o)
              : kernel_shap(model, t.instance_inputs.row_span(r), background, o,
                            st.coalition_budget, derive_seed(st.seed, 100 + o));
      for (std::size_t i = 0; i < full_in; ++i) full(o, i) = phi[i];
    }
    t.phi.push_back(slice_phi(full));
  }
  return t;
}

// Mean |phi| across instances: rows = reported inputs, cols = outputs.
struct GlobalImportance {
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;
  Matrix m;

  double max_entry() const {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, v);
    return best;
  }
};

inline GlobalImportance aggregate_global(const AttributionTensor& t) {
  if (t.phi.empty()) throw InvalidInput("aggregate_global: empty tensor");
  GlobalImportance g;
  g.input_labels = t.input_labels;
  g.output_labels = t.output_labels;
  g.m = Matrix(t.input_labels.size(), t.output_labels.size());
  for (const auto& phi : t.phi)
    for (std::size_t o = 0; o < phi.rows(); ++o)
      for (std::size_t i = 0; i < phi.cols(); ++i) g.m(i, o) += std::fabs(phi(o, i));
  const double inv = 1.0 / static_cast<double>(t.phi.size());
  for (double& v : g.m.data()) v *= inv;
  return g;
}

// One (input value, contribution) pair per instance.
struct PdpPoint {
  double input_value = 0.0;
  double phi = 0.0;
};

inline std::vector<PdpPoint> pdp_series(const AttributionTensor& t,
                                        std::size_t input_index,
                                        std::size_t output_index) {
  if (input_index >= t.input_labels.size() || output_index >= t.output_labels.size())
    throw InvalidInput("pdp_series: index out of range");
  std::vector<PdpPoint> out;
  out.reserve(t.instances());
  for (std::size_t r = 0; r < t.instances(); ++r)
    out.push_back({t.instance_inputs(r, t.input_offset + input_index),
                   t.phi[r](output_index, input_index)});
  return out;
}

// State features no action can move, candidates for pruning.
struct RelevanceRow {
  std::string state_feature;
  double max_action_attr = 0.0;
  bool prunable = false;
};

inline std::vector<RelevanceRow> relevance_report(const GlobalImportance& g,
                                                  double threshold_fraction) {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
    throw InvalidInput("relevance_report: threshold must be in (0,1)");
  const double cutoff = threshold_fraction * g.max_entry();
  std::vector<RelevanceRow> rows;
  for (std::size_t k = 0; k < g.output_labels.size(); ++k) {
    double best = 0.0;
    for (std::size_t i = 0; i < g.input_labels.size(); ++i)
      best = std::max(best, g.m(i, k));
    rows.push_back({g.output_labels[k], best, best < cutoff});
  }
  std::sort(rows.begin(), rows.end(), [](const RelevanceRow& a, const RelevanceRow& b) {
    return a.max_action_attr > b.max_action_attr;
  });
  return rows;
}

// --- CSV emitters -----------------------------------------------------

inline std::string phi_csv(const AttributionTensor& t) {
  std::string out = "instance,output,input,phi,input_value\n";
  for (std::size_t r = 0; r < t.instances(); ++r)
    for (std::size_t o = 0; o < t.output_labels.size(); ++o)
      for (std::size_t i = 0; i < t.input_labels.size(); ++i)
        out += std::to_string(r) + "," + t.output_labels[o] + "," + t.input_labels[i] +
               "," + fmt_double(t.phi[r](o, i)) + "," +
               fmt_double(t.instance_inputs(r, t.input_offset + i)) + "\n";
  return out;
}

inline std::string global_csv(const GlobalImportance& g) {
  std::string out = "input";
  for (const auto& l : g.output_labels) out += "," + l;
  out += "\n";
  for (std::size_t i = 0; i < g.input_labels.size(); ++i) {
    out += g.input_labels[i];
    for (std::size_t k = 0; k < g.output_labels.size(); ++k)
      out += "," + fmt_double(g.m(i, k));
    out += "\n";
  }
  return out;
}

// Column-normalized variant (each output column scaled by its max).
inline GlobalImportance column_normalized(const GlobalImportance& g) {
  GlobalImportance out = g;
  for (std::size_t k = 0; k < g.output_labels.size(); ++k) {
    double best = 0.0;
    for (std::size_t i = 0; i < g.input_labels.size(); ++i)
      best = std::max(best, g.m(i, k));
    if (best > 0.0)
      for (std::size_t i = 0; i < g.input_labels.size(); ++i) out.m(i, k) /= best;
  }
  return out;
}

inline std::string pdp_csv(const std::vector<PdpPoint>& series) {
  std::string out = "input_value,phi\n";
  for (const auto& p : series)
    out += fmt_double(p.input_value) + "," + fmt_double(p.phi) + "\n";
  return out;
}

inline std::string relevance_csv(const std::vector<RelevanceRow>& rows) {
  std::string out = "state_feature,max_action_attribution,prunable\n";
  for (const auto& r : rows)
    out += r.state_feature + "," + fmt_double(r.max_action_attr) + "," +
           (r.prunable ? "1" : "0") + "\n";
  return out;
}

}  // namespace causarm
