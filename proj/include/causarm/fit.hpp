#pragma once

#include <string>
#include <vector>

#include "causarm/model_io.hpp"
#include "causarm/train.hpp"

namespace causarm {

struct CvRow {
  std::size_t fold = 0;
  std::string head;
  double mae = 0.0;
};

// Trained network plus its cross-validation record and loss history.
struct TrainedModel {
  MlpParams params;
  Normalizer norm;
  std::vector<CvRow> cv;
  std::vector<EpochLoss> history;

  double cv_mae(const std::string& head) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : cv)
      if (r.head == head) {
        acc += r.mae;
        ++n;
      }
    if (n == 0) throw InvalidInput("cv_mae: no rows for head '" + head + "'");
    return acc / static_cast<double>(n);
  }

  double cv_mae_overall() const {
    double acc = 0.0;
    for (const auto& r : cv) acc += r.mae;
    if (cv.empty()) throw InvalidInput("cv_mae_overall: empty report");
    return acc / static_cast<double>(cv.size());
  }
};

namespace detail {

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double* s = src.row(idx[r]);
    double* d = out.row(r);
    for (std::size_t c = 0; c < src.cols(); ++c) d[c] = s[c];
  }
  return out;
}

}  // namespace detail

inline Matrix predict_batch(const MlpParams& params, const Normalizer& norm,
                            const Matrix& inputs) {
  ForwardTrace t = mlp_forward_batch(params, norm.apply(inputs));
  return concat_heads(params.spec, t.head_out);
}

// Fit a multi-head regressor: k-fold cross-validated per-head MAE, then a
// final model trained on all rows. Heads are defined by the target slices.
inline TrainedModel fit_supervised(const Matrix& inputs, const Matrix& targets,
                                   const std::vector<SliceDef>& target_slices,
                                   const std::vector<std::size_t>& hidden_widths,
                                   Activation activation, const TrainConfig& cfg,
                                   const OptimizerConfig& opt, std::size_t kfold = 0,
                                   bool normalize = false) {
  if (inputs.rows() != targets.rows())
    throw InvalidInput("fit_supervised: row count mismatch");
  MlpSpec spec;
  spec.input_dim = inputs.cols();
  spec.hidden_widths = hidden_widths;
  spec.hidden_activation = activation;
  for (const auto& s : target_slices) spec.heads.push_back({s.name, s.dims});
  spec.validate();
  if (spec.output_dim() != targets.cols())
    throw InvalidInput("fit_supervised: target slices do not cover the targets");

  TrainedModel out;

  if (kfold >= 2) {
    auto folds = kfold_split(inputs.rows(), kfold, derive_seed(cfg.seed, 9000));
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_idx;
      train_idx.reserve(inputs.rows() - folds[f].size());
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());

      Matrix xt = detail::gather_rows(inputs, train_idx);
      Matrix yt = detail::gather_rows(targets, train_idx);
      Normalizer norm_f;
      if (normalize) norm_f = Normalizer::fit(xt);

      TrainData data{norm_f.apply(xt), split_targets(spec, yt)};
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = derive_seed(cfg.seed, 100 + f);
      TrainResult r = train(spec, data, fold_cfg, opt);

      Matrix xh = detail::gather_rows(inputs, folds[f]);
      Matrix yh = detail::gather_rows(targets, folds[f]);
      Matrix pred = predict_batch(r.params, norm_f, xh);
      for (const auto& [name, mae] : mae_by_slice(pred, yh, target_slices))
        out.cv.push_back({f, name, mae});
    }
  }

  if (normalize) out.norm = Normalizer::fit(inputs);
  TrainData data{out.norm.apply(inputs), split_targets(spec, targets)};
  TrainResult final = train(spec, data, cfg, opt);
  out.params = std::move(final.params);
  out.history = std::move(final.history);
  return out;
}

inline std::string cv_report_csv(const std::vector<CvRow>& rows) {
  std::string out = "fold,head,mae\n";
  for (const auto& r : rows)
    out += std::to_string(r.fold) + "," + r.head + "," + fmt_double(r.mae) + "\n";
  return out;
}

}  // namespace causarm
