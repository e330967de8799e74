#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "causarm/csv.hpp"
#include "causarm/train.hpp"

namespace causarm {

// Optional z-score input scaling, stored with the model so inference and
// attribution see the same transform that training saw.
struct Normalizer {
  bool enabled = false;
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalizer fit(const Matrix& inputs) {
    Normalizer n;
    n.enabled = true;
    n.mean.assign(inputs.cols(), 0.0);
    n.stddev.assign(inputs.cols(), 0.0);
    const double inv = 1.0 / static_cast<double>(inputs.rows());
    for (std::size_t i = 0; i < inputs.rows(); ++i)
      for (std::size_t j = 0; j < inputs.cols(); ++j) n.mean[j] += inputs(i, j) * inv;
    for (std::size_t i = 0; i < inputs.rows(); ++i)
      for (std::size_t j = 0; j < inputs.cols(); ++j) {
        const double d = inputs(i, j) - n.mean[j];
        n.stddev[j] += d * d * inv;
      }
    for (double& s : n.stddev) s = s > 0.0 ? std::sqrt(s) : 1.0;
    return n;
  }

  Matrix apply(const Matrix& x) const {
    if (!enabled) return x;
    if (x.cols() != mean.size()) throw InvalidInput("Normalizer: dim mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j)
        out(i, j) = (out(i, j) - mean[j]) / stddev[j];
    return out;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.begin(), x.end());
    if (!enabled) return out;
    if (x.size() != mean.size()) throw InvalidInput("Normalizer: dim mismatch");
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = (out[j] - mean[j]) / stddev[j];
    return out;
  }
};

// Self-describing model document: spec, normalization, weights in layer
// order at full decimal precision.
struct ModelFile {
  std::string role;  // fm | im-mono | im-pre | im-base
  std::string schema_hash;
  Normalizer norm;
  MlpParams params;
};

namespace detail {

inline nlohmann::json layer_to_json(const DenseLayer& l) {
  nlohmann::json jw = nlohmann::json::array();
  for (std::size_t i = 0; i < l.w.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < l.w.cols(); ++j) row.push_back(l.w(i, j));
    jw.push_back(std::move(row));
  }
  return nlohmann::json{{"w", std::move(jw)}, {"b", l.b}};
}

inline DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer l;
  const auto& jw = j.at("w");
  const std::size_t rows = jw.size();
  const std::size_t cols = rows == 0 ? 0 : jw.at(0).size();
  l.w = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (jw.at(i).size() != cols) throw MalformedFile("model: ragged weight rows");
    for (std::size_t jx = 0; jx < cols; ++jx) l.w(i, jx) = jw.at(i).at(jx).get<double>();
  }
  l.b = j.at("b").get<std::vector<double>>();
  if (l.b.size() != rows) throw MalformedFile("model: bias length mismatch");
  return l;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelFile& m) {
  nlohmann::json spec{{"input_dim", m.params.spec.input_dim},
                      {"hidden_widths", m.params.spec.hidden_widths},
                      {"activation", activation_name(m.params.spec.hidden_activation)}};
  spec["heads"] = nlohmann::json::array();
  for (const auto& h : m.params.spec.heads)
    spec["heads"].push_back({{"name", h.name}, {"width", h.width}});

  nlohmann::json j{{"format", "causarm-model-v1"},
                   {"role", m.role},
                   {"schema_hash", m.schema_hash},
                   {"spec", std::move(spec)},
                   {"normalization",
                    {{"enabled", m.norm.enabled},
                     {"mean", m.norm.mean},
                     {"stddev", m.norm.stddev}}}};
  j["hidden"] = nlohmann::json::array();
  for (const auto& l : m.params.hidden) j["hidden"].push_back(detail::layer_to_json(l));
  j["heads"] = nlohmann::json::array();
  for (const auto& l : m.params.heads) j["heads"].push_back(detail::layer_to_json(l));
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "causarm-model-v1")
    throw MalformedFile("model: unknown format tag");
  ModelFile m;
  m.role = j.value("role", "");
  m.schema_hash = j.value("schema_hash", "");
  const auto& js = j.at("spec");
  m.params.spec.input_dim = js.at("input_dim").get<std::size_t>();
  m.params.spec.hidden_widths = js.at("hidden_widths").get<std::vector<std::size_t>>();
  m.params.spec.hidden_activation = activation_from_name(js.at("activation").get<std::string>());
  for (const auto& h : js.at("heads"))
    m.params.spec.heads.push_back({h.at("name").get<std::string>(),
                                   h.at("width").get<std::size_t>()});
  m.params.spec.validate();
  const auto& jn = j.at("normalization");
  m.norm.enabled = jn.at("enabled").get<bool>();
  m.norm.mean = jn.at("mean").get<std::vector<double>>();
  m.norm.stddev = jn.at("stddev").get<std::vector<double>>();
  for (const auto& l : j.at("hidden")) m.params.hidden.push_back(detail::layer_from_json(l));
  for (const auto& l : j.at("heads")) m.params.heads.push_back(detail::layer_from_json(l));

  // shape audit against the spec block
  std::size_t fan_in = m.params.spec.input_dim;
  if (m.params.hidden.size() != m.params.spec.hidden_widths.size())
    throw MalformedFile("model: hidden layer count mismatch");
  for (std::size_t l = 0; l < m.params.hidden.size(); ++l) {
    if (m.params.hidden[l].w.rows() != m.params.spec.hidden_widths[l] ||
        m.params.hidden[l].w.cols() != fan_in)
      throw MalformedFile("model: hidden layer shape mismatch");
    fan_in = m.params.spec.hidden_widths[l];
  }
  if (m.params.heads.size() != m.params.spec.heads.size())
    throw MalformedFile("model: head count mismatch");
  for (std::size_t h = 0; h < m.params.heads.size(); ++h)
    if (m.params.heads[h].w.rows() != m.params.spec.heads[h].width ||
        m.params.heads[h].w.cols() != fan_in)
      throw MalformedFile("model: head shape mismatch");
  if (!m.params.all_finite()) throw MalformedFile("model: non-finite parameter");
  return m;
}

inline void save_model(const ModelFile& m, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(m).dump(1) + "\n");
}

inline ModelFile load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile("model: " + std::string(e.what()));
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile("model: " + std::string(e.what()));
  }
}

// epoch,total_loss,<head>_loss... (numeric-core loss history contract)
inline std::string loss_history_csv(const MlpSpec& spec,
                                    const std::vector<EpochLoss>& history) {
  std::string out = "epoch,total_loss";
  for (const auto& h : spec.heads) out += "," + h.name + "_loss";
  out += "\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    out += std::to_string(e) + "," + fmt_double(history[e].total);
    for (double v : history[e].per_head) out += "," + fmt_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace causarm
