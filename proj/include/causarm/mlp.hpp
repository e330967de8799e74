#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "causarm/matrix.hpp"
#include "causarm/rng.hpp"

namespace causarm {

enum class Activation { kTanh, kRelu };

inline std::string activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw InvalidInput("unknown activation '" + s + "'");
}

struct HeadSpec {
  std::string name;
  std::size_t width = 0;
};

// Dense net: activated hidden stack shared by all heads, one linear layer
// per head. Hidden activation is tanh unless a variant flag says otherwise.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  Activation hidden_activation = Activation::kTanh;
  std::vector<HeadSpec> heads;

  std::size_t output_dim() const {
    std::size_t d = 0;
    for (const auto& h : heads) d += h.width;
    return d;
  }

  // offset of a head inside the concatenated output
  std::size_t head_offset(std::size_t head_index) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < head_index; ++i) off += heads[i].width;
    return off;
  }

  std::size_t last_hidden_width() const {
    return hidden_widths.empty() ? input_dim : hidden_widths.back();
  }

  void validate() const {
    if (input_dim == 0) throw InvalidInput("MlpSpec: input_dim must be >= 1");
    for (std::size_t w : hidden_widths)
      if (w == 0) throw InvalidInput("MlpSpec: hidden width must be >= 1");
    if (heads.empty()) throw InvalidInput("MlpSpec: at least one head required");
    for (std::size_t i = 0; i < heads.size(); ++i) {
      if (heads[i].width == 0) throw InvalidInput("MlpSpec: head width must be >= 1");
      if (heads[i].name.empty()) throw InvalidInput("MlpSpec: head name empty");
      for (std::size_t j = i + 1; j < heads.size(); ++j)
        if (heads[i].name == heads[j].name)
          throw InvalidInput("MlpSpec: duplicate head name '" + heads[i].name + "'");
    }
  }
};

struct DenseLayer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
};

struct MlpParams {
  MlpSpec spec;
  std::vector<DenseLayer> hidden;
  std::vector<DenseLayer> heads;

  bool all_finite() const {
    auto layer_ok = [](const DenseLayer& l) {
      if (!l.w.all_finite()) return false;
      for (double v : l.b)
        if (!std::isfinite(v)) return false;
      return true;
    };
    for (const auto& l : hidden)
      if (!layer_ok(l)) return false;
    for (const auto& l : heads)
      if (!layer_ok(l)) return false;
    return true;
  }
};

// Glorot-uniform weights, zero biases; bit-reproducible for a given seed.
inline MlpParams mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  MlpParams p;
  p.spec = spec;
  auto init_layer = [&rng](std::size_t out, std::size_t in) {
    DenseLayer l;
    l.w = Matrix(out, in);
    l.b.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in; ++j) l.w(i, j) = rng.uniform(-limit, limit);
    return l;
  };
  std::size_t fan_in = spec.input_dim;
  for (std::size_t w : spec.hidden_widths) {
    p.hidden.push_back(init_layer(w, fan_in));
    fan_in = w;
  }
  for (const auto& h : spec.heads) p.heads.push_back(init_layer(h.width, fan_in));
  return p;
}

namespace detail {

// z = x * w^T + b, one row per sample
inline Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix z = matmul(x, transpose(layer.w));
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double* zi = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) zi[j] += layer.b[j];
  }
  return z;
}

inline Matrix activate(const Matrix& z, Activation a) {
  Matrix out = z;
  if (a == Activation::kTanh) {
    for (double& v : out.data()) v = std::tanh(v);
  } else {
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

}  // namespace detail

// Cached activations from one batched forward pass; consumed by backward.
struct ForwardTrace {
  Matrix input;                  // B x in
  std::vector<Matrix> pre;       // per hidden layer, B x width
  std::vector<Matrix> act;       // per hidden layer, B x width
  std::vector<Matrix> head_out;  // per head, B x head width

  const Matrix& last_hidden() const { return act.empty() ? input : act.back(); }
};

inline ForwardTrace mlp_forward_batch(const MlpParams& params, const Matrix& x) {
  if (x.cols() != params.spec.input_dim)
    throw InvalidInput("mlp_forward: input dim mismatch");
  ForwardTrace t;
  t.input = x;
  const Matrix* cur = &t.input;
  for (const auto& layer : params.hidden) {
    t.pre.push_back(detail::affine(*cur, layer));
    t.act.push_back(detail::activate(t.pre.back(), params.spec.hidden_activation));
    cur = &t.act.back();
  }
  for (const auto& head : params.heads) t.head_out.push_back(detail::affine(*cur, head));
  return t;
}

// Head outputs concatenated in declaration order, B x output_dim.
inline Matrix concat_heads(const MlpSpec& spec, const std::vector<Matrix>& head_out) {
  const std::size_t rows = head_out.empty() ? 0 : head_out.front().rows();
  Matrix out(rows, spec.output_dim());
  std::size_t off = 0;
  for (const auto& h : head_out) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < h.cols(); ++j) out(i, off + j) = h(i, j);
    off += h.cols();
  }
  return out;
}

// Single-sample forward, returned per head. Runs as a batch of one so the
// arithmetic is identical to the batched path.
inline std::vector<std::vector<double>> mlp_forward(const MlpParams& params,
                                                    std::span<const double> x) {
  Matrix xin(1, x.size());
  for (std::size_t j = 0; j < x.size(); ++j) xin(0, j) = x[j];
  ForwardTrace t = mlp_forward_batch(params, xin);
  std::vector<std::vector<double>> out;
  out.reserve(t.head_out.size());
  for (const auto& h : t.head_out)
    out.emplace_back(h.row(0), h.row(0) + h.cols());
  return out;
}

inline std::vector<double> mlp_forward_concat(const MlpParams& params,
                                              std::span<const double> x) {
  Matrix xin(1, x.size());
  for (std::size_t j = 0; j < x.size(); ++j) xin(0, j) = x[j];
  ForwardTrace t = mlp_forward_batch(params, xin);
  Matrix c = concat_heads(params.spec, t.head_out);
  return {c.row(0), c.row(0) + c.cols()};
}

// Gradients in the same shapes as the parameters, plus the gradient with
// respect to the input batch (needed by the attribution sanity checks).
struct MlpGrads {
  std::vector<DenseLayer> hidden;
  std::vector<DenseLayer> heads;
  Matrix input_grad;

  bool all_finite() const {
    auto ok = [](const DenseLayer& l) {
      if (!l.w.all_finite()) return false;
      for (double v : l.b)
        if (!std::isfinite(v)) return false;
      return true;
    };
    for (const auto& l : hidden)
      if (!ok(l)) return false;
    for (const auto& l : heads)
      if (!ok(l)) return false;
    return true;
  }
};

namespace detail {

inline std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* mi = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += mi[j];
  }
  return s;
}

}  // namespace detail

// Exact reverse-mode gradients of the head outputs contracted with the
// given upstream co-gradients (one matrix per head, shaped like head_out).
inline MlpGrads mlp_backward_batch(const MlpParams& params, const ForwardTrace& trace,
                                   const std::vector<Matrix>& upstream) {
  const auto& spec = params.spec;
  if (upstream.size() != params.heads.size())
    throw InvalidInput("mlp_backward: upstream head count mismatch");
  for (std::size_t h = 0; h < upstream.size(); ++h)
    if (upstream[h].rows() != trace.input.rows() ||
        upstream[h].cols() != spec.heads[h].width)
      throw InvalidInput("mlp_backward: upstream shape mismatch");

  MlpGrads g;
  const Matrix& last = trace.last_hidden();

  // heads
  Matrix d_last(trace.input.rows(), last.cols());
  g.heads.resize(params.heads.size());
  for (std::size_t h = 0; h < params.heads.size(); ++h) {
    const Matrix& dz = upstream[h];
    g.heads[h].w = matmul(transpose(dz), last);
    g.heads[h].b = detail::column_sums(dz);
    Matrix da = matmul(dz, params.heads[h].w);
    for (std::size_t i = 0; i < da.rows(); ++i)
      for (std::size_t j = 0; j < da.cols(); ++j) d_last(i, j) += da(i, j);
  }

  // hidden stack
  g.hidden.resize(params.hidden.size());
  Matrix d_act = std::move(d_last);
  for (std::size_t li = params.hidden.size(); li-- > 0;) {
    Matrix dz = d_act;
    if (spec.hidden_activation == Activation::kTanh) {
      const Matrix& a = trace.act[li];
      for (std::size_t i = 0; i < dz.rows(); ++i)
        for (std::size_t j = 0; j < dz.cols(); ++j)
          dz(i, j) *= 1.0 - a(i, j) * a(i, j);
    } else {
      const Matrix& z = trace.pre[li];
      for (std::size_t i = 0; i < dz.rows(); ++i)
        for (std::size_t j = 0; j < dz.cols(); ++j)
          if (z(i, j) <= 0.0) dz(i, j) = 0.0;
    }
    const Matrix& below = li == 0 ? trace.input : trace.act[li - 1];
    g.hidden[li].w = matmul(transpose(dz), below);
    g.hidden[li].b = detail::column_sums(dz);
    d_act = matmul(dz, params.hidden[li].w);
  }
  g.input_grad = std::move(d_act);
  return g;
}

// Single-sample convenience wrapper.
inline MlpGrads mlp_backward(const MlpParams& params, std::span<const double> x,
                             const std::vector<std::vector<double>>& upstream) {
  Matrix xin(1, x.size());
  for (std::size_t j = 0; j < x.size(); ++j) xin(0, j) = x[j];
  ForwardTrace t = mlp_forward_batch(params, xin);
  std::vector<Matrix> up;
  up.reserve(upstream.size());
  for (const auto& u : upstream) {
    Matrix m(1, u.size());
    for (std::size_t j = 0; j < u.size(); ++j) m(0, j) = u[j];
    up.push_back(std::move(m));
  }
  return mlp_backward_batch(params, t, up);
}

}  // namespace causarm
