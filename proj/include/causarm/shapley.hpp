#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "causarm/matrix.hpp"
#include "causarm/rng.hpp"

namespace causarm {

// Batched model evaluation: rows of inputs -> rows of outputs.
using BatchModelFn = std::function<Matrix(const Matrix&)>;

namespace detail {

// v(S) for a list of coalitions: features in S keep the instance value,
// the rest are replaced by each background row in turn; v is the mean
// model output over the background (interventional replacement).
inline std::vector<double> coalition_values(const BatchModelFn& model,
                                            std::span<const double> x,
                                            const Matrix& background,
                                            std::size_t output_index,
                                            const std::vector<std::uint32_t>& masks) {
  const std::size_t m = x.size();
  const std::size_t b = background.rows();
  std::vector<double> values(masks.size());

  const std::size_t chunk = std::max<std::size_t>(1, 4096 / std::max<std::size_t>(1, b));
  std::size_t done = 0;
  while (done < masks.size()) {
    const std::size_t take = std::min(chunk, masks.size() - done);
    Matrix rows(take * b, m);
    for (std::size_t c = 0; c < take; ++c) {
      const std::uint32_t mask = masks[done + c];
      for (std::size_t r = 0; r < b; ++r) {
        double* row = rows.row(c * b + r);
        const double* bg = background.row(r);
        for (std::size_t i = 0; i < m; ++i)
          row[i] = (mask >> i) & 1u ? x[i] : bg[i];
      }
    }
    Matrix out = model(rows);
    if (output_index >= out.cols())
      throw InvalidInput("coalition_values: output index out of range");
    for (std::size_t c = 0; c < take; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < b; ++r) acc += out(c * b + r, output_index);
      values[done + c] = acc / static_cast<double>(b);
    }
    done += take;
  }
  return values;
}

inline double factorial_d(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

inline double binomial_d(std::size_t n, std::size_t k) {
  return factorial_d(n) / (factorial_d(k) * factorial_d(n - k));
}

}  // namespace detail

// Exact Shapley values by coalition enumeration; the oracle the
// approximate methods are checked against. Inputs are capped at 20
// features (2^20 coalition evaluations).
inline std::vector<double> exact_shapley(const BatchModelFn& model,
                                         std::span<const double> x,
                                         const Matrix& background,
                                         std::size_t output_index) {
  const std::size_t m = x.size();
  if (m == 0) throw InvalidInput("exact_shapley: empty instance");
  if (m > 20) throw EnumerationTooLarge("exact_shapley: more than 20 features");
  if (background.rows() == 0 || background.cols() != m)
    throw InvalidInput("exact_shapley: background shape mismatch");

  const std::size_t n_masks = std::size_t(1) << m;
  std::vector<std::uint32_t> masks(n_masks);
  for (std::size_t mask = 0; mask < n_masks; ++mask)
    masks[mask] = static_cast<std::uint32_t>(mask);
  std::vector<double> v =
      detail::coalition_values(model, x, background, output_index, masks);

  // phi_i = sum over S not containing i of |S|!(M-|S|-1)!/M! (v(S+i) - v(S))
  std::vector<double> weight_by_size(m);
  const double mfact = detail::factorial_d(m);
  for (std::size_t s = 0; s < m; ++s)
    weight_by_size[s] =
        detail::factorial_d(s) * detail::factorial_d(m - s - 1) / mfact;

  std::vector<double> phi(m, 0.0);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    const std::size_t size = static_cast<std::size_t>(__builtin_popcountll(mask));
    for (std::size_t i = 0; i < m; ++i) {
      if ((mask >> i) & 1u) continue;
      phi[i] += weight_by_size[size] * (v[mask | (std::size_t(1) << i)] - v[mask]);
    }
  }
  return phi;
}

// Shapley kernel weight for a coalition of size z out of M features.
inline double shapley_kernel_weight(std::size_t m, std::size_t z) {
  if (z == 0 || z >= m)
    throw InvalidInput("shapley_kernel_weight: weight is defined for proper coalitions");
  return static_cast<double>(m - 1) /
         (detail::binomial_d(m, z) * static_cast<double>(z) *
          static_cast<double>(m - z));
}

// Kernel SHAP: weighted least squares over coalitions with the Shapley
// kernel, the intercept pinned to E[f(background)] and the total pinned to
// f(x) - E[f(background)] by constraint elimination. Enumerates every
// proper coalition when 2^M - 2 fits the budget (the estimate is then
// exact); otherwise samples coalitions stratified by kernel mass per size.
inline std::vector<double> kernel_shap(const BatchModelFn& model,
                                       std::span<const double> x,
                                       const Matrix& background,
                                       std::size_t output_index,
                                       std::size_t coalition_budget = 2048,
                                       std::uint64_t seed = 0) {
  const std::size_t m = x.size();
  if (m < 2) throw InvalidInput("kernel_shap: needs at least 2 features");
  if (m > 31) throw EnumerationTooLarge("kernel_shap: more than 31 features");
  if (background.rows() == 0 || background.cols() != m)
    throw InvalidInput("kernel_shap: background shape mismatch");

  // f(x) and the background mean
  Matrix xin(1, m);
  for (std::size_t i = 0; i < m; ++i) xin(0, i) = x[i];
  const double fx = model(xin)(0, output_index);
  Matrix bg_out = model(background);
  double ef = 0.0;
  for (std::size_t r = 0; r < background.rows(); ++r)
    ef += bg_out(r, output_index);
  ef /= static_cast<double>(background.rows());
  const double delta = fx - ef;

  std::vector<std::uint32_t> masks;
  std::vector<double> weights;
  const bool enumerable = m < 26 && ((std::size_t(1) << m) - 2) <= coalition_budget;
  if (enumerable) {
    const std::size_t n_masks = std::size_t(1) << m;
    for (std::size_t mask = 1; mask + 1 < n_masks; ++mask) {
      masks.push_back(static_cast<std::uint32_t>(mask));
      weights.push_back(shapley_kernel_weight(
          m, static_cast<std::size_t>(__builtin_popcountll(mask))));
    }
  } else {
    // stratified sampling: budget split by the kernel mass of each size
    std::vector<double> mass(m);  // index = coalition size
    double total = 0.0;
    for (std::size_t s = 1; s < m; ++s) {
      mass[s] = static_cast<double>(m - 1) /
                (static_cast<double>(s) * static_cast<double>(m - s));
      total += mass[s];
    }
    Rng rng(seed);
    std::vector<std::size_t> pool(m);
    for (std::size_t i = 0; i < m; ++i) pool[i] = i;
    for (std::size_t s = 1; s < m; ++s) {
      std::size_t quota = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::floor(static_cast<double>(coalition_budget) * mass[s] / total)));
      for (std::size_t q = 0; q < quota; ++q) {
        // random size-s subset via partial Fisher-Yates
        for (std::size_t i = 0; i < s; ++i) {
          const std::size_t j = i + rng.index(m - i);
          std::swap(pool[i], pool[j]);
        }
        std::uint32_t mask = 0;
        for (std::size_t i = 0; i < s; ++i) mask |= std::uint32_t(1) << pool[i];
        masks.push_back(mask);
        weights.push_back(mass[s] / static_cast<double>(quota));
      }
    }
  }

  std::vector<double> v =
      detail::coalition_values(model, x, background, output_index, masks);

  // eliminate the sum constraint: phi_last = delta - sum(phi_rest)
  const std::size_t p = m - 1;
  Matrix gram(p, p);
  std::vector<double> rhs(p, 0.0);
  for (std::size_t c = 0; c < masks.size(); ++c) {
    const std::uint32_t mask = masks[c];
    const double z_last = (mask >> p) & 1u ? 1.0 : 0.0;
    const double target = (v[c] - ef) - z_last * delta;
    const double w = weights[c];
    // design row: g_i = z_i - z_last
    for (std::size_t i = 0; i < p; ++i) {
      const double gi = (((mask >> i) & 1u) ? 1.0 : 0.0) - z_last;
      if (gi == 0.0) continue;
      rhs[i] += w * gi * target;
      for (std::size_t j = 0; j < p; ++j) {
        const double gj = (((mask >> j) & 1u) ? 1.0 : 0.0) - z_last;
        if (gj != 0.0) gram(i, j) += w * gi * gj;
      }
    }
  }

  std::vector<double> phi_rest;
  try {
    phi_rest = solve_linear(std::move(gram), std::move(rhs));
  } catch (const DegenerateCoalitions&) {
    throw DegenerateCoalitions(
        "kernel_shap: singular weighted system; increase the coalition budget");
  }
  std::vector<double> phi(m);
  double rest = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    phi[i] = phi_rest[i];
    rest += phi_rest[i];
  }
  phi[p] = delta - rest;
  return phi;
}

}  // namespace causarm
