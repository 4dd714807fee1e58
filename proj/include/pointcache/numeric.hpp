#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pointcache/error.hpp"

namespace pointcache {

using Vector = std::vector<double>;
using ClassIndex = std::size_t;

// Dense row-major matrix of doubles. Rows are the unit of meaning everywhere
// in this library (one embedding per row), so access is row-oriented.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix out(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != out.cols_)
        throw ShapeError("Matrix::from_rows: ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
    }
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw ShapeError("Matrix::append_row: width mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("dot: length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline Vector l2_normalize(std::span<const double> v) {
  if (!all_finite(v)) throw DegenerateInputError("l2_normalize: non-finite entry");
  const double norm = l2_norm(v);
  if (!(norm > 0.0)) throw DegenerateInputError("l2_normalize: zero-norm vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

inline void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const Vector unit = l2_normalize(m.row(r));
    std::copy(unit.begin(), unit.end(), m.row(r).begin());
  }
}

// Inputs are expected to be unit norm, so this is the clamped dot product.
inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

inline Vector softmax(std::span<const double> scores, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax: temperature must be > 0");
  if (scores.empty()) throw DegenerateInputError("softmax: empty scores");
  if (!all_finite(scores)) throw DegenerateInputError("softmax: non-finite score");
  const double peak = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - peak) / temperature);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

// Lowest index wins ties.
inline ClassIndex argmax(std::span<const double> v) {
  if (v.empty()) throw DegenerateInputError("argmax: empty vector");
  return static_cast<ClassIndex>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline double shannon_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

// Entropy of the k largest probabilities, renormalized to sum to one.
inline double top_k_entropy(std::span<const double> probs, std::size_t k) {
  if (k == 0 || k > probs.size())
    throw ParameterError("top_k_entropy: k must be in [1, " +
                         std::to_string(probs.size()) + "]");
  Vector top(probs.begin(), probs.end());
  std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(),
                    std::greater<>());
  top.resize(k);
  const double mass = std::accumulate(top.begin(), top.end(), 0.0);
  if (!(mass > 0.0)) throw DegenerateInputError("top_k_entropy: zero top-k mass");
  for (double& p : top) p /= mass;
  return shannon_entropy(top);
}

}  // namespace pointcache
