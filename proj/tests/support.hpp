#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pointcache/encoding.hpp"
#include "pointcache/numeric.hpp"
#include "pointcache/random.hpp"

namespace testing_support {

using namespace pointcache;

inline Vector random_unit(Rng& rng, std::size_t dim) {
  for (;;) {
    Vector v(dim);
    for (double& x : v) x = rng.normal();
    if (l2_norm(v) > 1e-9) return l2_normalize(v);
  }
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t dim) {
  Matrix m(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector v = random_unit(rng, dim);
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

inline PointCloud random_cloud(Rng& rng, std::size_t n) {
  PointCloud c;
  c.points.resize(n);
  for (auto& p : c.points)
    for (double& x : p) x = rng.uniform(-1.0, 1.0);
  return c;
}

inline ClassBank random_bank(Rng& rng, std::size_t classes, std::size_t dim, double tau = 0.01) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  return ClassBank(random_unit_rows(rng, classes, dim), names, tau);
}

inline ClassBank identity_bank(std::size_t classes, std::size_t dim, double tau = 0.01) {
  Matrix m(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) m(c, c) = 1.0;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  return ClassBank(m, names, tau);
}

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pointcache_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support

namespace testing_support {

// Naive reference for the cache logits: explicit loops over classes and
// entries, no snapshot matrices.
inline Vector naive_global(std::span<const double> q, const std::vector<Vector>& keys,
                           const std::vector<std::size_t>& labels, std::size_t classes, double beta) {
  Vector out(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t e = 0; e < keys.size(); ++e) {
      if (labels[e] != c) continue;
      double d = 0;
      for (std::size_t i = 0; i < q.size(); ++i) d += q[i] * keys[e][i];
      out[c] += std::exp(-beta * (1.0 - d));
    }
  return out;
}

inline Vector naive_local(const std::vector<Vector>& parts, const std::vector<Vector>& keys,
                          const std::vector<std::size_t>& labels, std::size_t classes, double beta) {
  Vector out(classes, 0.0);
  for (const Vector& p : parts) {
    const Vector one = naive_global(p, keys, labels, classes, beta);
    for (std::size_t c = 0; c < classes; ++c) out[c] += one[c] / static_cast<double>(parts.size());
  }
  return out;
}

}  // namespace testing_support

namespace testing_support {

// Binary entropy of p, in nats.
inline double binary_entropy(double p) {
  return -(p * std::log(p) + (1 - p) * std::log(1 - p));
}

// A 2-D unit query whose 2-class zero-shot entropy (identity bank, temperature
// tau) equals `h`, with class 0 the winner. h must lie in (h_min, ln 2).
inline Vector query_with_entropy(double h, double tau) {
  double lo = 0.5, hi = 1.0 - 1e-15;  // binary_entropy decreases on [0.5, 1)
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (binary_entropy(mid) > h ? lo : hi) = mid;
  }
  const double p = 0.5 * (lo + hi);
  const double gap = tau * std::log(p / (1 - p));  // cos - sin
  const double theta = std::acos(gap / std::sqrt(2.0)) - std::acos(-1.0) / 4;
  return {std::cos(theta), std::sin(theta)};
}

struct Trace {
  std::vector<double> entropies;
  std::vector<EncodedSample> samples;
  // expected final residents of class 0: (sample id, entropy), in slot order
  std::vector<std::pair<std::uint64_t, double>> expected;
};

// Six samples for one class with K=3: admit, admit, admit, replace, reject, reject.
inline Trace six_sample_trace() {
  Trace t;
  t.entropies = {0.60, 0.40, 0.50, 0.45, 0.65, 0.55};
  for (std::size_t i = 0; i < t.entropies.size(); ++i) {
    EncodedSample s;
    s.global_feature = query_with_entropy(t.entropies[i], 0.1);
    s.patch_features = Matrix::from_rows({s.global_feature});
    s.sample_id = 100 + i;
    s.true_label = 0;
    t.samples.push_back(s);
  }
  // Hand simulation: 0.60, 0.40, 0.50 fill the class; 0.45 < 0.60 evicts
  // sample 100 in place; 0.65 and 0.55 are not below the max 0.50.
  t.expected = {{103, 0.45}, {101, 0.40}, {102, 0.50}};
  return t;
}

}  // namespace testing_support
