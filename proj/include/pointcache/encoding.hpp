#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"
#include "pointcache/random.hpp"

namespace pointcache {

inline constexpr double kDefaultTemperature = 0.01;
inline constexpr double kUnitNormTolerance = 1e-5;

// Per-class embedding rows scored against queries for zero-shot prediction.
// Immutable once built.
class ClassBank {
public:
  ClassBank(Matrix embeddings, std::vector<std::string> names,
            double temperature = kDefaultTemperature)
      : embeddings_(std::move(embeddings)), names_(std::move(names)),
        temperature_(temperature) {
    if (embeddings_.rows() < 2) throw ParameterError("ClassBank: need at least 2 classes");
    if (embeddings_.cols() == 0) throw ParameterError("ClassBank: zero dimension");
    if (names_.size() != embeddings_.rows())
      throw ShapeError("ClassBank: " + std::to_string(names_.size()) + " names for " +
                       std::to_string(embeddings_.rows()) + " rows");
    if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size())
      throw ParameterError("ClassBank: class names must be unique");
    if (!(temperature_ > 0.0) || !std::isfinite(temperature_))
      throw ParameterError("ClassBank: temperature must be > 0");
    for (std::size_t r = 0; r < embeddings_.rows(); ++r) {
      const auto row = embeddings_.row(r);
      if (!all_finite(row)) throw DegenerateInputError("ClassBank: non-finite embedding");
      if (std::abs(l2_norm(row) - 1.0) > kUnitNormTolerance)
        throw DegenerateInputError("ClassBank: row " + std::to_string(r) + " is not unit norm");
    }
  }

  std::size_t classes() const noexcept { return embeddings_.rows(); }
  std::size_t dim() const noexcept { return embeddings_.cols(); }
  double temperature() const noexcept { return temperature_; }
  const Matrix& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  ClassBank with_temperature(double temperature) const {
    return ClassBank(embeddings_, names_, temperature);
  }

private:
  Matrix embeddings_;
  std::vector<std::string> names_;
  double temperature_;
};

struct ZeroShotResult {
  Vector probs;
  ClassIndex label = 0;
  double entropy = 0.0;
};

inline ZeroShotResult zero_shot_logits(std::span<const double> query, const ClassBank& bank) {
  if (query.size() != bank.dim())
    throw ShapeError("zero_shot_logits: query dim " + std::to_string(query.size()) +
                     " vs bank dim " + std::to_string(bank.dim()));
  Vector sims(bank.classes());
  for (std::size_t c = 0; c < bank.classes(); ++c)
    sims[c] = cosine_sim(query, bank.embeddings().row(c));
  ZeroShotResult out;
  out.probs = softmax(sims, bank.temperature());
  out.label = argmax(out.probs);
  out.entropy = shannon_entropy(out.probs);
  return out;
}

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;

  std::size_t size() const noexcept { return points.size(); }

  void validate() const {
    if (points.empty()) throw DegenerateInputError("PointCloud: no points");
    for (const auto& p : points)
      for (double x : p)
        if (!std::isfinite(x)) throw DegenerateInputError("PointCloud: non-finite coordinate");
  }

  bool operator==(const PointCloud&) const = default;
};

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Greedy maximin subsampling. Starts at index 0; each pick maximizes the
// distance to the already selected set, lowest index on ties.
inline std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t count) {
  cloud.validate();
  const std::size_t n = cloud.size();
  if (count == 0 || count > n)
    throw ParameterError("fps: sample count " + std::to_string(count) + " not in [1, " +
                         std::to_string(n) + "]");
  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t current = 0;
  for (std::size_t s = 0; s < count; ++s) {
    picked.push_back(current);
    taken[current] = true;
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(cloud.points[i], cloud.points[current]));
      if (!taken[i] && nearest[i] > best_dist) {
        best_dist = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

struct PatchSet {
  std::vector<std::size_t> key_points;
  // members[p] lists the cloud indices in patch p, nearest first.
  std::vector<std::vector<std::size_t>> members;
  std::size_t neighbors = 0;
  // M * k * 3 coordinates, recentred on each patch's key point.
  std::vector<double> coords;

  std::size_t size() const noexcept { return key_points.size(); }

  std::span<const double> patch(std::size_t p) const {
    return {coords.data() + p * neighbors * 3, neighbors * 3};
  }
};

// k nearest neighbours (the key point included) for each key point, ordered by
// distance then index. The key point ranks first among points at distance
// zero, so duplicated coordinates never push it out of its own patch.
inline PatchSet knn_group(const PointCloud& cloud, std::span<const std::size_t> key_indices,
                          std::size_t k) {
  cloud.validate();
  const std::size_t n = cloud.size();
  if (k == 0 || k > n)
    throw ParameterError("knn_group: k " + std::to_string(k) + " not in [1, " +
                         std::to_string(n) + "]");
  PatchSet out;
  out.neighbors = k;
  out.key_points.assign(key_indices.begin(), key_indices.end());
  out.coords.reserve(key_indices.size() * k * 3);
  std::vector<std::tuple<double, bool, std::size_t>> order(n);
  for (std::size_t key : key_indices) {
    if (key >= n) throw ParameterError("knn_group: key index out of range");
    const Point3& centre = cloud.points[key];
    for (std::size_t i = 0; i < n; ++i)
      order[i] = {squared_distance(centre, cloud.points[i]), i != key, i};
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::vector<std::size_t> members;
    members.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t idx = std::get<2>(order[j]);
      members.push_back(idx);
      for (int axis = 0; axis < 3; ++axis)
        out.coords.push_back(cloud.points[idx][axis] - centre[axis]);
    }
    out.members.push_back(std::move(members));
  }
  return out;
}

struct EncodedSample {
  Vector global_feature;
  Matrix patch_features;
  std::uint64_t sample_id = 0;
  std::optional<ClassIndex> true_label;

  bool operator==(const EncodedSample&) const = default;
};

inline constexpr std::size_t kDefaultToyDim = 64;
inline constexpr std::size_t kDefaultPatchCount = 64;
inline constexpr std::size_t kDefaultNeighbors = 32;

// Deterministic stand-in for a learned point encoder: random Fourier features
// of each flattened patch, cos(W x + b), with W and b drawn from the seed.
inline EncodedSample toy_encode(const PatchSet& patches, std::uint64_t seed,
                                std::size_t dim = kDefaultToyDim) {
  if (patches.size() == 0 || patches.neighbors == 0)
    throw DegenerateInputError("toy_encode: empty patch set");
  if (dim == 0) throw ParameterError("toy_encode: zero output dimension");
  const std::size_t width = patches.neighbors * 3;
  // Recentred patches of a unit-radius cloud span roughly 0.1 per coordinate.
  const double bandwidth = 8.0 / std::sqrt(static_cast<double>(width)) / 0.1;
  Rng rng(mix_seed(seed, width));
  Matrix projection(dim, width);
  Vector phase(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < width; ++c) projection(r, c) = bandwidth * rng.normal();
    phase[r] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  EncodedSample out;
  out.patch_features = Matrix(patches.size(), dim);
  Vector mean(dim, 0.0);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto flat = patches.patch(p);
    auto feature = out.patch_features.row(p);
    for (std::size_t r = 0; r < dim; ++r) feature[r] = std::cos(dot(projection.row(r), flat) + phase[r]);
    const Vector unit = l2_normalize(feature);
    std::copy(unit.begin(), unit.end(), feature.begin());
    for (std::size_t r = 0; r < dim; ++r) mean[r] += unit[r];
  }
  for (double& x : mean) x /= static_cast<double>(patches.size());
  out.global_feature = l2_normalize(mean);
  return out;
}

}  // namespace pointcache
