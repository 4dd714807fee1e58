#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "pointcache/encoding.hpp"
#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"
#include "pointcache/random.hpp"

namespace pointcache {

// Synthetic embedding stream with a dataset-level domain gap. Noise vectors are
// isotropic Gaussian with per-coordinate std 1/sqrt(dim), so `noise` and
// `shift` are both relative to the unit-norm prototypes.
struct ShiftSpec {
  std::size_t classes = 40;
  std::size_t dim = 64;
  std::size_t samples_per_class = 25;
  double noise = 1.5;
  double shift = 2.5;
  std::size_t patches = 16;
  double patch_noise = 0.3;
  double temperature = kDefaultTemperature;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw ParameterError("ShiftSpec: need at least 2 classes");
    if (dim == 0) throw ParameterError("ShiftSpec: dim must be >= 1");
    if (samples_per_class == 0) throw ParameterError("ShiftSpec: samples_per_class must be >= 1");
    if (patches == 0) throw ParameterError("ShiftSpec: patches must be >= 1");
    if (!(noise >= 0.0) || !(shift >= 0.0) || !(patch_noise >= 0.0))
      throw ParameterError("ShiftSpec: noise, shift and patch_noise must be >= 0");
    if (!(temperature > 0.0)) throw ParameterError("ShiftSpec: temperature must be > 0");
  }
};

struct SyntheticData {
  std::vector<EncodedSample> samples;
  ClassBank bank;
};

inline std::string default_class_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%03zu", c);
  return buf;
}

namespace detail {

inline Vector gaussian_vector(Rng& rng, std::size_t dim, double scale) {
  Vector v(dim);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline Vector random_unit(Rng& rng, std::size_t dim) {
  for (;;) {
    Vector v = gaussian_vector(rng, dim, 1.0);
    if (l2_norm(v) > 1e-12) return l2_normalize(v);
  }
}

}  // namespace detail

// Class prototypes form the bank. Each round visits every class once in a
// shuffled order; a sample is normalize(prototype + noise + shift * u) for one
// fixed unit direction u, and its patches are noisy copies of that feature.
inline SyntheticData gen_stream(const ShiftSpec& spec) {
  spec.validate();
  Rng proto_rng(mix_seed(spec.seed, 0));
  Rng sample_rng(mix_seed(spec.seed, 1));
  const double coord_scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));

  Matrix prototypes(spec.classes, spec.dim);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const Vector p = detail::random_unit(proto_rng, spec.dim);
    std::copy(p.begin(), p.end(), prototypes.row(c).begin());
    names.push_back(default_class_name(c));
  }
  const Vector direction = detail::random_unit(proto_rng, spec.dim);

  SyntheticData out{{}, ClassBank(prototypes, names, spec.temperature)};
  out.samples.reserve(spec.classes * spec.samples_per_class);
  std::vector<std::size_t> order(spec.classes);
  for (std::size_t round = 0; round < spec.samples_per_class; ++round) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[sample_rng.index(i + 1)]);
    for (std::size_t label : order) {
      Vector raw(spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j)
        raw[j] = prototypes(label, j) + spec.noise * coord_scale * sample_rng.normal() +
                 spec.shift * direction[j];
      EncodedSample sample;
      sample.global_feature = l2_normalize(raw);
      sample.patch_features = Matrix(spec.patches, spec.dim);
      for (std::size_t p = 0; p < spec.patches; ++p) {
        Vector patch(spec.dim);
        for (std::size_t j = 0; j < spec.dim; ++j)
          patch[j] = sample.global_feature[j] + spec.patch_noise * coord_scale * sample_rng.normal();
        const Vector unit = l2_normalize(patch);
        std::copy(unit.begin(), unit.end(), sample.patch_features.row(p).begin());
      }
      sample.sample_id = out.samples.size();
      sample.true_label = label;
      out.samples.push_back(std::move(sample));
    }
  }
  return out;
}

enum class Corruption { AddGlobal, AddLocal, DropGlobal, DropLocal, Rotate, Scale, Jitter };

inline constexpr std::array<Corruption, 7> kAllCorruptions = {
    Corruption::AddGlobal, Corruption::AddLocal, Corruption::DropGlobal, Corruption::DropLocal,
    Corruption::Rotate,    Corruption::Scale,    Corruption::Jitter};

inline constexpr std::string_view to_string(Corruption kind) {
  switch (kind) {
    case Corruption::AddGlobal: return "add_global";
    case Corruption::AddLocal: return "add_local";
    case Corruption::DropGlobal: return "drop_global";
    case Corruption::DropLocal: return "drop_local";
    case Corruption::Rotate: return "rotate";
    case Corruption::Scale: return "scale";
    case Corruption::Jitter: return "jitter";
  }
  return "?";
}

inline Corruption parse_corruption(std::string_view text) {
  for (Corruption kind : kAllCorruptions)
    if (to_string(kind) == text) return kind;
  throw ParameterError("unknown corruption '" + std::string(text) + "'");
}

struct CorruptionKind {
  Corruption kind = Corruption::Jitter;
  int severity = 2;

  void validate() const {
    if (severity < 1 || severity > 5)
      throw ParameterError("corruption severity must be in 1..5, got " + std::to_string(severity));
  }
};

// Resolved magnitudes of a corruption. The severity schedule is this engine's
// own stand-in, not a benchmark-exact parameterization.
struct CorruptionMagnitude {
  std::size_t add_count = 0;
  std::size_t drop_count = 0;
  double max_angle_deg = 0.0;
  double scale_bound = 1.0;
  double jitter_std = 0.0;
  double local_radius = 0.05;

  static CorruptionMagnitude from_severity(int level, std::size_t points) {
    CorruptionKind{Corruption::Jitter, level}.validate();
    const auto l = static_cast<std::size_t>(level);
    CorruptionMagnitude m;
    m.add_count = 10 * l;
    m.drop_count = (points * 5 * l) / 100;
    m.max_angle_deg = 6.0 * static_cast<double>(level);
    m.scale_bound = 1.0 + 0.1 * static_cast<double>(level);
    m.jitter_std = 0.01 * static_cast<double>(level);
    return m;
  }
};

inline Point3 centroid(const PointCloud& cloud) {
  Point3 c{0.0, 0.0, 0.0};
  for (const auto& p : cloud.points)
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  for (double& x : c) x /= static_cast<double>(cloud.size());
  return c;
}

// Zero centroid, max radius 1.
inline PointCloud normalize_cloud(const PointCloud& cloud) {
  cloud.validate();
  const Point3 c = centroid(cloud);
  PointCloud out = cloud;
  double radius = 0.0;
  for (auto& p : out.points) {
    for (int a = 0; a < 3; ++a) p[a] -= c[a];
    radius = std::max(radius, std::sqrt(squared_distance(p, {0.0, 0.0, 0.0})));
  }
  if (radius > 0.0)
    for (auto& p : out.points)
      for (double& x : p) x /= radius;
  return out;
}

namespace detail {

inline std::vector<std::size_t> nearest_indices(const PointCloud& cloud, const Point3& centre,
                                                std::size_t count) {
  std::vector<std::pair<double, std::size_t>> order(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    order[i] = {squared_distance(centre, cloud.points[i]), i};
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = order[i].second;
  return out;
}

inline PointCloud without(const PointCloud& cloud, const std::vector<std::size_t>& drop) {
  std::vector<bool> gone(cloud.size(), false);
  for (std::size_t i : drop) gone[i] = true;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!gone[i]) out.points.push_back(cloud.points[i]);
  return out;
}

// Rodrigues rotation matrix about a unit axis.
inline std::array<Point3, 3> rotation(const Point3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double t = 1.0 - c;
  const auto [x, y, z] = axis;
  return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
           {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
           {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

}  // namespace detail

// Applies one corruption to the normalized cloud. Additions append points,
// drops keep the surviving points in their original order.
inline PointCloud corrupt(const PointCloud& input, Corruption kind,
                          const CorruptionMagnitude& magnitude, std::uint64_t seed) {
  PointCloud cloud = normalize_cloud(input);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(kind)));
  const std::size_t n = cloud.size();
  switch (kind) {
    case Corruption::AddGlobal:
      for (std::size_t i = 0; i < magnitude.add_count; ++i)
        cloud.points.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
      return cloud;
    case Corruption::AddLocal: {
      const Point3 anchor = cloud.points[rng.index(n)];
      for (std::size_t i = 0; i < magnitude.add_count; ++i) {
        Point3 p = anchor;
        for (double& x : p) x += magnitude.local_radius * rng.normal();
        cloud.points.push_back(p);
      }
      return cloud;
    }
    case Corruption::DropGlobal: {
      if (magnitude.drop_count >= n)
        throw DegenerateInputError("drop_global: dropping " + std::to_string(magnitude.drop_count) +
                                   " of " + std::to_string(n) + " points");
      const Point3 c = centroid(cloud);
      std::vector<std::pair<double, std::size_t>> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = {-squared_distance(c, cloud.points[i]), i};
      std::sort(order.begin(), order.end());
      std::vector<std::size_t> drop;
      for (std::size_t i = 0; i < magnitude.drop_count; ++i) drop.push_back(order[i].second);
      return detail::without(cloud, drop);
    }
    case Corruption::DropLocal: {
      if (magnitude.drop_count >= n)
        throw DegenerateInputError("drop_local: dropping " + std::to_string(magnitude.drop_count) +
                                   " of " + std::to_string(n) + " points");
      const Point3 anchor = cloud.points[rng.index(n)];
      return detail::without(cloud, detail::nearest_indices(cloud, anchor, magnitude.drop_count));
    }
    case Corruption::Rotate: {
      const Vector axis = detail::random_unit(rng, 3);
      const double bound = magnitude.max_angle_deg * std::numbers::pi / 180.0;
      const double angle = rng.uniform(-bound, bound);
      const auto r = detail::rotation({axis[0], axis[1], axis[2]}, angle);
      for (auto& p : cloud.points) {
        const Point3 q = p;
        for (int a = 0; a < 3; ++a) p[a] = r[a][0] * q[0] + r[a][1] * q[1] + r[a][2] * q[2];
      }
      return cloud;
    }
    case Corruption::Scale: {
      if (!(magnitude.scale_bound >= 1.0)) throw ParameterError("scale: bound must be >= 1");
      Point3 factor;
      for (double& f : factor) f = rng.uniform(1.0 / magnitude.scale_bound, magnitude.scale_bound);
      for (auto& p : cloud.points)
        for (int a = 0; a < 3; ++a) p[a] *= factor[a];
      return cloud;
    }
    case Corruption::Jitter:
      for (auto& p : cloud.points)
        for (double& x : p) x += magnitude.jitter_std * rng.normal();
      return cloud;
  }
  return cloud;
}

inline PointCloud corrupt(const PointCloud& cloud, const CorruptionKind& kind, std::uint64_t seed) {
  kind.validate();
  return corrupt(cloud, kind.kind, CorruptionMagnitude::from_severity(kind.severity, cloud.size()),
                 seed);
}

}  // namespace pointcache
