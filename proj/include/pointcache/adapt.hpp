#pragma once

#include <cmath>
#include <string>

#include "pointcache/cache.hpp"
#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"

namespace pointcache {

struct AdaptParams {
  double alpha_global = 4.0;
  double alpha_local = 4.0;
  double beta_global = 3.0;
  double beta_local = 3.0;

  void validate() const {
    if (!(alpha_global >= 0.0) || !(alpha_local >= 0.0))
      throw ParameterError("AdaptParams: fusion weights must be >= 0");
    if (!(beta_global > 0.0) || !(beta_local > 0.0))
      throw ParameterError("AdaptParams: sharpness coefficients must be > 0");
  }
};

// exp(-beta (1 - cos)), in [exp(-2 beta), 1].
inline double affinity(double cosine, double beta) { return std::exp(-beta * (1.0 - cosine)); }

namespace detail {

// Adds the affinity-weighted one-hot labels of every key row to `logits`.
// Rows are visited in snapshot order so the sum is reproducible.
inline void accumulate_affinity(std::span<const double> query, const Matrix& keys,
                                const std::vector<ClassIndex>& labels, double beta,
                                std::span<double> logits) {
  for (std::size_t r = 0; r < labels.size(); ++r)
    logits[labels[r]] += affinity(cosine_sim(query, keys.row(r)), beta);
}

}  // namespace detail

// Global cache logits: per class, the summed affinity of its cached keys.
inline Vector global_adapt(std::span<const double> query, const CacheSnapshot& snap,
                           double beta) {
  if (!(beta > 0.0)) throw ParameterError("global_adapt: beta must be > 0");
  Vector logits(snap.classes, 0.0);
  if (snap.global_rows() == 0) return logits;
  if (query.size() != snap.global_keys.cols())
    throw ShapeError("global_adapt: query dim " + std::to_string(query.size()) + " vs key dim " +
                     std::to_string(snap.global_keys.cols()));
  detail::accumulate_affinity(query, snap.global_keys, snap.global_labels, beta, logits);
  return logits;
}

// Local cache logits: each query part is scored against every cached part as
// in global_adapt, then the per-part logits are averaged.
inline Vector local_adapt(const Matrix& query_parts, const CacheSnapshot& snap, double beta) {
  if (!(beta > 0.0)) throw ParameterError("local_adapt: beta must be > 0");
  if (query_parts.rows() == 0) throw DegenerateInputError("local_adapt: no query parts");
  Vector logits(snap.classes, 0.0);
  if (snap.local_rows() == 0) return logits;
  if (query_parts.cols() != snap.local_keys.cols())
    throw ShapeError("local_adapt: part dim " + std::to_string(query_parts.cols()) +
                     " vs key dim " + std::to_string(snap.local_keys.cols()));
  for (std::size_t q = 0; q < query_parts.rows(); ++q)
    detail::accumulate_affinity(query_parts.row(q), snap.local_keys, snap.local_labels, beta,
                                logits);
  for (double& x : logits) x /= static_cast<double>(query_parts.rows());
  return logits;
}

struct FusedPrediction {
  Vector logits;
  ClassIndex label = 0;
};

// zero-shot probabilities + alpha_g * global logits + alpha_l * local logits,
// summed as-is with no renormalization.
inline FusedPrediction fuse(std::span<const double> zero_shot, std::span<const double> global,
                            std::span<const double> local, const AdaptParams& params) {
  if (global.size() != zero_shot.size() || local.size() != zero_shot.size())
    throw ShapeError("fuse: lengths " + std::to_string(zero_shot.size()) + ", " +
                     std::to_string(global.size()) + ", " + std::to_string(local.size()));
  FusedPrediction out;
  out.logits.resize(zero_shot.size());
  for (std::size_t c = 0; c < zero_shot.size(); ++c)
    out.logits[c] = zero_shot[c] + params.alpha_global * global[c] + params.alpha_local * local[c];
  out.label = argmax(out.logits);
  return out;
}

}  // namespace pointcache
