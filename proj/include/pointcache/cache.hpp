#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"

namespace pointcache {

inline constexpr std::size_t kDefaultShots = 3;

using SampleId = std::uint64_t;

struct GlobalFingerprint {
  Vector feature;
  ClassIndex label = 0;
  double entropy = 0.0;
  SampleId sample_id = 0;

  bool operator==(const GlobalFingerprint&) const = default;
};

struct LocalFingerprint {
  Matrix parts;
  ClassIndex label = 0;
  SampleId sample_id = 0;

  bool operator==(const LocalFingerprint&) const = default;
};

struct Inserted {
  bool operator==(const Inserted&) const = default;
};
struct Replaced {
  SampleId evicted = 0;
  bool operator==(const Replaced&) const = default;
};
struct Rejected {
  bool operator==(const Rejected&) const = default;
};
using AdmissionOutcome = std::variant<Inserted, Replaced, Rejected>;

// Cache contents flattened into retrieval matrices. Rows are class-major, then
// slot order within a class; local rows carry the label of their owning entry.
struct CacheSnapshot {
  std::size_t classes = 0;
  Matrix global_keys;
  std::vector<ClassIndex> global_labels;
  Matrix local_keys;
  std::vector<ClassIndex> local_labels;
  // Index of the global row each local row belongs to.
  std::vector<std::size_t> part_owner;

  std::size_t global_rows() const noexcept { return global_labels.size(); }
  std::size_t local_rows() const noexcept { return local_labels.size(); }

  static Matrix one_hot(const std::vector<ClassIndex>& labels, std::size_t classes) {
    Matrix out(labels.size(), classes);
    for (std::size_t r = 0; r < labels.size(); ++r) out(r, labels[r]) = 1.0;
    return out;
  }
  Matrix global_one_hot() const { return one_hot(global_labels, classes); }
  Matrix local_one_hot() const { return one_hot(local_labels, classes); }
};

// Per-class bounded stores of global and local fingerprints. A class holds at
// most `shots` entries; once full, a newcomer replaces the highest-entropy
// resident only if its own entropy is strictly lower. The two stores are
// always admitted and evicted together.
class HierarchicalCache {
public:
  HierarchicalCache(std::size_t classes, std::size_t shots, std::size_t parts, std::size_t dim)
      : classes_(classes), shots_(shots), parts_(parts), dim_(dim),
        global_(classes), local_(classes), sequence_(classes) {
    if (classes == 0 || shots == 0 || parts == 0 || dim == 0)
      throw ParameterError("HierarchicalCache: classes, shots, parts and dim must be positive");
  }

  std::size_t classes() const noexcept { return classes_; }
  std::size_t shots() const noexcept { return shots_; }
  std::size_t parts() const noexcept { return parts_; }
  std::size_t dim() const noexcept { return dim_; }

  std::size_t count(ClassIndex label) const {
    check_label(label);
    return global_[label].size();
  }

  std::size_t size() const noexcept {
    std::size_t total = 0;
    for (const auto& slots : global_) total += slots.size();
    return total;
  }

  const std::vector<GlobalFingerprint>& global_entries(ClassIndex label) const {
    check_label(label);
    return global_[label];
  }
  const std::vector<LocalFingerprint>& local_entries(ClassIndex label) const {
    check_label(label);
    return local_[label];
  }

  // Highest resident entropy for the class; the class must be non-empty.
  double max_entropy(ClassIndex label) const {
    check_label(label);
    if (global_[label].empty()) throw ParameterError("max_entropy: class is empty");
    return global_[label][locate_max(label)].entropy;
  }

  AdmissionOutcome admit(GlobalFingerprint global, LocalFingerprint local) {
    check_label(global.label);
    if (global.label != local.label)
      throw ConsistencyError("admit: global label " + std::to_string(global.label) +
                             " != local label " + std::to_string(local.label));
    if (global.sample_id != local.sample_id)
      throw ConsistencyError("admit: global and local fingerprints have different sample ids");
    if (global.feature.size() != dim_)
      throw ShapeError("admit: feature dim " + std::to_string(global.feature.size()) +
                       " vs cache dim " + std::to_string(dim_));
    if (local.parts.rows() == 0 || local.parts.rows() > parts_ || local.parts.cols() != dim_)
      throw ShapeError("admit: local fingerprint must be [1.." + std::to_string(parts_) + "] x " +
                       std::to_string(dim_));
    if (!std::isfinite(global.entropy) || global.entropy < 0.0)
      throw ParameterError("admit: entropy must be finite and non-negative");

    const ClassIndex label = global.label;
    auto& globals = global_[label];
    if (globals.size() < shots_) {
      globals.push_back(std::move(global));
      local_[label].push_back(std::move(local));
      sequence_[label].push_back(next_sequence_++);
      return Inserted{};
    }
    const std::size_t slot = locate_max(label);
    if (!(global.entropy < globals[slot].entropy)) return Rejected{};
    const SampleId evicted = globals[slot].sample_id;
    globals[slot] = std::move(global);
    local_[label][slot] = std::move(local);
    sequence_[label][slot] = next_sequence_++;
    return Replaced{evicted};
  }

  CacheSnapshot snapshot() const {
    CacheSnapshot snap;
    snap.classes = classes_;
    snap.global_keys = Matrix(0, dim_);
    snap.local_keys = Matrix(0, dim_);
    for (ClassIndex c = 0; c < classes_; ++c) {
      for (std::size_t slot = 0; slot < global_[c].size(); ++slot) {
        const std::size_t owner = snap.global_labels.size();
        snap.global_keys.append_row(global_[c][slot].feature);
        snap.global_labels.push_back(c);
        const Matrix& parts = local_[c][slot].parts;
        for (std::size_t p = 0; p < parts.rows(); ++p) {
          snap.local_keys.append_row(parts.row(p));
          snap.local_labels.push_back(c);
          snap.part_owner.push_back(owner);
        }
      }
    }
    return snap;
  }

  // Throws ConsistencyError if a structural invariant is broken.
  void check_invariants() const {
    for (ClassIndex c = 0; c < classes_; ++c) {
      const auto& g = global_[c];
      const auto& l = local_[c];
      if (g.size() > shots_) throw ConsistencyError("class over capacity");
      if (g.size() != l.size() || g.size() != sequence_[c].size())
        throw ConsistencyError("global/local store sizes differ");
      for (std::size_t s = 0; s < g.size(); ++s) {
        if (g[s].sample_id != l[s].sample_id) throw ConsistencyError("sample id coupling broken");
        if (g[s].label != c || l[s].label != c) throw ConsistencyError("entry filed under wrong class");
      }
    }
  }

  bool operator==(const HierarchicalCache&) const = default;

private:
  void check_label(ClassIndex label) const {
    if (label >= classes_)
      throw ParameterError("class index " + std::to_string(label) + " out of range [0, " +
                           std::to_string(classes_) + ")");
  }

  // Highest entropy; among equal maxima the oldest admission.
  std::size_t locate_max(ClassIndex label) const {
    const auto& globals = global_[label];
    const auto& seq = sequence_[label];
    std::size_t best = 0;
    for (std::size_t s = 1; s < globals.size(); ++s) {
      if (globals[s].entropy > globals[best].entropy ||
          (globals[s].entropy == globals[best].entropy && seq[s] < seq[best]))
        best = s;
    }
    return best;
  }

  std::size_t classes_;
  std::size_t shots_;
  std::size_t parts_;
  std::size_t dim_;
  std::vector<std::vector<GlobalFingerprint>> global_;
  std::vector<std::vector<LocalFingerprint>> local_;
  std::vector<std::vector<std::uint64_t>> sequence_;
  std::uint64_t next_sequence_ = 0;
};

struct CacheParamCount {
  std::uint64_t global_keys = 0;    // E_g
  std::uint64_t global_labels = 0;  // L_g
  std::uint64_t global_entropy = 0; // h_g
  std::uint64_t local_keys = 0;     // E_l
  std::uint64_t local_labels = 0;   // L_l
  std::uint64_t total = 0;

  bool operator==(const CacheParamCount&) const = default;
};

// Scalar count of a full cache: C*K*d + C*K + C*K + C*K*m*d + C*K*m.
constexpr CacheParamCount param_count(std::uint64_t classes, std::uint64_t shots,
                                      std::uint64_t parts, std::uint64_t dim) {
  CacheParamCount out;
  const std::uint64_t entries = classes * shots;
  out.global_keys = entries * dim;
  out.global_labels = entries;
  out.global_entropy = entries;
  out.local_keys = entries * parts * dim;
  out.local_labels = entries * parts;
  out.total = out.global_keys + out.global_labels + out.global_entropy + out.local_keys +
              out.local_labels;
  return out;
}

}  // namespace pointcache
