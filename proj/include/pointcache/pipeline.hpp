#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointcache/adapt.hpp"
#include "pointcache/cache.hpp"
#include "pointcache/encoding.hpp"
#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"
#include "pointcache/partition.hpp"
#include "pointcache/random.hpp"

namespace pointcache {

enum class Mode { ZeroShot, GlobalOnly, Hierarchical };

inline constexpr std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::ZeroShot: return "zeroshot";
    case Mode::GlobalOnly: return "global";
    case Mode::Hierarchical: return "hier";
  }
  return "?";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "zeroshot") return Mode::ZeroShot;
  if (text == "global") return Mode::GlobalOnly;
  if (text == "hier") return Mode::Hierarchical;
  throw ParameterError("unknown mode '" + std::string(text) + "' (expected zeroshot|global|hier)");
}

// Samples whose statistics are left out of the accumulated-accuracy and
// entropy series: early averages over a handful of samples swing wildly.
inline constexpr std::size_t kWarmupSamples = 5;
inline constexpr std::size_t kEntropyTopK = 5;

struct EngineConfig {
  std::size_t shots = kDefaultShots;
  std::size_t parts = kDefaultParts;
  AdaptParams params;
  // Overrides the class bank's temperature when set.
  std::optional<double> temperature;
  Mode mode = Mode::Hierarchical;
  // Admit the current sample before computing cache logits, so it can
  // retrieve its own fingerprint.
  bool admit_before_compute = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (shots == 0) throw ParameterError("EngineConfig: shots must be >= 1");
    if (parts == 0) throw ParameterError("EngineConfig: parts must be >= 1");
    if (temperature && !(*temperature > 0.0))
      throw ParameterError("EngineConfig: temperature must be > 0");
    params.validate();
  }
};

enum class AdmissionKind { Skipped, Inserted, Replaced, Rejected };

inline constexpr std::string_view to_string(AdmissionKind kind) {
  switch (kind) {
    case AdmissionKind::Skipped: return "skipped";
    case AdmissionKind::Inserted: return "inserted";
    case AdmissionKind::Replaced: return "replaced";
    case AdmissionKind::Rejected: return "rejected";
  }
  return "?";
}

struct StepRecord {
  std::uint64_t sample_id = 0;
  std::optional<ClassIndex> true_label;
  Vector zero_shot;
  Vector global_logits;
  Vector local_logits;
  Vector final_logits;
  double entropy_zero_shot = 0.0;
  double top5_entropy_zero_shot = 0.0;
  double top5_entropy_final = 0.0;
  ClassIndex pred_zero_shot = 0;
  ClassIndex pred_final = 0;
  AdmissionKind admission = AdmissionKind::Skipped;
  // Stream id of the evicted sample when admission == Replaced.
  std::optional<std::uint64_t> evicted_id;
  std::int64_t wall_time_ns = 0;

  std::optional<bool> correct() const {
    if (!true_label) return std::nullopt;
    return *true_label == pred_final;
  }
};

// Top-k entropy of the fused logits, read as a distribution through a
// unit-temperature softmax.
inline double adapted_top_k_entropy(std::span<const double> logits, std::size_t k) {
  const Vector probs = softmax(logits, 1.0);
  return top_k_entropy(probs, std::min(k, probs.size()));
}

// One online adaptation loop over a stream: encode, update, compute, adapt.
// Owns its cache; strictly sequential.
class Engine {
public:
  Engine(ClassBank bank, EngineConfig config)
      : bank_(config.temperature ? bank.with_temperature(*config.temperature) : std::move(bank)),
        config_(config),
        cache_(bank_.classes(), config.shots, config.parts, bank_.dim()) {
    config_.validate();
  }

  const ClassBank& bank() const noexcept { return bank_; }
  const EngineConfig& config() const noexcept { return config_; }
  const HierarchicalCache& cache() const noexcept { return cache_; }
  std::size_t steps() const noexcept { return stream_ids_.size(); }

  StepRecord step(const EncodedSample& sample) {
    const auto started = std::chrono::steady_clock::now();
    validate(sample);

    StepRecord rec;
    rec.sample_id = sample.sample_id;
    rec.true_label = sample.true_label;

    const ZeroShotResult zs = zero_shot_logits(sample.global_feature, bank_);
    rec.zero_shot = zs.probs;
    rec.pred_zero_shot = zs.label;
    rec.entropy_zero_shot = zs.entropy;
    rec.top5_entropy_zero_shot = top_k_entropy(zs.probs, std::min(kEntropyTopK, zs.probs.size()));

    // Engine-assigned, monotonically increasing id used inside the cache.
    const SampleId cache_id = stream_ids_.size();
    stream_ids_.push_back(sample.sample_id);

    rec.global_logits.assign(bank_.classes(), 0.0);
    rec.local_logits.assign(bank_.classes(), 0.0);
    if (config_.mode != Mode::ZeroShot) {
      const PartSummary parts =
          summarize_parts(sample.patch_features, config_.parts, mix_seed(config_.seed, cache_id));
      auto admit = [&] {
        const AdmissionOutcome outcome =
            cache_.admit(GlobalFingerprint{sample.global_feature, zs.label, zs.entropy, cache_id},
                         LocalFingerprint{parts.centers, zs.label, cache_id});
        if (std::holds_alternative<Inserted>(outcome)) {
          rec.admission = AdmissionKind::Inserted;
        } else if (const auto* replaced = std::get_if<Replaced>(&outcome)) {
          rec.admission = AdmissionKind::Replaced;
          rec.evicted_id = stream_ids_[replaced->evicted];
        } else {
          rec.admission = AdmissionKind::Rejected;
        }
      };
      if (config_.admit_before_compute) admit();
      const CacheSnapshot snap = cache_.snapshot();
      rec.global_logits = global_adapt(sample.global_feature, snap, config_.params.beta_global);
      if (config_.mode == Mode::Hierarchical)
        rec.local_logits = local_adapt(parts.centers, snap, config_.params.beta_local);
      if (!config_.admit_before_compute) admit();
    }

    const FusedPrediction fused =
        fuse(rec.zero_shot, rec.global_logits, rec.local_logits, config_.params);
    rec.final_logits = fused.logits;
    rec.pred_final = fused.label;
    rec.top5_entropy_final = adapted_top_k_entropy(fused.logits, kEntropyTopK);
    rec.wall_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    return rec;
  }

private:
  void validate(const EncodedSample& sample) const {
    if (sample.global_feature.size() != bank_.dim())
      throw ShapeError("step: feature dim " + std::to_string(sample.global_feature.size()) +
                       " vs bank dim " + std::to_string(bank_.dim()));
    if (sample.patch_features.rows() == 0)
      throw DegenerateInputError("step: sample has no patch features");
    if (sample.patch_features.cols() != bank_.dim())
      throw ShapeError("step: patch dim " + std::to_string(sample.patch_features.cols()) +
                       " vs bank dim " + std::to_string(bank_.dim()));
    if (sample.true_label && *sample.true_label >= bank_.classes())
      throw ParameterError("step: true label " + std::to_string(*sample.true_label) +
                           " out of range");
  }

  ClassBank bank_;
  EngineConfig config_;
  HierarchicalCache cache_;
  std::vector<std::uint64_t> stream_ids_;
};

// Exact correct/seen counts over labeled samples after the warm-up.
struct AccuracyPoint {
  std::uint64_t correct = 0;
  std::uint64_t seen = 0;

  std::optional<double> value() const {
    if (seen == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(seen);
  }
  bool operator==(const AccuracyPoint&) const = default;
};

struct RunSummary {
  std::uint64_t samples = 0;
  std::uint64_t labeled = 0;
  std::uint64_t correct = 0;        // over all labeled samples
  std::uint64_t correct_zero_shot = 0;
  AccuracyPoint accumulated;        // after the warm-up
  double mean_entropy_zero_shot = 0.0;
  double mean_top5_entropy_zero_shot = 0.0;
  double mean_top5_entropy_final = 0.0;
  std::uint64_t inserted = 0;
  std::uint64_t replaced = 0;
  std::uint64_t rejected = 0;
  std::uint64_t skipped = 0;

  std::optional<double> accuracy() const { return accumulated.value(); }
};

// Streaming accumulator for the per-step series. Entropy means cover the same
// post-warm-up window as accuracy.
class RunMetrics {
public:
  void add(const StepRecord& rec) {
    const std::uint64_t index = summary_.samples++;
    if (rec.true_label) {
      ++summary_.labeled;
      if (rec.pred_final == *rec.true_label) ++summary_.correct;
      if (rec.pred_zero_shot == *rec.true_label) ++summary_.correct_zero_shot;
    }
    switch (rec.admission) {
      case AdmissionKind::Skipped: ++summary_.skipped; break;
      case AdmissionKind::Inserted: ++summary_.inserted; break;
      case AdmissionKind::Replaced: ++summary_.replaced; break;
      case AdmissionKind::Rejected: ++summary_.rejected; break;
    }
    if (index < kWarmupSamples) return;
    if (rec.true_label) {
      ++summary_.accumulated.seen;
      if (rec.pred_final == *rec.true_label) ++summary_.accumulated.correct;
    }
    accuracy_series_.push_back(summary_.accumulated);
    sum_entropy_zs_ += rec.entropy_zero_shot;
    sum_top5_zs_ += rec.top5_entropy_zero_shot;
    sum_top5_final_ += rec.top5_entropy_final;
    const double n = static_cast<double>(accuracy_series_.size());
    summary_.mean_entropy_zero_shot = sum_entropy_zs_ / n;
    summary_.mean_top5_entropy_zero_shot = sum_top5_zs_ / n;
    summary_.mean_top5_entropy_final = sum_top5_final_ / n;
    entropy_series_.push_back(summary_.mean_top5_entropy_final);
    entropy_series_zero_shot_.push_back(summary_.mean_top5_entropy_zero_shot);
  }

  const RunSummary& summary() const noexcept { return summary_; }
  const std::vector<AccuracyPoint>& accuracy_series() const noexcept { return accuracy_series_; }
  // Running mean of the adapted top-5 entropy.
  const std::vector<double>& entropy_series() const noexcept { return entropy_series_; }
  const std::vector<double>& entropy_series_zero_shot() const noexcept {
    return entropy_series_zero_shot_;
  }

private:
  RunSummary summary_;
  std::vector<AccuracyPoint> accuracy_series_;
  std::vector<double> entropy_series_;
  std::vector<double> entropy_series_zero_shot_;
  double sum_entropy_zs_ = 0.0;
  double sum_top5_zs_ = 0.0;
  double sum_top5_final_ = 0.0;
};

struct RunReport {
  Mode mode = Mode::Hierarchical;
  std::vector<StepRecord> steps;
  RunMetrics metrics;
  double wall_seconds = 0.0;

  const RunSummary& summary() const noexcept { return metrics.summary(); }
  double throughput() const noexcept {
    return wall_seconds > 0.0 ? static_cast<double>(steps.size()) / wall_seconds : 0.0;
  }
};

inline RunReport run_stream(std::span<const EncodedSample> stream, const EngineConfig& config,
                            const ClassBank& bank) {
  if (stream.empty()) throw ParameterError("run_stream: empty stream");
  Engine engine(bank, config);
  RunReport report;
  report.mode = config.mode;
  report.steps.reserve(stream.size());
  const auto started = std::chrono::steady_clock::now();
  for (const EncodedSample& sample : stream) {
    report.steps.push_back(engine.step(sample));
    report.metrics.add(report.steps.back());
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

struct ModeResult {
  Mode mode = Mode::Hierarchical;
  std::optional<double> accuracy;
  double mean_top5_entropy_final = 0.0;
  double mean_top5_entropy_zero_shot = 0.0;
  double mean_entropy_zero_shot = 0.0;
  double throughput = 0.0;
};

// The three modes over the same stream with the same seed and parameters.
inline std::vector<ModeResult> compare_modes(std::span<const EncodedSample> stream,
                                             const EngineConfig& config, const ClassBank& bank) {
  std::vector<ModeResult> out;
  for (Mode mode : {Mode::ZeroShot, Mode::GlobalOnly, Mode::Hierarchical}) {
    EngineConfig cfg = config;
    cfg.mode = mode;
    const RunReport report = run_stream(stream, cfg, bank);
    const RunSummary& s = report.summary();
    out.push_back({mode, s.accuracy(), s.mean_top5_entropy_final, s.mean_top5_entropy_zero_shot,
                   s.mean_entropy_zero_shot, report.throughput()});
  }
  return out;
}

}  // namespace pointcache
