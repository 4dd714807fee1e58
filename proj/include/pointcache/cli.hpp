#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "pointcache/cache.hpp"
#include "pointcache/datagen.hpp"
#include "pointcache/encoding.hpp"
#include "pointcache/error.hpp"
#include "pointcache/io.hpp"
#include "pointcache/pipeline.hpp"
#include "pointcache/report.hpp"

namespace pointcache::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// 7119804 -> "7,119,804"
inline std::string group_thousands(std::uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i % 3) == lead % 3) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

// One decimal in thousands, grouped: 13317120 -> "13,317.1K".
inline std::string in_thousands(std::uint64_t value) {
  const std::uint64_t tenths = (value + 50) / 100;
  return group_thousands(tenths / 10) + "." + std::to_string(tenths % 10) + "K";
}

inline std::string in_millions(std::uint64_t value) {
  const std::uint64_t tenths = (value + 50'000) / 100'000;
  return group_thousands(tenths / 10) + "." + std::to_string(tenths % 10) + "M";
}

namespace detail {

struct GenArgs {
  ShiftSpec spec;
  std::string out_stream;
  std::string out_bank;
};

struct CorruptArgs {
  std::string input;
  std::string output;
  std::string kind;
  int severity = 2;
  std::uint64_t seed = 0;
};

struct EncodeArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::size_t patches = kDefaultPatchCount;
  std::size_t neighbors = kDefaultNeighbors;
  std::size_t dim = kDefaultToyDim;
  std::uint32_t classes = 0;
  std::uint64_t seed = 0;
};

struct RunArgs {
  std::string stream;
  std::string bank;
  std::string config;
  std::string out_csv;
  std::string out_json;
  std::string dump_cache;
  std::size_t shots = kDefaultShots;
  std::size_t parts = kDefaultParts;
  AdaptParams params;
  double tau = kDefaultTemperature;
  std::string mode = "hier";
  std::uint64_t seed = 0;
  bool admit_after = false;
  bool compare = false;
};

struct ReportArgs {
  std::string csv;
  std::string summary;
  std::string series;
};

struct ParamArgs {
  std::uint64_t classes = 0;
  std::uint64_t shots = kDefaultShots;
  std::uint64_t parts = kDefaultParts;
  std::uint64_t dim = 0;
  bool json = false;
};

inline void print_summary(std::ostream& out, Mode mode, const RunSummary& s, double throughput) {
  const auto acc = s.accuracy();
  out << fmt::format("mode                         {}\n", to_string(mode));
  out << fmt::format("samples                      {}\n", s.samples);
  out << fmt::format("accumulated accuracy         {} ({}/{}, first {} discarded)\n",
                     acc ? fmt::format("{:.4f}", *acc) : "n/a", s.accumulated.correct,
                     s.accumulated.seen, kWarmupSamples);
  out << fmt::format("mean entropy (zero-shot)     {:.4f}\n", s.mean_entropy_zero_shot);
  out << fmt::format("mean top-5 entropy zs/final  {:.4f} / {:.4f}\n", s.mean_top5_entropy_zero_shot,
                     s.mean_top5_entropy_final);
  out << fmt::format("admissions                   inserted {} replaced {} rejected {} skipped {}\n",
                     s.inserted, s.replaced, s.rejected, s.skipped);
  if (throughput > 0.0) out << fmt::format("throughput                   {:.1f} samples/s\n", throughput);
}

inline int do_gen(const GenArgs& a, std::ostream& out) {
  const SyntheticData data = gen_stream(a.spec);
  const auto header = io::header_for(data.samples, static_cast<std::uint32_t>(a.spec.dim),
                                     static_cast<std::uint32_t>(a.spec.classes));
  io::write_stream(a.out_stream, header, data.samples);
  io::write_bank(a.out_bank, data.bank);
  out << fmt::format("wrote {} samples (C={}, d={}, P={}) to {} and bank to {}\n",
                     data.samples.size(), a.spec.classes, a.spec.dim, a.spec.patches, a.out_stream,
                     a.out_bank);
  return kExitOk;
}

inline int do_corrupt(const CorruptArgs& a, std::ostream& out) {
  const CorruptionKind kind{parse_corruption(a.kind), a.severity};
  io::LabeledCloud item = io::read_cloud(a.input);
  const std::size_t before = item.cloud.size();
  item.cloud = corrupt(item.cloud, kind, a.seed);
  io::write_cloud(a.output, item);
  out << fmt::format("{} severity {} (engine-defined severity schedule): {} -> {} points\n",
                     a.kind, a.severity, before, item.cloud.size());
  return kExitOk;
}

inline int do_encode(const EncodeArgs& a, std::ostream& out) {
  std::vector<EncodedSample> samples;
  for (const auto& path : a.inputs) {
    const io::LabeledCloud item = io::read_cloud(path);
    if (a.classes != 0 && item.label && *item.label >= a.classes)
      throw ParameterError(fmt::format("{}: label {} out of range for {} classes", path,
                                       *item.label, a.classes));
    const PointCloud cloud = normalize_cloud(item.cloud);
    const auto keys = fps(cloud, a.patches);
    EncodedSample s = toy_encode(knn_group(cloud, keys, a.neighbors), a.seed, a.dim);
    s.sample_id = samples.size();
    s.true_label = item.label;
    samples.push_back(std::move(s));
  }
  const auto header = io::header_for(samples, static_cast<std::uint32_t>(a.dim), a.classes);
  io::write_stream(a.output, header, samples);
  out << fmt::format("encoded {} clouds into {} (M={}, k={}, d={})\n", samples.size(), a.output,
                     a.patches, a.neighbors, a.dim);
  return kExitOk;
}

inline int do_run(const RunArgs& a, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  EngineConfig config;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw Error("cannot open config '" + a.config + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParameterError(std::string("config: ") + e.what());
    }
    config = report::config_from_json(j);
  }
  auto given = [&](const char* name) { return cmd.get_option(name)->count() > 0; };
  if (given("--k-shots")) config.shots = a.shots;
  if (given("--parts")) config.parts = a.parts;
  if (given("--alpha-g")) config.params.alpha_global = a.params.alpha_global;
  if (given("--alpha-l")) config.params.alpha_local = a.params.alpha_local;
  if (given("--beta-g")) config.params.beta_global = a.params.beta_global;
  if (given("--beta-l")) config.params.beta_local = a.params.beta_local;
  if (given("--tau")) config.temperature = a.tau;
  if (given("--mode")) config.mode = parse_mode(a.mode);
  if (given("--seed")) config.seed = a.seed;
  if (given("--admit-after")) config.admit_before_compute = !a.admit_after;
  config.validate();

  const ClassBank bank = io::read_bank(a.bank, &err);
  const std::vector<EncodedSample> stream = io::read_stream(a.stream);
  if (stream.empty()) throw ParameterError("run: stream '" + a.stream + "' has no samples");

  if (a.compare) {
    out << fmt::format("{:<10} {:>10} {:>18} {:>18}\n", "mode", "accuracy", "top5_entropy_final",
                       "top5_entropy_zs");
    for (const ModeResult& r : compare_modes(stream, config, bank))
      out << fmt::format("{:<10} {:>10} {:>18.4f} {:>18.4f}\n", to_string(r.mode),
                         r.accuracy ? fmt::format("{:.4f}", *r.accuracy) : "n/a",
                         r.mean_top5_entropy_final, r.mean_top5_entropy_zero_shot);
    return kExitOk;
  }

  Engine engine(bank, config);
  RunReport report;
  report.mode = config.mode;
  const auto started = std::chrono::steady_clock::now();
  for (const EncodedSample& s : stream) {
    report.steps.push_back(engine.step(s));
    report.metrics.add(report.steps.back());
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (!a.out_csv.empty()) {
    auto f = io::open_output(a.out_csv);
    report::write_csv(f, report);
  }
  if (!a.out_json.empty()) {
    auto f = io::open_output(a.out_json);
    f << report::run_json(report, config).dump(2) << '\n';
  }
  if (!a.dump_cache.empty()) {
    auto f = io::open_output(a.dump_cache);
    io::write_cache(f, engine.cache());
  }
  print_summary(out, config.mode, report.summary(), report.throughput());
  return kExitOk;
}

inline int do_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<report::Row> rows;
  {
    auto in = io::open_input(a.csv);
    rows = report::read_csv(in);
  }
  const RunMetrics metrics = report::recompute(rows);
  const RunSummary& s = metrics.summary();
  std::int64_t wall = 0;
  for (const auto& r : rows) wall += r.wall_ns;
  const double throughput =
      wall > 0 ? static_cast<double>(rows.size()) / (static_cast<double>(wall) * 1e-9) : 0.0;
  out << fmt::format("report for {}\n", a.csv);
  out << fmt::format("samples                      {}\n", s.samples);
  const auto acc = s.accuracy();
  out << fmt::format("accumulated accuracy         {} ({}/{}, first {} discarded)\n",
                     acc ? fmt::format("{:.4f}", *acc) : "n/a", s.accumulated.correct,
                     s.accumulated.seen, kWarmupSamples);
  out << fmt::format("zero-shot accuracy (all)     {}\n",
                     s.labeled ? fmt::format("{:.4f}", static_cast<double>(s.correct_zero_shot) /
                                                           static_cast<double>(s.labeled))
                               : "n/a");
  out << fmt::format("mean entropy (zero-shot)     {:.4f}\n", s.mean_entropy_zero_shot);
  out << fmt::format("mean top-5 entropy zs/final  {:.4f} / {:.4f}\n",
                     s.mean_top5_entropy_zero_shot, s.mean_top5_entropy_final);
  out << fmt::format("admissions                   inserted {} replaced {} rejected {} skipped {}\n",
                     s.inserted, s.replaced, s.rejected, s.skipped);
  if (throughput > 0.0) out << fmt::format("throughput (step time only)  {:.1f} samples/s\n", throughput);

  if (!a.series.empty()) {
    auto f = io::open_output(a.series);
    report::write_series_csv(f, metrics);
  }
  if (!a.summary.empty()) {
    std::ifstream in(a.summary);
    if (!in) throw Error("cannot open summary '" + a.summary + "'");
    nlohmann::json j;
    in >> j;
    const auto& run = j.at("summary");
    const bool match = run.at("accumulated_correct").get<std::uint64_t>() == s.accumulated.correct &&
                       run.at("accumulated_seen").get<std::uint64_t>() == s.accumulated.seen &&
                       run.at("correct").get<std::uint64_t>() == s.correct &&
                       run.at("samples").get<std::uint64_t>() == s.samples;
    if (!match) {
      err << "summary check: recomputed accuracy does not match " << a.summary << '\n';
      return kExitData;
    }
    out << "summary check: ok\n";
  }
  return kExitOk;
}

inline int do_paramcount(const ParamArgs& a, std::ostream& out) {
  if (a.classes == 0 || a.shots == 0 || a.parts == 0 || a.dim == 0)
    throw ParameterError("paramcount: all of --classes, --k-shots, --parts, --dim must be positive");
  const CacheParamCount p = param_count(a.classes, a.shots, a.parts, a.dim);
  if (a.json) {
    nlohmann::json j = {{"E_g", p.global_keys},  {"L_g", p.global_labels},
                        {"h_g", p.global_entropy}, {"E_l", p.local_keys},
                        {"L_l", p.local_labels}, {"total", p.total}};
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << fmt::format("full hierarchical cache, C={} K={} m={} d={}\n", a.classes, a.shots, a.parts,
                     a.dim);
  const std::pair<const char*, std::uint64_t> items[] = {
      {"E_g", p.global_keys}, {"L_g", p.global_labels}, {"h_g", p.global_entropy},
      {"E_l", p.local_keys},  {"L_l", p.local_labels}};
  for (const auto& [name, value] : items)
    out << fmt::format("  {:<6}{:>16}{:>14}\n", name, group_thousands(value), in_thousands(value));
  out << fmt::format("  {:<6}{:>16}{:>14}\n", "total", group_thousands(p.total), in_millions(p.total));
  return kExitOk;
}

}  // namespace detail

// Entry point shared by the `pointcache` binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Training-free test-time adaptation with a hierarchical feature cache", "pointcache"};
  app.require_subcommand(1);

  detail::GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic shifted stream and its class bank");
  gen_cmd->add_option("--classes", gen.spec.classes, "Class count")->capture_default_str();
  gen_cmd->add_option("--dim", gen.spec.dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--samples-per-class", gen.spec.samples_per_class)->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise, "Intra-class noise")->capture_default_str();
  gen_cmd->add_option("--shift", gen.spec.shift, "Systematic shift magnitude")->capture_default_str();
  gen_cmd->add_option("--patches", gen.spec.patches, "Patch features per sample")->capture_default_str();
  gen_cmd->add_option("--patch-noise", gen.spec.patch_noise)->capture_default_str();
  gen_cmd->add_option("--tau", gen.spec.temperature, "Bank temperature")->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed)->capture_default_str();
  gen_cmd->add_option("--out-stream", gen.out_stream)->required();
  gen_cmd->add_option("--out-bank", gen.out_bank)->required();

  detail::CorruptArgs cor;
  auto* cor_cmd = app.add_subcommand("corrupt", "Apply one atomic corruption to a point cloud");
  cor_cmd->add_option("--in", cor.input, "Cloud file (.pcpt binary, or .xyz text)")->required();
  cor_cmd->add_option("--out", cor.output)->required();
  cor_cmd->add_option("--kind", cor.kind)
      ->required()
      ->check(CLI::IsMember({"add_global", "add_local", "drop_global", "drop_local", "rotate",
                             "scale", "jitter"}));
  cor_cmd->add_option("--severity", cor.severity)->check(CLI::Range(1, 5))->capture_default_str();
  cor_cmd->add_option("--seed", cor.seed)->capture_default_str();

  detail::EncodeArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "Encode clouds into a stream with the toy encoder");
  enc_cmd->add_option("inputs", enc.inputs, "Cloud files")->required();
  enc_cmd->add_option("--out", enc.output)->required();
  enc_cmd->add_option("--patches,-M", enc.patches, "Key points per cloud")->capture_default_str();
  enc_cmd->add_option("--neighbors,-k", enc.neighbors, "Points per patch")->capture_default_str();
  enc_cmd->add_option("--dim", enc.dim)->capture_default_str();
  enc_cmd->add_option("--classes", enc.classes, "Class count recorded in the header (0 = unknown)");
  enc_cmd->add_option("--seed", enc.seed, "Projection seed")->capture_default_str();

  detail::RunArgs runa;
  auto* run_cmd = app.add_subcommand("run", "Run online adaptation over a stream");
  run_cmd->add_option("--stream", runa.stream)->required();
  run_cmd->add_option("--bank", runa.bank)->required();
  run_cmd->add_option("--config", runa.config, "JSON config; flags override its values");
  run_cmd->add_option("--out-csv", runa.out_csv, "Per-step CSV report");
  run_cmd->add_option("--out-json", runa.out_json, "JSON summary");
  run_cmd->add_option("--dump-cache", runa.dump_cache, "Write the final cache (PCCA)");
  run_cmd->add_option("--k-shots", runa.shots, "Per-class capacity K")->capture_default_str();
  run_cmd->add_option("--parts", runa.parts, "Parts per object m")->capture_default_str();
  run_cmd->add_option("--alpha-g", runa.params.alpha_global)->capture_default_str();
  run_cmd->add_option("--alpha-l", runa.params.alpha_local)->capture_default_str();
  run_cmd->add_option("--beta-g", runa.params.beta_global)->capture_default_str();
  run_cmd->add_option("--beta-l", runa.params.beta_local)->capture_default_str();
  run_cmd->add_option("--tau", runa.tau, "Override the bank temperature")->capture_default_str();
  run_cmd->add_option("--mode", runa.mode)
      ->check(CLI::IsMember({"zeroshot", "global", "hier"}))
      ->capture_default_str();
  run_cmd->add_option("--seed", runa.seed)->capture_default_str();
  run_cmd->add_flag("--admit-after", runa.admit_after, "Compute cache logits before admitting");
  run_cmd->add_flag("--compare", runa.compare, "Run all three modes and print a table");

  detail::ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Summarize a per-step CSV report");
  rep_cmd->add_option("--csv", rep.csv)->required();
  rep_cmd->add_option("--summary", rep.summary, "Run JSON to check the recomputed accuracy against");
  rep_cmd->add_option("--series", rep.series, "Write plot-ready accumulated series CSV");

  detail::ParamArgs par;
  auto* par_cmd = app.add_subcommand("paramcount", "Parameter count of a full hierarchical cache");
  par_cmd->add_option("--classes", par.classes)->required();
  par_cmd->add_option("--k-shots", par.shots)->capture_default_str();
  par_cmd->add_option("--parts", par.parts)->capture_default_str();
  par_cmd->add_option("--dim", par.dim)->required();
  par_cmd->add_flag("--json", par.json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (const auto* sub : app.get_subcommands()) failed = sub;
    err << failed->help();
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return detail::do_gen(gen, out);
    if (*cor_cmd) return detail::do_corrupt(cor, out);
    if (*enc_cmd) return detail::do_encode(enc, out);
    if (*run_cmd) return detail::do_run(runa, *run_cmd, out, err);
    if (*rep_cmd) return detail::do_report(rep, out, err);
    if (*par_cmd) return detail::do_paramcount(par, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace pointcache::cli
