#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvpi/eval.hpp"
#include "mvpi/model.hpp"

namespace mvpi {

// Analytic transformer-layer cost: 12*n*d^2 + 2*n^2*d multiply-accumulates
// per layer for sequence length n and width d, counted as 2 FLOPs each.
inline double transformer_layer_flops(Eigen::Index seq_len, Eigen::Index dim) {
  const double n = static_cast<double>(seq_len);
  const double d = static_cast<double>(dim);
  return 2.0 * (12.0 * n * d * d + 2.0 * n * n * d);
}

struct EfficiencyReport {
  std::uint64_t text_encode_calls = 0;
  std::uint64_t image_encode_calls = 0;
  std::uint64_t cached_text_calls_per_image = 0;
  double integrator_flops_per_image = 0.0;
  double wall_clock_per_image_ms = 0.0;  // median over timed runs
  std::size_t timed_samples = 0;
  std::optional<std::size_t> peak_rss_kb;
};

inline nlohmann::json efficiency_to_json(const EfficiencyReport& r) {
  nlohmann::json j;
  j["text_encode_calls"] = r.text_encode_calls;
  j["image_encode_calls"] = r.image_encode_calls;
  j["cached_text_calls_per_image"] = r.cached_text_calls_per_image;
  j["integrator_flops_per_image"] = r.integrator_flops_per_image;
  j["flop_formula"] = "2*(12*n*d^2 + 2*n^2*d) per layer, n = 1+P+|A|+|O|";
  j["wall_clock_per_image_ms"] = r.wall_clock_per_image_ms;
  j["timed_samples"] = r.timed_samples;
  if (r.peak_rss_kb) j["peak_rss_kb"] = *r.peak_rss_kb;
  return j;
}

inline std::optional<std::size_t> read_peak_rss_kb() {
  std::ifstream in("/proc/self/status");
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream is(line.substr(6));
      std::size_t kb = 0;
      is >> kb;
      return kb;
    }
  }
  return std::nullopt;
}

// Measures the dual-branch inference path: one cold text-table build, then
// per-image integrator passes against the cached table.
inline EfficiencyReport bench_dual_branch(DualBranchModel& model, const DatasetManifest& manifest,
                                          std::size_t num_samples, std::size_t warmup = 10) {
  auto samples = manifest.split_samples(Split::test);
  if (samples.empty()) samples = manifest.split_samples(Split::train);
  if (samples.empty()) throw Error(ErrorCode::empty_split, "bench: no samples");

  model.backbone().counters().reset();
  ad::Tape tape;
  auto text = model.encode_text(tape);
  const std::size_t base = tape.size();
  EfficiencyReport report;
  report.text_encode_calls = model.backbone().counters().text_calls;

  auto run_one = [&](const SampleRecord& s) {
    model.score_sample(tape, text, s);
    tape.truncate(base);
  };

  for (std::size_t i = 0; i < warmup; ++i) run_one(*samples[i % samples.size()]);
  const std::uint64_t text_before = model.backbone().counters().text_calls;

  std::vector<double> timings;
  for (std::size_t i = 0; i < num_samples; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_one(*samples[i % samples.size()]);
    const auto t1 = std::chrono::steady_clock::now();
    timings.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(timings.begin(), timings.end());
  report.wall_clock_per_image_ms = timings[timings.size() / 2];
  report.timed_samples = timings.size();
  report.image_encode_calls = model.backbone().counters().image_calls;
  report.cached_text_calls_per_image = model.backbone().counters().text_calls - text_before;

  const auto& b = manifest.vocab();
  const Eigen::Index seq_len = 1 + (*samples[0]->features).patches.rows() +
                               static_cast<Eigen::Index>(b.num_attributes() + b.num_objects());
  report.integrator_flops_per_image =
      static_cast<double>(model.config().integrator.layers) *
      transformer_layer_flops(seq_len, model.config().integrator.model_dim);
  report.peak_rss_kb = read_peak_rss_kb();
  return report;
}

// Composition-branch baseline path: |A|*|O| text calls cold, plain cosine
// per image afterwards.
inline EfficiencyReport bench_pair_baseline(PairBaselineModel& model,
                                            const DatasetManifest& manifest,
                                            std::size_t num_samples, std::size_t warmup = 10) {
  auto samples = manifest.split_samples(Split::test);
  if (samples.empty()) samples = manifest.split_samples(Split::train);
  if (samples.empty()) throw Error(ErrorCode::empty_split, "bench: no samples");

  model.backbone().counters().reset();
  ad::Tape tape;
  ad::Var table = model.encode_pair_table(tape);
  const std::size_t base = tape.size();
  EfficiencyReport report;
  report.text_encode_calls = model.backbone().counters().text_calls;

  auto run_one = [&](const SampleRecord& s) {
    model.score_sample(tape, table, s);
    tape.truncate(base);
  };

  for (std::size_t i = 0; i < warmup; ++i) run_one(*samples[i % samples.size()]);
  const std::uint64_t text_before = model.backbone().counters().text_calls;

  std::vector<double> timings;
  for (std::size_t i = 0; i < num_samples; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_one(*samples[i % samples.size()]);
    const auto t1 = std::chrono::steady_clock::now();
    timings.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(timings.begin(), timings.end());
  report.wall_clock_per_image_ms = timings[timings.size() / 2];
  report.timed_samples = timings.size();
  report.image_encode_calls = model.backbone().counters().image_calls;
  report.cached_text_calls_per_image = model.backbone().counters().text_calls - text_before;
  report.integrator_flops_per_image = 0.0;
  report.peak_rss_kb = read_peak_rss_kb();
  return report;
}

}  // namespace mvpi
