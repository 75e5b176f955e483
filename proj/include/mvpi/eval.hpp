#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvpi/model.hpp"
#include "mvpi/space.hpp"

namespace mvpi {

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double hi = logits.maxCoeff();
  Eigen::ArrayXd e = (logits.array() - hi).exp();
  return (e / e.sum()).matrix();
}

// Per-branch similarity scores for one sample; absent branches are skipped
// when combining.
struct BranchScores {
  std::optional<Eigen::VectorXd> attr;  // |A|
  std::optional<Eigen::VectorXd> obj;   // |O|
  std::optional<Eigen::VectorXd> pair;  // aligned with pair_vocab
  std::vector<PairComposition> pair_vocab;
};

struct ScoredPair {
  PairComposition pair;
  double score = 0.0;
  bool seen = false;
};

struct RankedPrediction {
  std::vector<ScoredPair> ranked;  // descending score, ties by (attr, obj) ascending
};

// Sums the per-branch softmax probabilities over the solution space, applies
// the calibration bias to unseen pairs, and sorts deterministically. An
// infinite bias is handled symbolically: the biased group wins outright but
// in-group order is preserved.
inline RankedPrediction combine_and_rank(const BranchScores& scores, const SolutionSpace& space,
                                         double bias, const PairSeenSet& pair_seen,
                                         double logit_scale = 1.0) {
  if (space.pairs.empty())
    throw Error(ErrorCode::empty_solution_space, "combine_and_rank: empty solution space");
  std::optional<Eigen::VectorXd> p_attr, p_obj, p_pair;
  if (scores.attr) p_attr = softmax(logit_scale * *scores.attr);
  if (scores.obj) p_obj = softmax(logit_scale * *scores.obj);
  std::map<PairComposition, double> pair_prob;
  if (scores.pair) {
    p_pair = softmax(logit_scale * *scores.pair);
    for (std::size_t i = 0; i < scores.pair_vocab.size(); ++i)
      pair_prob[scores.pair_vocab[i]] = (*p_pair)[static_cast<Eigen::Index>(i)];
  }

  RankedPrediction out;
  out.ranked.reserve(space.pairs.size());
  for (const auto& pair : space.pairs) {
    ScoredPair sp;
    sp.pair = pair;
    sp.seen = pair_seen.contains(pair);
    if (p_attr) sp.score += (*p_attr)[pair.attribute];
    if (p_obj) sp.score += (*p_obj)[pair.object];
    if (p_pair) {
      auto it = pair_prob.find(pair);
      if (it != pair_prob.end()) sp.score += it->second;
    }
    if (!sp.seen && std::isfinite(bias)) sp.score += bias;
    out.ranked.push_back(sp);
  }

  const int unseen_group_rank = std::isinf(bias) ? (bias > 0 ? 0 : 1) : 0;
  auto group = [&](const ScoredPair& sp) {
    if (!std::isinf(bias)) return 0;
    return sp.seen ? 1 - unseen_group_rank : unseen_group_rank;
  };
  std::sort(out.ranked.begin(), out.ranked.end(), [&](const ScoredPair& a, const ScoredPair& b) {
    if (std::isinf(bias) && group(a) != group(b)) return group(a) < group(b);
    if (a.score != b.score) return a.score > b.score;
    return a.pair < b.pair;
  });
  return out;
}

// Re-ranks by dropping pairs outside `space`, preserving order. Used by the
// open/closed consistency check.
inline RankedPrediction filter_ranking(const RankedPrediction& ranked, const SolutionSpace& space) {
  RankedPrediction out;
  for (const auto& sp : ranked.ranked)
    if (space.pairs.count(sp.pair)) out.ranked.push_back(sp);
  return out;
}

struct InstanceMetrics {
  double exact_match = 0.0;
  double top1_p = 0.0;
  double top5_r = 0.0;
  double coverage = 0.0;
  double top1_p_attr = 0.0;
  double top1_p_obj = 0.0;
  std::size_t truth_size = 0;
};

inline InstanceMetrics instance_metrics(const RankedPrediction& ranked,
                                        const std::set<PairComposition>& truth) {
  if (truth.empty()) throw Error(ErrorCode::invalid_config, "instance_metrics: empty truth");
  std::set<PairComposition> in_ranking;
  for (const auto& sp : ranked.ranked) in_ranking.insert(sp.pair);
  for (const auto& t : truth)
    if (!in_ranking.count(t))
      throw Error(ErrorCode::truth_outside_space,
                  "instance_metrics: truth pair outside the solution space");

  InstanceMetrics m;
  m.truth_size = truth.size();

  // Coverage: smallest K whose prefix contains all of truth.
  std::size_t last_truth_rank = 0;
  std::size_t hits_in_top5 = 0;
  for (std::size_t i = 0; i < ranked.ranked.size(); ++i) {
    if (truth.count(ranked.ranked[i].pair)) {
      last_truth_rank = i + 1;
      if (i < 5) ++hits_in_top5;
    }
  }
  m.coverage = static_cast<double>(last_truth_rank);
  m.exact_match = last_truth_rank == truth.size() ? 1.0 : 0.0;
  m.top5_r = static_cast<double>(hits_in_top5) / static_cast<double>(truth.size());

  const PairComposition& top1 = ranked.ranked.front().pair;
  m.top1_p = truth.count(top1) ? 1.0 : 0.0;
  std::set<AttributeId> truth_attrs;
  std::set<ObjectId> truth_objects;
  for (const auto& t : truth) {
    truth_attrs.insert(t.attribute);
    truth_objects.insert(t.object);
  }
  m.top1_p_attr = truth_attrs.count(top1.attribute) ? 1.0 : 0.0;
  m.top1_p_obj = truth_objects.count(top1.object) ? 1.0 : 0.0;
  return m;
}

struct BiasSweepPoint {
  double bias = 0.0;
  double seen_top1p = 0.0;
  double unseen_top1p = 0.0;
};

struct BiasSweepResult {
  std::vector<BiasSweepPoint> curve;  // sorted by bias, includes +/-inf endpoints
  double auc = 0.0;
  double best_seen = 0.0;
  double best_unseen = 0.0;
  bool degenerate = false;  // one partition empty
};

struct MetricsReport {
  double exact_match = 0.0;
  double top1_p = 0.0;
  double top5_r = 0.0;
  double coverage = 0.0;
  double top1_p_attr = 0.0;
  double top1_p_obj = 0.0;
  double auc = 0.0;
  double best_seen = 0.0;
  double best_unseen = 0.0;
  bool sweep_degenerate = false;
  World world = World::open;
  std::size_t sample_count = 0;
  std::vector<BiasSweepPoint> sweep_curve;
};

inline MetricsReport aggregate_report(const std::vector<InstanceMetrics>& records, World world) {
  if (records.empty()) throw Error(ErrorCode::empty_split, "aggregate_report: no records");
  MetricsReport r;
  r.world = world;
  r.sample_count = records.size();
  for (const auto& m : records) {
    r.exact_match += m.exact_match;
    r.top1_p += m.top1_p;
    r.top5_r += m.top5_r;
    r.coverage += m.coverage;
    r.top1_p_attr += m.top1_p_attr;
    r.top1_p_obj += m.top1_p_obj;
  }
  const auto n = static_cast<double>(records.size());
  r.exact_match /= n;
  r.top1_p /= n;
  r.top5_r /= n;
  r.coverage /= n;
  r.top1_p_attr /= n;
  r.top1_p_obj /= n;
  return r;
}

// One evaluated sample as the sweep sees it: the best-scoring seen pair and
// best-scoring unseen pair (bias excluded), plus truth membership.
struct SweepSample {
  bool seen_partition = false;  // <S,o> in C^s
  std::optional<ScoredPair> best_seen;
  std::optional<ScoredPair> best_unseen;
  bool best_seen_in_truth = false;
  bool best_unseen_in_truth = false;
};

inline SweepSample make_sweep_sample(const BranchScores& scores, const SolutionSpace& space,
                                     const PairSeenSet& pair_seen, double logit_scale,
                                     const std::set<PairComposition>& truth, bool seen_partition) {
  RankedPrediction ranked = combine_and_rank(scores, space, 0.0, pair_seen, logit_scale);
  SweepSample s;
  s.seen_partition = seen_partition;
  for (const auto& sp : ranked.ranked) {
    if (sp.seen && !s.best_seen) s.best_seen = sp;
    if (!sp.seen && !s.best_unseen) s.best_unseen = sp;
    if (s.best_seen && s.best_unseen) break;
  }
  if (s.best_seen) s.best_seen_in_truth = truth.count(s.best_seen->pair) > 0;
  if (s.best_unseen) s.best_unseen_in_truth = truth.count(s.best_unseen->pair) > 0;
  return s;
}

namespace detail {

// Top-1 correctness of one sample at a given bias: the winner is whichever of
// the two group bests survives the biased comparison.
inline bool top1_correct_at_bias(const SweepSample& s, double bias) {
  if (!s.best_seen) return s.best_unseen_in_truth;
  if (!s.best_unseen) return s.best_seen_in_truth;
  bool unseen_wins;
  if (std::isinf(bias)) {
    unseen_wins = bias > 0;
  } else {
    const double u = s.best_unseen->score + bias;
    const double v = s.best_seen->score;
    unseen_wins = u > v || (u == v && s.best_unseen->pair < s.best_seen->pair);
  }
  return unseen_wins ? s.best_unseen_in_truth : s.best_seen_in_truth;
}

}  // namespace detail

inline BiasSweepResult bias_sweep_auc(const std::vector<SweepSample>& samples) {
  BiasSweepResult result;
  std::size_t n_seen = 0, n_unseen = 0;
  for (const auto& s : samples) (s.seen_partition ? n_seen : n_unseen)++;
  result.degenerate = n_seen == 0 || n_unseen == 0;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> biases = {-inf, 0.0, inf};
  for (const auto& s : samples)
    if (s.best_seen && s.best_unseen) biases.push_back(s.best_seen->score - s.best_unseen->score);
  std::sort(biases.begin(), biases.end());
  biases.erase(std::unique(biases.begin(), biases.end()), biases.end());

  auto accuracy_at = [&](double bias, bool seen_partition) {
    std::size_t hit = 0, total = 0;
    for (const auto& s : samples) {
      if (s.seen_partition != seen_partition) continue;
      ++total;
      if (detail::top1_correct_at_bias(s, bias)) ++hit;
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
  };

  for (double b : biases)
    result.curve.push_back({b, accuracy_at(b, true), accuracy_at(b, false)});

  result.best_seen = n_seen > 0 ? result.curve.front().seen_top1p : 0.0;
  result.best_unseen = n_unseen > 0 ? result.curve.back().unseen_top1p : 0.0;

  if (result.degenerate) {
    result.auc = 0.0;
    return result;
  }
  // Trapezoid over (unseen, seen) sorted by unseen accuracy. Duplicate unseen
  // values keep only the best seen accuracy (upper envelope), otherwise a
  // dominated duplicate would fold the curve back on itself.
  std::vector<std::pair<double, double>> points;
  for (const auto& p : result.curve) points.push_back({p.unseen_top1p, p.seen_top1p});
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) {
              return a.first < b.first || (a.first == b.first && a.second > b.second);
            });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const auto& a, const auto& b) { return a.first == b.first; }),
               points.end());
  double auc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    auc += (points[i].first - points[i - 1].first) * 0.5 *
           (points[i].second + points[i - 1].second);
  result.auc = auc;
  return result;
}

// ---- full-model evaluation --------------------------------------------------

struct EvalOptions {
  Split split = Split::test;
  World world = World::open;
};

inline BranchScores dual_branch_scores(DualBranchModel& model, ad::Tape& tape,
                                       DualBranchModel::TextTable& text,
                                       const SampleRecord& sample) {
  auto [s_attr, s_obj] = model.score_sample(tape, text, sample);
  BranchScores scores;
  scores.attr = ad::val(s_attr).row(0).transpose();
  scores.obj = ad::val(s_obj).row(0).transpose();
  return scores;
}

inline MetricsReport evaluate(DualBranchModel& model, const DatasetManifest& manifest,
                              const EvalOptions& options) {
  SolutionSpace space = build_solution_space(manifest, options.world);
  PairSeenSet pair_seen = build_pair_seen_set(manifest);
  auto samples = manifest.split_samples(options.split);
  if (samples.empty()) throw Error(ErrorCode::empty_split, "evaluate: empty split");

  ad::Tape tape;
  auto text = model.encode_text(tape);  // text table computed once, then reused
  const std::size_t base = tape.size();
  const double tau = model.config().integrator.logit_scale;

  std::vector<InstanceMetrics> records;
  std::vector<SweepSample> sweep_samples;
  for (const auto* sample : samples) {
    BranchScores scores = dual_branch_scores(model, tape, text, *sample);
    tape.truncate(base);
    const auto truth = expand_pairs(sample->label);
    RankedPrediction ranked = combine_and_rank(scores, space, 0.0, pair_seen, tau);
    records.push_back(instance_metrics(ranked, truth));
    sweep_samples.push_back(make_sweep_sample(scores, space, pair_seen, tau, truth,
                                              manifest.is_seen_label(sample->label)));
  }

  MetricsReport report = aggregate_report(records, options.world);
  BiasSweepResult sweep = bias_sweep_auc(sweep_samples);
  report.auc = sweep.auc;
  report.best_seen = sweep.best_seen;
  report.best_unseen = sweep.best_unseen;
  report.sweep_degenerate = sweep.degenerate;
  report.sweep_curve = sweep.curve;
  return report;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["world"] = world_name(r.world);
  j["sample_count"] = r.sample_count;
  j["exact_match"] = r.exact_match;
  j["top1_p"] = r.top1_p;
  j["top5_r"] = r.top5_r;
  j["coverage"] = r.coverage;
  j["top1_p_attr"] = r.top1_p_attr;
  j["top1_p_obj"] = r.top1_p_obj;
  j["auc"] = r.auc;
  j["best_seen"] = r.best_seen;
  j["best_unseen"] = r.best_unseen;
  j["sweep_degenerate"] = r.sweep_degenerate;
  j["seen_unseen_partition"] = "multi_attr_label_in_seen_compositions";
  j["seen_unseen_endpoint_rule"] = "endpoints";
  auto& curve = j["sweep_curve"] = nlohmann::json::array();
  for (const auto& p : r.sweep_curve) {
    nlohmann::json jp;
    jp["bias"] = std::isinf(p.bias) ? nlohmann::json(p.bias > 0 ? "+inf" : "-inf")
                                    : nlohmann::json(p.bias);
    jp["seen_top1p"] = p.seen_top1p;
    jp["unseen_top1p"] = p.unseen_top1p;
    curve.push_back(jp);
  }
  return j;
}

}  // namespace mvpi
