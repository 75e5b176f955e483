#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mvpi/manifest.hpp"

namespace mvpi {

struct SynthConfig {
  std::size_t num_attributes = 12;
  std::size_t num_objects = 8;
  std::size_t feature_dim = 32;  // D
  std::size_t train_samples = 2000;
  std::size_t val_samples = 200;
  std::size_t test_samples = 400;
  std::size_t min_attrs_per_image = 1;
  std::size_t max_attrs_per_image = 3;
  std::size_t distractor_patches = 4;
  double noise_sigma = 0.1;
  double unseen_holdout = 0.2;   // fraction of distinct compositions held out of train
  std::size_t composition_pool = 0;  // distinct <S,o> to generate; 0 = pick from sample counts

  void validate() const {
    if (num_attributes == 0 || num_objects == 0 || feature_dim == 0 || train_samples == 0 ||
        test_samples == 0)
      throw Error(ErrorCode::invalid_config, "synth: sizes must be positive");
    if (unseen_holdout <= 0.0 || unseen_holdout >= 1.0)
      throw Error(ErrorCode::invalid_config, "synth: unseen_holdout must lie in (0,1)");
    if (min_attrs_per_image < 1 || max_attrs_per_image < min_attrs_per_image ||
        max_attrs_per_image > num_attributes)
      throw Error(ErrorCode::invalid_config, "synth: attrs-per-image range must fit [1,|A|]");
  }
};

// The latent prototypes behind a synthetic manifest, kept for oracle scoring
// and diagnostics.
struct LatentTruth {
  Eigen::MatrixXd attr_prototypes;    // |A| x D, unit rows
  Eigen::MatrixXd object_prototypes;  // |O| x D, unit rows
  std::vector<MultiAttrLabel> unseen_compositions;
};

namespace detail {

inline Eigen::VectorXd random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  return v.normalized();
}

}  // namespace detail

// Deterministic generator: additive prototype geometry so the attribute and
// object signals stay linearly separable at low noise.
inline std::pair<DatasetManifest, LatentTruth> generate_synthetic(const SynthConfig& config,
                                                                 std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(config.feature_dim);

  LatentTruth truth;
  truth.attr_prototypes.resize(static_cast<Eigen::Index>(config.num_attributes), dim);
  truth.object_prototypes.resize(static_cast<Eigen::Index>(config.num_objects), dim);
  for (Eigen::Index i = 0; i < truth.attr_prototypes.rows(); ++i)
    truth.attr_prototypes.row(i) = detail::random_unit_vector(rng, config.feature_dim);
  for (Eigen::Index i = 0; i < truth.object_prototypes.rows(); ++i)
    truth.object_prototypes.row(i) = detail::random_unit_vector(rng, config.feature_dim);

  std::vector<std::string> attr_names, obj_names;
  for (std::size_t i = 0; i < config.num_attributes; ++i) attr_names.push_back("attr" + std::to_string(i));
  for (std::size_t i = 0; i < config.num_objects; ++i) obj_names.push_back("obj" + std::to_string(i));
  PrimitiveVocab vocab(attr_names, obj_names);

  // Fix a pool of distinct compositions, then hold a fraction out of train.
  std::uniform_int_distribution<std::size_t> obj_dist(0, config.num_objects - 1);
  std::uniform_int_distribution<std::size_t> size_dist(config.min_attrs_per_image,
                                                       config.max_attrs_per_image);
  std::uniform_int_distribution<std::size_t> attr_dist(0, config.num_attributes - 1);

  auto draw_label = [&]() {
    MultiAttrLabel label;
    label.object = static_cast<ObjectId>(obj_dist(rng));
    const std::size_t want = size_dist(rng);
    while (label.attr_set.size() < want)
      label.attr_set.insert(static_cast<AttributeId>(attr_dist(rng)));
    return label;
  };

  std::set<MultiAttrLabel> pool;
  const std::size_t pool_target =
      config.composition_pool > 0
          ? config.composition_pool
          : std::max<std::size_t>(10, (config.train_samples + config.val_samples +
                                       config.test_samples) / 20);
  std::size_t attempts = 0;
  while (pool.size() < pool_target && attempts < pool_target * 200) {
    pool.insert(draw_label());
    ++attempts;
  }

  if (config.composition_pool > 0 && pool.size() < config.composition_pool)
    throw Error(ErrorCode::infeasible_holdout,
                "synth: label space too small for the requested composition pool");

  std::vector<MultiAttrLabel> compositions(pool.begin(), pool.end());
  std::shuffle(compositions.begin(), compositions.end(), rng);
  const auto num_unseen =
      static_cast<std::size_t>(static_cast<double>(compositions.size()) * config.unseen_holdout);
  if (num_unseen == 0 || num_unseen >= compositions.size())
    throw Error(ErrorCode::infeasible_holdout,
                "synth: not enough distinct compositions for the requested holdout");
  std::vector<MultiAttrLabel> unseen(compositions.begin(), compositions.begin() + static_cast<std::ptrdiff_t>(num_unseen));
  std::vector<MultiAttrLabel> seen(compositions.begin() + static_cast<std::ptrdiff_t>(num_unseen), compositions.end());
  truth.unseen_compositions = unseen;

  auto make_sample = [&](const MultiAttrLabel& label, Split split, std::size_t index) {
    SampleRecord s;
    s.sample_id = std::string(split_name(split)) + "_" + std::to_string(index);
    s.split = split;
    s.label = label;
    FeatureBundle f;
    Eigen::VectorXd cls = truth.object_prototypes.row(label.object);
    for (AttributeId a : label.attr_set) cls += truth.attr_prototypes.row(a);
    for (Eigen::Index i = 0; i < cls.size(); ++i) cls[i] += config.noise_sigma * gauss(rng);
    f.cls = cls.normalized();
    const auto num_patches =
        static_cast<Eigen::Index>(label.attr_set.size() + config.distractor_patches);
    f.patches.resize(num_patches, dim);
    Eigen::Index row = 0;
    for (AttributeId a : label.attr_set) {
      Eigen::VectorXd p = truth.attr_prototypes.row(a);
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += config.noise_sigma * gauss(rng);
      f.patches.row(row++) = p.normalized();
    }
    for (; row < num_patches; ++row) {
      Eigen::VectorXd p(dim);
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = gauss(rng);
      f.patches.row(row) = p.normalized();
    }
    s.features = std::move(f);
    return s;
  };

  std::vector<SampleRecord> samples;
  std::uniform_int_distribution<std::size_t> seen_pick(0, seen.size() - 1);
  for (std::size_t i = 0; i < config.train_samples; ++i)
    samples.push_back(make_sample(seen[seen_pick(rng)], Split::train, i));

  // Val/test mix seen and unseen compositions; unseen ones are what the
  // holdout exists for, so guarantee they appear.
  std::uniform_int_distribution<std::size_t> any_pick(0, compositions.size() - 1);
  std::uniform_int_distribution<std::size_t> unseen_pick(0, unseen.size() - 1);
  std::bernoulli_distribution use_unseen(0.5);
  auto eval_label = [&]() -> const MultiAttrLabel& {
    return use_unseen(rng) ? unseen[unseen_pick(rng)] : seen[seen_pick(rng)];
  };
  for (std::size_t i = 0; i < config.val_samples; ++i)
    samples.push_back(make_sample(eval_label(), Split::val, i));
  for (std::size_t i = 0; i < config.test_samples; ++i)
    samples.push_back(make_sample(eval_label(), Split::test, i));

  return {DatasetManifest(vocab, std::move(samples)), std::move(truth)};
}

}  // namespace mvpi
