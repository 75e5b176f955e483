#pragma once

#include <memory>
#include <string>

#include "mvpi/bench.hpp"
#include "mvpi/checkpoint.hpp"
#include "mvpi/config.hpp"
#include "mvpi/eval.hpp"
#include "mvpi/stats.hpp"
#include "mvpi/synthetic.hpp"
#include "mvpi/train.hpp"

namespace mvpi {

// Glue between the flat config file and the typed module configs.

inline SynthConfig synth_config_from(const ConfigMap& cfg) {
  SynthConfig s;
  s.num_attributes = static_cast<std::size_t>(cfg.get_int("synth.num_attributes", 12));
  s.num_objects = static_cast<std::size_t>(cfg.get_int("synth.num_objects", 8));
  s.feature_dim = static_cast<std::size_t>(cfg.get_int("synth.feature_dim", 32));
  s.train_samples = static_cast<std::size_t>(cfg.get_int("synth.train_samples", 2000));
  s.val_samples = static_cast<std::size_t>(cfg.get_int("synth.val_samples", 200));
  s.test_samples = static_cast<std::size_t>(cfg.get_int("synth.test_samples", 400));
  s.min_attrs_per_image = static_cast<std::size_t>(cfg.get_int("synth.min_attrs_per_image", 1));
  s.max_attrs_per_image = static_cast<std::size_t>(cfg.get_int("synth.max_attrs_per_image", 3));
  s.distractor_patches = static_cast<std::size_t>(cfg.get_int("synth.distractor_patches", 4));
  s.noise_sigma = cfg.get_double("synth.noise_sigma", 0.1);
  s.unseen_holdout = cfg.get_double("synth.unseen_holdout", 0.2);
  s.composition_pool = static_cast<std::size_t>(cfg.get_int("synth.composition_pool", 0));
  return s;
}

inline ModelConfig model_config_from(const ConfigMap& cfg, std::uint64_t seed) {
  ModelConfig m;
  m.context_length = cfg.get_int("model.context_length", 4);
  m.token_dim = cfg.get_int("backbone.token_dim", cfg.get_int("backbone.embed_dim", 32));
  m.integrator.layers = cfg.get_int("integrator.layers", 1);
  m.integrator.heads = cfg.get_int("integrator.heads", 4);
  m.integrator.model_dim = cfg.get_int("backbone.embed_dim", 32);
  m.integrator.ff_dim = cfg.get_int("integrator.ff_dim", 0);
  m.integrator.logit_scale = cfg.get_double("integrator.logit_scale", 1.0 / 0.07);
  m.integrator.mask.attr_obj = cfg.get_bool("integrator.mask.attr_obj", true);
  m.integrator.mask.attr_attr = cfg.get_bool("integrator.mask.attr_attr", true);
  m.integrator.mask.all_primitives = cfg.get_bool("integrator.mask.all_primitives", true);
  m.seed = seed;
  return m;
}

inline TrainConfig train_config_from(const ConfigMap& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = static_cast<std::size_t>(cfg.get_int("training.epochs", 30));
  t.batch_size = static_cast<std::size_t>(cfg.get_int("training.batch_size", 64));
  t.learning_rate = cfg.get_double("training.learning_rate", 1e-3);
  t.weight_decay = cfg.get_double("training.weight_decay", 1e-4);
  t.use_logit_scale = cfg.get_bool("training.use_logit_scale", true);
  t.seed = seed;
  return t;
}

inline std::shared_ptr<BackboneContract> make_backbone(const ConfigMap& cfg, std::uint64_t seed) {
  const std::string kind = cfg.get_string("backbone.kind", "synthetic");
  if (kind == "synthetic") {
    return std::make_shared<SyntheticBackbone>(cfg.get_int("backbone.token_dim",
                                                           cfg.get_int("backbone.embed_dim", 32)),
                                               cfg.get_int("backbone.embed_dim", 32), seed);
  }
  throw Error(ErrorCode::invalid_config,
              "backbone.kind '" + kind + "' has no adapter registered in this build");
}

inline DualBranchModel make_model(const ConfigMap& cfg, const PrimitiveVocab& vocab,
                                  std::uint64_t seed) {
  return DualBranchModel(model_config_from(cfg, seed), vocab, make_backbone(cfg, seed));
}

}  // namespace mvpi
