#pragma once

#include <memory>
#include <random>

#include "mvpi/backbone.hpp"
#include "mvpi/integrator.hpp"
#include "mvpi/params.hpp"
#include "mvpi/prompts.hpp"
#include "mvpi/space.hpp"

namespace mvpi {

struct ModelConfig {
  Eigen::Index context_length = 4;  // K
  Eigen::Index token_dim = 32;     // e
  IntegratorConfig integrator;
  std::uint64_t seed = 0;

  void validate() const {
    if (context_length < 1 || token_dim < 1)
      throw Error(ErrorCode::invalid_config, "model: context_length and token_dim must be positive");
    integrator.validate();
  }
};

// Dual-branch prompt tuning + visual-primitive fusion. Trainable state: the
// two prompt contexts and the integrator; everything else is frozen.
class DualBranchModel {
 public:
  struct TextTable {
    ad::Var attr_text;  // |A| x d
    ad::Var obj_text;   // |O| x d
  };

  DualBranchModel(ModelConfig config, const PrimitiveVocab& vocab,
                  std::shared_ptr<BackboneContract> backbone)
      : config_(config),
        backbone_(std::move(backbone)),
        vocab_embed_(vocab, config.token_dim, config.seed) {
    config_.validate();
    if (backbone_->token_embed_dim() != config_.token_dim)
      throw Error(ErrorCode::dimension_mismatch, "model: token dim != backbone token dim");
    if (backbone_->embed_dim() != config_.integrator.model_dim)
      throw Error(ErrorCode::dimension_mismatch, "model: integrator dim != backbone embed dim");
    std::mt19937_64 rng(config_.seed);
    attr_ctx_ = params_.add("prompt.attr.context",
                            PromptContext::init(Branch::attribute, config_.context_length,
                                                config_.token_dim, rng)
                                .context);
    obj_ctx_ = params_.add("prompt.obj.context",
                           PromptContext::init(Branch::object, config_.context_length,
                                               config_.token_dim, rng)
                               .context);
    integrator_params_ = IntegratorParams::init(params_, config_.integrator, rng);
  }

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  BackboneContract& backbone() { return *backbone_; }
  const VocabEmbedding& vocab_embedding() const { return vocab_embed_; }
  const IntegratorParams& integrator_params() const { return integrator_params_; }

  // Stages parameters and encodes all primitives: exactly |A|+|O| text calls.
  TextTable encode_text(ad::Tape& tape) {
    params_.stage(tape);
    auto [ta, to] = encode_primitives(tape, *backbone_, params_.var(attr_ctx_),
                                      params_.var(obj_ctx_), vocab_embed_);
    return {ta, to};
  }

  // Full per-sample pipeline: image encode, token fusion, cosine scoring.
  std::pair<ad::Var, ad::Var> score_sample(ad::Tape& tape, const TextTable& text,
                                           const SampleRecord& sample,
                                           RefinedOutputs* diagnostics = nullptr) {
    auto [cls, patches] = backbone_->image_encode(sample);
    ad::Var cls_var = tape.leaf(cls);
    ad::Var patches_var = tape.leaf(patches);
    TokenSequence seq = assemble_tokens(cls_var, patches_var, text.attr_text, text.obj_text);
    RefinedOutputs refined = integrator_forward(seq, config_.integrator, params_, integrator_params_,
                                                diagnostics != nullptr);
    if (diagnostics) *diagnostics = refined;
    return score_primitives(refined.refined_cls, text.attr_text, text.obj_text);
  }

  std::size_t attr_context_index() const { return attr_ctx_; }
  std::size_t obj_context_index() const { return obj_ctx_; }

 private:
  ModelConfig config_;
  std::shared_ptr<BackboneContract> backbone_;
  VocabEmbedding vocab_embed_;
  ParamSet params_;
  std::size_t attr_ctx_ = 0;
  std::size_t obj_ctx_ = 0;
  IntegratorParams integrator_params_;
};

// Composition-branch baseline: one shared prompt context, a pair prompt per
// <a,o>, cosine between the raw class token and the pair table. No integrator.
class PairBaselineModel {
 public:
  PairBaselineModel(ModelConfig config, const PrimitiveVocab& vocab,
                    std::vector<PairComposition> pairs,
                    std::shared_ptr<BackboneContract> backbone)
      : config_(config),
        pairs_(std::move(pairs)),
        backbone_(std::move(backbone)),
        vocab_embed_(vocab, config.token_dim, config.seed) {
    if (pairs_.empty()) throw Error(ErrorCode::empty_solution_space, "baseline: empty pair set");
    std::mt19937_64 rng(config_.seed + 1);
    ctx_ = params_.add("prompt.pair.context",
                       PromptContext::init(Branch::attribute, config_.context_length,
                                           config_.token_dim, rng)
                           .context);
  }

  const std::vector<PairComposition>& pairs() const { return pairs_; }
  ParamSet& params() { return params_; }
  BackboneContract& backbone() { return *backbone_; }

  // |pairs| text-encode calls.
  ad::Var encode_pair_table(ad::Tape& tape) {
    params_.stage(tape);
    return encode_pairs(tape, *backbone_, params_.var(ctx_), vocab_embed_, pairs_);
  }

  // 1 x |pairs| cosine scores for one sample.
  ad::Var score_sample(ad::Tape& tape, ad::Var pair_table, const SampleRecord& sample) {
    auto [cls, patches] = backbone_->image_encode(sample);
    (void)patches;
    ad::Var cls_var = tape.leaf(cls);
    return ad::matmul_nt(ad::normalize_rows(cls_var), ad::normalize_rows(pair_table));
  }

 private:
  ModelConfig config_;
  std::vector<PairComposition> pairs_;
  std::shared_ptr<BackboneContract> backbone_;
  VocabEmbedding vocab_embed_;
  ParamSet params_;
  std::size_t ctx_ = 0;
};

}  // namespace mvpi
