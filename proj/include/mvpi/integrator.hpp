#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "mvpi/autograd.hpp"
#include "mvpi/params.hpp"

namespace mvpi {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MaskFlags {
  bool attr_obj = true;        // attribute <-> object interaction
  bool attr_attr = true;       // attribute <-> attribute interaction (off-diagonal)
  bool all_primitives = true;  // any text <-> text interaction (off-diagonal)
};

struct IntegratorConfig {
  Eigen::Index layers = 1;
  Eigen::Index heads = 4;
  Eigen::Index model_dim = 32;
  Eigen::Index ff_dim = 0;  // 0 = 4 * model_dim
  MaskFlags mask;
  double logit_scale = 1.0 / 0.07;

  Eigen::Index resolved_ff_dim() const { return ff_dim > 0 ? ff_dim : 4 * model_dim; }

  void validate() const {
    if (layers < 1 || heads < 1 || model_dim < 1)
      throw Error(ErrorCode::invalid_config, "integrator: layers/heads/dim must be positive");
    if (model_dim % heads != 0)
      throw Error(ErrorCode::invalid_config, "integrator: model_dim must be divisible by heads");
    if (logit_scale <= 0.0)
      throw Error(ErrorCode::invalid_config, "integrator: logit_scale must be positive");
  }
};

// Boundaries of the fused sequence M = [C; I; t_A; t_O].
struct SegmentBoundaries {
  Eigen::Index cls_end = 0;    // = 1
  Eigen::Index patch_end = 0;  // = 1 + P
  Eigen::Index attr_end = 0;   // = 1 + P + |A|
  Eigen::Index total = 0;      // = 1 + P + |A| + |O|

  Eigen::Index num_patches() const { return patch_end - cls_end; }
  Eigen::Index num_attributes() const { return attr_end - patch_end; }
  Eigen::Index num_objects() const { return total - attr_end; }

  bool is_attr(Eigen::Index i) const { return i >= patch_end && i < attr_end; }
  bool is_obj(Eigen::Index i) const { return i >= attr_end && i < total; }
  bool is_text(Eigen::Index i) const { return i >= patch_end && i < total; }
};

struct TokenSequence {
  ad::Var tokens;  // total x d
  SegmentBoundaries boundaries;
};

inline TokenSequence assemble_tokens(ad::Var cls, ad::Var patches, ad::Var attr_text,
                                     ad::Var obj_text) {
  const Eigen::Index d = ad::val(cls).cols();
  if (ad::val(cls).rows() != 1)
    throw Error(ErrorCode::dimension_mismatch, "assemble_tokens: cls must be a single row");
  if (ad::val(patches).rows() < 1)
    throw Error(ErrorCode::dimension_mismatch, "assemble_tokens: patch segment must be non-empty");
  for (ad::Var v : {patches, attr_text, obj_text})
    if (ad::val(v).cols() != d)
      throw Error(ErrorCode::dimension_mismatch, "assemble_tokens: dim mismatch");
  TokenSequence seq;
  seq.tokens = ad::concat_rows({cls, patches, attr_text, obj_text});
  seq.boundaries.cls_end = 1;
  seq.boundaries.patch_end = 1 + ad::val(patches).rows();
  seq.boundaries.attr_end = seq.boundaries.patch_end + ad::val(attr_text).rows();
  seq.boundaries.total = seq.boundaries.attr_end + ad::val(obj_text).rows();
  return seq;
}

// Allowed-attention matrix (query row, key column). Disabled interactions are
// symmetric; self-attention to the own position is always retained.
inline BoolMatrix build_attention_mask(const MaskFlags& flags, const SegmentBoundaries& b) {
  BoolMatrix keep = BoolMatrix::Constant(b.total, b.total, true);
  for (Eigen::Index q = 0; q < b.total; ++q) {
    for (Eigen::Index k = 0; k < b.total; ++k) {
      if (q == k) continue;
      const bool attr_obj_edge = (b.is_attr(q) && b.is_obj(k)) || (b.is_obj(q) && b.is_attr(k));
      const bool attr_attr_edge = b.is_attr(q) && b.is_attr(k);
      const bool text_edge = b.is_text(q) && b.is_text(k);
      if (!flags.attr_obj && attr_obj_edge) keep(q, k) = false;
      if (!flags.attr_attr && attr_attr_edge) keep(q, k) = false;
      if (!flags.all_primitives && text_edge) keep(q, k) = false;
    }
  }
  return keep;
}

// Pre-norm transformer encoder parameters; one ParamSet slice per layer.
struct IntegratorParams {
  struct Layer {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln1_g, ln1_b, ln2_g, ln2_b;
    std::size_t w1, b1, w2, b2;
  };
  std::vector<Layer> layers;

  static IntegratorParams init(ParamSet& params, const IntegratorConfig& config,
                               std::mt19937_64& rng) {
    config.validate();
    const Eigen::Index d = config.model_dim, ff = config.resolved_ff_dim();
    std::normal_distribution<double> gauss(0.0, 0.02);
    auto randn = [&](Eigen::Index r, Eigen::Index c) {
      Eigen::MatrixXd m(r, c);
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = gauss(rng);
      return m;
    };
    IntegratorParams p;
    for (Eigen::Index l = 0; l < config.layers; ++l) {
      const std::string prefix = "integrator.layer" + std::to_string(l) + ".";
      Layer layer;
      layer.wq = params.add(prefix + "wq", randn(d, d));
      layer.bq = params.add(prefix + "bq", Eigen::MatrixXd::Zero(1, d));
      layer.wk = params.add(prefix + "wk", randn(d, d));
      layer.bk = params.add(prefix + "bk", Eigen::MatrixXd::Zero(1, d));
      layer.wv = params.add(prefix + "wv", randn(d, d));
      layer.bv = params.add(prefix + "bv", Eigen::MatrixXd::Zero(1, d));
      layer.wo = params.add(prefix + "wo", randn(d, d));
      layer.bo = params.add(prefix + "bo", Eigen::MatrixXd::Zero(1, d));
      layer.ln1_g = params.add(prefix + "ln1.gamma", Eigen::MatrixXd::Ones(1, d));
      layer.ln1_b = params.add(prefix + "ln1.beta", Eigen::MatrixXd::Zero(1, d));
      layer.ln2_g = params.add(prefix + "ln2.gamma", Eigen::MatrixXd::Ones(1, d));
      layer.ln2_b = params.add(prefix + "ln2.beta", Eigen::MatrixXd::Zero(1, d));
      layer.w1 = params.add(prefix + "ffn.w1", randn(d, ff));
      layer.b1 = params.add(prefix + "ffn.b1", Eigen::MatrixXd::Zero(1, ff));
      layer.w2 = params.add(prefix + "ffn.w2", randn(ff, d));
      layer.b2 = params.add(prefix + "ffn.b2", Eigen::MatrixXd::Zero(1, d));
      p.layers.push_back(layer);
    }
    return p;
  }

  // Zeroes the residual-branch output projections so the block starts as the
  // identity map.
  static void zero_residual_outputs(ParamSet& params, const IntegratorParams& p) {
    for (const auto& layer : p.layers) {
      params[layer.wo].value.setZero();
      params[layer.w2].value.setZero();
    }
  }
};

struct RefinedOutputs {
  ad::Var refined_cls;     // 1 x d
  ad::Var refined_tokens;  // total x d, diagnostics only
  std::vector<Eigen::MatrixXd> attention;  // per layer*head softmax matrices, when captured
};

inline RefinedOutputs integrator_forward(const TokenSequence& seq, const IntegratorConfig& config,
                                         const ParamSet& params, const IntegratorParams& ip,
                                         bool capture_attention = false) {
  config.validate();
  const Eigen::Index d = config.model_dim;
  const Eigen::Index heads = config.heads;
  const Eigen::Index head_dim = d / heads;
  if (ad::val(seq.tokens).cols() != d)
    throw Error(ErrorCode::dimension_mismatch, "integrator_forward: token dim != model dim");
  const BoolMatrix keep = build_attention_mask(config.mask, seq.boundaries);
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  RefinedOutputs out;
  ad::Var x = seq.tokens;
  for (const auto& layer : ip.layers) {
    ad::Var h = ad::layernorm_rows(x, params.var(layer.ln1_g), params.var(layer.ln1_b));
    ad::Var q = ad::add_row_broadcast(ad::matmul(h, params.var(layer.wq)), params.var(layer.bq));
    ad::Var k = ad::add_row_broadcast(ad::matmul(h, params.var(layer.wk)), params.var(layer.bk));
    ad::Var v = ad::add_row_broadcast(ad::matmul(h, params.var(layer.wv)), params.var(layer.bv));
    std::vector<ad::Var> head_outputs;
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      ad::Var qh = ad::slice_cols(q, hd * head_dim, head_dim);
      ad::Var kh = ad::slice_cols(k, hd * head_dim, head_dim);
      ad::Var vh = ad::slice_cols(v, hd * head_dim, head_dim);
      ad::Var logits = ad::scale(ad::matmul_nt(qh, kh), attn_scale);
      ad::Var weights = ad::masked_softmax_rows(logits, keep);
      if (capture_attention) out.attention.push_back(ad::val(weights));
      head_outputs.push_back(ad::matmul(weights, vh));
    }
    ad::Var merged = ad::concat_cols(head_outputs);
    ad::Var attn =
        ad::add_row_broadcast(ad::matmul(merged, params.var(layer.wo)), params.var(layer.bo));
    x = ad::add(x, attn);
    ad::Var h2 = ad::layernorm_rows(x, params.var(layer.ln2_g), params.var(layer.ln2_b));
    ad::Var inner =
        ad::gelu(ad::add_row_broadcast(ad::matmul(h2, params.var(layer.w1)), params.var(layer.b1)));
    ad::Var ffn =
        ad::add_row_broadcast(ad::matmul(inner, params.var(layer.w2)), params.var(layer.b2));
    x = ad::add(x, ffn);
  }
  if (!ad::val(x).allFinite())
    throw Error(ErrorCode::numeric_failure, "integrator_forward: non-finite activations");
  out.refined_tokens = x;
  out.refined_cls = ad::slice_rows(x, 0, 1);
  return out;
}

// Cosine similarities between the refined class token and the ORIGINAL text
// rows (never the integrator-refined ones).
inline std::pair<ad::Var, ad::Var> score_primitives(ad::Var refined_cls, ad::Var attr_text,
                                                    ad::Var obj_text) {
  ad::Var c = ad::normalize_rows(refined_cls);
  ad::Var s_attr = ad::matmul_nt(c, ad::normalize_rows(attr_text));  // 1 x |A|
  ad::Var s_obj = ad::matmul_nt(c, ad::normalize_rows(obj_text));    // 1 x |O|
  return {s_attr, s_obj};
}

}  // namespace mvpi
