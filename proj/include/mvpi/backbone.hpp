#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <random>
#include <utility>

#include "mvpi/autograd.hpp"
#include "mvpi/manifest.hpp"

namespace mvpi {

struct EncodeCounters {
  std::atomic<std::uint64_t> image_calls{0};
  std::atomic<std::uint64_t> text_calls{0};

  void reset() {
    image_calls = 0;
    text_calls = 0;
  }
};

// Frozen vision-language backbone. text_encode runs on the tape, so gradients
// flow through it to the prompt tokens, but the backbone itself owns no
// trainable parameters.
class BackboneContract {
 public:
  virtual ~BackboneContract() = default;

  // token sequence (m x e) -> text representation (1 x d)
  virtual ad::Var text_encode(ad::Tape& tape, ad::Var tokens) = 0;

  // sample -> (cls 1 x d, patches P x d); no gradient path
  virtual std::pair<Eigen::RowVectorXd, Eigen::MatrixXd> image_encode(const SampleRecord& sample) = 0;

  virtual Eigen::Index embed_dim() const = 0;        // d
  virtual Eigen::Index token_embed_dim() const = 0;  // e

  EncodeCounters& counters() { return counters_; }
  const EncodeCounters& counters() const { return counters_; }

 protected:
  EncodeCounters counters_;
};

// Stand-in for a CLIP-scale backbone on synthetic feature bundles. Images are
// served from the stored payload; text is the mean of the token embeddings.
// Both sides go through the same fixed projection when e != d.
class SyntheticBackbone final : public BackboneContract {
 public:
  SyntheticBackbone(Eigen::Index token_dim, Eigen::Index embed_dim, std::uint64_t seed = 0)
      : token_dim_(token_dim), embed_dim_(embed_dim) {
    if (token_dim == embed_dim) {
      projection_ = Eigen::MatrixXd::Identity(token_dim, embed_dim);
    } else {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
      std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(token_dim)));
      projection_.resize(token_dim, embed_dim);
      for (Eigen::Index i = 0; i < projection_.rows(); ++i)
        for (Eigen::Index j = 0; j < projection_.cols(); ++j) projection_(i, j) = gauss(rng);
    }
  }

  ad::Var text_encode(ad::Tape& tape, ad::Var tokens) override {
    if (ad::val(tokens).cols() != token_dim_)
      throw Error(ErrorCode::dimension_mismatch, "text_encode: token dim mismatch");
    ++counters_.text_calls;
    const Eigen::Index m = ad::val(tokens).rows();
    ad::Var mean_weights =
        tape.leaf(Eigen::MatrixXd::Constant(1, m, 1.0 / static_cast<double>(m)));
    ad::Var pooled = ad::matmul(mean_weights, tokens);  // 1 x e
    ad::Var proj = tape.leaf(projection_);
    return ad::matmul(pooled, proj);  // 1 x d
  }

  std::pair<Eigen::RowVectorXd, Eigen::MatrixXd> image_encode(const SampleRecord& sample) override {
    if (!sample.features)
      throw Error(ErrorCode::missing_payload, "synthetic backbone needs a feature payload");
    ++counters_.image_calls;
    const FeatureBundle& f = *sample.features;
    if (f.cls.size() != token_dim_)
      throw Error(ErrorCode::dimension_mismatch, "image_encode: payload dim mismatch");
    Eigen::RowVectorXd cls = f.cls.transpose() * projection_;
    Eigen::MatrixXd patches = f.patches * projection_;
    return {std::move(cls), std::move(patches)};
  }

  Eigen::Index embed_dim() const override { return embed_dim_; }
  Eigen::Index token_embed_dim() const override { return token_dim_; }

  const Eigen::MatrixXd& projection() const { return projection_; }

 private:
  Eigen::Index token_dim_;
  Eigen::Index embed_dim_;
  Eigen::MatrixXd projection_;
};

}  // namespace mvpi
