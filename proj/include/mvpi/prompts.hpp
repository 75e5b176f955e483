#pragma once

#include <Eigen/Dense>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mvpi/autograd.hpp"
#include "mvpi/backbone.hpp"
#include "mvpi/vocab.hpp"

namespace mvpi {

enum class Branch { attribute, object };

// K shared trainable context vectors for one branch (CoOp-style prefix).
struct PromptContext {
  Branch branch = Branch::attribute;
  Eigen::MatrixXd context;  // K x e

  static PromptContext init(Branch branch, Eigen::Index k, Eigen::Index token_dim,
                            std::mt19937_64& rng) {
    if (k < 1) throw Error(ErrorCode::invalid_config, "prompt context needs K >= 1");
    std::normal_distribution<double> gauss(0.0, 0.02);
    PromptContext ctx;
    ctx.branch = branch;
    ctx.context.resize(k, token_dim);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < token_dim; ++j) ctx.context(i, j) = gauss(rng);
    return ctx;
  }
};

// Frozen word embeddings, one slot per primitive. Multi-word names embed as
// the mean of their per-word vectors so every prompt has a fixed length.
class VocabEmbedding {
 public:
  VocabEmbedding(const PrimitiveVocab& vocab, Eigen::Index token_dim, std::uint64_t seed)
      : token_dim_(token_dim) {
    attr_rows_.resize(static_cast<Eigen::Index>(vocab.num_attributes()), token_dim);
    obj_rows_.resize(static_cast<Eigen::Index>(vocab.num_objects()), token_dim);
    for (std::size_t i = 0; i < vocab.num_attributes(); ++i)
      attr_rows_.row(static_cast<Eigen::Index>(i)) = embed_name(vocab.attributes()[i], seed);
    for (std::size_t i = 0; i < vocab.num_objects(); ++i)
      obj_rows_.row(static_cast<Eigen::Index>(i)) = embed_name(vocab.objects()[i], seed);
  }

  Eigen::RowVectorXd attribute_row(AttributeId id) const { return attr_rows_.row(id); }
  Eigen::RowVectorXd object_row(ObjectId id) const { return obj_rows_.row(id); }
  const Eigen::MatrixXd& attribute_rows() const { return attr_rows_; }
  const Eigen::MatrixXd& object_rows() const { return obj_rows_; }

 private:
  Eigen::RowVectorXd embed_name(const std::string& name, std::uint64_t seed) const {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(token_dim_);
    std::istringstream words(name);
    std::string word;
    int count = 0;
    while (words >> word) {
      acc += word_vector(word, seed);
      ++count;
    }
    if (count == 0) throw Error(ErrorCode::malformed_file, "empty primitive name");
    return acc / static_cast<double>(count);
  }

  Eigen::RowVectorXd word_vector(const std::string& word, std::uint64_t seed) const {
    // FNV-1a over the word keys a per-word generator, so the table is a pure
    // function of (vocab, seed) and independent of vocab ordering.
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (char c : word) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    std::mt19937_64 rng(h);
    std::normal_distribution<double> gauss(0.0, 0.02);
    Eigen::RowVectorXd v(token_dim_);
    for (Eigen::Index i = 0; i < token_dim_; ++i) v[i] = gauss(rng);
    return v;
  }

  Eigen::Index token_dim_;
  Eigen::MatrixXd attr_rows_;
  Eigen::MatrixXd obj_rows_;
};

// [p_1 .. p_K, v_primitive]; length K+1.
inline ad::Var build_primitive_prompt(ad::Tape& tape, ad::Var context_var,
                                      const VocabEmbedding& vocab_embed, Branch branch,
                                      std::int32_t primitive_id) {
  const Eigen::Index rows = branch == Branch::attribute ? vocab_embed.attribute_rows().rows()
                                                        : vocab_embed.object_rows().rows();
  if (primitive_id < 0 || primitive_id >= rows)
    throw Error(ErrorCode::out_of_range, "build_primitive_prompt: id out of range");
  Eigen::MatrixXd v = branch == Branch::attribute
                          ? Eigen::MatrixXd(vocab_embed.attribute_row(primitive_id))
                          : Eigen::MatrixXd(vocab_embed.object_row(primitive_id));
  return ad::concat_rows({context_var, tape.leaf(std::move(v))});
}

// [p_1 .. p_K, v_a, v_o]; length K+2 (composition-branch baseline).
inline ad::Var build_pair_prompt(ad::Tape& tape, ad::Var context_var,
                                 const VocabEmbedding& vocab_embed, AttributeId attribute_id,
                                 ObjectId object_id) {
  if (attribute_id < 0 || attribute_id >= vocab_embed.attribute_rows().rows() || object_id < 0 ||
      object_id >= vocab_embed.object_rows().rows())
    throw Error(ErrorCode::out_of_range, "build_pair_prompt: id out of range");
  return ad::concat_rows({context_var,
                          tape.leaf(Eigen::MatrixXd(vocab_embed.attribute_row(attribute_id))),
                          tape.leaf(Eigen::MatrixXd(vocab_embed.object_row(object_id)))});
}

// Text representations for every primitive: |A|+|O| encoder calls, one per
// prompt. Returns (t_A |A| x d, t_O |O| x d).
inline std::pair<ad::Var, ad::Var> encode_primitives(ad::Tape& tape, BackboneContract& backbone,
                                                     ad::Var attr_context, ad::Var obj_context,
                                                     const VocabEmbedding& vocab_embed) {
  std::vector<ad::Var> attr_rows, obj_rows;
  for (Eigen::Index i = 0; i < vocab_embed.attribute_rows().rows(); ++i) {
    ad::Var prompt = build_primitive_prompt(tape, attr_context, vocab_embed, Branch::attribute,
                                            static_cast<std::int32_t>(i));
    attr_rows.push_back(backbone.text_encode(tape, prompt));
  }
  for (Eigen::Index i = 0; i < vocab_embed.object_rows().rows(); ++i) {
    ad::Var prompt = build_primitive_prompt(tape, obj_context, vocab_embed, Branch::object,
                                            static_cast<std::int32_t>(i));
    obj_rows.push_back(backbone.text_encode(tape, prompt));
  }
  return {ad::concat_rows(attr_rows), ad::concat_rows(obj_rows)};
}

// Pair table for the composition-branch baseline: |pairs| encoder calls.
inline ad::Var encode_pairs(ad::Tape& tape, BackboneContract& backbone, ad::Var pair_context,
                            const VocabEmbedding& vocab_embed,
                            const std::vector<PairComposition>& pairs) {
  std::vector<ad::Var> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    ad::Var prompt = build_pair_prompt(tape, pair_context, vocab_embed, p.attribute, p.object);
    rows.push_back(backbone.text_encode(tape, prompt));
  }
  if (rows.empty()) throw Error(ErrorCode::empty_solution_space, "encode_pairs: no pairs");
  return ad::concat_rows(rows);
}

}  // namespace mvpi
