#include <catch2/catch_amalgamated.hpp>

#include "mvpi/model.hpp"
#include "mvpi/synthetic.hpp"

using namespace mvpi;

namespace {

std::shared_ptr<SyntheticBackbone> backbone(Eigen::Index e = 16, Eigen::Index d = 16) {
  return std::make_shared<SyntheticBackbone>(e, d, 1);
}

ad::Var leaf_context(ad::Tape& tape, Eigen::Index k, Eigen::Index e, unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  return tape.leaf(PromptContext::init(Branch::attribute, k, e, rng).context);
}

}  // namespace

TEST_CASE("primitive prompt is [context..., vocab vector]") {
  PrimitiveVocab vocab({"red", "ripe"}, {"apple"});
  VocabEmbedding embed(vocab, 16, 0);
  ad::Tape tape;
  ad::Var ctx = leaf_context(tape, 4, 16);
  ad::Var p0 = build_primitive_prompt(tape, ctx, embed, Branch::attribute, 0);
  CHECK(ad::val(p0).rows() == 5);
  CHECK(ad::val(p0).cols() == 16);
  // the K context rows are shared storage across primitives of the branch
  ad::Var p1 = build_primitive_prompt(tape, ctx, embed, Branch::attribute, 1);
  CHECK(ad::val(p0).topRows(4) == ad::val(p1).topRows(4));
  CHECK(ad::val(p0).row(4) != ad::val(p1).row(4));
  CHECK_THROWS_AS(build_primitive_prompt(tape, ctx, embed, Branch::attribute, 7), Error);
}

TEST_CASE("attribute and object branches own independent context parameters") {
  std::mt19937_64 rng(3);
  auto a = PromptContext::init(Branch::attribute, 4, 16, rng);
  auto o = PromptContext::init(Branch::object, 4, 16, rng);
  CHECK(a.context != o.context);
}

TEST_CASE("pair prompt is [context..., v_a, v_o]") {
  PrimitiveVocab vocab({"red", "ripe"}, {"apple", "car"});
  VocabEmbedding embed(vocab, 16, 0);
  ad::Tape tape;
  ad::Var ctx = leaf_context(tape, 4, 16);
  ad::Var p = build_pair_prompt(tape, ctx, embed, 0, 0);
  CHECK(ad::val(p).rows() == 6);
  ad::Var q = build_pair_prompt(tape, ctx, embed, 0, 1);
  CHECK(ad::val(p).topRows(5) == ad::val(q).topRows(5));
  CHECK_THROWS_AS(build_pair_prompt(tape, ctx, embed, 5, 0), Error);
}

TEST_CASE("encode_primitives makes exactly |A|+|O| text calls") {
  PrimitiveVocab vocab({"a0", "a1", "a2"}, {"o0", "o1"});
  auto bb = backbone();
  VocabEmbedding embed(vocab, 16, 0);
  ad::Tape tape;
  ad::Var actx = leaf_context(tape, 4, 16, 1);
  ad::Var octx = leaf_context(tape, 4, 16, 2);
  auto [ta, to] = encode_primitives(tape, *bb, actx, octx, embed);
  CHECK(bb->counters().text_calls == 5);
  CHECK(ad::val(ta).rows() == 3);
  CHECK(ad::val(to).rows() == 2);

  PrimitiveVocab tiny({"a"}, {"o"});
  VocabEmbedding tiny_embed(tiny, 16, 0);
  bb->counters().reset();
  encode_primitives(tape, *bb, actx, octx, tiny_embed);
  CHECK(bb->counters().text_calls == 2);
}

TEST_CASE("pair table call count is the product of vocab sizes") {
  PrimitiveVocab vocab({"a0", "a1", "a2"}, {"o0", "o1"});
  auto bb = backbone();
  VocabEmbedding embed(vocab, 16, 0);
  std::vector<PairComposition> pairs;
  for (AttributeId a = 0; a < 3; ++a)
    for (ObjectId o = 0; o < 2; ++o) pairs.push_back({a, o});
  ad::Tape tape;
  ad::Var ctx = leaf_context(tape, 4, 16);
  ad::Var table = encode_pairs(tape, *bb, ctx, embed, pairs);
  CHECK(bb->counters().text_calls == 6);
  CHECK(ad::val(table).rows() == 6);
}

TEST_CASE("synthetic backbone is deterministic and shape-stable") {
  SynthConfig cfg;
  cfg.train_samples = 4;
  cfg.val_samples = 1;
  cfg.test_samples = 1;
  cfg.feature_dim = 16;
  cfg.composition_pool = 6;
  auto [manifest, truth] = generate_synthetic(cfg, 11);
  auto bb = backbone();
  const auto& s = manifest.samples().front();
  auto [cls1, patches1] = bb->image_encode(s);
  auto [cls2, patches2] = bb->image_encode(s);
  CHECK(cls1 == cls2);
  CHECK(patches1 == patches2);
  CHECK(patches1.rows() == s.features->patches.rows());
  // e == d: identity projection returns the payload unchanged
  CHECK(cls1.transpose() == s.features->cls);

  SampleRecord no_payload;
  no_payload.sample_id = "x";
  no_payload.label.attr_set = {0};
  CHECK_THROWS_AS(bb->image_encode(no_payload), Error);
}

TEST_CASE("text table rows are permutation-equivariant in the vocab order") {
  auto bb = backbone();
  ad::Tape tape;
  ad::Var actx = leaf_context(tape, 4, 16, 1);
  ad::Var octx = leaf_context(tape, 4, 16, 2);
  PrimitiveVocab vocab({"a0", "a1", "a2"}, {"o0"});
  PrimitiveVocab permuted({"a2", "a0", "a1"}, {"o0"});
  VocabEmbedding embed(vocab, 16, 5), embed_p(permuted, 16, 5);
  auto [ta, to] = encode_primitives(tape, *bb, actx, octx, embed);
  auto [tb, tob] = encode_primitives(tape, *bb, actx, octx, embed_p);
  // permuted vocab row i names vocab row perm[i]
  const int perm[3] = {2, 0, 1};
  for (int i = 0; i < 3; ++i) CHECK(ad::val(tb).row(i) == ad::val(ta).row(perm[i]));
}

TEST_CASE("gradients reach prompt contexts but frozen stores never change") {
  PrimitiveVocab vocab({"a0", "a1"}, {"o0"});
  auto bb = backbone();
  VocabEmbedding embed(vocab, 16, 0);
  const Eigen::MatrixXd frozen_attr = embed.attribute_rows();
  const Eigen::MatrixXd frozen_proj = bb->projection();

  ad::Tape tape;
  ad::Var actx = leaf_context(tape, 4, 16, 1);
  ad::Var octx = leaf_context(tape, 4, 16, 2);
  auto [ta, to] = encode_primitives(tape, *bb, actx, octx, embed);
  ad::Var loss = ad::sum_all(ad::matmul_nt(ta, to));
  tape.backward(loss);
  CHECK(tape.has_grad(actx));
  CHECK(tape.grad(actx).cwiseAbs().sum() > 0.0);
  CHECK(embed.attribute_rows() == frozen_attr);
  CHECK(bb->projection() == frozen_proj);
}

TEST_CASE("multi-word primitive names embed as the mean of word vectors") {
  PrimitiveVocab vocab({"ice cream", "ice", "cream"}, {"o"});
  VocabEmbedding embed(vocab, 16, 0);
  Eigen::RowVectorXd mean = (embed.attribute_row(1) + embed.attribute_row(2)) / 2.0;
  CHECK((embed.attribute_row(0) - mean).cwiseAbs().maxCoeff() < 1e-14);
}
