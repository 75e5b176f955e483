#pragma once

#include <Eigen/Dense>
#include <set>
#include <vector>

#include "mvpi/autograd.hpp"
#include "mvpi/vocab.hpp"

namespace mvpi {

// Binary presence vector over the attribute universe for one sample.
inline Eigen::RowVectorXd attr_targets(const MultiAttrLabel& label, Eigen::Index num_attributes) {
  if (label.attr_set.empty())
    throw Error(ErrorCode::malformed_file, "attr_targets: at least one positive required");
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(num_attributes);
  for (AttributeId a : label.attr_set) y[a] = 1.0;
  return y;
}

// Multi-label BCE: mean over the batch, sum over attributes. logits are the
// (already tau-scaled) similarity scores, batch x |A|.
inline ad::Var attr_bce_loss(ad::Var logits, const Eigen::MatrixXd& targets) {
  const Eigen::Index batch = ad::val(logits).rows();
  if (targets.rows() != batch || targets.cols() != ad::val(logits).cols())
    throw Error(ErrorCode::dimension_mismatch, "attr_bce_loss: shape mismatch");
  for (Eigen::Index r = 0; r < batch; ++r)
    if (targets.row(r).sum() < 1.0)
      throw Error(ErrorCode::malformed_file, "attr_bce_loss: sample without positives");
  return ad::scale(ad::bce_with_logits_sum(logits, targets), 1.0 / static_cast<double>(batch));
}

// Standard CE over object logits, mean over the batch.
inline ad::Var obj_ce_loss(const std::vector<ad::Var>& per_sample_logits,
                           const std::vector<ObjectId>& targets) {
  if (per_sample_logits.empty() || per_sample_logits.size() != targets.size())
    throw Error(ErrorCode::dimension_mismatch, "obj_ce_loss: batch mismatch");
  ad::Var total = ad::ce_with_logits(per_sample_logits[0], targets[0]);
  for (std::size_t i = 1; i < per_sample_logits.size(); ++i)
    total = ad::add(total, ad::ce_with_logits(per_sample_logits[i], targets[i]));
  return ad::scale(total, 1.0 / static_cast<double>(per_sample_logits.size()));
}

// Multi-label BCE over the pair table (composition-branch baseline).
inline ad::Var pair_bce_loss(ad::Var logits, const Eigen::MatrixXd& pair_targets) {
  return attr_bce_loss(logits, pair_targets);
}

// Unweighted sum of the two branch losses.
inline ad::Var total_loss(ad::Var attr_loss, ad::Var obj_loss) {
  if (!ad::val(attr_loss).allFinite() || !ad::val(obj_loss).allFinite())
    throw Error(ErrorCode::numeric_failure, "total_loss: non-finite branch loss");
  return ad::add(attr_loss, obj_loss);
}

}  // namespace mvpi
