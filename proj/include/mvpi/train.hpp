#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <vector>

#include "mvpi/losses.hpp"
#include "mvpi/model.hpp"

namespace mvpi {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool use_logit_scale = true;

  void validate() const {
    if (epochs == 0 || batch_size == 0 || learning_rate <= 0.0 || weight_decay < 0.0)
      throw Error(ErrorCode::invalid_config, "train: epochs/batch/lr must be positive");
  }
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& params) {
    ++t_;
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = Eigen::MatrixXd::Zero(params[i].value.rows(), params[i].value.cols());
        v_[i] = m_[i];
      }
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * p.grad.array().square()).matrix();
      const Eigen::ArrayXXd mhat = m_[i].array() / bc1;
      const Eigen::ArrayXXd vhat = v_[i].array() / bc2;
      p.value.array() -= lr_ * (mhat / (vhat.sqrt() + eps_) + wd_ * p.value.array());
    }
  }

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct TrainStepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss_attr = 0.0;
  double loss_obj = 0.0;
  double loss_total = 0.0;
};

struct BatchLoss {
  ad::Var total;
  double attr_value = 0.0;
  double obj_value = 0.0;
};

// Builds the batch loss graph: BCE on the attribute branch plus CE on the
// object branch over tau-scaled cosine logits.
inline BatchLoss batch_loss(ad::Tape& tape, DualBranchModel& model,
                            DualBranchModel::TextTable& text,
                            const std::vector<const SampleRecord*>& batch, double logit_scale) {
  if (batch.empty()) throw Error(ErrorCode::empty_split, "batch_loss: empty batch");
  const Eigen::Index num_attrs = ad::val(text.attr_text).rows();
  std::vector<ad::Var> attr_rows, obj_rows;
  std::vector<ObjectId> obj_targets;
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(batch.size()), num_attrs);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto [s_attr, s_obj] = model.score_sample(tape, text, *batch[i]);
    attr_rows.push_back(ad::scale(s_attr, logit_scale));
    obj_rows.push_back(ad::scale(s_obj, logit_scale));
    targets.row(static_cast<Eigen::Index>(i)) = attr_targets(batch[i]->label, num_attrs);
    obj_targets.push_back(batch[i]->label.object);
  }
  ad::Var attr_logits = ad::concat_rows(attr_rows);
  ad::Var l_attr = attr_bce_loss(attr_logits, targets);
  ad::Var l_obj = obj_ce_loss(obj_rows, obj_targets);
  BatchLoss out{total_loss(l_attr, l_obj), ad::val(l_attr)(0, 0), ad::val(l_obj)(0, 0)};
  return out;
}

// One pass over the shuffled train split. Updates only the staged trainable
// parameters (prompt contexts + integrator); vocab embeddings and backbone
// are never touched.
inline std::vector<TrainStepRecord> train_epoch(DualBranchModel& model,
                                                const DatasetManifest& manifest,
                                                const TrainConfig& config, AdamW& optimizer,
                                                std::size_t epoch) {
  config.validate();
  auto train = manifest.split_samples(Split::train);
  if (train.empty()) throw Error(ErrorCode::empty_split, "train_epoch: train split is empty");
  std::mt19937_64 rng(config.seed * 1000003ull + epoch);
  std::shuffle(train.begin(), train.end(), rng);
  const double tau = config.use_logit_scale ? model.config().integrator.logit_scale : 1.0;

  std::vector<TrainStepRecord> log;
  std::size_t step = 0;
  for (std::size_t at = 0; at < train.size(); at += config.batch_size) {
    const std::size_t n = std::min(config.batch_size, train.size() - at);
    std::vector<const SampleRecord*> batch(train.begin() + static_cast<std::ptrdiff_t>(at),
                                           train.begin() + static_cast<std::ptrdiff_t>(at + n));
    ad::Tape tape;
    auto text = model.encode_text(tape);
    BatchLoss loss = batch_loss(tape, model, text, batch, tau);
    const double total = ad::val(loss.total)(0, 0);
    if (!std::isfinite(total))
      throw Error(ErrorCode::numeric_failure, "train_epoch: non-finite loss at step " +
                                                  std::to_string(step));
    tape.backward(loss.total);
    model.params().pull_grads();
    optimizer.step(model.params());
    log.push_back({epoch, step, loss.attr_value, loss.obj_value, total});
    ++step;
  }
  return log;
}

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Central finite differences against the analytic gradients on a random
// subset of trainable scalars. Meant for small double-precision models.
inline GradCheckReport grad_check(DualBranchModel& model,
                                  const std::vector<const SampleRecord*>& batch, double epsilon,
                                  std::size_t min_samples = 50, std::uint64_t seed = 0) {
  const double tau = model.config().integrator.logit_scale;
  auto loss_value = [&]() {
    ad::Tape tape;
    auto text = model.encode_text(tape);
    return ad::val(batch_loss(tape, model, text, batch, tau).total)(0, 0);
  };

  // Analytic pass.
  {
    ad::Tape tape;
    auto text = model.encode_text(tape);
    BatchLoss loss = batch_loss(tape, model, text, batch, tau);
    tape.backward(loss.total);
    model.params().pull_grads();
  }

  std::mt19937_64 rng(seed);
  ParamSet& params = model.params();
  const std::size_t total_scalars = params.scalar_count();
  const std::size_t want = std::min(total_scalars, std::max<std::size_t>(min_samples, 50));

  GradCheckReport report;
  std::uniform_int_distribution<std::size_t> param_pick(0, params.size() - 1);
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t pi = param_pick(rng);
    auto& p = params[pi];
    std::uniform_int_distribution<Eigen::Index> entry_pick(0, p.value.size() - 1);
    const Eigen::Index e = entry_pick(rng);
    const double saved = p.value.data()[e];
    const double analytic = p.grad.data()[e];
    p.value.data()[e] = saved + epsilon;
    const double up = loss_value();
    p.value.data()[e] = saved - epsilon;
    const double down = loss_value();
    p.value.data()[e] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
    report.max_relative_error =
        std::max(report.max_relative_error, std::abs(analytic - numeric) / denom);
    ++report.checked;
  }
  return report;
}

}  // namespace mvpi
