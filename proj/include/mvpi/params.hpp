#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mvpi/autograd.hpp"

namespace mvpi {

// Named trainable tensors. Each forward pass stages them as tape leaves;
// after backward() the gradients are pulled back out by name order.
class ParamSet {
 public:
  struct Param {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::int64_t tape_index = -1;
  };

  std::size_t add(std::string name, Eigen::MatrixXd value) {
    params_.push_back({std::move(name), std::move(value), {}, -1});
    return params_.size() - 1;
  }

  void stage(ad::Tape& tape) {
    for (auto& p : params_) {
      ad::Var v = tape.leaf(p.value);
      p.tape_index = v.index;
    }
    tape_ = &tape;
  }

  ad::Var var(std::size_t i) const {
    const auto& p = params_.at(i);
    if (p.tape_index < 0) throw Error(ErrorCode::numeric_failure, "parameter not staged: " + p.name);
    return {tape_, p.tape_index};
  }

  void pull_grads() {
    for (auto& p : params_) {
      ad::Var v{tape_, p.tape_index};
      if (tape_ && p.tape_index >= 0 && tape_->has_grad(v))
        p.grad = tape_->grad(v);
      else
        p.grad = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
    }
  }

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::vector<Param> params_;
  ad::Tape* tape_ = nullptr;
};

}  // namespace mvpi
