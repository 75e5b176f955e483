#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvpi {

using AttributeId = std::int32_t;
using ObjectId = std::int32_t;

enum class ErrorCode {
  malformed_file,
  unknown_primitive,
  duplicate_sample_id,
  empty_split,
  out_of_range,
  dimension_mismatch,
  infeasible_holdout,
  empty_solution_space,
  truth_outside_space,
  missing_payload,
  zero_norm,
  numeric_failure,
  invalid_config,
  io_failure,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

  // CLI exit-code convention: 1 = validation, 2 = numeric failure.
  int exit_code() const { return code_ == ErrorCode::numeric_failure ? 2 : 1; }

 private:
  ErrorCode code_;
};

}  // namespace mvpi
