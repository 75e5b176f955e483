#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mvpi/params.hpp"

namespace mvpi {

struct CheckpointMeta {
  std::string config_hash;
  std::uint64_t optimizer_steps = 0;
  std::uint64_t epochs_done = 0;
};

inline void save_checkpoint(const ParamSet& params, const CheckpointMeta& meta,
                            const std::string& path) {
  nlohmann::json j;
  j["format"] = "mvpi-checkpoint-v1";
  j["config_hash"] = meta.config_hash;
  j["optimizer_steps"] = meta.optimizer_steps;
  j["epochs_done"] = meta.epochs_done;
  auto& tensors = j["params"] = nlohmann::json::object();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    nlohmann::json jt;
    jt["rows"] = p.value.rows();
    jt["cols"] = p.value.cols();
    jt["data"] = std::vector<double>(p.value.data(), p.value.data() + p.value.size());
    tensors[p.name] = std::move(jt);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

inline CheckpointMeta load_checkpoint(ParamSet& params, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_file, std::string("checkpoint parse error: ") + e.what());
  }
  if (j.value("format", "") != "mvpi-checkpoint-v1")
    throw Error(ErrorCode::malformed_file, "unrecognized checkpoint format");
  CheckpointMeta meta;
  meta.config_hash = j.value("config_hash", "");
  meta.optimizer_steps = j.value("optimizer_steps", 0ull);
  meta.epochs_done = j.value("epochs_done", 0ull);
  const auto& tensors = j.at("params");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!tensors.contains(p.name))
      throw Error(ErrorCode::malformed_file, "checkpoint missing tensor: " + p.name);
    const auto& jt = tensors.at(p.name);
    const auto rows = jt.at("rows").get<Eigen::Index>();
    const auto cols = jt.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols())
      throw Error(ErrorCode::dimension_mismatch, "checkpoint tensor shape mismatch: " + p.name);
    auto data = jt.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != p.value.size())
      throw Error(ErrorCode::dimension_mismatch, "checkpoint tensor size mismatch: " + p.name);
    p.value = Eigen::Map<Eigen::MatrixXd>(data.data(), rows, cols);
  }
  return meta;
}

}  // namespace mvpi
