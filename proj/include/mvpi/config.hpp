#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvpi/core.hpp"

namespace mvpi {

// Flat view of a TOML-subset config file: `[section.sub]` headers plus
// scalar `key = value` lines (strings, numbers, booleans, # comments). Keys
// are stored fully qualified ("integrator.mask.attr_obj").
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_failure, "cannot open config: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
  }

  static ConfigMap parse(const std::string& text, const std::string& origin = "<string>") {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string trimmed = strip_comment_and_trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw Error(ErrorCode::malformed_file,
                      origin + ":" + std::to_string(lineno) + ": unterminated section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::malformed_file,
                    origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty() || value.empty())
        throw Error(ErrorCode::malformed_file,
                    origin + ":" + std::to_string(lineno) + ": empty key or value");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_config, "config key " + key + " is not an integer: " + it->second);
    }
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_config, "config key " + key + " is not a number: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw Error(ErrorCode::invalid_config, "config key " + key + " is not a boolean: " + it->second);
  }

  // Rejects any key not in the schema.
  void validate_known(const std::set<std::string>& schema) const {
    for (const auto& [key, value] : values_)
      if (!schema.count(key))
        throw Error(ErrorCode::invalid_config, "unknown config key: " + key);
  }

  // Stable canonical form used for the checkpoint/report config hash.
  std::string canonical() const {
    std::string out;
    for (const auto& [key, value] : values_) out += key + "=" + value + "\n";
    return out;
  }

  std::string hash_hex() const {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : canonical()) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment_and_trim(const std::string& s) {
    bool in_string = false;
    std::string out;
    for (char c : s) {
      if (c == '"') in_string = !in_string;
      if (c == '#' && !in_string) break;
      out.push_back(c);
    }
    return trim(out);
  }

  std::map<std::string, std::string> values_;
};

inline const std::set<std::string>& run_config_schema() {
  static const std::set<std::string> schema = {
      "seed",
      "out",
      "data.manifest",
      "backbone.kind",
      "backbone.token_dim",
      "backbone.embed_dim",
      "model.context_length",
      "integrator.layers",
      "integrator.heads",
      "integrator.ff_dim",
      "integrator.logit_scale",
      "integrator.mask.attr_obj",
      "integrator.mask.attr_attr",
      "integrator.mask.all_primitives",
      "training.epochs",
      "training.batch_size",
      "training.learning_rate",
      "training.weight_decay",
      "training.use_logit_scale",
      "evaluation.world",
      "bench.samples",
      "bench.warmup",
      "bench.baseline",
      "synth.num_attributes",
      "synth.num_objects",
      "synth.feature_dim",
      "synth.train_samples",
      "synth.val_samples",
      "synth.test_samples",
      "synth.min_attrs_per_image",
      "synth.max_attrs_per_image",
      "synth.distractor_patches",
      "synth.noise_sigma",
      "synth.unseen_holdout",
      "synth.composition_pool",
  };
  return schema;
}

}  // namespace mvpi
