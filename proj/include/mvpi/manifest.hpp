#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvpi/core.hpp"
#include "mvpi/vocab.hpp"

namespace mvpi {

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error(ErrorCode::malformed_file, "unknown split: " + s);
}

// Synthetic feature bundle: one cls vector plus P patch vectors, all dim D.
struct FeatureBundle {
  Eigen::VectorXd cls;
  Eigen::MatrixXd patches;  // P x D

  void validate() const {
    if (patches.rows() < 1)
      throw Error(ErrorCode::malformed_file, "feature bundle needs at least one patch");
    if (patches.cols() != cls.size())
      throw Error(ErrorCode::dimension_mismatch, "patch dim != cls dim");
    if (!cls.allFinite() || !patches.allFinite())
      throw Error(ErrorCode::numeric_failure, "non-finite feature values");
  }
};

struct SampleRecord {
  std::string sample_id;
  Split split = Split::train;
  MultiAttrLabel label;
  std::optional<FeatureBundle> features;
  std::optional<std::string> image_path;
};

class DatasetManifest {
 public:
  DatasetManifest(PrimitiveVocab vocab, std::vector<SampleRecord> samples)
      : vocab_(std::move(vocab)), samples_(std::move(samples)) {
    if (samples_.empty())
      throw Error(ErrorCode::empty_split, "manifest has no samples");
    std::set<std::string> ids;
    for (const auto& s : samples_) {
      if (!ids.insert(s.sample_id).second)
        throw Error(ErrorCode::duplicate_sample_id, "duplicate sample_id: " + s.sample_id);
      s.label.validate(vocab_);
      if (s.features) s.features->validate();
    }
    derive_composition_sets();
  }

  const PrimitiveVocab& vocab() const { return vocab_; }
  const std::vector<SampleRecord>& samples() const { return samples_; }

  // Distinct <S,o> in train.
  const std::set<MultiAttrLabel>& seen_compositions() const { return seen_; }
  // Distinct <S,o> in val+test absent from the seen set.
  const std::set<MultiAttrLabel>& unseen_compositions() const { return unseen_; }

  std::vector<const SampleRecord*> split_samples(Split split) const {
    std::vector<const SampleRecord*> out;
    for (const auto& s : samples_)
      if (s.split == split) out.push_back(&s);
    return out;
  }

  bool is_seen_label(const MultiAttrLabel& label) const { return seen_.count(label) > 0; }

 private:
  void derive_composition_sets() {
    for (const auto& s : samples_) {
      if (s.split == Split::train) seen_.insert(s.label);
    }
    for (const auto& s : samples_) {
      if (s.split != Split::train && seen_.count(s.label) == 0) unseen_.insert(s.label);
    }
  }

  PrimitiveVocab vocab_;
  std::vector<SampleRecord> samples_;
  std::set<MultiAttrLabel> seen_;
  std::set<MultiAttrLabel> unseen_;
};

// ---- JSON serialization -----------------------------------------------------
//
// Manifest file layout:
//   { "attributes": [...], "objects": [...],
//     "samples": [ {"id", "split", "object", "attrs",
//                   "features"?: {"cls": [...], "patches": [[...], ...]},
//                   "image_path"?: "..."} ] }

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["attributes"] = m.vocab().attributes();
  j["objects"] = m.vocab().objects();
  auto& samples = j["samples"] = nlohmann::json::array();
  for (const auto& s : m.samples()) {
    nlohmann::json js;
    js["id"] = s.sample_id;
    js["split"] = split_name(s.split);
    js["object"] = m.vocab().object_name(s.label.object);
    auto& attrs = js["attrs"] = nlohmann::json::array();
    for (AttributeId a : s.label.attr_set) attrs.push_back(m.vocab().attribute_name(a));
    if (s.features) {
      nlohmann::json jf;
      jf["cls"] = std::vector<double>(s.features->cls.data(), s.features->cls.data() + s.features->cls.size());
      auto& patches = jf["patches"] = nlohmann::json::array();
      for (Eigen::Index p = 0; p < s.features->patches.rows(); ++p) {
        patches.push_back(std::vector<double>(s.features->patches.row(p).begin(),
                                              s.features->patches.row(p).end()));
      }
      js["features"] = std::move(jf);
    }
    if (s.image_path) js["image_path"] = *s.image_path;
    samples.push_back(std::move(js));
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("attributes") || !j.contains("objects") || !j.contains("samples"))
    throw Error(ErrorCode::malformed_file, "manifest: missing attributes/objects/samples");
  PrimitiveVocab vocab(j.at("attributes").get<std::vector<std::string>>(),
                       j.at("objects").get<std::vector<std::string>>());
  std::vector<SampleRecord> samples;
  for (const auto& js : j.at("samples")) {
    SampleRecord s;
    s.sample_id = js.at("id").get<std::string>();
    s.split = parse_split(js.at("split").get<std::string>());
    s.label.object = vocab.object_id(js.at("object").get<std::string>());
    for (const auto& a : js.at("attrs")) s.label.attr_set.insert(vocab.attribute_id(a.get<std::string>()));
    if (js.contains("features")) {
      FeatureBundle f;
      auto cls = js.at("features").at("cls").get<std::vector<double>>();
      f.cls = Eigen::Map<Eigen::VectorXd>(cls.data(), static_cast<Eigen::Index>(cls.size()));
      const auto& patches = js.at("features").at("patches");
      f.patches.resize(static_cast<Eigen::Index>(patches.size()), f.cls.size());
      Eigen::Index row = 0;
      for (const auto& p : patches) {
        auto v = p.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != f.cls.size())
          throw Error(ErrorCode::dimension_mismatch, "manifest: ragged patch rows");
        f.patches.row(row++) = Eigen::Map<Eigen::VectorXd>(v.data(), f.cls.size());
      }
      s.features = std::move(f);
    }
    if (js.contains("image_path")) s.image_path = js.at("image_path").get<std::string>();
    samples.push_back(std::move(s));
  }
  return DatasetManifest(std::move(vocab), std::move(samples));
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_file, std::string("manifest parse error: ") + e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_file, std::string("manifest schema error: ") + e.what());
  }
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write manifest: " + path);
  out << manifest_to_json(m).dump(2) << "\n";
}

}  // namespace mvpi
