#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvpi/manifest.hpp"

namespace mvpi {

// Table-I-style dataset statistics. Counts cover all splits; flagged in the
// report metadata since some published tables may count train only.
struct DatasetStats {
  double avg_attr = 0.0;  // mean distinct attribute classes per object class
  double avg_obj = 0.0;   // mean distinct object classes per attribute class
  std::map<std::size_t, std::size_t> label_count_histogram;  // #attrs-per-image -> image count
  Eigen::MatrixXi cooccurrence;                              // |A| x |A|, symmetric
  std::vector<std::size_t> images_per_attribute;
  std::vector<std::size_t> images_per_object;
  std::size_t total_images = 0;
};

inline DatasetStats compute_stats(const DatasetManifest& manifest) {
  const auto& vocab = manifest.vocab();
  const auto num_attrs = static_cast<Eigen::Index>(vocab.num_attributes());
  DatasetStats stats;
  stats.cooccurrence = Eigen::MatrixXi::Zero(num_attrs, num_attrs);
  stats.images_per_attribute.assign(vocab.num_attributes(), 0);
  stats.images_per_object.assign(vocab.num_objects(), 0);

  std::vector<std::set<AttributeId>> attrs_of_object(vocab.num_objects());
  std::vector<std::set<ObjectId>> objects_of_attr(vocab.num_attributes());

  for (const auto& s : manifest.samples()) {
    ++stats.total_images;
    ++stats.label_count_histogram[s.label.attr_set.size()];
    ++stats.images_per_object[static_cast<std::size_t>(s.label.object)];
    for (AttributeId a : s.label.attr_set) {
      ++stats.images_per_attribute[static_cast<std::size_t>(a)];
      attrs_of_object[static_cast<std::size_t>(s.label.object)].insert(a);
      objects_of_attr[static_cast<std::size_t>(a)].insert(s.label.object);
      for (AttributeId b : s.label.attr_set) stats.cooccurrence(a, b) += (a <= b) ? 1 : 0;
    }
  }
  // Mirror the upper triangle.
  for (Eigen::Index i = 0; i < num_attrs; ++i)
    for (Eigen::Index j = 0; j < i; ++j) stats.cooccurrence(i, j) = stats.cooccurrence(j, i);

  double attr_sum = 0.0;
  for (const auto& set : attrs_of_object) attr_sum += static_cast<double>(set.size());
  stats.avg_attr = attr_sum / static_cast<double>(vocab.num_objects());

  double obj_sum = 0.0;
  for (const auto& set : objects_of_attr) obj_sum += static_cast<double>(set.size());
  stats.avg_obj = obj_sum / static_cast<double>(vocab.num_attributes());

  return stats;
}

inline nlohmann::json stats_to_json(const DatasetStats& stats) {
  nlohmann::json j;
  j["avg_attr"] = stats.avg_attr;
  j["avg_obj"] = stats.avg_obj;
  j["total_images"] = stats.total_images;
  j["counting_scope"] = "all_splits";
  auto& hist = j["label_count_histogram"] = nlohmann::json::object();
  for (const auto& [k, v] : stats.label_count_histogram) hist[std::to_string(k)] = v;
  j["images_per_attribute"] = stats.images_per_attribute;
  j["images_per_object"] = stats.images_per_object;
  auto& cooc = j["cooccurrence"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < stats.cooccurrence.rows(); ++i) {
    std::vector<int> row(stats.cooccurrence.row(i).begin(), stats.cooccurrence.row(i).end());
    cooc.push_back(row);
  }
  return j;
}

}  // namespace mvpi
