#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvpi/core.hpp"

namespace mvpi {

// Canonical name form: lowercase, internal runs of whitespace collapsed to
// single spaces, trimmed.
inline std::string canonical_name(const std::string& raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// The attribute and object universes. Index position is the id.
class PrimitiveVocab {
 public:
  PrimitiveVocab(std::vector<std::string> attributes, std::vector<std::string> objects)
      : attributes_(std::move(attributes)), objects_(std::move(objects)) {
    for (auto& a : attributes_) a = canonical_name(a);
    for (auto& o : objects_) o = canonical_name(o);
    if (attributes_.empty() || objects_.empty())
      throw Error(ErrorCode::malformed_file, "vocab: attribute and object sets must be non-empty");
    index_unique(attributes_, attr_index_, "attribute");
    index_unique(objects_, obj_index_, "object");
  }

  std::size_t num_attributes() const { return attributes_.size(); }
  std::size_t num_objects() const { return objects_.size(); }

  const std::string& attribute_name(AttributeId id) const { return attributes_.at(static_cast<std::size_t>(id)); }
  const std::string& object_name(ObjectId id) const { return objects_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::vector<std::string>& objects() const { return objects_; }

  AttributeId attribute_id(const std::string& name) const {
    auto it = attr_index_.find(canonical_name(name));
    if (it == attr_index_.end())
      throw Error(ErrorCode::unknown_primitive, "unknown attribute: " + name);
    return it->second;
  }
  ObjectId object_id(const std::string& name) const {
    auto it = obj_index_.find(canonical_name(name));
    if (it == obj_index_.end())
      throw Error(ErrorCode::unknown_primitive, "unknown object: " + name);
    return it->second;
  }

  bool attribute_in_range(AttributeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < attributes_.size();
  }
  bool object_in_range(ObjectId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < objects_.size();
  }

 private:
  static void index_unique(const std::vector<std::string>& names,
                           std::unordered_map<std::string, std::int32_t>& index,
                           const char* kind) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!index.emplace(names[i], static_cast<std::int32_t>(i)).second)
        throw Error(ErrorCode::malformed_file, std::string("duplicate ") + kind + " name: " + names[i]);
    }
  }

  std::vector<std::string> attributes_;
  std::vector<std::string> objects_;
  std::unordered_map<std::string, std::int32_t> attr_index_;
  std::unordered_map<std::string, std::int32_t> obj_index_;
};

// Ground-truth label: a non-empty attribute set composed with one object.
struct MultiAttrLabel {
  std::set<AttributeId> attr_set;
  ObjectId object = 0;

  void validate(const PrimitiveVocab& vocab) const {
    if (attr_set.empty())
      throw Error(ErrorCode::malformed_file, "label: attribute set must be non-empty");
    for (AttributeId a : attr_set)
      if (!vocab.attribute_in_range(a))
        throw Error(ErrorCode::out_of_range, "label: attribute id out of range");
    if (!vocab.object_in_range(object))
      throw Error(ErrorCode::out_of_range, "label: object id out of range");
  }

  auto operator<=>(const MultiAttrLabel&) const = default;
};

// A single attribute-object pairing, the unit the ranking operates on.
struct PairComposition {
  AttributeId attribute = 0;
  ObjectId object = 0;

  auto operator<=>(const PairComposition&) const = default;
};

// {<a, o> : a in S} for one label.
inline std::set<PairComposition> expand_pairs(const MultiAttrLabel& label) {
  std::set<PairComposition> out;
  for (AttributeId a : label.attr_set) out.insert({a, label.object});
  return out;
}

}  // namespace mvpi
