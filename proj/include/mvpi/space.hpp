#pragma once

#include <set>
#include <vector>

#include "mvpi/manifest.hpp"
#include "mvpi/vocab.hpp"

namespace mvpi {

enum class World { closed, open };

inline const char* world_name(World w) { return w == World::closed ? "closed" : "open"; }

inline World parse_world(const std::string& s) {
  if (s == "closed") return World::closed;
  if (s == "open") return World::open;
  throw Error(ErrorCode::invalid_config, "unknown world: " + s);
}

// The candidate pair set the ranking is restricted to. Pairs are kept in
// attribute-major order (the std::set ordering of PairComposition).
struct SolutionSpace {
  World world = World::open;
  std::set<PairComposition> pairs;

  std::vector<PairComposition> ordered_pairs() const {
    return {pairs.begin(), pairs.end()};
  }
};

// Pair-level seen set: every <a,o> expanded from a train label.
struct PairSeenSet {
  std::set<PairComposition> pairs;

  bool contains(const PairComposition& p) const { return pairs.count(p) > 0; }
};

inline SolutionSpace build_solution_space(const DatasetManifest& manifest, World world) {
  SolutionSpace space;
  space.world = world;
  if (world == World::open) {
    for (std::size_t a = 0; a < manifest.vocab().num_attributes(); ++a)
      for (std::size_t o = 0; o < manifest.vocab().num_objects(); ++o)
        space.pairs.insert({static_cast<AttributeId>(a), static_cast<ObjectId>(o)});
  } else {
    for (const auto& label : manifest.seen_compositions())
      for (const auto& p : expand_pairs(label)) space.pairs.insert(p);
    for (const auto& label : manifest.unseen_compositions())
      for (const auto& p : expand_pairs(label)) space.pairs.insert(p);
  }
  return space;
}

inline PairSeenSet build_pair_seen_set(const DatasetManifest& manifest) {
  PairSeenSet seen;
  bool any_train = false;
  for (const auto& s : manifest.samples()) {
    if (s.split != Split::train) continue;
    any_train = true;
    for (const auto& p : expand_pairs(s.label)) seen.pairs.insert(p);
  }
  if (!any_train) throw Error(ErrorCode::empty_split, "train split is empty");
  return seen;
}

}  // namespace mvpi
