#pragma once

#include <string>

#include "semhash/hierarchy.hpp"
#include "semhash/rng.hpp"

namespace fixtures {

// root -> (A, B), A -> (a1, a2), B -> (b1)
inline constexpr const char* kSmallTree =
    "root A\n"
    "root B\n"
    "A a1\n"
    "A a2\n"
    "B b1\n";

// Five levels, twenty edges.
inline constexpr const char* kWordNetFragment =
    "# entity subtree\n"
    "entity physical_entity\n"
    "entity abstraction\n"
    "physical_entity object\n"
    "physical_entity matter\n"
    "object animal\n"
    "object artifact\n"
    "animal mammal\n"
    "animal bird\n"
    "mammal cat\n"
    "mammal dog\n"
    "mammal horse\n"
    "bird eagle\n"
    "bird sparrow\n"
    "artifact instrument\n"
    "artifact vehicle\n"
    "instrument guitar\n"
    "instrument piano\n"
    "\n"
    "vehicle car\n"
    "matter water\n"
    "abstraction music\n";

/// root -> s<a> -> m<a><b> -> l<a><b><c>: a three-level tree with
/// supers * mids * leaves leaves.
inline std::string three_level(int supers, int mids, int leaves) {
  std::string s;
  for (int a = 0; a < supers; ++a) {
    const std::string sa = "s" + std::to_string(a);
    s += "root " + sa + "\n";
    for (int b = 0; b < mids; ++b) {
      const std::string m = "m" + std::to_string(a) + "_" + std::to_string(b);
      s += sa + " " + m + "\n";
      for (int c = 0; c < leaves; ++c) {
        s += m + " l" + std::to_string(a) + "_" + std::to_string(b) + "_" + std::to_string(c) + "\n";
      }
    }
  }
  return s;
}

/// root -> S0, S1 with four leaves each.
inline constexpr const char* kTwoSuperclasses =
    "root S0\nroot S1\n"
    "S0 c0\nS0 c1\nS0 c2\nS0 c3\n"
    "S1 c4\nS1 c5\nS1 c6\nS1 c7\n";

/// Random tree: node i > 0 attaches to a uniformly chosen earlier node.
inline std::string random_tree(int nodes, semhash::Rng& rng) {
  std::string s;
  for (int i = 1; i < nodes; ++i) {
    s += "n" + std::to_string(rng.below(static_cast<std::uint64_t>(i))) + " n" +
         std::to_string(i) + "\n";
  }
  return s;
}

}  // namespace fixtures
