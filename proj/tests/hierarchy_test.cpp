#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "semhash/hierarchy.hpp"
#include "test_util.hpp"

using namespace semhash;

namespace {

NodeId id_of(const Taxonomy& t, const char* name) { return *t.find(name); }

}  // namespace

TEST_CASE("parse_taxonomy builds the tree in first-appearance order") {
  const auto t = parse_taxonomy("root a\nroot b\na a1\na a2");
  CHECK(t.size() == 5);
  CHECK(t.node(t.root()).name == "root");
  CHECK(t.height() == 2);
  CHECK(t.node(0).name == "root");
  CHECK(t.node(1).name == "a");
  CHECK(t.node(3).name == "a1");
  CHECK(t.leaves() == std::vector<NodeId>{2, 3, 4});
}

TEST_CASE("parse_taxonomy on a five-level fragment") {
  const auto t = parse_taxonomy(fixtures::kWordNetFragment);
  CHECK(t.size() == 21);
  CHECK(t.height() == 5);
  CHECK(t.leaf_labels().size() == 10);
}

TEST_CASE("parse_taxonomy errors") {
  CHECK_THROWS_KIND(parse_taxonomy("a b\nb a"), ErrorKind::kCycleDetected);
  CHECK_THROWS_KIND(parse_taxonomy("r a\na b\nb c\nc a"), ErrorKind::kMultipleParents);
  CHECK_THROWS_KIND(parse_taxonomy("a a"), ErrorKind::kCycleDetected);
  CHECK_THROWS_KIND(parse_taxonomy("r x\nq x"), ErrorKind::kMultipleParents);
  CHECK_THROWS_KIND(parse_taxonomy("r x\nq y"), ErrorKind::kMultipleRoots);
  CHECK_THROWS_KIND(parse_taxonomy(""), ErrorKind::kEmptyInput);
  CHECK_THROWS_KIND(parse_taxonomy("# only a comment\n\n"), ErrorKind::kEmptyInput);
  CHECK_THROWS_KIND(parse_taxonomy("r a b"), ErrorKind::kMalformedLine);
  CHECK_THROWS_KIND(parse_taxonomy("r\n"), ErrorKind::kMalformedLine);
  // A cycle hanging off a proper tree.
  CHECK_THROWS_KIND(parse_taxonomy("r a\nx y\ny x"), ErrorKind::kCycleDetected);
}

TEST_CASE("duplicate edges are tolerated") {
  const auto t = parse_taxonomy("r a\nr a\nr b");
  CHECK(t.size() == 3);
}

TEST_CASE("lca on the small fixture") {
  const auto t = parse_taxonomy(fixtures::kSmallTree);
  const NodeId a1 = id_of(t, "a1"), a2 = id_of(t, "a2"), b = id_of(t, "B");
  CHECK(lca(t, a1, a1) == a1);
  CHECK(lca(t, a1, a2) == id_of(t, "A"));
  CHECK(lca(t, a1, b) == t.root());
  CHECK(lca(t, a1, a2) == oracle::lca(t, a1, a2));
  CHECK(lca(t, a1, b) == oracle::lca(t, a1, b));
  CHECK_THROWS_KIND(lca(t, a1, 99), ErrorKind::kUnknownNode);
}

TEST_CASE("semantic_distance on fixtures") {
  const auto t = parse_taxonomy(fixtures::kSmallTree);
  const NodeId a1 = id_of(t, "a1"), a2 = id_of(t, "a2"), b1 = id_of(t, "b1");
  CHECK(semantic_distance(t, a1, a1) == 0.0);
  CHECK(semantic_distance(t, a1, a2) == 0.5);
  CHECK(semantic_distance(t, a1, b1) == 1.0);
  CHECK_THROWS_KIND(semantic_distance(t, a1, id_of(t, "A")), ErrorKind::kNotALeaf);
  CHECK_THROWS_KIND(semantic_distance(t, a1, -1), ErrorKind::kUnknownNode);

  const auto w = parse_taxonomy(fixtures::kWordNetFragment);
  const double cat_dog = semantic_distance(w, id_of(w, "cat"), id_of(w, "dog"));
  const double cat_guitar = semantic_distance(w, id_of(w, "cat"), id_of(w, "guitar"));
  CHECK(cat_dog < cat_guitar);
  CHECK(cat_dog == doctest::Approx(1.0 / 5.0));
  CHECK(cat_guitar == doctest::Approx(3.0 / 5.0));
}

TEST_CASE("distance_matrix") {
  const auto t = parse_taxonomy(fixtures::kSmallTree);
  const std::vector<NodeId> one{id_of(t, "a1")};
  const auto single = distance_matrix(t, one);
  CHECK(single.values.rows() == 1);
  CHECK(single.values(0, 0) == 0.0);

  const auto m = distance_matrix(t, t.leaves());
  Matrix expected(3, 3);
  expected << 0, .5, 1, .5, 0, 1, 1, 1, 0;
  CHECK(m.values == expected);
}

TEST_CASE("random trees: distance properties against the ancestor-set oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const auto t = parse_taxonomy(fixtures::random_tree(3 + static_cast<int>(rng.below(30)), rng));
    const auto m = distance_matrix(t, t.leaves()).values;
    const auto n = m.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(m(i, i) == 0.0);
      for (Eigen::Index j = 0; j < n; ++j) {
        CHECK(m(i, j) == m(j, i));
        CHECK(m(i, j) >= 0.0);
        CHECK(m(i, j) <= 1.0);
        CHECK(m(i, j) == doctest::Approx(oracle::distance(t, t.leaves()[i], t.leaves()[j])));
        for (Eigen::Index k = 0; k < n; ++k) {
          CHECK(m(i, k) <= std::max(m(i, j), m(j, k)));
        }
      }
    }
    for (const auto& node : t.nodes()) {
      CHECK(t.subtree_height(node.id) == oracle::height_below(t, node.id));
    }
  }
}

TEST_CASE("ultrametric on a 16-leaf tree, exhaustive triples") {
  const auto t = parse_taxonomy(fixtures::three_level(2, 2, 4));
  REQUIRE(t.leaves().size() == 16);
  const auto m = distance_matrix(t, t.leaves()).values;
  int violations = 0;
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j)
      for (Eigen::Index k = 0; k < 16; ++k) violations += m(i, k) > std::max(m(i, j), m(j, k));
  CHECK(violations == 0);
}

TEST_CASE("serialize then parse reproduces the taxonomy") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = parse_taxonomy(fixtures::random_tree(2 + static_cast<int>(rng.below(40)), rng));
    const auto back = parse_taxonomy(serialize_taxonomy(t));
    REQUIRE(back.size() == t.size());
    CHECK(back.height() == t.height());
    for (const auto& node : t.nodes()) {
      const auto other = back.find(node.name);
      REQUIRE(other);
      const auto& mirrored = back.node(*other);
      CHECK(mirrored.parent.has_value() == node.parent.has_value());
      if (node.parent) CHECK(back.node(*mirrored.parent).name == t.node(*node.parent).name);
    }
  }
}
