#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ngtr/teds.hpp"
#include "support/ted_oracle.hpp"
#include "support/tree_gen.hpp"

using namespace ngtr;
using Catch::Approx;

namespace {

MarkupTree tree(const std::string& markup) { return parse_markup(markup); }

MarkupTree table_only() {
  MarkupTree t;
  t.root = MarkupNode{MarkupNode::Tag::Table};
  return t;
}

}  // namespace

TEST_CASE("tree_edit_distance matches hand-worked cases") {
  MarkupTree minimal = tree("<table><tr><td>a</td></tr></table>");
  CHECK(tree_edit_distance(minimal, minimal) == 0.0);
  // frozen from the oracle: growing table -> table/tr/td(a) takes two insertions
  CHECK(tree_edit_distance(table_only(), minimal) == Approx(2.0));
  // frozen from oracle + hand Levenshtein: abc vs abd differ in 1 of 3 chars
  MarkupTree abc = tree("<table><tr><td>abc</td></tr></table>");
  MarkupTree abd = tree("<table><tr><td>abd</td></tr></table>");
  CHECK(tree_edit_distance(abc, abd) == Approx(1.0 / 3.0));
}

TEST_CASE("tree_edit_distance equals the exhaustive oracle on random pairs") {
  std::mt19937_64 rng(42);
  auto compare = [&](int max_nodes, int trials) {
    for (int trial = 0; trial < trials; ++trial) {
      MarkupTree a = treegen::random_tree(rng, max_nodes);
      MarkupTree b = treegen::random_tree(rng, max_nodes);
      for (bool struct_only : {false, true}) {
        CostModel cost;
        cost.mode = struct_only ? CostModel::Mode::StructOnly : CostModel::Mode::Full;
        double got = tree_edit_distance(a, b, cost);
        double expected = oracle::tree_distance(a, b, struct_only);
        INFO("max_nodes " << max_nodes << " trial " << trial << " struct_only " << struct_only);
        REQUIRE(got == Approx(expected).margin(1e-9));
      }
    }
  };
  compare(8, 200);
  compare(14, 30);  // deeper keyroot interactions
}

TEST_CASE("teds follows the 1 - dist/max(size) formula") {
  MarkupTree minimal = tree("<table><tr><td>a</td></tr></table>");
  SECTION("identical trees score 1.0") {
    TedsScore s = teds(minimal, minimal);
    CHECK(s.value == 1.0);
    CHECK(s.edit_distance == 0.0);
    CHECK(s.size_a == 3);
  }
  SECTION("bare table vs minimal table") {
    TedsScore s = teds(table_only(), minimal);
    CHECK(s.value == Approx(1.0 - 2.0 / 3.0));
    CHECK(s.size_b == 3);
  }
  SECTION("struct-only ignores content differences") {
    MarkupTree other = tree("<table><tr><td>different text</td></tr></table>");
    CHECK(teds(minimal, other, CostModel::Mode::StructOnly).value == 1.0);
    CHECK(teds(minimal, other, CostModel::Mode::Full).value < 1.0);
  }
  SECTION("both trees empty is degenerate") {
    CHECK_THROWS_AS(teds(MarkupTree{}, MarkupTree{}), DegenerateError);
  }
  SECTION("empty prediction scores 0") {
    CHECK(teds(MarkupTree{}, minimal).value == 0.0);
  }
}

TEST_CASE("teds symmetry and range on random table trees") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    MarkupTree a = treegen::random_table_tree(rng);
    MarkupTree b = treegen::random_table_tree(rng);
    TedsScore ab = teds(a, b);
    TedsScore ba = teds(b, a);
    REQUIRE(ab.value == Approx(ba.value).margin(1e-12));
    REQUIRE(ab.value >= 0.0);
    REQUIRE(ab.value <= 1.0);
    REQUIRE(teds(a, a).value == 1.0);
  }
}

TEST_CASE("struct-only score is invariant under content rewrites") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    MarkupTree a = treegen::random_table_tree(rng);
    MarkupTree b = treegen::random_table_tree(rng);
    double before = teds(a, b, CostModel::Mode::StructOnly).value;
    MarkupTree b2 = b;
    treegen::rewrite_contents(*b2.root, rng);
    MarkupTree a2 = a;
    treegen::rewrite_contents(*a2.root, rng);
    REQUIRE(teds(a, b2, CostModel::Mode::StructOnly).value == Approx(before).margin(1e-12));
    REQUIRE(teds(a2, b2, CostModel::Mode::StructOnly).value == Approx(before).margin(1e-12));
  }
}

TEST_CASE("micro_f1 counts multiset matches") {
  CHECK(micro_f1({"a", "b", "c"}, {"a", "b", "c"}) == 1.0);
  CHECK(micro_f1({"a", "b"}, {"a", "b", "c"}) == Approx(0.8));
  CHECK(micro_f1({}, {"a"}) == 0.0);
  CHECK(micro_f1({"a"}, {}) == 0.0);
  CHECK(micro_f1({}, {}) == 0.0);  // denominators zero -> 0 by definition
  SECTION("duplicates match as multiset") {
    CHECK(micro_f1({"a", "a"}, {"a"}) == Approx(2.0 / 3.0));
  }
  SECTION("permutation invariance") {
    std::mt19937_64 rng(5);
    std::vector<std::string> pred = {"a", "b", "b", "c", "d"};
    std::vector<std::string> gold = {"b", "c", "c", "e"};
    double base = micro_f1(pred, gold);
    for (int i = 0; i < 20; ++i) {
      std::shuffle(pred.begin(), pred.end(), rng);
      std::shuffle(gold.begin(), gold.end(), rng);
      REQUIRE(micro_f1(pred, gold) == Approx(base));
    }
  }
}

TEST_CASE("exact_accuracy applies the text normalizer") {
  CHECK(exact_accuracy(std::pair{4, 5}, std::pair{4, 5}) == 1);
  CHECK(exact_accuracy(std::pair{4, 5}, std::pair{5, 5}) == 0);
  CHECK(exact_accuracy(" Total ", "Total") == 1);
  CHECK(exact_accuracy("To  tal", "To tal") == 1);
  CHECK(exact_accuracy("Total", "Subtotal") == 0);
  SECTION("NFC unifies composed and decomposed accents") {
    // U+00E9 vs e + U+0301
    CHECK(exact_accuracy("caf\xc3\xa9", "cafe\xcc\x81") == 1);
    CHECK(normalize_text("cafe\xcc\x81") == "caf\xc3\xa9");
  }
  SECTION("normalized Levenshtein counts codepoints, not bytes") {
    CHECK(normalized_levenshtein("caf\xc3\xa9", "cafe") == Approx(0.25));
    CHECK(levenshtein("abc", "abd") == 1);
  }
}

TEST_CASE("f1 counts expose precision and recall") {
  F1Counts c = f1_counts({"a", "b"}, {"a", "b", "c"});
  CHECK(c.tp == 2);
  CHECK(c.fp == 0);
  CHECK(c.fn == 1);
  CHECK(c.precision() == 1.0);
  CHECK(c.recall() == Approx(2.0 / 3.0));
}
