#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "syntaxnav/treeio.hpp"

using namespace syntaxnav;

namespace {

std::string conllu_line(int id, const std::string& form, int head) {
  return std::to_string(id) + "\t" + form + "\t_\t_\t_\t_\t" + std::to_string(head) + "\t_\t_\t_\n";
}

// "Walk forward then turn right at the stairs then go down the stairs"
DependencyTree figure1_tree() {
  return DependencyTree::from_heads(
      {"Walk", "forward", "then", "turn", "right", "at", "the", "stairs", "then", "go", "down", "the", "stairs"},
      {0, 1, 4, 1, 4, 8, 8, 4, 10, 4, 10, 13, 10});
}

template <typename E>
void check_code(E&& fn, Errc expected) {
  try {
    fn();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == expected);
  }
}

}  // namespace

TEST_CASE("parse_conllu reads ID, FORM and HEAD") {
  const std::string doc = conllu_line(1, "Walk", 0) + conllu_line(2, "forward", 1) + conllu_line(3, ".", 1);
  const auto trees = parse_conllu(doc);
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].root == 1);
  CHECK(trees[0].children_of(1) == std::vector<int>{2, 3});
  CHECK(trees[0].token(3).form == ".");
}

TEST_CASE("parse_conllu handles comments, blank separators, ranges and empty nodes") {
  const std::string doc = "# sent_id = a\n" + conllu_line(1, "go", 0) + "\n\n# second\n" +
                          "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n" + conllu_line(1, "do", 0) + conllu_line(2, "n't", 1) +
                          "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n";
  const auto trees = parse_conllu(doc);
  REQUIRE(trees.size() == 2);
  CHECK(trees[0].size() == 1);
  CHECK(trees[1].size() == 2);
  CHECK(trees[1].token(2).form == "n't");
}

TEST_CASE("empty document gives no trees") {
  CHECK(parse_conllu("").empty());
  CHECK(parse_conllu("\n\n").empty());
}

TEST_CASE("parse_conllu errors carry sentence and line") {
  const std::string cycle = conllu_line(1, "a", 0) + "\n" + conllu_line(1, "walk", 0) + conllu_line(2, "x", 3) +
                            conllu_line(3, "y", 2);
  try {
    parse_conllu(cycle);
    FAIL("expected CycleDetected");
  } catch (const ParseError& e) {
    CHECK(e.code() == Errc::CycleDetected);
    CHECK(e.sentence() == 2);
    CHECK(e.line() >= 3);
  }
  check_code([] { parse_conllu("1\tx\t_\n"); }, Errc::MalformedLine);
  check_code([] { parse_conllu("one\tx\t_\t_\t_\t_\t0\t_\t_\t_\n"); }, Errc::MalformedLine);
  check_code([] { parse_conllu("1\tx\t_\t_\t_\t_\troot\t_\t_\t_\n"); }, Errc::MalformedLine);
  check_code([&] { parse_conllu(conllu_line(1, "a", 0) + conllu_line(2, "b", 0)); }, Errc::MultipleRoots);
  check_code([&] { parse_conllu(conllu_line(1, "a", 2) + conllu_line(2, "b", 1)); }, Errc::NoRoot);
  check_code([&] { parse_conllu(conllu_line(1, "a", 1)); }, Errc::CycleDetected);
}

TEST_CASE("stairs example tree validates and groups words under the verb heads") {
  const DependencyTree t = figure1_tree();
  CHECK_NOTHROW(validate_tree(t));
  CHECK(t.root == 1);
  CHECK(t.children_of(1) == std::vector<int>{2, 4});
  CHECK(t.children_of(4) == std::vector<int>{3, 5, 8, 10});
  CHECK(t.children_of(10) == std::vector<int>{9, 11, 13});
}

TEST_CASE("validate_tree rejects broken dependency trees") {
  DependencyTree t = figure1_tree();
  t.tokens[3].head = 0;  // "turn" becomes a second root
  check_code([&] { validate_tree(t); }, Errc::MultipleRoots);

  DependencyTree detached = figure1_tree();
  detached.children[4].clear();  // cached adjacency no longer matches heads
  CHECK_THROWS_AS(validate_tree(detached), Error);
}

TEST_CASE("bottom_up_order examples") {
  const auto chain = DependencyTree::from_heads({"a", "b", "c"}, {2, 3, 0});
  CHECK(bottom_up_order(chain) == std::vector<int>{1, 2, 3});
  const auto star = DependencyTree::from_heads({"a", "b", "c", "d"}, {0, 1, 1, 1});
  CHECK(bottom_up_order(star) == std::vector<int>{2, 3, 4, 1});
  const auto single = DependencyTree::from_heads({"a"}, {0});
  CHECK(bottom_up_order(single) == std::vector<int>{1});
}

TEST_CASE("bottom_up_order is topological on random trees") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const DependencyTree t = fixtures::random_dependency_tree(1 + static_cast<int>(rng() % 12), rng);
    const auto order = bottom_up_order(t);
    REQUIRE(order.size() == t.size());
    std::vector<int> pos(t.size() + 1);
    for (std::size_t i = 0; i < order.size(); ++i) pos[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    for (const Token& tok : t.tokens) {
      if (tok.head != 0) CHECK(pos[static_cast<std::size_t>(tok.index)] < pos[static_cast<std::size_t>(tok.head)]);
    }
  }
}

TEST_CASE("CoNLL-U round trip is the identity") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const DependencyTree t = fixtures::random_dependency_tree(1 + static_cast<int>(rng() % 15), rng);
    const auto back = parse_conllu(t.to_conllu());
    REQUIRE(back.size() == 1);
    CHECK(back[0].to_conllu() == t.to_conllu());
    CHECK(back[0].root == t.root);
    CHECK(back[0].children == t.children);
  }
}

TEST_CASE("parse_bracketed examples") {
  const RootedTree one = parse_bracketed("(S (VB Walk))");
  CHECK(one.nodes[static_cast<std::size_t>(one.root)].label == "S");
  CHECK(one.token_count() == 1);
  REQUIRE(one.children[static_cast<std::size_t>(one.root)].size() == 1);
  const auto leaf = one.children[static_cast<std::size_t>(one.root)][0];
  CHECK(one.nodes[static_cast<std::size_t>(leaf)].token == 1);
  CHECK(one.nodes[static_cast<std::size_t>(leaf)].form == "Walk");

  const RootedTree two = parse_bracketed("(S (VB Walk) (RB forward))");
  CHECK(two.token_count() == 2);
  std::vector<int> tokens;
  for (int c : two.children[static_cast<std::size_t>(two.root)]) {
    tokens.push_back(*two.nodes[static_cast<std::size_t>(c)].token);
  }
  CHECK(tokens == std::vector<int>{1, 2});

  const RootedTree nested = parse_bracketed("(S (VP (VB Walk) (ADVP (RB forward))))");
  CHECK(nested.token_count() == 2);
  CHECK_NOTHROW(validate_tree(nested));
  CHECK(parse_bracketed(nested.to_bracketed()).to_bracketed() == nested.to_bracketed());
  const auto order = bottom_up_order(nested);
  CHECK(order.back() == nested.root);
  CHECK(order.size() == nested.size());

  check_code([] { parse_bracketed("(S (VB Walk"); }, Errc::UnbalancedParens);
  check_code([] { parse_bracketed("(S (VB Walk)))"); }, Errc::UnbalancedParens);
  check_code([] { parse_bracketed("(S ())"); }, Errc::EmptyConstituent);
  check_code([] { parse_bracketed(""); }, Errc::EmptyConstituent);
}

TEST_CASE("to_rooted maps node i to token i + 1") {
  const DependencyTree t = figure1_tree();
  const RootedTree r = to_rooted(t);
  CHECK(r.size() == t.size());
  CHECK(r.root == t.root - 1);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.nodes[i].token == static_cast<int>(i) + 1);
  CHECK_NOTHROW(validate_tree(r));
}
