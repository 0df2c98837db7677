#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "syntaxnav/error.hpp"

namespace syntaxnav {

struct Token {
  int index = 0;  // 1-based position in the sentence
  std::string form;
  int head = 0;   // 0 = attached to the virtual root
  std::string upos = "_";
  std::string deprel = "_";
};

// Rooted dependency tree over the tokens of one sentence. Node ids are the
// 1-based token indices; `children[0]` holds the single root.
struct DependencyTree {
  std::vector<Token> tokens;
  int root = 0;
  std::vector<std::vector<int>> children;

  std::size_t size() const noexcept { return tokens.size(); }
  const Token& token(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }
  const std::vector<int>& children_of(int index) const {
    return children.at(static_cast<std::size_t>(index));
  }

  // Builds the canonical tree from forms and heads and validates it.
  static DependencyTree from_heads(const std::vector<std::string>& forms, const std::vector<int>& heads);

  std::string to_conllu() const;
};

// Generic rooted tree; constituency parses are represented this way. Node
// ids are positions in `nodes`; leaves carry 1-based token indices.
struct RootedTree {
  struct Node {
    std::string label;
    std::string form;  // surface word for token-bearing nodes
    std::optional<int> token;
  };

  std::vector<Node> nodes;
  int root = 0;
  std::vector<std::vector<int>> children;

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t token_count() const noexcept;

  std::string to_bracketed() const;
};

std::vector<DependencyTree> parse_conllu(std::string_view text);
RootedTree parse_bracketed(std::string_view text);

// Throws ParseError on any broken invariant. Never mutates the tree.
void validate_tree(const DependencyTree& tree);
void validate_tree(const RootedTree& tree);

// Children strictly before parents; ready nodes are emitted in ascending id.
std::vector<int> bottom_up_order(const DependencyTree& tree);
std::vector<int> bottom_up_order(const RootedTree& tree);

// Dependency tree as a rooted tree: node i carries token i + 1.
RootedTree to_rooted(const DependencyTree& tree);

}  // namespace syntaxnav
