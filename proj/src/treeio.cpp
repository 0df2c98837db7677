#include "syntaxnav/treeio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <queue>
#include <sstream>

namespace syntaxnav {
namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Builds a dependency tree from tokens already numbered 1..n. `lines` gives
// the document line of each token (zeros when built programmatically).
DependencyTree build_dependency_tree(std::vector<Token> tokens, const std::vector<int>& lines, int sentence) {
  const int n = static_cast<int>(tokens.size());
  auto line_of = [&](int index) { return lines.empty() ? 0 : lines[static_cast<std::size_t>(index - 1)]; };

  int root = 0;
  for (const Token& t : tokens) {
    if (t.head < 0 || t.head > n) {
      throw ParseError(Errc::MalformedLine, "HEAD " + std::to_string(t.head) + " out of range", sentence,
                       line_of(t.index));
    }
    if (t.head == t.index) {
      throw ParseError(Errc::CycleDetected, "token " + std::to_string(t.index) + " heads itself", sentence,
                       line_of(t.index));
    }
    if (t.head == 0) {
      if (root != 0) {
        throw ParseError(Errc::MultipleRoots, "tokens " + std::to_string(root) + " and " +
                                                  std::to_string(t.index) + " both attach to root",
                         sentence, line_of(t.index));
      }
      root = t.index;
    }
  }
  if (n > 0 && root == 0) {
    throw ParseError(Errc::NoRoot, "no token attaches to root", sentence, line_of(1));
  }

  for (const Token& t : tokens) {
    int cursor = t.index;
    int hops = 0;
    while (cursor != 0 && hops <= n) {
      cursor = tokens[static_cast<std::size_t>(cursor - 1)].head;
      ++hops;
    }
    if (cursor != 0) {
      throw ParseError(Errc::CycleDetected, "head chain of token " + std::to_string(t.index) + " never reaches root",
                       sentence, line_of(t.index));
    }
  }

  DependencyTree tree;
  tree.root = root;
  tree.children.assign(static_cast<std::size_t>(n) + 1, {});
  for (const Token& t : tokens) tree.children[static_cast<std::size_t>(t.head)].push_back(t.index);
  // Tokens are visited in index order, so every child list is already sorted.
  tree.tokens = std::move(tokens);
  return tree;
}

template <typename ParentOf>
std::vector<int> kahn_bottom_up(const std::vector<std::vector<int>>& children, const std::vector<int>& ids,
                                ParentOf parent_of) {
  std::vector<std::size_t> pending(children.size(), 0);
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int id : ids) {
    pending[static_cast<std::size_t>(id)] = children[static_cast<std::size_t>(id)].size();
    if (pending[static_cast<std::size_t>(id)] == 0) ready.push(id);
  }
  std::vector<int> order;
  order.reserve(ids.size());
  while (!ready.empty()) {
    const int id = ready.top();
    ready.pop();
    order.push_back(id);
    const int parent = parent_of(id);
    if (parent >= 0 && --pending[static_cast<std::size_t>(parent)] == 0) ready.push(parent);
  }
  return order;
}

}  // namespace

DependencyTree DependencyTree::from_heads(const std::vector<std::string>& forms, const std::vector<int>& heads) {
  if (forms.size() != heads.size()) {
    throw ParseError(Errc::MalformedLine, "forms and heads differ in length", 0, 0);
  }
  std::vector<Token> tokens;
  tokens.reserve(forms.size());
  for (std::size_t i = 0; i < forms.size(); ++i) {
    tokens.push_back(Token{static_cast<int>(i) + 1, forms[i], heads[i], "_", "_"});
  }
  return build_dependency_tree(std::move(tokens), {}, 0);
}

std::string DependencyTree::to_conllu() const {
  std::ostringstream out;
  for (const Token& t : tokens) {
    out << t.index << '\t' << t.form << "\t_\t" << t.upos << "\t_\t_\t" << t.head << '\t' << t.deprel << "\t_\t_\n";
  }
  return out.str();
}

std::vector<DependencyTree> parse_conllu(std::string_view text) {
  std::vector<DependencyTree> trees;
  std::vector<Token> tokens;
  std::vector<int> lines;
  int sentence = 0;
  int line_no = 0;

  auto flush = [&] {
    if (tokens.empty()) return;
    trees.push_back(build_dependency_tree(std::move(tokens), lines, sentence));
    tokens.clear();
    lines.clear();
  };

  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (tokens.empty()) ++sentence;

    const auto fields = split(line, '\t');
    if (fields.size() < 8) {
      throw ParseError(Errc::MalformedLine, "expected at least 8 tab-separated fields, got " +
                                                std::to_string(fields.size()),
                       sentence, line_no);
    }
    const std::string_view id = fields[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) {
      if (end == text.size()) break;
      continue;  // multiword range or empty node
    }
    Token tok;
    if (!parse_int(id, tok.index)) {
      throw ParseError(Errc::MalformedLine, "non-integer ID '" + std::string(id) + "'", sentence, line_no);
    }
    if (tok.index != static_cast<int>(tokens.size()) + 1) {
      throw ParseError(Errc::MalformedLine, "token IDs must run 1..n in order", sentence, line_no);
    }
    if (!parse_int(fields[6], tok.head)) {
      throw ParseError(Errc::MalformedLine, "non-integer HEAD '" + std::string(fields[6]) + "'", sentence, line_no);
    }
    tok.form = std::string(fields[1]);
    tok.upos = std::string(fields[3]);
    tok.deprel = std::string(fields[7]);
    tokens.push_back(std::move(tok));
    lines.push_back(line_no);
    if (end == text.size()) break;
  }
  flush();
  return trees;
}

std::size_t RootedTree::token_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.token.has_value(); }));
}

namespace {

struct BracketLexer {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  std::string atom() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != '(' &&
           text[pos] != ')') {
      ++pos;
    }
    return std::string(text.substr(start, pos - start));
  }
};

struct BracketParser {
  BracketLexer lex;
  RootedTree tree;
  int next_token = 1;

  int add_node(std::string label, std::string form, std::optional<int> token) {
    tree.nodes.push_back(RootedTree::Node{std::move(label), std::move(form), token});
    tree.children.emplace_back();
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  int constituent() {
    if (lex.peek() != '(') throw ParseError(Errc::UnbalancedParens, "expected '('", 0, 0);
    ++lex.pos;
    std::string label;
    if (const char c = lex.peek(); c != '(' && c != ')' && c != '\0') label = lex.atom();

    // "(TAG word)" collapses to a single token-bearing leaf.
    const std::size_t save = lex.pos;
    if (!label.empty() && lex.peek() != '(' && lex.peek() != ')' && lex.peek() != '\0') {
      std::string word = lex.atom();
      if (lex.peek() == ')') {
        ++lex.pos;
        return add_node(std::move(label), std::move(word), next_token++);
      }
      lex.pos = save;
    }

    const int id = add_node(std::move(label), "", std::nullopt);
    while (true) {
      const char c = lex.peek();
      if (c == '\0') throw ParseError(Errc::UnbalancedParens, "missing ')'", 0, 0);
      if (c == ')') {
        ++lex.pos;
        break;
      }
      int child;
      if (c == '(') {
        child = constituent();
      } else {
        std::string word = lex.atom();
        child = add_node("", std::move(word), next_token++);
      }
      tree.children[static_cast<std::size_t>(id)].push_back(child);
    }
    if (tree.children[static_cast<std::size_t>(id)].empty()) {
      throw ParseError(Errc::EmptyConstituent, "constituent '" + tree.nodes[static_cast<std::size_t>(id)].label +
                                                   "' has no children",
                       0, 0);
    }
    return id;
  }
};

void write_bracketed(const RootedTree& tree, int id, std::ostringstream& out) {
  const auto& node = tree.nodes[static_cast<std::size_t>(id)];
  const auto& kids = tree.children[static_cast<std::size_t>(id)];
  if (kids.empty()) {
    if (node.label.empty()) {
      out << node.form;
    } else {
      out << '(' << node.label << ' ' << node.form << ')';
    }
    return;
  }
  out << '(' << node.label;
  for (int child : kids) {
    out << ' ';
    write_bracketed(tree, child, out);
  }
  out << ')';
}

}  // namespace

RootedTree parse_bracketed(std::string_view text) {
  BracketParser parser{BracketLexer{text}};
  if (parser.lex.at_end()) throw ParseError(Errc::EmptyConstituent, "empty bracketing", 0, 0);
  parser.tree.root = parser.constituent();
  if (!parser.lex.at_end()) throw ParseError(Errc::UnbalancedParens, "trailing input after tree", 0, 0);
  validate_tree(parser.tree);
  return std::move(parser.tree);
}

std::string RootedTree::to_bracketed() const {
  std::ostringstream out;
  write_bracketed(*this, root, out);
  return out.str();
}

void validate_tree(const DependencyTree& tree) {
  const int n = static_cast<int>(tree.tokens.size());
  for (int i = 0; i < n; ++i) {
    if (tree.tokens[static_cast<std::size_t>(i)].index != i + 1) {
      throw ParseError(Errc::MalformedLine, "token at position " + std::to_string(i + 1) + " has index " +
                                                std::to_string(tree.tokens[static_cast<std::size_t>(i)].index),
                       0, 0);
    }
  }
  // Rebuild from heads; this checks root, range and cycle invariants.
  const DependencyTree canonical = build_dependency_tree(tree.tokens, {}, 0);
  if (canonical.root != tree.root) {
    throw ParseError(Errc::Disconnected, "root field disagrees with HEAD column", 0, 0);
  }
  if (canonical.children != tree.children) {
    throw ParseError(Errc::Disconnected, "children adjacency disagrees with HEAD column or is not sorted", 0, 0);
  }
}

void validate_tree(const RootedTree& tree) {
  const int n = static_cast<int>(tree.nodes.size());
  if (n == 0) throw ParseError(Errc::NoRoot, "tree has no nodes", 0, 0);
  if (static_cast<int>(tree.children.size()) != n) {
    throw ParseError(Errc::Disconnected, "children adjacency size mismatch", 0, 0);
  }
  if (tree.root < 0 || tree.root >= n) throw ParseError(Errc::NoRoot, "root id out of range", 0, 0);

  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  for (int id = 0; id < n; ++id) {
    const auto& kids = tree.children[static_cast<std::size_t>(id)];
    for (int child : kids) {
      if (child < 0 || child >= n) throw ParseError(Errc::Disconnected, "child id out of range", 0, 0);
      if (child == id) throw ParseError(Errc::CycleDetected, "node is its own child", 0, 0);
      if (parent[static_cast<std::size_t>(child)] != -1) {
        throw ParseError(Errc::MultipleRoots, "node " + std::to_string(child) + " has two parents", 0, 0);
      }
      parent[static_cast<std::size_t>(child)] = id;
    }
  }
  if (parent[static_cast<std::size_t>(tree.root)] != -1) {
    throw ParseError(Errc::CycleDetected, "root has a parent", 0, 0);
  }
  for (int id = 0; id < n; ++id) {
    if (id != tree.root && parent[static_cast<std::size_t>(id)] == -1) {
      throw ParseError(Errc::MultipleRoots, "node " + std::to_string(id) + " has no parent", 0, 0);
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{tree.root};
  int reached = 0;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(id)]) throw ParseError(Errc::CycleDetected, "node visited twice", 0, 0);
    seen[static_cast<std::size_t>(id)] = 1;
    ++reached;
    for (int child : tree.children[static_cast<std::size_t>(id)]) stack.push_back(child);
  }
  if (reached != n) throw ParseError(Errc::CycleDetected, "nodes unreachable from root", 0, 0);

  std::vector<char> used;
  int tokens = 0;
  for (int id = 0; id < n; ++id) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    if (tree.children[static_cast<std::size_t>(id)].empty() && !node.token) {
      throw ParseError(Errc::MisalignedTree, "leaf node " + std::to_string(id) + " carries no token", 0, 0);
    }
    if (node.token) ++tokens;
  }
  used.assign(static_cast<std::size_t>(tokens) + 1, 0);
  for (const auto& node : tree.nodes) {
    if (!node.token) continue;
    const int t = *node.token;
    if (t < 1 || t > tokens || used[static_cast<std::size_t>(t)]) {
      throw ParseError(Errc::MisalignedTree, "token indices must be a permutation of 1.." + std::to_string(tokens),
                       0, 0);
    }
    used[static_cast<std::size_t>(t)] = 1;
  }
}

std::vector<int> bottom_up_order(const DependencyTree& tree) {
  validate_tree(tree);
  std::vector<int> ids(tree.tokens.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
  return kahn_bottom_up(tree.children, ids, [&](int id) {
    const int head = tree.token(id).head;
    return head == 0 ? -1 : head;
  });
}

std::vector<int> bottom_up_order(const RootedTree& tree) {
  validate_tree(tree);
  std::vector<int> parent(tree.nodes.size(), -1);
  for (std::size_t id = 0; id < tree.children.size(); ++id) {
    for (int child : tree.children[id]) parent[static_cast<std::size_t>(child)] = static_cast<int>(id);
  }
  std::vector<int> ids(tree.nodes.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return kahn_bottom_up(tree.children, ids, [&](int id) { return parent[static_cast<std::size_t>(id)]; });
}

RootedTree to_rooted(const DependencyTree& tree) {
  RootedTree out;
  out.nodes.reserve(tree.tokens.size());
  out.children.resize(tree.tokens.size());
  for (const Token& t : tree.tokens) {
    out.nodes.push_back(RootedTree::Node{t.upos == "_" ? std::string() : t.upos, t.form, t.index});
    auto& kids = out.children[static_cast<std::size_t>(t.index - 1)];
    for (int child : tree.children_of(t.index)) kids.push_back(child - 1);
  }
  out.root = tree.root - 1;
  return out;
}

}  // namespace syntaxnav
