#include "syntaxnav/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace syntaxnav {

std::string lowercase(std::string_view word) {
  std::string out(word);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vocabulary::Vocabulary() {
  words_ = {"<pad>", "<unk>"};
  ids_ = {{"<pad>", kPad}, {"<unk>", kUnknown}};
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences, int min_count) {
  std::map<std::string, int> counts;
  std::vector<std::string> first_seen;
  for (const auto& sentence : sentences) {
    for (const auto& w : sentence) {
      const std::string key = lowercase(w);
      if (counts[key]++ == 0) first_seen.push_back(key);
    }
  }
  Vocabulary vocab;
  for (const auto& w : first_seen) {
    if (counts[w] >= min_count) vocab.add(w);
  }
  return vocab;
}

int Vocabulary::add(std::string_view word) {
  std::string key = lowercase(word);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

int Vocabulary::lookup(std::string_view word) const {
  auto it = ids_.find(lowercase(word));
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 2; i < words_.size(); ++i) {
    if (i > 2) out += ' ';
    out += words_[i];
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  Vocabulary vocab;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) vocab.add(w);
  return vocab;
}

std::string_view to_string(EncoderKind kind) noexcept {
  switch (kind) {
    case EncoderKind::Tree: return "tree";
    case EncoderKind::Chain: return "chain";
    case EncoderKind::Chain2: return "chain2";
    case EncoderKind::MeanPool: return "meanpool";
  }
  return "tree";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "tree") return EncoderKind::Tree;
  if (name == "chain") return EncoderKind::Chain;
  if (name == "chain2") return EncoderKind::Chain2;
  if (name == "meanpool") return EncoderKind::MeanPool;
  throw Error(Errc::ConfigInvalid, "unknown encoder '" + std::string(name) + "'");
}

void add_encoder_parameters(ParameterSet& params, const EncoderConfig& config, std::mt19937_64& rng) {
  if (config.vocab_size < 2 || config.embed_dim < 1 || config.hidden < 1) {
    throw Error(Errc::ConfigInvalid, "encoder dimensions must be positive");
  }
  Tensor embedding = uniform_init(config.vocab_size, config.embed_dim, rng);
  embedding.row(Vocabulary::kPad).setZero();
  params.add("encoder.embedding", std::move(embedding));
  add_lstm_parameters(params, "encoder.bilstm.fwd", config.embed_dim, config.hidden, rng);
  add_lstm_parameters(params, "encoder.bilstm.bwd", config.embed_dim, config.hidden, rng);

  const Eigen::Index width = config.output_dim();
  switch (config.kind) {
    case EncoderKind::Chain2:
      add_lstm_parameters(params, "encoder.bilstm2.fwd", width, config.hidden, rng);
      add_lstm_parameters(params, "encoder.bilstm2.bwd", width, config.hidden, rng);
      break;
    case EncoderKind::Tree:
      // Gates i, o, g share one block; the per-child forget gate is separate.
      params.add("encoder.treelstm.W", uniform_init(3 * width, width, rng));
      params.add("encoder.treelstm.U", uniform_init(3 * width, width, rng));
      params.add("encoder.treelstm.b", Tensor::Zero(3 * width, 1));
      params.add("encoder.treelstm.W_f", uniform_init(width, width, rng));
      params.add("encoder.treelstm.U_f", uniform_init(width, width, rng));
      params.add("encoder.treelstm.b_f", Tensor::Zero(width, 1));
      break;
    case EncoderKind::Chain:
    case EncoderKind::MeanPool:
      break;
  }
}

std::vector<Var> embed_tokens(Tape& tape, std::span<const int> ids) {
  Var table = tape.param("encoder.embedding");
  const Eigen::Index vocab = table.rows();
  std::vector<Var> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      throw Error(Errc::UnknownId, "token id " + std::to_string(id) + " outside vocabulary of " +
                                       std::to_string(vocab));
    }
    out.push_back(id == Vocabulary::kPad ? tape.constant(Tensor::Zero(table.cols(), 1)) : row_of(table, id));
  }
  return out;
}

std::vector<Var> bilstm_encode(Tape& tape, std::span<const Var> inputs, const std::string& prefix) {
  if (inputs.empty()) throw Error(Errc::EmptySequence, "Bi-LSTM over an empty sequence");
  const LstmParams fwd = lookup_lstm_parameters(tape.parameters(), prefix + ".fwd");
  const LstmParams bwd = lookup_lstm_parameters(tape.parameters(), prefix + ".bwd");
  const std::size_t n = inputs.size();

  std::vector<Var> forward(n), backward(n);
  LstmState s{tape.constant(Tensor::Zero(fwd.hidden, 1)), tape.constant(Tensor::Zero(fwd.hidden, 1))};
  for (std::size_t i = 0; i < n; ++i) {
    s = lstm_cell(tape, inputs[i], s.h, s.c, fwd);
    forward[i] = s.h;
  }
  s = {tape.constant(Tensor::Zero(bwd.hidden, 1)), tape.constant(Tensor::Zero(bwd.hidden, 1))};
  for (std::size_t i = n; i-- > 0;) {
    s = lstm_cell(tape, inputs[i], s.h, s.c, bwd);
    backward[i] = s.h;
  }
  std::vector<Var> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(concat({forward[i], backward[i]}));
  return out;
}

namespace {

void check_alignment(std::span<const Var> sequence_states, const RootedTree& tree) {
  if (sequence_states.empty()) throw Error(Errc::EmptySequence, "no sequence states to encode");
  for (const auto& node : tree.nodes) {
    if (node.token && (*node.token < 1 || *node.token > static_cast<int>(sequence_states.size()))) {
      throw Error(Errc::MisalignedTree, "token index " + std::to_string(*node.token) + " outside sentence of " +
                                            std::to_string(sequence_states.size()));
    }
  }
  if (tree.token_count() != sequence_states.size()) {
    throw Error(Errc::MisalignedTree, "tree covers " + std::to_string(tree.token_count()) + " tokens, sentence has " +
                                          std::to_string(sequence_states.size()));
  }
}

std::vector<int> sorted_children(const RootedTree& tree, int id) {
  std::vector<int> kids = tree.children[static_cast<std::size_t>(id)];
  std::sort(kids.begin(), kids.end());
  return kids;
}

}  // namespace

InstructionEncoding treelstm_encode(Tape& tape, std::span<const Var> sequence_states, const RootedTree& tree) {
  check_alignment(sequence_states, tree);
  const std::vector<int> order = bottom_up_order(tree);

  Var W = tape.param("encoder.treelstm.W");
  Var U = tape.param("encoder.treelstm.U");
  Var b = tape.param("encoder.treelstm.b");
  Var W_f = tape.param("encoder.treelstm.W_f");
  Var U_f = tape.param("encoder.treelstm.U_f");
  Var b_f = tape.param("encoder.treelstm.b_f");
  const Eigen::Index H = U.cols();
  const Eigen::Index in = W.cols();
  if (sequence_states.front().rows() != in) {
    throw Error(Errc::ShapeMismatch, "Tree-LSTM expects inputs of width " + std::to_string(in));
  }

  const std::size_t n = tree.nodes.size();
  std::vector<Var> h(n), c(n);
  Var zero_in, zero_h;
  for (int id : order) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    Var x;
    if (node.token) {
      x = sequence_states[static_cast<std::size_t>(*node.token - 1)];
    } else {
      if (!zero_in.valid()) zero_in = tape.constant(Tensor::Zero(in, 1));
      x = zero_in;
    }
    const std::vector<int> kids = sorted_children(tree, id);

    Var h_sum;
    if (kids.empty()) {
      if (!zero_h.valid()) zero_h = tape.constant(Tensor::Zero(H, 1));
      h_sum = zero_h;
    } else {
      std::vector<Var> child_h;
      child_h.reserve(kids.size());
      for (int k : kids) child_h.push_back(h[static_cast<std::size_t>(k)]);
      h_sum = add_n(child_h);
    }

    Var z = matmul(W, x) + matmul(U, h_sum) + b;
    Var i = sigmoid(slice(z, 0, H));
    Var o = sigmoid(slice(z, H, H));
    Var g = tanh(slice(z, 2 * H, H));

    std::vector<Var> cell_terms{hadamard(i, g)};
    if (!kids.empty()) {
      Var fx = matmul(W_f, x) + b_f;
      for (int k : kids) {
        Var f = sigmoid(fx + matmul(U_f, h[static_cast<std::size_t>(k)]));
        cell_terms.push_back(hadamard(f, c[static_cast<std::size_t>(k)]));
      }
    }
    c[static_cast<std::size_t>(id)] = add_n(cell_terms);
    h[static_cast<std::size_t>(id)] = hadamard(o, tanh(c[static_cast<std::size_t>(id)]));
  }

  InstructionEncoding enc;
  enc.node_states = std::move(h);
  enc.sequence_states.assign(sequence_states.begin(), sequence_states.end());
  enc.root_state = enc.node_states[static_cast<std::size_t>(tree.root)];
  enc.length = sequence_states.size();
  return enc;
}

InstructionEncoding treelstm_encode(Tape& tape, std::span<const Var> sequence_states, const DependencyTree& tree) {
  return treelstm_encode(tape, sequence_states, to_rooted(tree));
}

InstructionEncoding meanpool_encode(Tape& tape, std::span<const Var> sequence_states, const RootedTree& tree) {
  check_alignment(sequence_states, tree);
  const std::vector<int> order = bottom_up_order(tree);
  const std::size_t n = tree.nodes.size();
  std::vector<Var> sums(n), means(n);
  std::vector<std::size_t> counts(n, 0);
  for (int id : order) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    std::vector<Var> terms;
    std::size_t count = 0;
    if (node.token) {
      terms.push_back(sequence_states[static_cast<std::size_t>(*node.token - 1)]);
      count = 1;
    }
    for (int k : sorted_children(tree, id)) {
      terms.push_back(sums[static_cast<std::size_t>(k)]);
      count += counts[static_cast<std::size_t>(k)];
    }
    sums[static_cast<std::size_t>(id)] = terms.size() == 1 ? terms.front() : add_n(terms);
    counts[static_cast<std::size_t>(id)] = count;
    means[static_cast<std::size_t>(id)] =
        count == 1 && node.token ? terms.front() : scale(sums[static_cast<std::size_t>(id)], 1.0 / count);
  }
  InstructionEncoding enc;
  enc.node_states = std::move(means);
  enc.sequence_states.assign(sequence_states.begin(), sequence_states.end());
  enc.root_state = enc.node_states[static_cast<std::size_t>(tree.root)];
  enc.length = sequence_states.size();
  return enc;
}

InstructionEncoding meanpool_encode(Tape& tape, std::span<const Var> sequence_states, const DependencyTree& tree) {
  return meanpool_encode(tape, sequence_states, to_rooted(tree));
}

InstructionEncoding chain_encode(Tape& tape, std::span<const Var> embeddings, int layers) {
  if (layers != 1 && layers != 2) throw Error(Errc::ConfigInvalid, "chain encoder supports 1 or 2 layers");
  if (embeddings.empty()) throw Error(Errc::EmptySequence, "chain encoder over an empty sequence");
  std::vector<Var> states = bilstm_encode(tape, embeddings, "encoder.bilstm");
  if (layers == 2) states = bilstm_encode(tape, states, "encoder.bilstm2");

  const Eigen::Index half = states.front().rows() / 2;
  InstructionEncoding enc;
  enc.sequence_states = states;
  enc.node_states = states;
  // Final state of each direction.
  enc.root_state = concat({slice(states.back(), 0, half), slice(states.front(), half, half)});
  enc.length = states.size();
  return enc;
}

InstructionEncoding encode_instruction(Tape& tape, EncoderKind kind, std::span<const int> ids,
                                       const DependencyTree& tree) {
  if (ids.empty()) throw Error(Errc::EmptySequence, "empty instruction");
  if (ids.size() != tree.size()) {
    throw Error(Errc::MisalignedTree, "instruction has " + std::to_string(ids.size()) + " tokens, tree has " +
                                          std::to_string(tree.size()));
  }
  const std::vector<Var> embedded = embed_tokens(tape, ids);
  switch (kind) {
    case EncoderKind::Chain: return chain_encode(tape, embedded, 1);
    case EncoderKind::Chain2: return chain_encode(tape, embedded, 2);
    case EncoderKind::Tree: return treelstm_encode(tape, bilstm_encode(tape, embedded), tree);
    case EncoderKind::MeanPool: return meanpool_encode(tape, bilstm_encode(tape, embedded), tree);
  }
  throw Error(Errc::ConfigInvalid, "unhandled encoder kind");
}

}  // namespace syntaxnav
