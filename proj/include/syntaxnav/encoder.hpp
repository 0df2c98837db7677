#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "syntaxnav/nn.hpp"
#include "syntaxnav/tape.hpp"
#include "syntaxnav/treeio.hpp"

namespace syntaxnav {

// Lowercased word index. Id 0 is padding, id 1 is the unknown word.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences, int min_count = 1);

  int add(std::string_view word);
  int lookup(std::string_view word) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return words_.size(); }

  // Space-separated known words in id order (ids >= 2).
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

std::string lowercase(std::string_view word);

enum class EncoderKind { Tree, Chain, Chain2, MeanPool };

std::string_view to_string(EncoderKind kind) noexcept;
EncoderKind parse_encoder_kind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Tree;
  Eigen::Index vocab_size = 2;
  Eigen::Index embed_dim = 256;
  Eigen::Index hidden = 256;  // per direction

  // Width of u_i and of every node state.
  Eigen::Index output_dim() const noexcept { return 2 * hidden; }
};

// Registers everything the configured variant reads under "encoder.*".
void add_encoder_parameters(ParameterSet& params, const EncoderConfig& config, std::mt19937_64& rng);

struct InstructionEncoding {
  std::vector<Var> node_states;      // attention memory, one per tree node
  std::vector<Var> sequence_states;  // Bi-LSTM outputs u_1..u_l
  Var root_state;
  std::size_t length = 0;
};

std::vector<Var> embed_tokens(Tape& tape, std::span<const int> ids);
std::vector<Var> bilstm_encode(Tape& tape, std::span<const Var> inputs, const std::string& prefix = "encoder.bilstm");

// ChildSum Tree-LSTM. Children are combined in ascending node id whatever
// their storage order; tokenless nodes read a zero input.
InstructionEncoding treelstm_encode(Tape& tape, std::span<const Var> sequence_states, const RootedTree& tree);
InstructionEncoding treelstm_encode(Tape& tape, std::span<const Var> sequence_states, const DependencyTree& tree);

// Node state = mean of the u vectors of every token in the node's subtree.
InstructionEncoding meanpool_encode(Tape& tape, std::span<const Var> sequence_states, const RootedTree& tree);
InstructionEncoding meanpool_encode(Tape& tape, std::span<const Var> sequence_states, const DependencyTree& tree);

// Plain sequence encoder: one Bi-LSTM, or two stacked ones for layers = 2.
InstructionEncoding chain_encode(Tape& tape, std::span<const Var> embeddings, int layers);

InstructionEncoding encode_instruction(Tape& tape, EncoderKind kind, std::span<const int> ids,
                                       const DependencyTree& tree);

}  // namespace syntaxnav
