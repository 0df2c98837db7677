#pragma once

#include <random>
#include <string>
#include <vector>

#include "syntaxnav/encoder.hpp"
#include "syntaxnav/nn.hpp"
#include "syntaxnav/world.hpp"

namespace syntaxnav {

struct AgentConfig {
  EncoderConfig encoder;
  Eigen::Index observation_dim = 64 + kOrientationDim;  // feature_dim + 4
  Eigen::Index decoder_hidden = 512;
  Eigen::Index action_embed = 128;
  Eigen::Index value_hidden = 256;
};

// Registers "agent.*" (and the encoder's "encoder.*") parameters.
void add_agent_parameters(ParameterSet& params, const AgentConfig& config, std::mt19937_64& rng);

// Ids of every agent parameter, resolved once per ParameterSet.
struct AgentParams {
  ParamId W_init, b_init;  // h~_0 = tanh(W_init root + b_init)
  ParamId W_F;             // observation_dim x D
  LstmParams decoder;      // input observation_dim + action_embed, hidden D
  ParamId W_U;             // encoder width x D
  ParamId W_M;             // D x (encoder width + D)
  ParamId W_G;             // observation_dim x D
  ParamId W_A;             // action_embed x observation_dim
  ParamId W_v1, W_v2;      // value head

  static AgentParams lookup(const ParameterSet& params);
};

struct AgentState {
  Var h;
  Var c;
  Var h_tilde;
  Var prev_action;  // a~_{t-1}
};

AgentState initial_state(Tape& tape, const AgentParams& p, const InstructionEncoding& encoding);

struct PanoramaAttention {
  Var feature;  // f~_t
  Var weights;  // beta, 36 x 1
};

// beta = softmax(F W_F h~),  f~ = F^T beta.
PanoramaAttention attend_panorama(Tape& tape, const AgentParams& p, const Tensor& views, Var h_tilde_prev);

// h_t = LSTM([f~; a~_{t-1}], h~_{t-1}) with a carried cell state.
LstmState decode_step(Tape& tape, const AgentParams& p, Var attended, Var prev_action, Var h_tilde_prev, Var c_prev);

struct LanguageAttention {
  Var context;  // u~_t
  Var weights;  // gamma_lang, one per tree node
};

// Language attention over every node of the instruction tree.
LanguageAttention attend_language(Tape& tape, const AgentParams& p, const InstructionEncoding& encoding, Var h);

// h~ = tanh(W_M [u~; h]).
Var fuse_context(Tape& tape, const AgentParams& p, Var attended_text, Var h);

// Action logits g_k^T W_G h~ for K candidates (STOP included).
Var action_logits(Tape& tape, const AgentParams& p, const Tensor& candidates, Var h_tilde);

// W_v2 relu(W_v1 h).
Var value_baseline(Tape& tape, const AgentParams& p, Var h);

enum class RolloutMode { Greedy, Sample, Teacher };

struct StepRecord {
  int viewpoint = 0;                    // where the decision was taken
  std::vector<int> candidate_viewpoints;  // STOP last (= viewpoint)
  int action = 0;                       // executed candidate index
  bool stop = false;
  Var log_probs;  // K x 1
  Var probs;      // K x 1
  Var hidden;     // h_t
  Tensor beta;
  Tensor gamma;
};

struct Rollout {
  std::vector<StepRecord> steps;
  std::vector<int> trajectory;  // visited viewpoints, start first
};

// Runs one episode until STOP or max_length moves. Teacher mode executes the
// shortest-path teacher's action while recording the model's distribution.
Rollout rollout(Tape& tape, const AgentParams& p, const EnvironmentGraph& graph, const Episode& episode,
                const InstructionEncoding& encoding, RolloutMode mode, std::mt19937_64& rng, int max_length);

// Teacher trajectory without a model.
std::vector<int> teacher_trajectory(const EnvironmentGraph& graph, const Episode& episode, int max_length);

}  // namespace syntaxnav
