#include "syntaxnav/agent.hpp"

#include <algorithm>

#include "syntaxnav/error.hpp"

namespace syntaxnav {

void add_agent_parameters(ParameterSet& params, const AgentConfig& c, std::mt19937_64& rng) {
  if (c.observation_dim < 1 || c.decoder_hidden < 1 || c.action_embed < 1 || c.value_hidden < 1) {
    throw Error(Errc::ConfigInvalid, "agent widths must be positive");
  }
  add_encoder_parameters(params, c.encoder, rng);
  const Eigen::Index E = c.encoder.output_dim();
  const Eigen::Index D = c.decoder_hidden;
  params.add("agent.W_init", uniform_init(D, E, rng));
  params.add("agent.b_init", Tensor::Zero(D, 1));
  params.add("agent.W_F", uniform_init(c.observation_dim, D, rng));
  add_lstm_parameters(params, "agent.decoder", c.observation_dim + c.action_embed, D, rng);
  params.add("agent.W_U", uniform_init(E, D, rng));
  params.add("agent.W_M", uniform_init(D, E + D, rng));
  params.add("agent.W_G", uniform_init(c.observation_dim, D, rng));
  params.add("agent.W_A", uniform_init(c.action_embed, c.observation_dim, rng));
  params.add("agent.value.W1", uniform_init(c.value_hidden, D, rng));
  params.add("agent.value.W2", uniform_init(1, c.value_hidden, rng));
}

AgentParams AgentParams::lookup(const ParameterSet& params) {
  AgentParams p;
  p.W_init = params.id("agent.W_init");
  p.b_init = params.id("agent.b_init");
  p.W_F = params.id("agent.W_F");
  p.decoder = lookup_lstm_parameters(params, "agent.decoder");
  p.W_U = params.id("agent.W_U");
  p.W_M = params.id("agent.W_M");
  p.W_G = params.id("agent.W_G");
  p.W_A = params.id("agent.W_A");
  p.W_v1 = params.id("agent.value.W1");
  p.W_v2 = params.id("agent.value.W2");
  return p;
}

AgentState initial_state(Tape& tape, const AgentParams& p, const InstructionEncoding& encoding) {
  if (!encoding.root_state.valid()) throw Error(Errc::EmptyEncoding, "encoding has no root state");
  const Eigen::Index D = p.decoder.hidden;
  const Eigen::Index A = tape.parameters().value(p.W_A).rows();
  AgentState s;
  s.h = tape.constant(Tensor::Zero(D, 1));
  s.c = tape.constant(Tensor::Zero(D, 1));
  s.h_tilde = tanh(matmul(tape.param(p.W_init), encoding.root_state) + tape.param(p.b_init));
  s.prev_action = tape.constant(Tensor::Zero(A, 1));
  return s;
}

PanoramaAttention attend_panorama(Tape& tape, const AgentParams& p, const Tensor& views, Var h_tilde_prev) {
  if (views.rows() != kPanoramaSlices) {
    throw Error(Errc::ShapeMismatch, "panorama needs 36 views, got " + std::to_string(views.rows()));
  }
  const Var F = tape.constant(views);
  const Var weights = softmax(matmul(F, matmul(tape.param(p.W_F), h_tilde_prev)));
  return {matmul(transpose(F), weights), weights};
}

LstmState decode_step(Tape& tape, const AgentParams& p, Var attended, Var prev_action, Var h_tilde_prev,
                      Var c_prev) {
  return lstm_cell(tape, concat({attended, prev_action}), h_tilde_prev, c_prev, p.decoder);
}

LanguageAttention attend_language(Tape& tape, const AgentParams& p, const InstructionEncoding& encoding, Var h) {
  if (encoding.node_states.empty()) throw Error(Errc::EmptyEncoding, "no tree nodes to attend over");
  const Var memory = hstack(encoding.node_states);  // E x n
  const Var weights = softmax(matmul(transpose(memory), matmul(tape.param(p.W_U), h)));
  return {matmul(memory, weights), weights};
}

Var fuse_context(Tape& tape, const AgentParams& p, Var attended_text, Var h) {
  return tanh(matmul(tape.param(p.W_M), concat({attended_text, h})));
}

Var action_logits(Tape& tape, const AgentParams& p, const Tensor& candidates, Var h_tilde) {
  if (candidates.rows() < 1) throw Error(Errc::NoCandidates, "no candidates to score");
  return matmul(tape.constant(candidates), matmul(tape.param(p.W_G), h_tilde));
}

Var value_baseline(Tape& tape, const AgentParams& p, Var h) {
  return matmul(tape.param(p.W_v2), relu(matmul(tape.param(p.W_v1), h)));
}

namespace {

int argmax(const Tensor& probs) {
  Eigen::Index best = 0;
  probs.col(0).maxCoeff(&best);
  return static_cast<int>(best);
}

int sample(const Tensor& probs, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.rows(); ++k) {
    acc += probs(k, 0);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.rows()) - 1;
}

}  // namespace

Rollout rollout(Tape& tape, const AgentParams& p, const EnvironmentGraph& graph, const Episode& episode,
                const InstructionEncoding& encoding, RolloutMode mode, std::mt19937_64& rng, int max_length) {
  if (max_length < 1) throw Error(Errc::ConfigInvalid, "max_length must be positive");
  AgentState s = initial_state(tape, p, encoding);
  NavState nav{episode.start(), episode.start_heading, 0, false};
  Rollout out;
  out.trajectory.push_back(nav.viewpoint);

  while (!nav.done) {
    const Observation obs = panorama(graph, nav);
    const PanoramaAttention pano = attend_panorama(tape, p, obs.views, s.h_tilde);
    const LstmState dec = decode_step(tape, p, pano.feature, s.prev_action, s.h_tilde, s.c);
    const LanguageAttention lang = attend_language(tape, p, encoding, dec.h);
    const Var h_tilde = fuse_context(tape, p, lang.context, dec.h);
    const Var logits = action_logits(tape, p, obs.candidates, h_tilde);

    StepRecord rec;
    rec.viewpoint = nav.viewpoint;
    rec.candidate_viewpoints = obs.candidate_viewpoints;
    rec.log_probs = log_softmax(logits);
    rec.probs = softmax(logits);
    rec.hidden = dec.h;
    rec.beta = pano.weights.value();
    rec.gamma = lang.weights.value();
    switch (mode) {
      case RolloutMode::Greedy: rec.action = argmax(rec.probs.value()); break;
      case RolloutMode::Sample: rec.action = sample(rec.probs.value(), rng); break;
      case RolloutMode::Teacher: rec.action = teacher_action(graph, nav, episode.goal()); break;
    }
    rec.stop = rec.action == obs.stop_index();

    nav = step(graph, nav, rec.action, max_length);
    if (!rec.stop) out.trajectory.push_back(nav.viewpoint);
    s.h = dec.h;
    s.c = dec.c;
    s.h_tilde = h_tilde;
    s.prev_action = tanh(matmul(tape.param(p.W_A), tape.constant(obs.candidates.row(rec.action).transpose())));
    out.steps.push_back(std::move(rec));
  }
  return out;
}

std::vector<int> teacher_trajectory(const EnvironmentGraph& graph, const Episode& episode, int max_length) {
  NavState nav{episode.start(), episode.start_heading, 0, false};
  std::vector<int> path{nav.viewpoint};
  while (!nav.done) {
    const int action = teacher_action(graph, nav, episode.goal());
    const int before = nav.viewpoint;
    nav = step(graph, nav, action, max_length);
    if (nav.viewpoint != before) path.push_back(nav.viewpoint);
  }
  return path;
}

}  // namespace syntaxnav
