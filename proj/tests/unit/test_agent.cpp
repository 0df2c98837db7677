#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "syntaxnav/agent.hpp"
#include "syntaxnav/rng.hpp"
#include "syntaxnav/training.hpp"

using namespace syntaxnav;

namespace {

constexpr Eigen::Index kFeat = 5;

ParameterSet agent_params(std::uint64_t seed = 1) {
  AgentConfig c;
  c.encoder = EncoderConfig{EncoderKind::Tree, 12, 4, 3};
  c.observation_dim = kFeat + kOrientationDim;
  c.decoder_hidden = 5;
  c.action_embed = 3;
  c.value_hidden = 4;
  ParameterSet ps;
  std::mt19937_64 rng(seed);
  add_agent_parameters(ps, c, rng);
  return ps;
}

Tensor random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

InstructionEncoding memory(Tape& tape, const std::vector<Tensor>& states) {
  InstructionEncoding enc;
  for (const Tensor& s : states) enc.node_states.push_back(tape.constant(s));
  enc.sequence_states = enc.node_states;
  enc.root_state = enc.node_states.front();
  enc.length = states.size();
  return enc;
}

Model tiny_model(const World& world, std::uint64_t seed) {
  TrainConfig c;
  c.embed_dim = 6;
  c.encoder_hidden = 5;
  c.decoder_hidden = 8;
  c.action_embed = 4;
  c.value_hidden = 4;
  c.max_length = 12;
  c.seed = seed;
  return make_model(c, training_vocabulary(world), world.feature_dim());
}

World tiny_world() {
  WorldConfig c;
  c.grid_w = 4;
  c.grid_h = 4;
  c.episodes = 20;
  c.feature_dim = kFeat;
  c.max_hops = 4;
  return generate_world(21, c);
}

}  // namespace

TEST_CASE("panorama attention") {
  const ParameterSet ps = agent_params();
  const AgentParams p = AgentParams::lookup(ps);
  std::mt19937_64 rng(2);
  Tape tape(ps);
  const Var h = tape.constant(random_matrix(5, 1, rng));

  const Tensor row = random_matrix(1, kFeat + 4, rng);
  const Tensor same = row.replicate(36, 1);
  const PanoramaAttention uni = attend_panorama(tape, p, same, h);
  for (int i = 0; i < 36; ++i) CHECK(uni.weights.value()(i, 0) == doctest::Approx(1.0 / 36).epsilon(1e-14));
  CHECK((uni.feature.value() - row.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

  const Tensor views = random_matrix(36, kFeat + 4, rng);
  const PanoramaAttention a = attend_panorama(tape, p, views, h);
  // Direct recomputation of beta and f~.
  const Vector scores = views * ps.value(p.W_F) * h.value();
  const Vector beta = (scores.array() - scores.maxCoeff()).exp().matrix();
  const Vector beta_n = beta / beta.sum();
  CHECK(std::abs(a.weights.value().sum() - 1.0) <= 1e-12);
  CHECK((a.weights.value() - beta_n).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.feature.value() - views.transpose() * beta_n).cwiseAbs().maxCoeff() <= 1e-12);

  // A +1000 score margin on one slice makes beta one-hot.
  ParameterSet sharp = ps;
  Tensor& wf = sharp.value(p.W_F);
  wf.setZero();
  wf(0, 0) = 1.0;
  Tensor spiked = views;
  spiked.col(0).setZero();
  spiked(7, 0) = 1000.0;
  Tape t2(sharp);
  const PanoramaAttention s = attend_panorama(t2, p, spiked, t2.constant(Tensor::Ones(5, 1)));
  CHECK(s.weights.value()(7, 0) == doctest::Approx(1.0));
  CHECK((s.feature.value() - spiked.row(7).transpose()).cwiseAbs().maxCoeff() <= 1e-9);

  CHECK_THROWS_AS(attend_panorama(tape, p, random_matrix(35, kFeat + 4, rng), h), Error);
}

TEST_CASE("decoder first step is an LSTM cell on [f; 0]") {
  const ParameterSet ps = agent_params();
  const AgentParams p = AgentParams::lookup(ps);
  std::mt19937_64 rng(3);
  Tape tape(ps);
  const Var f = tape.constant(random_matrix(kFeat + 4, 1, rng));
  const Var a0 = tape.constant(Tensor::Zero(3, 1));
  const Var z = tape.constant(Tensor::Zero(5, 1));
  const LstmState d = decode_step(tape, p, f, a0, z, z);
  const LstmState ref = lstm_cell(tape, concat({f, a0}), z, z, p.decoder);
  CHECK(d.h.value() == ref.h.value());
  CHECK(d.c.value() == ref.c.value());
  const LstmState again = decode_step(tape, p, f, a0, z, z);
  CHECK(again.h.value() == d.h.value());
}

TEST_CASE("language attention") {
  const ParameterSet ps = agent_params();
  const AgentParams p = AgentParams::lookup(ps);
  std::mt19937_64 rng(4);
  Tape tape(ps);
  const Var h = tape.constant(random_matrix(5, 1, rng));
  const Tensor node = random_matrix(6, 1, rng);
  const LanguageAttention one = attend_language(tape, p, memory(tape, {node}), h);
  CHECK(one.weights.value()(0, 0) == 1.0);
  CHECK((one.context.value() - node).cwiseAbs().maxCoeff() <= 1e-15);
  const LanguageAttention two = attend_language(tape, p, memory(tape, {node, node}), h);
  CHECK(two.weights.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two.weights.value()(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  InstructionEncoding empty;
  CHECK_THROWS_AS(attend_language(tape, p, empty, h), Error);
}

TEST_CASE("fuse_context and value head edge cases") {
  ParameterSet ps = agent_params();
  const AgentParams p = AgentParams::lookup(ps);
  std::mt19937_64 rng(5);
  ps.value(p.W_M).setZero();
  ps.value(p.W_v1).setConstant(-1.0);
  Tape tape(ps);
  const Var u = tape.constant(random_matrix(6, 1, rng));
  const Var h = tape.constant(random_matrix(5, 1, rng).cwiseAbs());
  CHECK(fuse_context(tape, p, u, h).value().isZero(0));
  CHECK(value_baseline(tape, p, h).scalar() == 0.0);
  ps.value(p.W_v1).setZero();
  Tape t2(ps);
  CHECK(value_baseline(t2, p, t2.constant(random_matrix(5, 1, rng))).scalar() == 0.0);
}

TEST_CASE("action scores") {
  const ParameterSet ps = agent_params();
  const AgentParams p = AgentParams::lookup(ps);
  std::mt19937_64 rng(6);
  Tape tape(ps);
  const Var h = tape.constant(random_matrix(5, 1, rng));
  const Tensor g = random_matrix(1, kFeat + 4, rng);
  const Vector probs = softmax(action_logits(tape, p, g.replicate(4, 1), h).value());
  for (int k = 0; k < 4; ++k) CHECK(probs(k) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(softmax(action_logits(tape, p, g, h).value())(0) == 1.0);
  CHECK_THROWS_AS(action_logits(tape, p, Tensor(0, kFeat + 4), h), Error);

  // Positive rescaling of the logits keeps the argmax.
  const Tensor cands = random_matrix(5, kFeat + 4, rng);
  const Tensor logits = action_logits(tape, p, cands, h).value();
  Eigen::Index a = 0, b = 0;
  logits.col(0).maxCoeff(&a);
  softmax(Vector(3.7 * logits.col(0))).maxCoeff(&b);
  CHECK(a == b);
}

TEST_CASE("rollouts") {
  const World w = tiny_world();
  const Model m = tiny_model(w, 3);
  const AgentParams p = AgentParams::lookup(m.params);
  for (const Episode& ep : w.episodes) {
    const EnvironmentGraph& g = w.environment(ep.environment);
    Tape tape(m.params);
    const InstructionEncoding enc = encode_episode(tape, m, ep);
    std::mt19937_64 rng(0);
    const Rollout teacher = rollout(tape, p, g, ep, enc, RolloutMode::Teacher, rng, 35);
    CHECK(teacher.trajectory == ep.path);
    CHECK(teacher.steps.size() == ep.path.size());
    CHECK(teacher.steps.back().stop);
    for (const StepRecord& s : teacher.steps) {
      CHECK(std::abs(s.probs.value().sum() - 1.0) <= 1e-9);
      CHECK(std::abs(s.beta.sum() - 1.0) <= 1e-9);
      CHECK(std::abs(s.gamma.sum() - 1.0) <= 1e-9);
      CHECK(s.probs.value().minCoeff() >= 0.0);
      CHECK(s.gamma.rows() == static_cast<Eigen::Index>(ep.tree.size()));
    }

    std::mt19937_64 r1 = make_rng({7, static_cast<std::uint64_t>(ep.id)});
    std::mt19937_64 r2 = make_rng({7, static_cast<std::uint64_t>(ep.id)});
    Tape t1(m.params), t2(m.params);
    const Rollout s1 = rollout(t1, p, g, ep, encode_episode(t1, m, ep), RolloutMode::Sample, r1, 12);
    const Rollout s2 = rollout(t2, p, g, ep, encode_episode(t2, m, ep), RolloutMode::Sample, r2, 12);
    CHECK(s1.trajectory == s2.trajectory);
    CHECK(s1.steps.size() <= 12);
    CHECK(teacher_trajectory(g, ep, 35) == ep.path);
  }
}

TEST_CASE("greedy at an isolated viewpoint stops immediately") {
  const World w = tiny_world();
  Model m = tiny_model(w, 1);
  for (ParamId id : m.params.ids()) m.params.value(id).setZero();
  const EnvironmentGraph solo("solo", "train", kFeat, 0.1, 1, {fixtures::make_viewpoint(0, 0, 0)}, {});
  Episode ep = w.episodes.front();
  ep.path = {0};
  Tape tape(m.params);
  std::mt19937_64 rng(0);
  const Rollout r = rollout(tape, AgentParams::lookup(m.params), solo, ep, encode_episode(tape, m, ep),
                            RolloutMode::Greedy, rng, 35);
  REQUIRE(r.steps.size() == 1);
  CHECK(r.steps[0].stop);
  CHECK(r.trajectory == std::vector<int>{0});
  CHECK(r.steps[0].probs.value()(0, 0) == 1.0);
}
