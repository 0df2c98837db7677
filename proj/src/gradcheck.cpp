#include "syntaxnav/gradcheck.hpp"

#include <initializer_list>

#include "syntaxnav/rng.hpp"
#include "syntaxnav/training.hpp"

namespace syntaxnav {

namespace {

World fixture_world(std::uint64_t seed) {
  WorldConfig wc;
  wc.grid_w = 3;
  wc.grid_h = 3;
  wc.episodes = 4;
  wc.unseen_fraction = 0.0;
  wc.train_layouts = 1;
  wc.unseen_layouts = 0;
  wc.feature_dim = 5;
  wc.min_hops = 2;
  wc.max_hops = 3;
  wc.landmarks = {"stairs", "door", "kitchen", "sofa", "plant", "lamp"};
  return generate_world(seed, wc);
}

Model fixture_model(const World& world, EncoderKind kind, std::uint64_t seed) {
  TrainConfig c;
  c.encoder = kind;
  c.embed_dim = 4;
  c.encoder_hidden = 3;
  c.decoder_hidden = 4;
  c.action_embed = 3;
  c.value_hidden = 3;
  c.max_length = 4;
  c.seed = seed;
  return make_model(c, training_vocabulary(world), world.feature_dim());
}

// Imitation + fixed-advantage policy + entropy terms over a teacher rollout.
// The critic reads a detached h_t, which finite differences would see
// through, so the value head is checked on L_V alone. The loss is scaled
// down so central-difference roundoff (~1e-16 |L| / eps) stays under the
// 1e-8 floor of the relative error; coordinates with real gradient are
// unaffected by the scale.
constexpr double kLossScale = 1e-3;

Var suite_loss(Tape& tape, const Model& model, const World& world, const Episode& ep, bool value_only) {
  const AgentParams p = AgentParams::lookup(model.params);
  const InstructionEncoding enc = encode_episode(tape, model, ep);
  std::mt19937_64 unused(0);
  const Rollout r = rollout(tape, p, world.environment(ep.environment), ep, enc, RolloutMode::Teacher, unused,
                            model.config.max_length);
  std::vector<Var> lp, pr, baselines;
  std::vector<int> actions;
  std::vector<double> returns;
  for (std::size_t t = 0; t < r.steps.size(); ++t) {
    lp.push_back(r.steps[t].log_probs);
    pr.push_back(r.steps[t].probs);
    actions.push_back(r.steps[t].action);
    baselines.push_back(value_only ? value_baseline(tape, p, detach(r.steps[t].hidden))
                                   : tape.constant(Tensor::Zero(1, 1)));
    returns.push_back(1.5 - 0.7 * static_cast<double>(t));
  }
  const RlLosses rl = rl_losses(tape, lp, pr, actions, returns, baselines, 0.1);
  if (value_only) return scale(rl.value, kLossScale);
  return scale(rl.policy + il_loss(lp, actions), kLossScale);
}

GradCheckRow check_row(std::string name, const World& world, EncoderKind kind, std::uint64_t seed,
                       std::initializer_list<const char*> prefixes, double eps) {
  Model model = fixture_model(world, kind, seed);
  const Episode& ep = world.episodes.front();
  const bool value_only = name == "value";
  GradCheckRow row{std::move(name), {}};
  for (const char* prefix : prefixes) {
    const GradCheckReport r = grad_check(
        model.params, [&](Tape& tape) { return suite_loss(tape, model, world, ep, value_only); }, eps, prefix);
    row.report.coordinates += r.coordinates;
    if (row.report.worst_parameter.empty() || r.max_relative_error > row.report.max_relative_error) {
      row.report.max_relative_error = r.max_relative_error;
      row.report.worst_parameter = r.worst_parameter;
      row.report.worst_row = r.worst_row;
      row.report.worst_col = r.worst_col;
    }
  }
  return row;
}

}  // namespace

std::vector<GradCheckRow> gradient_suite(std::uint64_t seed, double eps) {
  const World world = fixture_world(seed);
  std::vector<GradCheckRow> rows;
  rows.push_back(check_row("embedding", world, EncoderKind::Tree, seed, {"encoder.embedding"}, eps));
  rows.push_back(check_row("bilstm", world, EncoderKind::Tree, seed, {"encoder.bilstm."}, eps));
  rows.push_back(check_row("bilstm2", world, EncoderKind::Chain2, seed, {"encoder.bilstm2."}, eps));
  rows.push_back(check_row("treelstm", world, EncoderKind::Tree, seed, {"encoder.treelstm."}, eps));
  rows.push_back(check_row("meanpool", world, EncoderKind::MeanPool, seed, {"encoder."}, eps));
  rows.push_back(check_row("attention", world, EncoderKind::Tree, seed, {"agent.W_F", "agent.W_U", "agent.W_G"}, eps));
  rows.push_back(check_row("decoder", world, EncoderKind::Tree, seed,
                           {"agent.decoder.", "agent.W_M", "agent.W_A", "agent.W_init", "agent.b_init"}, eps));
  rows.push_back(check_row("value", world, EncoderKind::Tree, seed, {"agent.value."}, eps));
  return rows;
}

}  // namespace syntaxnav
