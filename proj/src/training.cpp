#include "syntaxnav/training.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "syntaxnav/error.hpp"
#include "syntaxnav/parallel.hpp"
#include "syntaxnav/rng.hpp"

namespace syntaxnav {

std::string_view to_string(TrainMode mode) noexcept { return mode == TrainMode::Mixed ? "mixed" : "il"; }

TrainMode parse_train_mode(std::string_view name) {
  if (name == "mixed") return TrainMode::Mixed;
  if (name == "il") return TrainMode::Imitation;
  throw Error(Errc::ConfigInvalid, "unknown training mode '" + std::string(name) + "' (expected mixed|il)");
}

TrainConfig TrainConfig::full_preset() {
  TrainConfig c;
  c.embed_dim = 256;
  c.encoder_hidden = 256;
  c.decoder_hidden = 512;
  c.action_embed = 128;
  c.value_hidden = 256;
  c.batch = 64;
  c.iterations = 80000;
  c.max_length = 35;
  c.lr = 1e-4;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::ConfigInvalid, m); };
  if (embed_dim < 1 || encoder_hidden < 1 || decoder_hidden < 1 || action_embed < 1 || value_hidden < 1) {
    fail("model widths must be positive");
  }
  if (!(lambda >= 0)) fail("lambda must be >= 0");
  if (!(gamma > 0 && gamma <= 1)) fail("gamma must lie in (0, 1]");
  if (!(eta >= 0)) fail("eta must be >= 0");
  if (!(lr > 0)) fail("learning rate must be positive");
  if (!(clip_norm >= 0)) fail("clip norm must be >= 0");
  if (batch < 1) fail("batch must be >= 1");
  if (iterations < 0) fail("iterations must be >= 0");
  if (max_length < 1) fail("max length must be >= 1");
  if (eval_every < 0) fail("eval_every must be >= 0");
  if (mode == TrainMode::Imitation && !(lambda > 0)) fail("imitation mode needs lambda > 0");
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, std::string, std::less<>> parse_key_values(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigInvalid, "config line " + std::to_string(line_no) + " has no '='");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') throw Error(Errc::ConfigInvalid, "bad number for " + key);
  } else {
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw Error(Errc::ConfigInvalid, "bad integer for " + key);
    }
  }
  return out;
}

}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "encoder=" << to_string(encoder) << '\n'
      << "mode=" << to_string(mode) << '\n'
      << "embed_dim=" << embed_dim << '\n'
      << "encoder_hidden=" << encoder_hidden << '\n'
      << "decoder_hidden=" << decoder_hidden << '\n'
      << "action_embed=" << action_embed << '\n'
      << "value_hidden=" << value_hidden << '\n'
      << "lambda=" << format_double(lambda) << '\n'
      << "gamma=" << format_double(gamma) << '\n'
      << "eta=" << format_double(eta) << '\n'
      << "lr=" << format_double(lr) << '\n'
      << "clip_norm=" << format_double(clip_norm) << '\n'
      << "batch=" << batch << '\n'
      << "iterations=" << iterations << '\n'
      << "max_length=" << max_length << '\n'
      << "eval_every=" << eval_every << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "encoder") c.encoder = parse_encoder_kind(value);
    else if (key == "mode") c.mode = parse_train_mode(value);
    else if (key == "embed_dim") c.embed_dim = parse_number<Eigen::Index>(key, value);
    else if (key == "encoder_hidden") c.encoder_hidden = parse_number<Eigen::Index>(key, value);
    else if (key == "decoder_hidden") c.decoder_hidden = parse_number<Eigen::Index>(key, value);
    else if (key == "action_embed") c.action_embed = parse_number<Eigen::Index>(key, value);
    else if (key == "value_hidden") c.value_hidden = parse_number<Eigen::Index>(key, value);
    else if (key == "lambda") c.lambda = parse_number<double>(key, value);
    else if (key == "gamma") c.gamma = parse_number<double>(key, value);
    else if (key == "eta") c.eta = parse_number<double>(key, value);
    else if (key == "lr") c.lr = parse_number<double>(key, value);
    else if (key == "clip_norm") c.clip_norm = parse_number<double>(key, value);
    else if (key == "batch") c.batch = parse_number<int>(key, value);
    else if (key == "iterations") c.iterations = parse_number<int>(key, value);
    else if (key == "max_length") c.max_length = parse_number<int>(key, value);
    else if (key == "eval_every") c.eval_every = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else throw Error(Errc::ConfigInvalid, "unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

std::vector<Transition> transitions(const Rollout& r) {
  std::vector<Transition> out;
  out.reserve(r.steps.size());
  for (const StepRecord& s : r.steps) {
    out.push_back({s.viewpoint, s.candidate_viewpoints.at(static_cast<std::size_t>(s.action))});
  }
  return out;
}

std::vector<double> compute_rewards(const EnvironmentGraph& graph, std::span<const Transition> steps, int goal,
                                    double radius) {
  std::vector<double> r;
  r.reserve(steps.size());
  for (const Transition& t : steps) r.push_back(graph.distance(t.to, goal) < graph.distance(t.from, goal) ? 1.0 : -1.0);
  if (!steps.empty()) r.back() = graph.distance(steps.back().to, goal) < radius ? 3.0 : -3.0;
  return r;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> R(rewards.size());
  double next = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    R[t] = rewards[t] + gamma * next;
    next = R[t];
  }
  return R;
}

Var il_loss(std::span<const Var> log_probs, std::span<const int> actions) {
  if (log_probs.size() != actions.size()) {
    throw Error(Errc::LengthMismatch, "log-prob and action sequences differ in length");
  }
  if (log_probs.empty()) throw Error(Errc::EmptySequence, "imitation loss over an empty rollout");
  std::vector<Var> terms;
  for (std::size_t t = 0; t < actions.size(); ++t) terms.push_back(pick(log_probs[t], actions[t]));
  return scale(add_n(terms), -1.0);
}

Var step_entropy(Var probs, Var log_probs) { return scale(sum(hadamard(probs, log_probs)), -1.0); }

RlLosses rl_losses(Tape& tape, std::span<const Var> log_probs, std::span<const Var> probs, std::span<const int> actions,
                   std::span<const double> returns, std::span<const Var> baselines, double eta) {
  const std::size_t T = actions.size();
  if (log_probs.size() != T || probs.size() != T || returns.size() != T || baselines.size() != T) {
    throw Error(Errc::LengthMismatch, "rollout sequences differ in length");
  }
  if (T == 0) throw Error(Errc::EmptySequence, "policy loss over an empty rollout");
  std::vector<Var> policy_terms, value_terms;
  for (std::size_t t = 0; t < T; ++t) {
    const double advantage = returns[t] - baselines[t].scalar();
    Var term = scale(pick(log_probs[t], actions[t]), -advantage);
    if (eta != 0.0) term = term - scale(step_entropy(probs[t], log_probs[t]), eta);
    policy_terms.push_back(term);
    const Var diff = baselines[t] - tape.constant(Tensor::Constant(1, 1, returns[t]));
    value_terms.push_back(scale(hadamard(diff, diff), 0.5));
  }
  return {add_n(policy_terms), add_n(value_terms)};
}

// ---------------------------------------------------------------------------

AgentConfig Model::agent_config() const {
  AgentConfig a;
  a.encoder.kind = config.encoder;
  a.encoder.vocab_size = static_cast<Eigen::Index>(vocab.size());
  a.encoder.embed_dim = config.embed_dim;
  a.encoder.hidden = config.encoder_hidden;
  a.observation_dim = feature_dim + kOrientationDim;
  a.decoder_hidden = config.decoder_hidden;
  a.action_embed = config.action_embed;
  a.value_hidden = config.value_hidden;
  return a;
}

std::string Model::config_text() const {
  return config.to_text() + "feature_dim=" + std::to_string(feature_dim) + "\nvocab=" + vocab.serialize() + "\n";
}

Vocabulary training_vocabulary(const World& world) {
  std::vector<std::vector<std::string>> sentences;
  for (const Episode& ep : world.episodes) {
    if (ep.split == Split::Train) sentences.push_back(ep.tokens);
  }
  return Vocabulary::build(sentences);
}

Model make_model(const TrainConfig& config, Vocabulary vocab, Eigen::Index feature_dim) {
  config.validate();
  if (feature_dim < 1) throw Error(Errc::ConfigInvalid, "feature_dim must be positive");
  Model m;
  m.config = config;
  m.vocab = std::move(vocab);
  m.feature_dim = feature_dim;
  std::mt19937_64 rng = make_rng({config.seed, kInitStream});
  add_agent_parameters(m.params, m.agent_config(), rng);
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  CheckpointHeader header;
  header.seed = model.config.seed;
  header.iteration = model.iteration;
  header.config_text = model.config_text();
  save_checkpoint(path, header, model.params);
}

Model load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  auto kv = parse_key_values(ckpt.header.config_text);
  std::string train_text;
  std::string vocab_text;
  Eigen::Index feature_dim = 0;
  for (const auto& [key, value] : kv) {
    if (key == "vocab") vocab_text = value;
    else if (key == "feature_dim") feature_dim = parse_number<Eigen::Index>(key, value);
    else train_text += key + "=" + value + "\n";
  }
  Model m = make_model(TrainConfig::from_text(train_text), Vocabulary::deserialize(vocab_text), feature_dim);
  if (m.params.size() != ckpt.params.size()) {
    throw Error(Errc::CorruptCheckpoint, "checkpoint parameters do not match its recorded configuration");
  }
  for (ParamId id : m.params.ids()) {
    const std::string& name = m.params.name(id);
    if (!ckpt.params.contains(name)) throw Error(Errc::CorruptCheckpoint, "checkpoint lacks parameter " + name);
    const ParamId src = ckpt.params.id(name);
    if (ckpt.params.value(src).rows() != m.params.value(id).rows() ||
        ckpt.params.value(src).cols() != m.params.value(id).cols()) {
      throw Error(Errc::CorruptCheckpoint, "parameter " + name + " has the wrong shape");
    }
    m.params.value(id) = ckpt.params.value(src);
    m.params.accumulator(id) = ckpt.params.accumulator(src);
  }
  m.iteration = ckpt.header.iteration;
  return m;
}

InstructionEncoding encode_episode(Tape& tape, const Model& model, const Episode& episode) {
  const std::vector<int> ids = model.vocab.encode(episode.tokens);
  return encode_instruction(tape, model.config.encoder, ids, episode.tree);
}

// ---------------------------------------------------------------------------

namespace {

struct EpisodeResult {
  Gradients grads;
  double il = 0.0, rl = 0.0, value = 0.0, objective = 0.0;
  EpisodeDiagnostics diag;
};

EpisodeResult episode_update(const Model& model, const AgentParams& p, const World& world, const Episode& ep,
                             double weight, std::uint64_t slot) {
  const TrainConfig& c = model.config;
  const EnvironmentGraph& graph = world.environment(ep.environment);
  Tape tape(model.params);
  const InstructionEncoding enc = encode_episode(tape, model, ep);
  std::mt19937_64 rng = make_rng({c.seed, kRolloutStream, model.iteration, slot});

  EpisodeResult out;
  out.diag.episode_id = ep.id;
  const Rollout teacher = rollout(tape, p, graph, ep, enc, RolloutMode::Teacher, rng, c.max_length);
  std::vector<Var> log_probs;
  std::vector<int> actions;
  for (const StepRecord& s : teacher.steps) {
    log_probs.push_back(s.log_probs);
    actions.push_back(s.action);
  }
  const Var il = il_loss(log_probs, actions);
  out.il = il.scalar();
  Var total = scale(il, c.lambda);

  if (c.mode == TrainMode::Mixed) {
    const Rollout sampled = rollout(tape, p, graph, ep, enc, RolloutMode::Sample, rng, c.max_length);
    const std::vector<Transition> moves = transitions(sampled);
    out.diag.rewards = compute_rewards(graph, moves, ep.goal());
    out.diag.returns = discounted_returns(out.diag.rewards, c.gamma);
    std::vector<Var> lp, pr, baselines;
    for (const StepRecord& s : sampled.steps) {
      lp.push_back(s.log_probs);
      pr.push_back(s.probs);
      // The critic regresses on a detached h_t so L_V cannot reshape the policy.
      baselines.push_back(value_baseline(tape, p, detach(s.hidden)));
      out.diag.sampled_actions.push_back(s.action);
      out.diag.baselines.push_back(baselines.back().scalar());
    }
    const RlLosses rl = rl_losses(tape, lp, pr, out.diag.sampled_actions, out.diag.returns, baselines, c.eta);
    out.rl = rl.policy.scalar();
    out.value = rl.value.scalar();
    total = (rl.policy + rl.value) + total;
  }
  total = scale(total, weight);
  out.objective = total.scalar();
  out.grads = tape.backward(total);
  return out;
}

}  // namespace

StepReport mixed_step(Model& model, const World& world, std::span<const std::size_t> batch) {
  if (batch.empty()) throw Error(Errc::ConfigInvalid, "empty batch");
  const AgentParams p = AgentParams::lookup(model.params);
  const double weight = 1.0 / static_cast<double>(batch.size());
  std::vector<EpisodeResult> results(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    results[i] = episode_update(model, p, world, world.episodes.at(batch[i]), weight, i);
  });

  StepReport report;
  Gradients total = std::move(results.front().grads);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) total += results[i].grads;
    report.L_IL += results[i].il;
    report.L_RL += results[i].rl;
    report.L_V += results[i].value;
    report.objective += results[i].objective;
    report.episodes.push_back(std::move(results[i].diag));
  }
  report.L_IL *= weight;
  report.L_RL *= weight;
  report.L_V *= weight;
  report.L_MIX = (report.L_RL + report.L_V) + model.config.lambda * report.L_IL;

  rmsprop_step(model.params, total, RmsPropConfig{model.config.lr, 0.9, 1e-8, model.config.clip_norm});
  ++model.iteration;
  return report;
}

std::vector<std::size_t> sample_batch(const World& world, const TrainConfig& config, std::uint64_t iteration) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < world.episodes.size(); ++i) {
    if (world.episodes[i].split == Split::Train) pool.push_back(i);
  }
  if (pool.empty()) throw Error(Errc::ConfigInvalid, "world has no training episodes");
  std::mt19937_64 rng = make_rng({config.seed, kBatchStream, iteration});
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> batch(static_cast<std::size_t>(config.batch));
  for (auto& b : batch) b = pool[pick(rng)];
  return batch;
}

std::vector<int> greedy_trajectory(const Model& model, const World& world, const Episode& episode) {
  const AgentParams p = AgentParams::lookup(model.params);
  Tape tape(model.params);
  const InstructionEncoding enc = encode_episode(tape, model, episode);
  std::mt19937_64 unused(0);
  return rollout(tape, p, world.environment(episode.environment), episode, enc, RolloutMode::Greedy, unused,
                 model.config.max_length)
      .trajectory;
}

TrajectoryReport evaluate_model(const Model& model, const World& world, Split split) {
  if (world.feature_dim() != model.feature_dim) {
    throw Error(Errc::ShapeMismatch, "checkpoint expects feature_dim " + std::to_string(model.feature_dim) +
                                         ", world has " + std::to_string(world.feature_dim()));
  }
  std::vector<Episode> episodes;
  for (const Episode& ep : world.episodes) {
    if (ep.split == split) episodes.push_back(ep);
  }
  std::vector<std::vector<int>> trajectories(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) { trajectories[i] = greedy_trajectory(model, world, episodes[i]); });
  return evaluate(world, episodes, trajectories);
}

void train(Model& model, const World& world, const TrainHooks& hooks) {
  const TrainConfig& c = model.config;
  auto has_split = [&](Split s) {
    for (const Episode& ep : world.episodes) {
      if (ep.split == s) return true;
    }
    return false;
  };
  while (model.iteration < static_cast<std::uint64_t>(c.iterations)) {
    if (hooks.stop_after != 0 && model.iteration >= hooks.stop_after) break;
    const std::vector<std::size_t> batch = sample_batch(world, c, model.iteration);
    const StepReport rep = mixed_step(model, world, batch);

    nlohmann::json line = {{"iteration", model.iteration},
                           {"L_IL", rep.L_IL},
                           {"L_RL", rep.L_RL},
                           {"L_V", rep.L_V},
                           {"L_MIX", rep.L_MIX}};
    const bool eval_now = c.eval_every > 0 && (model.iteration % static_cast<std::uint64_t>(c.eval_every) == 0 ||
                                               model.iteration == static_cast<std::uint64_t>(c.iterations));
    if (eval_now) {
      for (auto [split, key] : {std::pair{Split::Seen, "SR_seen"}, std::pair{Split::Unseen, "SR_unseen"}}) {
        line[key] = has_split(split) ? nlohmann::json(evaluate_model(model, world, split).overall.sr) : nullptr;
      }
      if (hooks.on_eval) hooks.on_eval(model);
    }
    if (hooks.log) *hooks.log << line.dump() << '\n' << std::flush;
  }
}

}  // namespace syntaxnav
