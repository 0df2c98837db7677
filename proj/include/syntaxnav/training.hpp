#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syntaxnav/agent.hpp"
#include "syntaxnav/encoder.hpp"
#include "syntaxnav/metrics.hpp"
#include "syntaxnav/world.hpp"

namespace syntaxnav {

enum class TrainMode { Mixed, Imitation };
std::string_view to_string(TrainMode mode) noexcept;
TrainMode parse_train_mode(std::string_view name);

// Defaults are the desk-scale configuration; full_preset() switches to the
// large widths, batch 64, 80000 iterations and episode length 35.
struct TrainConfig {
  EncoderKind encoder = EncoderKind::Tree;
  TrainMode mode = TrainMode::Mixed;
  Eigen::Index embed_dim = 64;
  Eigen::Index encoder_hidden = 64;  // per direction
  Eigen::Index decoder_hidden = 128;
  Eigen::Index action_embed = 32;
  Eigen::Index value_hidden = 64;
  double lambda = 0.2;
  double gamma = 0.9;
  double eta = 0.01;
  double lr = 1e-4;
  double clip_norm = 0.0;
  int batch = 8;
  int iterations = 3000;
  int max_length = 20;
  int eval_every = 500;  // 0 disables periodic validation
  std::uint64_t seed = 0;

  static TrainConfig full_preset();
  void validate() const;

  // Flat "key=value" lines, one per field.
  std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
};

// ---- rewards and losses

// One executed decision; from == to marks STOP.
struct Transition {
  int from = 0;
  int to = 0;
};

std::vector<Transition> transitions(const Rollout& rollout);

// +1 when a move gets strictly closer to the goal, -1 otherwise; the final
// decision (STOP or forced stop) is replaced by +3 / -3 by the success radius.
std::vector<double> compute_rewards(const EnvironmentGraph& graph, std::span<const Transition> steps, int goal,
                                    double radius = kSuccessRadius);

// R_t = r_t + gamma R_{t+1}, R_T = 0.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// sum_t -log p_t(a*_t)
Var il_loss(std::span<const Var> log_probs, std::span<const int> actions);

Var step_entropy(Var probs, Var log_probs);

struct RlLosses {
  Var policy;  // -sum (R - R_b) log p(a) - eta sum H, advantage detached
  Var value;   // sum 1/2 (R - R_b)^2
};

RlLosses rl_losses(Tape& tape, std::span<const Var> log_probs, std::span<const Var> probs, std::span<const int> actions,
                   std::span<const double> returns, std::span<const Var> baselines, double eta);

// ---- model

struct Model {
  TrainConfig config;
  Vocabulary vocab;
  Eigen::Index feature_dim = 0;
  ParameterSet params;
  std::uint64_t iteration = 0;

  AgentConfig agent_config() const;
  std::string config_text() const;  // echoed into checkpoint headers
};

Vocabulary training_vocabulary(const World& world);

// Fresh parameters from the (seed, init) substream.
Model make_model(const TrainConfig& config, Vocabulary vocab, Eigen::Index feature_dim);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

InstructionEncoding encode_episode(Tape& tape, const Model& model, const Episode& episode);

struct EpisodeDiagnostics {
  int episode_id = 0;
  std::vector<int> sampled_actions;
  std::vector<double> rewards;
  std::vector<double> returns;
  std::vector<double> baselines;
};

struct StepReport {
  double L_IL = 0.0;
  double L_RL = 0.0;
  double L_V = 0.0;
  double L_MIX = 0.0;
  double objective = 0.0;  // value of the loss actually differentiated
  std::vector<EpisodeDiagnostics> episodes;
};

// One optimizer step on `batch` (episode indices into world.episodes).
StepReport mixed_step(Model& model, const World& world, std::span<const std::size_t> batch);

// Batch drawn for an iteration; a pure function of (seed, iteration).
std::vector<std::size_t> sample_batch(const World& world, const TrainConfig& config, std::uint64_t iteration);

std::vector<int> greedy_trajectory(const Model& model, const World& world, const Episode& episode);

TrajectoryReport evaluate_model(const Model& model, const World& world, Split split);

struct TrainHooks {
  std::ostream* log = nullptr;          // JSONL
  std::uint64_t stop_after = 0;         // stop once this iteration is reached (0 = run to completion)
  std::function<void(const Model&)> on_eval;
};

// Runs from model.iteration up to config.iterations.
void train(Model& model, const World& world, const TrainHooks& hooks = {});

}  // namespace syntaxnav
