// syntaxnav: world generation, training, evaluation, attention traces and
// gradient checks. Exit codes: 0 ok, 1 runtime/validation failure, 2 usage.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "syntaxnav/error.hpp"
#include "syntaxnav/gradcheck.hpp"
#include "syntaxnav/parallel.hpp"
#include "syntaxnav/training.hpp"

#ifndef SYNTAXNAV_BUILD_ID
#define SYNTAXNAV_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace syntaxnav;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

json format_versions() {
  return {{"world", "syntaxnav.world/1"},
          {"episode", "syntaxnav.episode/1"},
          {"checkpoint", CheckpointHeader::kFormatVersion},
          {"report", "syntaxnav.report/1"},
          {"trace", "syntaxnav.trace/1"},
          {"manifest", "syntaxnav.manifest/1"}};
}

json manifest(const std::string& command, const std::vector<std::string>& argv, json config, std::uint64_t seed,
              json inputs, json outputs) {
  return {{"format", "syntaxnav.manifest/1"},
          {"command", command},
          {"argv", argv},
          {"config", std::move(config)},
          {"seed", seed},
          {"inputs", std::move(inputs)},
          {"outputs", std::move(outputs)},
          {"formats", format_versions()},
          {"build_id", SYNTAXNAV_BUILD_ID},
          {"threads", worker_count()}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path sibling(const fs::path& path, const std::string& suffix) { return fs::path(path.string() + suffix); }

json config_json(const TrainConfig& c) {
  json j;
  std::istringstream in(c.to_text());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

// ---- gen-world

struct GenWorldArgs {
  std::uint64_t seed = 0;
  std::string grid = "6x6";
  int episodes = 500;
  double unseen_frac = 0.2;
  int train_layouts = 3;
  int unseen_layouts = 2;
  long feature_dim = 64;
  double noise = 0.1;
  int max_hops = 6;
  bool plain = false;
  std::string out;
};

int run_gen_world(const GenWorldArgs& a, const std::vector<std::string>& argv) {
  WorldConfig wc;
  if (std::sscanf(a.grid.c_str(), "%dx%d", &wc.grid_w, &wc.grid_h) != 2) {
    std::cerr << "error: --grid expects WxH, got '" << a.grid << "'\n";
    return kUsage;
  }
  wc.episodes = a.episodes;
  wc.unseen_fraction = a.unseen_frac;
  wc.train_layouts = a.train_layouts;
  wc.unseen_layouts = a.unseen_layouts;
  wc.feature_dim = a.feature_dim;
  wc.noise_sigma = a.noise;
  wc.max_hops = a.max_hops;
  wc.varied_templates = !a.plain;

  const fs::path dir(a.out);
  const SplitCounts counts = split_counts(wc.episodes, wc.unseen_fraction);
  json config = {{"grid_w", wc.grid_w},
                 {"grid_h", wc.grid_h},
                 {"episodes", wc.episodes},
                 {"unseen_fraction", wc.unseen_fraction},
                 {"train_layouts", wc.train_layouts},
                 {"unseen_layouts", wc.unseen_layouts},
                 {"feature_dim", wc.feature_dim},
                 {"noise_sigma", wc.noise_sigma},
                 {"edge_length_m", wc.edge_length},
                 {"min_hops", wc.min_hops},
                 {"max_hops", wc.max_hops},
                 {"varied_templates", wc.varied_templates},
                 {"landmarks", wc.landmarks},
                 {"split_rule", "held_out = round(unseen_frac * episodes); seen = floor(held_out / 2); "
                                "unseen = held_out - seen; train = episodes - held_out"},
                 {"split_counts", {{"train", counts.train}, {"seen", counts.seen}, {"unseen", counts.unseen}}}};
  write_text(dir / "manifest.json",
             manifest("gen-world", argv, config, a.seed, json::object(),
                      {{"world", (dir / "world.json").string()}, {"episodes", (dir / "episodes.jsonl").string()}})
                     .dump(1) +
                 "\n");
  try {
    write_world(dir, generate_world(a.seed, wc));
  } catch (...) {
    std::error_code ec;
    fs::remove(dir / "world.json", ec);
    fs::remove(dir / "episodes.jsonl", ec);
    throw;
  }
  std::cout << "wrote " << dir.string() << ": " << counts.train << " train / " << counts.seen << " seen / "
            << counts.unseen << " unseen episodes\n";
  return 0;
}

// ---- train

struct TrainArgs {
  std::string world;
  std::string out;
  std::string preset = "desk";
  std::string config_file;
  std::string resume;
  std::string log;
  std::string encoder = "tree";
  std::string mode = "mixed";
  int iters = 0, batch = 0, max_len = 0, eval_every = 0;
  double lr = 0, lambda = 0, gamma = 0, eta = 0, clip = 0;
  long embed = 0, enc_hidden = 0, dec_hidden = 0, action_dim = 0, value_hidden = 0;
  std::uint64_t seed = 0;
  std::uint64_t stop_after = 0;
};

int run_train(const TrainArgs& a, const CLI::App& cmd, const std::vector<std::string>& argv) {
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  const World world = read_world(a.world);

  Model model;
  if (!a.resume.empty()) {
    model = load_model(a.resume);
    if (model.feature_dim != world.feature_dim()) {
      throw Error(Errc::ShapeMismatch, "checkpoint feature_dim does not match the world");
    }
  } else {
    TrainConfig c;
    if (a.preset == "full") c = TrainConfig::full_preset();
    else if (a.preset != "desk") throw CLI::ValidationError("--preset", "expected desk|full");
    if (!a.config_file.empty()) c = TrainConfig::from_text(c.to_text() + read_text(a.config_file));
    if (given("--encoder")) c.encoder = parse_encoder_kind(a.encoder);
    if (given("--mode")) c.mode = parse_train_mode(a.mode);
    if (given("--iters")) c.iterations = a.iters;
    if (given("--batch")) c.batch = a.batch;
    if (given("--max-len")) c.max_length = a.max_len;
    if (given("--eval-every")) c.eval_every = a.eval_every;
    if (given("--lr")) c.lr = a.lr;
    if (given("--lambda")) c.lambda = a.lambda;
    if (given("--gamma")) c.gamma = a.gamma;
    if (given("--eta")) c.eta = a.eta;
    if (given("--clip")) c.clip_norm = a.clip;
    if (given("--embed-dim")) c.embed_dim = a.embed;
    if (given("--enc-hidden")) c.encoder_hidden = a.enc_hidden;
    if (given("--dec-hidden")) c.decoder_hidden = a.dec_hidden;
    if (given("--action-dim")) c.action_embed = a.action_dim;
    if (given("--value-hidden")) c.value_hidden = a.value_hidden;
    if (given("--seed")) c.seed = a.seed;
    c.validate();
    model = make_model(c, training_vocabulary(world), world.feature_dim());
  }

  const fs::path out(a.out);
  const fs::path log_path = a.log.empty() ? sibling(out, ".log.jsonl") : fs::path(a.log);
  write_text(sibling(out, ".manifest.json"),
             manifest("train", argv, config_json(model.config), model.config.seed,
                      {{"world", a.world}, {"resume", a.resume}},
                      {{"checkpoint", out.string()}, {"log", log_path.string()}})
                     .dump(1) +
                 "\n");

  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw Error(Errc::Io, "cannot write " + log_path.string());
  TrainHooks hooks;
  hooks.log = &log;
  hooks.stop_after = a.stop_after;
  const auto t0 = std::chrono::steady_clock::now();
  train(model, world, hooks);
  save_model(out, model);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "trained " << to_string(model.config.encoder) << " to iteration " << model.iteration << " in "
            << secs << " s; checkpoint " << out.string() << "\n";
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string world, ckpt, split = "unseen", report, csv;
  int max_len = 20;
};

int run_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const World world = read_world(a.world);
  const Split split = parse_split(a.split);
  const fs::path report_path(a.report);
  const fs::path csv_path = a.csv.empty() ? fs::path(report_path).replace_extension(".csv") : fs::path(a.csv);
  write_text(sibling(report_path, ".manifest.json"),
             manifest("eval", argv, {{"split", a.split}, {"max_length", a.max_len}}, 0,
                      {{"world", a.world}, {"checkpoint", a.ckpt}},
                      {{"report", report_path.string()}, {"csv", csv_path.string()}})
                     .dump(1) +
                 "\n");

  TrajectoryReport report;
  if (a.ckpt == "teacher") {
    std::vector<Episode> episodes;
    std::vector<std::vector<int>> trajectories;
    for (const Episode& ep : world.episodes) {
      if (ep.split != split) continue;
      episodes.push_back(ep);
      trajectories.push_back(teacher_trajectory(world.environment(ep.environment), ep, a.max_len));
    }
    report = evaluate(world, episodes, trajectories);
  } else {
    const Model model = load_model(a.ckpt);
    if (model.feature_dim != world.feature_dim()) {
      std::cerr << "error: checkpoint feature_dim " << model.feature_dim << " != world feature_dim "
                << world.feature_dim() << "\n";
      return kFailure;
    }
    report = evaluate_model(model, world, split);
  }
  write_text(report_path, report_json(report));
  write_text(csv_path, report_csv(report));
  std::cout << report_csv(report);
  return 0;
}

// ---- trace

struct TraceArgs {
  std::string world, ckpt, out;
  int episode = 0;
};

int run_trace(const TraceArgs& a, const std::vector<std::string>& argv) {
  const World world = read_world(a.world);
  const Episode& ep = world.episode(a.episode);
  const Model model = load_model(a.ckpt);
  if (model.feature_dim != world.feature_dim()) {
    std::cerr << "error: checkpoint feature_dim does not match the world\n";
    return kFailure;
  }
  write_text(sibling(fs::path(a.out), ".manifest.json"),
             manifest("trace", argv, {{"episode", a.episode}}, model.config.seed,
                      {{"world", a.world}, {"checkpoint", a.ckpt}}, {{"trace", a.out}})
                     .dump(1) +
                 "\n");

  const AgentParams p = AgentParams::lookup(model.params);
  Tape tape(model.params);
  const InstructionEncoding enc = encode_episode(tape, model, ep);
  std::mt19937_64 unused(0);
  const Rollout r = rollout(tape, p, world.environment(ep.environment), ep, enc, RolloutMode::Greedy, unused,
                            model.config.max_length);

  // Node i of every encoder is token i + 1.
  json nodes = json::array();
  for (std::size_t i = 0; i < ep.tree.size(); ++i) {
    const Token& t = ep.tree.token(static_cast<int>(i) + 1);
    nodes.push_back({{"node", i}, {"token", t.index}, {"form", t.form}, {"head", t.head}});
  }
  json steps = json::array();
  for (const StepRecord& s : r.steps) {
    json actions = json::array();
    for (std::size_t k = 0; k < s.candidate_viewpoints.size(); ++k) {
      actions.push_back({{"candidate", s.candidate_viewpoints[k]},
                         {"stop", k + 1 == s.candidate_viewpoints.size()},
                         {"prob", s.probs.value()(static_cast<Eigen::Index>(k), 0)}});
    }
    steps.push_back({{"viewpoint", s.viewpoint},
                     {"beta", std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size())},
                     {"gamma", std::vector<double>(s.gamma.data(), s.gamma.data() + s.gamma.size())},
                     {"actions", std::move(actions)},
                     {"chosen", s.action}});
  }
  const json doc = {{"format", "syntaxnav.trace/1"},
                    {"episode_id", ep.id},
                    {"encoder", to_string(model.config.encoder)},
                    {"instruction", ep.tokens},
                    {"nodes", std::move(nodes)},
                    {"reference_path", ep.path},
                    {"trajectory", r.trajectory},
                    {"steps", std::move(steps)}};
  write_text(a.out, doc.dump(1) + "\n");
  std::cout << "wrote " << r.steps.size() << " steps to " << a.out << "\n";
  return 0;
}

// ---- gradcheck

int run_gradcheck(std::uint64_t seed, int seeds, double eps, const std::vector<std::string>& argv) {
  std::cout << manifest("gradcheck", argv, {{"eps", eps}, {"seeds", seeds}}, seed, json::object(), json::object())
                   .dump()
            << "\n";
  if (eps < 1e-7 || eps > 1e-3) {
    std::fprintf(stderr, "note: eps %.1e is outside [1e-7, 1e-3]; expect truncation or roundoff error\n", eps);
  }
  bool ok = true;
  std::printf("%-10s %6s %12s  %s\n", "module", "seed", "max_rel_err", "worst");
  for (int k = 0; k < seeds; ++k) {
    for (const GradCheckRow& row : gradient_suite(seed + static_cast<std::uint64_t>(k), eps)) {
      std::printf("%-10s %6llu %12.3e  %s(%ld,%ld) %s\n", row.name.c_str(),
                  static_cast<unsigned long long>(seed + static_cast<std::uint64_t>(k)),
                  row.report.max_relative_error, row.report.worst_parameter.c_str(),
                  static_cast<long>(row.report.worst_row), static_cast<long>(row.report.worst_col),
                  row.passed() ? "ok" : "FAIL");
      ok = ok && row.passed();
    }
  }
  std::printf("%s (tolerance %.0e)\n", ok ? "all submodules pass" : "gradient check FAILED", kGradTolerance);
  return ok ? 0 : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Syntax-aware navigation agent on synthetic viewpoint graphs"};
  app.require_subcommand(1);

  GenWorldArgs gw;
  auto* gen = app.add_subcommand("gen-world", "Generate a world and its episodes");
  gen->add_option("--seed", gw.seed, "Root seed");
  gen->add_option("--grid", gw.grid, "Grid size WxH")->capture_default_str();
  gen->add_option("--episodes", gw.episodes, "Episode count")->capture_default_str();
  gen->add_option("--unseen-frac", gw.unseen_frac, "Held-out fraction")->capture_default_str();
  gen->add_option("--train-layouts", gw.train_layouts)->capture_default_str();
  gen->add_option("--unseen-layouts", gw.unseen_layouts)->capture_default_str();
  gen->add_option("--feature-dim", gw.feature_dim)->capture_default_str();
  gen->add_option("--noise", gw.noise, "Feature noise sigma")->capture_default_str();
  gen->add_option("--max-hops", gw.max_hops)->capture_default_str();
  gen->add_flag("--plain-templates", gw.plain, "Disable fronted clause variants");
  gen->add_option("--out", gw.out, "Output directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train an agent");
  tr->add_option("--world", ta.world, "World directory")->required();
  tr->add_option("--out", ta.out, "Checkpoint path")->required();
  tr->add_option("--preset", ta.preset, "desk|full")->capture_default_str();
  tr->add_option("--config", ta.config_file, "key=value config file");
  tr->add_option("--resume", ta.resume, "Continue from checkpoint");
  tr->add_option("--stop-after", ta.stop_after, "Stop and checkpoint at this iteration");
  tr->add_option("--log", ta.log, "JSONL log path (default <out>.log.jsonl)");
  tr->add_option("--encoder", ta.encoder, "tree|chain|chain2|meanpool");
  tr->add_option("--mode", ta.mode, "mixed|il");
  tr->add_option("--iters", ta.iters);
  tr->add_option("--batch", ta.batch);
  tr->add_option("--max-len", ta.max_len);
  tr->add_option("--eval-every", ta.eval_every);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--lambda", ta.lambda);
  tr->add_option("--gamma", ta.gamma);
  tr->add_option("--eta", ta.eta);
  tr->add_option("--clip", ta.clip, "Global gradient-norm clip (0 = off)");
  tr->add_option("--embed-dim", ta.embed);
  tr->add_option("--enc-hidden", ta.enc_hidden, "Bi-LSTM width per direction");
  tr->add_option("--dec-hidden", ta.dec_hidden);
  tr->add_option("--action-dim", ta.action_dim);
  tr->add_option("--value-hidden", ta.value_hidden);
  tr->add_option("--seed", ta.seed);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Greedy evaluation");
  ev->add_option("--world", ea.world)->required();
  ev->add_option("--ckpt", ea.ckpt, "Checkpoint, or 'teacher'")->required();
  ev->add_option("--split", ea.split, "seen|unseen|train")->capture_default_str();
  ev->add_option("--report", ea.report, "report.json path")->required();
  ev->add_option("--csv", ea.csv, "CSV path (default: report with .csv)");
  ev->add_option("--max-len", ea.max_len, "Episode cap for the teacher")->capture_default_str();

  TraceArgs tra;
  auto* tc = app.add_subcommand("trace", "Attention trace for one episode");
  tc->add_option("--world", tra.world)->required();
  tc->add_option("--ckpt", tra.ckpt)->required();
  tc->add_option("--episode", tra.episode)->required();
  tc->add_option("--out", tra.out)->required();

  std::uint64_t gc_seed = 0;
  int gc_seeds = 1;
  double gc_eps = 1e-5;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc->add_option("--seed", gc_seed)->capture_default_str();
  gc->add_option("--seeds", gc_seeds, "Number of consecutive seeds")->capture_default_str();
  gc->add_option("--eps", gc_eps)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return run_gen_world(gw, args);
    if (*tr) return run_train(ta, *tr, args);
    if (*ev) return run_eval(ea, args);
    if (*tc) return run_trace(tra, args);
    if (*gc) return run_gradcheck(gc_seed, gc_seeds, gc_eps, args);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigInvalid ? kUsage : kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
