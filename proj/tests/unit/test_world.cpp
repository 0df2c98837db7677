#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "syntaxnav/rng.hpp"
#include "syntaxnav/world.hpp"

using namespace syntaxnav;

namespace {

WorldConfig small_config() {
  WorldConfig c;
  c.grid_w = 5;
  c.grid_h = 5;
  c.episodes = 60;
  c.feature_dim = 8;
  c.max_hops = 5;
  return c;
}

// Exhaustive simple-path search up to max_hops edges.
double enumerate_shortest(const EnvironmentGraph& g, int from, int to, int max_hops) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> seen(g.size(), false);
  std::function<void(int, double, int)> dfs = [&](int at, double len, int hops) {
    if (at == to) {
      best = std::min(best, len);
      return;
    }
    if (hops == max_hops) return;
    seen[static_cast<std::size_t>(at)] = true;
    for (int n : g.neighbors(at)) {
      if (!seen[static_cast<std::size_t>(n)]) dfs(n, len + g.edge_length(at, n), hops + 1);
    }
    seen[static_cast<std::size_t>(at)] = false;
  };
  dfs(from, 0.0, 0);
  return best;
}

}  // namespace

TEST_CASE("grid graph shape") {
  const EnvironmentGraph g = fixtures::grid_graph(5, 5);
  CHECK(g.size() == 25);
  CHECK(g.edges().size() == 40);
  CHECK(g.neighbors(0) == std::vector<int>{1, 5});
  CHECK(g.distance(0, 24) == 16.0);
  CHECK_THROWS_AS(g.viewpoint(25), Error);
}

TEST_CASE("generated world: 5x5 grid layouts") {
  const World w = generate_world(3, small_config());
  for (const auto& env : w.environments) {
    CHECK(env.size() == 25);
    CHECK(env.edges().size() == 40);
  }
}

TEST_CASE("graph validation rejects corrupt inputs") {
  using fixtures::make_viewpoint;
  auto build = [](std::vector<Viewpoint> vps, std::vector<Edge> edges) {
    return EnvironmentGraph("x", "train", 4, 0.1, 1, std::move(vps), std::move(edges));
  };
  auto code = [&](std::vector<Viewpoint> vps, std::vector<Edge> edges) {
    try {
      build(std::move(vps), std::move(edges));
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  CHECK(code({make_viewpoint(0, 0, 0), make_viewpoint(1, 5, 0)}, {}) == Errc::CorruptWorld);
  CHECK(code({make_viewpoint(0, 0, 0), make_viewpoint(1, 2, 0)}, {{0, 1, 3.0}}) == Errc::CorruptWorld);
  CHECK(code({make_viewpoint(0, 0, 0), make_viewpoint(1, 2, 0)}, {{0, 1, 2.0}, {1, 0, 2.0}}) == Errc::CorruptWorld);
  CHECK(code({make_viewpoint(0, 0, 0), make_viewpoint(2, 2, 0)}, {{0, 1, 2.0}}) == Errc::CorruptWorld);
  CHECK(code({}, {}) == Errc::CorruptWorld);
  CHECK_NOTHROW(build({make_viewpoint(0, 0, 0)}, {}));
}

TEST_CASE("panorama at a corner and orientation blocks") {
  const EnvironmentGraph g = fixtures::grid_graph(3, 3);
  NavState s{0, 0.0, 0, false};
  const Observation obs = panorama(g, s);
  CHECK(obs.size() == 3);
  CHECK(obs.views.rows() == 36);
  CHECK(obs.views.cols() == g.observation_dim());
  CHECK(obs.candidate_viewpoints == std::vector<int>{1, 3, 0});
  // Heading 0 faces viewpoint 1 (+x).
  const Eigen::RowVector4d toward = obs.candidates.row(0).tail(4);
  CHECK(toward(0) == doctest::Approx(1.0));
  CHECK(std::abs(toward(1)) < 1e-15);
  CHECK(toward(2) == 1.0);
  CHECK(toward(3) == 0.0);
  const Eigen::RowVector4d left = obs.candidates.row(1).tail(4);
  CHECK(std::abs(left(0)) < 1e-15);
  CHECK(left(1) == doctest::Approx(1.0));
  CHECK(obs.candidates.row(2).head(g.feature_dim()).isZero(0));
  CHECK(obs.candidates.row(2).tail(4) == Eigen::RowVector4d(1, 0, 1, 0));
  // Candidate features come from the horizon slice facing the neighbour.
  CHECK(obs.candidates.row(1).head(g.feature_dim()) == g.slice_features(0).row(kHeadingSlices + 3));
  CHECK(slice_elevation(0) == doctest::Approx(-kPi / 6));
  CHECK(slice_heading(13) == doctest::Approx(kPi / 6));

  const EnvironmentGraph lonely("solo", "train", 4, 0.1, 1, {fixtures::make_viewpoint(0, 0, 0)}, {});
  CHECK(panorama(lonely, NavState{}).size() == 1);
}

TEST_CASE("step semantics") {
  const EnvironmentGraph g = fixtures::grid_graph(3, 3);
  NavState s{4, 0.0, 0, false};
  const int stop = panorama(g, s).stop_index();
  const NavState stopped = step(g, s, stop, 35);
  CHECK(stopped.done);
  CHECK(stopped.viewpoint == 4);
  CHECK(stopped.steps == 0);
  CHECK_THROWS_AS(step(g, stopped, 0, 35), Error);
  CHECK_THROWS_AS(step(g, s, stop + 1, 35), Error);
  CHECK_THROWS_AS(step(g, s, -1, 35), Error);

  const NavState moved = step(g, s, 0, 35);  // neighbour 1, straight down in y
  CHECK(moved.viewpoint == 1);
  CHECK(moved.steps == 1);
  CHECK(!moved.done);
  CHECK(moved.heading == doctest::Approx(-kPi / 2));

  NavState walk{0, 0.0, 0, false};
  int hops = 0;
  while (!walk.done) {
    walk = step(g, walk, 0, 35);
    ++hops;
  }
  CHECK(hops == 35);
  CHECK(walk.steps == 35);
}

TEST_CASE("shortest_path") {
  const EnvironmentGraph g = fixtures::grid_graph(4, 4);
  const PathResult self = shortest_path(g, 5, 5);
  CHECK(self.path == std::vector<int>{5});
  CHECK(self.length == 0.0);
  const PathResult adj = shortest_path(g, 5, 6);
  CHECK(adj.path == std::vector<int>{5, 6});
  CHECK(adj.length == 2.0);
  // Ties go to the smallest next id.
  CHECK(shortest_path(g, 0, 5).path == std::vector<int>{0, 1, 5});

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const int a = static_cast<int>(rng() % 16), b = static_cast<int>(rng() % 16);
    const PathResult r = shortest_path(g, a, b);
    CHECK(r.length == enumerate_shortest(g, a, b, 6));
    CHECK(r.path.front() == a);
    CHECK(r.path.back() == b);
    double walked = 0.0;
    for (std::size_t i = 1; i < r.path.size(); ++i) walked += g.edge_length(r.path[i - 1], r.path[i]);
    CHECK(walked == r.length);
  }

  const EnvironmentGraph irregular = fixtures::line_graph({0.0, 1.5, 4.0, 4.5});
  const auto oracle = fixtures::all_pairs(irregular);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) CHECK(shortest_path(irregular, a, b).length == doctest::Approx(oracle[a][b]));
  }
}

TEST_CASE("teacher_action") {
  const EnvironmentGraph g = fixtures::grid_graph(3, 3);
  NavState s{4, 0.0, 0, false};
  CHECK(teacher_action(g, s, 4) == panorama(g, s).stop_index());
  const Observation obs = panorama(g, s);
  const int a = teacher_action(g, s, 7);
  CHECK(obs.candidate_viewpoints[static_cast<std::size_t>(a)] == 7);
}

TEST_CASE("teacher closed loop follows every generated reference path") {
  const World w = generate_world(5, small_config());
  for (const Episode& ep : w.episodes) {
    const EnvironmentGraph& g = w.environment(ep.environment);
    NavState s{ep.start(), ep.start_heading, 0, false};
    std::vector<int> visited{s.viewpoint};
    while (!s.done) {
      s = step(g, s, teacher_action(g, s, ep.goal()), 35);
      if (visited.back() != s.viewpoint) visited.push_back(s.viewpoint);
    }
    CHECK(visited == ep.path);
    CHECK(shortest_path(g, ep.start(), ep.goal()).path == ep.path);
  }
}

TEST_CASE("the stairs instruction") {
  using fixtures::make_viewpoint;
  const EnvironmentGraph g("fig1", "train", 4, 0.1, 1,
                           {make_viewpoint(0, 0, 0, "rug"), make_viewpoint(1, 2, 0, "stairs"),
                            make_viewpoint(2, 2, -2, "stairs")},
                           {{0, 1, 2.0}, {1, 2, 2.0}});
  std::mt19937_64 rng(0);
  const Instruction ins = generate_instruction(g, {0, 1, 2}, 0.0, GrammarOptions{}, rng);
  const std::vector<std::string> expected{"walk", "forward", "then", "turn", "right", "at", "the",
                                          "stairs", "then", "go", "down", "the", "stairs"};
  CHECK(ins.tokens == expected);
  std::vector<int> heads;
  for (const Token& t : ins.tree.tokens) heads.push_back(t.head);
  CHECK(heads == std::vector<int>{0, 1, 4, 1, 4, 8, 8, 4, 10, 4, 10, 13, 10});

  const Instruction one = generate_instruction(g, {0, 1}, 0.0, GrammarOptions{}, rng);
  CHECK(one.tokens == std::vector<std::string>{"walk", "to", "the", "stairs"});
  CHECK(one.tree.root == 1);
  try {
    generate_instruction(g, {0}, 0.0, GrammarOptions{}, rng);
    FAIL("expected PathTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::PathTooShort);
  }
}

TEST_CASE("varied templates keep the same heads per clause") {
  const World w = generate_world(8, small_config());
  for (const Episode& ep : w.episodes) {
    CHECK_NOTHROW(validate_tree(ep.tree));
    CHECK(ep.tokens.size() == ep.tree.size());
    CHECK(ep.tokens.front() == "walk");
    CHECK(ep.tree.root == 1);
  }
}

TEST_CASE("split arithmetic and layout separation") {
  const SplitCounts c = split_counts(500, 0.2);
  CHECK(c.train == 400);
  CHECK(c.seen == 50);
  CHECK(c.unseen == 50);
  const SplitCounts odd = split_counts(15, 0.2);
  CHECK(odd.train + odd.seen + odd.unseen == 15);
  CHECK(odd.unseen >= odd.seen);

  WorldConfig cfg = small_config();
  cfg.episodes = 100;
  const World w = generate_world(2, cfg);
  std::set<std::string> train_envs, unseen_envs;
  int counts[3] = {0, 0, 0};
  for (const Episode& ep : w.episodes) {
    ++counts[static_cast<int>(ep.split)];
    (ep.split == Split::Unseen ? unseen_envs : train_envs).insert(ep.environment);
    CHECK(w.environment(ep.environment).split() == (ep.split == Split::Unseen ? "unseen" : "train"));
  }
  CHECK(counts[0] == 80);
  CHECK(counts[1] == 10);
  CHECK(counts[2] == 10);
  for (const auto& e : unseen_envs) CHECK(train_envs.count(e) == 0);
}

TEST_CASE("landmark features are shared across worlds") {
  const Vector a = landmark_feature("stairs", 16);
  CHECK(a == landmark_feature("stairs", 16));
  CHECK(a != landmark_feature("door", 16));
}

TEST_CASE("world generation is deterministic and round-trips") {
  const WorldConfig cfg = small_config();
  const World a = generate_world(11, cfg), b = generate_world(11, cfg), c = generate_world(12, cfg);
  CHECK(world_json(a) == world_json(b));
  CHECK(episodes_jsonl(a) == episodes_jsonl(b));
  CHECK(episodes_jsonl(a) != episodes_jsonl(c));

  const auto dir = std::filesystem::temp_directory_path() / "syntaxnav_unit_world";
  std::filesystem::remove_all(dir);
  write_world(dir, a);
  const World back = read_world(dir);
  CHECK(world_json(back) == world_json(a));
  CHECK(episodes_jsonl(back) == episodes_jsonl(a));
  CHECK(back.environments.front().slice_features(3) == a.environments.front().slice_features(3));

  {
    std::ofstream out(dir / "world.json", std::ios::trunc);
    out << "{\"format\": \"syntaxnav.world/1\", \"environments\": [";
  }
  try {
    read_world(dir);
    FAIL("expected CorruptWorld");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CorruptWorld);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("generation config validation") {
  WorldConfig bad = small_config();
  bad.grid_w = 1;
  CHECK_THROWS_AS(generate_world(0, bad), Error);
  bad = small_config();
  bad.unseen_fraction = 1.0;
  CHECK_THROWS_AS(generate_world(0, bad), Error);
}
