#include "syntaxnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "syntaxnav/params.hpp"
#include "syntaxnav/rng.hpp"

namespace syntaxnav {

using nlohmann::json;

namespace {

constexpr double kDeg30 = kPi / 6.0;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPathTolerance = 1e-9;

double wrap_angle(double a) {
  a = std::fmod(a, 2 * kPi);
  if (a <= -kPi) a += 2 * kPi;
  if (a > kPi) a -= 2 * kPi;
  return a;
}

int heading_slice(double heading) {
  const long k = std::lround(heading / kDeg30);
  return static_cast<int>(((k % kHeadingSlices) + kHeadingSlices) % kHeadingSlices);
}

}  // namespace

double slice_heading(int slice) noexcept { return (slice % kHeadingSlices) * kDeg30; }

double slice_elevation(int slice) noexcept { return (slice / kHeadingSlices - 1) * kDeg30; }

Eigen::Vector4d orientation_feature(double heading, double elevation) {
  return {std::cos(heading), std::sin(heading), std::cos(elevation), std::sin(elevation)};
}

Vector landmark_feature(std::string_view tag, Eigen::Index dim) {
  std::mt19937_64 rng(derive_seed({fnv1a64(tag), 0x6C616E646D61726Bull}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  return v;
}

EnvironmentGraph::EnvironmentGraph(std::string id, std::string split, Eigen::Index feature_dim, double noise_sigma,
                                   std::uint64_t noise_seed, std::vector<Viewpoint> viewpoints,
                                   std::vector<Edge> edges)
    : id_(std::move(id)),
      split_(std::move(split)),
      feature_dim_(feature_dim),
      noise_sigma_(noise_sigma),
      noise_seed_(noise_seed),
      viewpoints_(std::move(viewpoints)),
      edges_(std::move(edges)) {
  const int n = static_cast<int>(viewpoints_.size());
  if (n == 0) throw Error(Errc::CorruptWorld, "environment '" + id_ + "' has no viewpoints");
  if (feature_dim_ < 1) throw Error(Errc::CorruptWorld, "feature_dim must be positive");
  for (int i = 0; i < n; ++i) {
    if (viewpoints_[static_cast<std::size_t>(i)].id != i) {
      throw Error(Errc::CorruptWorld, "viewpoint ids must be 0..n-1 in order");
    }
  }
  neighbors_.assign(static_cast<std::size_t>(n), {});
  for (const Edge& e : edges_) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n || e.a == e.b) {
      throw Error(Errc::CorruptWorld, "edge references an invalid viewpoint");
    }
    if (!(e.length > 0)) throw Error(Errc::CorruptWorld, "edge lengths must be positive");
    const double euclid = (viewpoints_[static_cast<std::size_t>(e.a)].position -
                           viewpoints_[static_cast<std::size_t>(e.b)].position)
                              .norm();
    if (std::abs(euclid - e.length) > 1e-9) {
      throw Error(Errc::CorruptWorld, "edge " + std::to_string(e.a) + "-" + std::to_string(e.b) +
                                          " length disagrees with viewpoint positions");
    }
    auto& na = neighbors_[static_cast<std::size_t>(e.a)];
    if (std::find(na.begin(), na.end(), e.b) != na.end()) throw Error(Errc::CorruptWorld, "duplicate edge");
    na.push_back(e.b);
    neighbors_[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  distances_ = Tensor::Constant(n, n, kInf);
  for (int i = 0; i < n; ++i) distances_(i, i) = 0.0;
  for (const Edge& e : edges_) {
    distances_(e.a, e.b) = std::min(distances_(e.a, e.b), e.length);
    distances_(e.b, e.a) = distances_(e.a, e.b);
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double via = distances_(i, k) + distances_(k, j);
        if (via < distances_(i, j)) distances_(i, j) = via;
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(distances_(0, j))) {
      throw Error(Errc::CorruptWorld, "environment '" + id_ + "' is not connected");
    }
  }

  std::map<std::string, Vector, std::less<>> cache;
  features_.reserve(static_cast<std::size_t>(n));
  for (const Viewpoint& vp : viewpoints_) {
    std::mt19937_64 rng(derive_seed({noise_seed_, kNoiseStream, static_cast<std::uint64_t>(vp.id)}));
    std::normal_distribution<double> noise(0.0, 1.0);
    Tensor f(kPanoramaSlices, feature_dim_);
    for (int p = 0; p < kPanoramaSlices; ++p) {
      const std::string& tag = vp.slices[static_cast<std::size_t>(p)];
      auto it = cache.find(tag);
      if (it == cache.end()) it = cache.emplace(tag, landmark_feature(tag, feature_dim_)).first;
      for (Eigen::Index d = 0; d < feature_dim_; ++d) f(p, d) = it->second(d) + noise_sigma_ * noise(rng);
    }
    features_.push_back(std::move(f));
  }
}

void EnvironmentGraph::check(int id) const {
  if (id < 0 || id >= static_cast<int>(viewpoints_.size())) {
    throw Error(Errc::UnknownViewpoint, "viewpoint " + std::to_string(id) + " not in '" + id_ + "'");
  }
}

const Viewpoint& EnvironmentGraph::viewpoint(int id) const {
  check(id);
  return viewpoints_[static_cast<std::size_t>(id)];
}

const std::vector<int>& EnvironmentGraph::neighbors(int id) const {
  check(id);
  return neighbors_[static_cast<std::size_t>(id)];
}

bool EnvironmentGraph::adjacent(int a, int b) const {
  const auto& nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

double EnvironmentGraph::edge_length(int a, int b) const {
  if (!adjacent(a, b)) throw Error(Errc::UnknownViewpoint, "no edge between " + std::to_string(a) + " and " +
                                                               std::to_string(b));
  return (viewpoint(a).position - viewpoint(b).position).norm();
}

double EnvironmentGraph::heading(int from, int to) const {
  const Eigen::Vector3d d = viewpoint(to).position - viewpoint(from).position;
  return std::atan2(d.y(), d.x());
}

double EnvironmentGraph::distance(int a, int b) const {
  check(a);
  check(b);
  return distances_(a, b);
}

const Tensor& EnvironmentGraph::slice_features(int id) const {
  check(id);
  return features_[static_cast<std::size_t>(id)];
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Seen: return "seen";
    case Split::Unseen: return "unseen";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "seen") return Split::Seen;
  if (name == "unseen") return Split::Unseen;
  throw Error(Errc::ConfigInvalid, "unknown split '" + std::string(name) + "'");
}

const EnvironmentGraph& World::environment(std::string_view id) const {
  for (const auto& env : environments) {
    if (env.id() == id) return env;
  }
  throw Error(Errc::CorruptWorld, "unknown environment '" + std::string(id) + "'");
}

const Episode& World::episode(int id) const {
  for (const auto& ep : episodes) {
    if (ep.id == id) return ep;
  }
  throw Error(Errc::UnknownEpisode, "no episode with id " + std::to_string(id));
}

Eigen::Index World::feature_dim() const {
  if (environments.empty()) throw Error(Errc::CorruptWorld, "world has no environments");
  return environments.front().feature_dim();
}

SplitCounts split_counts(int episodes, double unseen_fraction) {
  const int held_out = static_cast<int>(std::lround(unseen_fraction * episodes));
  SplitCounts c;
  c.seen = held_out / 2;
  c.unseen = held_out - c.seen;
  c.train = episodes - held_out;
  return c;
}

// ---------------------------------------------------------------------------
// Instructions

namespace {

std::string_view goal_preposition(std::string_view landmark) {
  static const std::map<std::string_view, std::string_view> table = {
      {"stairs", "down"},   {"hallway", "down"}, {"corridor", "down"}, {"door", "through"},
      {"doorway", "through"}, {"kitchen", "into"}, {"bedroom", "into"},  {"bathroom", "into"},
      {"office", "into"},
  };
  auto it = table.find(landmark);
  return it == table.end() ? std::string_view("to") : it->second;
}

enum class Turn { Forward, Left, Right, Back };

Turn classify_turn(double from, double to) {
  const double d = wrap_angle(to - from);
  if (std::abs(d) < kPi / 4) return Turn::Forward;
  if (std::abs(d) > 3 * kPi / 4) return Turn::Back;
  return d > 0 ? Turn::Left : Turn::Right;
}

std::string_view turn_word(Turn t) {
  switch (t) {
    case Turn::Forward: return "forward";
    case Turn::Left: return "left";
    case Turn::Right: return "right";
    case Turn::Back: return "back";
  }
  return "forward";
}

struct Segment {
  std::size_t begin = 0;  // index into path of the segment's first viewpoint
  std::size_t end = 0;    // index of its last viewpoint
  double heading = 0.0;
};

std::vector<Segment> segment_path(const EnvironmentGraph& graph, const std::vector<int>& path) {
  std::vector<Segment> segments;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!graph.adjacent(path[i], path[i + 1])) {
      throw Error(Errc::NoTemplateForPath, "path hop " + std::to_string(path[i]) + "->" +
                                               std::to_string(path[i + 1]) + " is not an edge");
    }
    const double h = graph.heading(path[i], path[i + 1]);
    if (!segments.empty() && classify_turn(segments.back().heading, h) == Turn::Forward) {
      segments.back().end = i + 1;
    } else {
      segments.push_back(Segment{i, i + 1, h});
    }
  }
  return segments;
}

// Collects tokens with sentence-global head indices (0 = root).
struct SentenceBuilder {
  std::vector<std::string> forms;
  std::vector<int> heads;

  int add(std::string_view form, int head = -1) {
    forms.emplace_back(form);
    heads.push_back(head);
    return static_cast<int>(forms.size());
  }
  void attach(int token, int head) { heads[static_cast<std::size_t>(token - 1)] = head; }
};

}  // namespace

Instruction generate_instruction(const EnvironmentGraph& graph, const std::vector<int>& path, double start_heading,
                                 const GrammarOptions& options, std::mt19937_64& rng) {
  if (path.size() < 2) throw Error(Errc::PathTooShort, "instruction needs a path of at least 2 viewpoints");
  const std::vector<Segment> segments = segment_path(graph, path);
  auto landmark_at = [&](std::size_t path_index) -> const std::string& {
    return graph.viewpoint(path[path_index]).landmark;
  };

  SentenceBuilder s;
  if (path.size() == 2) {
    // walk to the <landmark>
    const int walk = s.add("walk", 0);
    const int to = s.add("to");
    const int the = s.add("the");
    const int goal = s.add(landmark_at(1), walk);
    s.attach(to, goal);
    s.attach(the, goal);
  } else {
    // walk <direction>
    int verb = s.add("walk", 0);
    s.add(turn_word(classify_turn(start_heading, segments.front().heading)), verb);

    // then turn <left|right> at the <landmark>
    for (std::size_t k = 1; k < segments.size(); ++k) {
      const Turn turn = classify_turn(segments[k - 1].heading, segments[k].heading);
      if (turn != Turn::Left && turn != Turn::Right) {
        throw Error(Errc::NoTemplateForPath, "no template for a reversal inside a path");
      }
      const std::string& where = landmark_at(segments[k].begin);
      const bool fronted = options.varied && std::bernoulli_distribution(0.5)(rng);
      const int then = s.add("then");
      int turn_verb = 0, dir = 0, at = 0, the = 0, place = 0;
      if (fronted) {
        at = s.add("at");
        the = s.add("the");
        place = s.add(where);
        turn_verb = s.add("turn", verb);
        dir = s.add(turn_word(turn));
      } else {
        turn_verb = s.add("turn", verb);
        dir = s.add(turn_word(turn));
        at = s.add("at");
        the = s.add("the");
        place = s.add(where);
      }
      s.attach(then, turn_verb);
      s.attach(dir, turn_verb);
      s.attach(at, place);
      s.attach(the, place);
      s.attach(place, turn_verb);
      verb = turn_verb;
    }

    // then go <preposition> the <goal landmark>
    const std::string& goal = landmark_at(path.size() - 1);
    const int then = s.add("then");
    const int go = s.add("go", verb);
    const int prep = s.add(goal_preposition(goal), go);
    const int the = s.add("the");
    const int place = s.add(goal, go);
    s.attach(then, go);
    s.attach(the, place);
  }

  Instruction out;
  out.tree = DependencyTree::from_heads(s.forms, s.heads);
  out.tokens = std::move(s.forms);
  return out;
}

// ---------------------------------------------------------------------------
// Simulator

Observation panorama(const EnvironmentGraph& graph, const NavState& state) {
  const Tensor& base = graph.slice_features(state.viewpoint);
  const Eigen::Index fd = graph.feature_dim();
  Observation obs;
  obs.views.resize(kPanoramaSlices, fd + kOrientationDim);
  for (int p = 0; p < kPanoramaSlices; ++p) {
    obs.views.row(p).head(fd) = base.row(p);
    obs.views.row(p).tail(kOrientationDim) =
        orientation_feature(slice_heading(p) - state.heading, slice_elevation(p)).transpose();
  }

  const auto& nb = graph.neighbors(state.viewpoint);
  const Eigen::Index k = static_cast<Eigen::Index>(nb.size()) + 1;
  obs.candidates = Tensor::Zero(k, fd + kOrientationDim);
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const double h = graph.heading(state.viewpoint, nb[i]);
    const auto row = static_cast<Eigen::Index>(i);
    obs.candidates.row(row).head(fd) = base.row(kHeadingSlices + heading_slice(h));
    obs.candidates.row(row).tail(kOrientationDim) = orientation_feature(h - state.heading, 0.0).transpose();
    obs.candidate_viewpoints.push_back(nb[i]);
  }
  // STOP: zero base feature, orientation (1, 0, 1, 0).
  obs.candidates.row(k - 1).tail(kOrientationDim) = orientation_feature(0.0, 0.0).transpose();
  obs.candidate_viewpoints.push_back(state.viewpoint);
  return obs;
}

NavState step(const EnvironmentGraph& graph, const NavState& state, int action, int max_length) {
  if (state.done) throw Error(Errc::AlreadyDone, "episode already finished");
  const auto& nb = graph.neighbors(state.viewpoint);
  const int k = static_cast<int>(nb.size()) + 1;
  if (action < 0 || action >= k) {
    throw Error(Errc::ActionOutOfRange, "action " + std::to_string(action) + " with " + std::to_string(k) +
                                            " candidates");
  }
  NavState next = state;
  if (action == k - 1) {
    next.done = true;
    return next;
  }
  const int target = nb[static_cast<std::size_t>(action)];
  next.heading = graph.heading(state.viewpoint, target);
  next.viewpoint = target;
  next.steps = state.steps + 1;
  if (next.steps >= max_length) next.done = true;
  return next;
}

PathResult shortest_path(const EnvironmentGraph& graph, int from, int to) {
  const double total = graph.distance(from, to);
  if (!std::isfinite(total)) {
    throw Error(Errc::Unreachable, std::to_string(to) + " unreachable from " + std::to_string(from));
  }
  PathResult result{{from}, total};
  int cur = from;
  while (cur != to) {
    const double remaining = graph.distance(cur, to);
    int next = -1;
    for (int n : graph.neighbors(cur)) {
      if (std::abs(graph.edge_length(cur, n) + graph.distance(n, to) - remaining) <= kPathTolerance) {
        next = n;
        break;
      }
    }
    if (next < 0) throw Error(Errc::Unreachable, "no shortest-path successor from " + std::to_string(cur));
    result.path.push_back(next);
    cur = next;
  }
  return result;
}

int teacher_action(const EnvironmentGraph& graph, const NavState& state, int goal) {
  const auto& nb = graph.neighbors(state.viewpoint);
  if (state.viewpoint == goal) {
    graph.distance(state.viewpoint, goal);
    return static_cast<int>(nb.size());
  }
  const PathResult route = shortest_path(graph, state.viewpoint, goal);
  const int hop = route.path[1];
  return static_cast<int>(std::lower_bound(nb.begin(), nb.end(), hop) - nb.begin());
}

// ---------------------------------------------------------------------------
// Generation

namespace {

void validate_config(const WorldConfig& c) {
  auto fail = [](const std::string& m) { throw Error(Errc::ConfigInvalid, m); };
  if (c.grid_w < 2 || c.grid_h < 2) fail("grid must be at least 2x2");
  if (c.episodes < 1) fail("episode count must be at least 1");
  if (!(c.unseen_fraction >= 0.0 && c.unseen_fraction < 1.0)) fail("unseen fraction must lie in [0, 1)");
  if (c.landmarks.empty()) fail("landmark inventory is empty");
  if (c.train_layouts < 1) fail("need at least one training layout");
  if (c.feature_dim < 1) fail("feature_dim must be positive");
  if (!(c.noise_sigma >= 0.0)) fail("noise sigma must be non-negative");
  if (!(c.edge_length > 0.0)) fail("edge length must be positive");
  if (c.min_hops < 1 || c.max_hops < c.min_hops) fail("hop range must satisfy 1 <= min <= max");
  if (split_counts(c.episodes, c.unseen_fraction).unseen > 0 && c.unseen_layouts < 1) {
    fail("unseen episodes requested but no unseen layouts");
  }
  for (const auto& l : c.landmarks) {
    if (l.empty() || l.find_first_of(" \t\n") != std::string::npos) fail("landmark tags must be single words");
  }
}

EnvironmentGraph make_layout(std::uint64_t seed, const WorldConfig& c, int layout, const std::string& id,
                             const std::string& split, const std::vector<std::vector<std::string>>& avoid) {
  std::mt19937_64 rng = make_rng({seed, kWorldStream, static_cast<std::uint64_t>(layout)});
  std::uniform_int_distribution<std::size_t> pick(0, c.landmarks.size() - 1);
  const int n = c.grid_w * c.grid_h;

  std::vector<std::string> tags(static_cast<std::size_t>(n));
  for (int attempt = 0;; ++attempt) {
    for (auto& t : tags) t = c.landmarks[pick(rng)];
    if (std::find(avoid.begin(), avoid.end(), tags) == avoid.end() || attempt > 100) break;
  }

  std::vector<Viewpoint> viewpoints(static_cast<std::size_t>(n));
  for (int y = 0; y < c.grid_h; ++y) {
    for (int x = 0; x < c.grid_w; ++x) {
      Viewpoint& vp = viewpoints[static_cast<std::size_t>(y * c.grid_w + x)];
      vp.id = y * c.grid_w + x;
      vp.position = Eigen::Vector3d(x * c.edge_length, y * c.edge_length, 0.0);
      vp.landmark = tags[static_cast<std::size_t>(vp.id)];
    }
  }
  std::vector<Edge> edges;
  for (int id = 0; id < n; ++id) {
    const int x = id % c.grid_w, y = id / c.grid_w;
    if (x + 1 < c.grid_w) edges.push_back(Edge{id, id + 1, c.edge_length});
    if (y + 1 < c.grid_h) edges.push_back(Edge{id, id + c.grid_w, c.edge_length});
  }
  // Slices: floor row shows the viewpoint's own landmark, the horizon row
  // shows a neighbor's landmark where one lies in that direction.
  for (Viewpoint& vp : viewpoints) {
    for (int p = 0; p < kPanoramaSlices; ++p) {
      const int row = p / kHeadingSlices;
      vp.slices[static_cast<std::size_t>(p)] = row == 0 ? vp.landmark : row == 2 ? "ceiling" : "wall";
    }
  }
  for (const Edge& e : edges) {
    for (auto [from, to] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
      const Eigen::Vector3d d = viewpoints[static_cast<std::size_t>(to)].position -
                                viewpoints[static_cast<std::size_t>(from)].position;
      const int k = heading_slice(std::atan2(d.y(), d.x()));
      viewpoints[static_cast<std::size_t>(from)].slices[static_cast<std::size_t>(kHeadingSlices + k)] =
          viewpoints[static_cast<std::size_t>(to)].landmark;
    }
  }
  return EnvironmentGraph(id, split, c.feature_dim, c.noise_sigma,
                          derive_seed({seed, kNoiseStream, static_cast<std::uint64_t>(layout)}),
                          std::move(viewpoints), std::move(edges));
}

// Each referenced landmark must identify its viewpoint along the way there.
bool unambiguous(const EnvironmentGraph& graph, const std::vector<int>& path) {
  auto landmark = [&](std::size_t i) -> const std::string& { return graph.viewpoint(path[i]).landmark; };
  if (path.size() == 2) {
    int matches = 0;
    for (int n : graph.neighbors(path[0])) matches += graph.viewpoint(n).landmark == landmark(1) ? 1 : 0;
    return matches == 1;
  }
  for (const Segment& seg : segment_path(graph, path)) {
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      if (landmark(i) == landmark(seg.end)) return false;
    }
  }
  return true;
}

}  // namespace

World generate_world(std::uint64_t seed, const WorldConfig& config) {
  validate_config(config);
  World world;
  std::vector<std::vector<std::string>> used_layouts;
  auto tags_of = [](const EnvironmentGraph& g) {
    std::vector<std::string> t;
    for (const auto& vp : g.viewpoints()) t.push_back(vp.landmark);
    return t;
  };
  std::vector<std::size_t> train_envs, unseen_envs;
  for (int l = 0; l < config.train_layouts; ++l) {
    world.environments.push_back(make_layout(seed, config, l, "train_" + std::to_string(l), "train", {}));
    used_layouts.push_back(tags_of(world.environments.back()));
    train_envs.push_back(world.environments.size() - 1);
  }
  for (int l = 0; l < config.unseen_layouts; ++l) {
    world.environments.push_back(make_layout(seed, config, config.train_layouts + l, "unseen_" + std::to_string(l),
                                             "unseen", used_layouts));
    unseen_envs.push_back(world.environments.size() - 1);
  }

  const SplitCounts counts = split_counts(config.episodes, config.unseen_fraction);
  const GrammarOptions grammar{config.varied_templates};
  std::set<std::tuple<std::size_t, int, int>> train_keys;

  for (int i = 0; i < config.episodes; ++i) {
    const Split split = i < counts.train ? Split::Train : i < counts.train + counts.seen ? Split::Seen : Split::Unseen;
    const auto& pool = split == Split::Unseen ? unseen_envs : train_envs;
    const std::size_t env_index = pool[static_cast<std::size_t>(i) % pool.size()];
    const EnvironmentGraph& env = world.environments[env_index];

    std::mt19937_64 rng = make_rng({seed, kWorldStream, 0x657069736F6465ull, static_cast<std::uint64_t>(i)});
    std::uniform_int_distribution<int> pick(0, static_cast<int>(env.size()) - 1);
    Episode ep;
    ep.id = i;
    ep.environment = env.id();
    ep.split = split;
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      const int start = pick(rng);
      const int goal = pick(rng);
      if (start == goal) continue;
      PathResult route = shortest_path(env, start, goal);
      const int hops = static_cast<int>(route.path.size()) - 1;
      if (hops < config.min_hops || hops > config.max_hops) continue;
      if (!unambiguous(env, route.path)) continue;
      const auto key = std::make_tuple(env_index, start, goal);
      if (split == Split::Seen && train_keys.count(key) != 0) continue;
      Instruction ins = generate_instruction(env, route.path, ep.start_heading, grammar, rng);
      ep.tokens = std::move(ins.tokens);
      ep.tree = std::move(ins.tree);
      ep.path = std::move(route.path);
      if (split == Split::Train) train_keys.insert(key);
      placed = true;
    }
    if (!placed) throw Error(Errc::ConfigInvalid, "could not place episode " + std::to_string(i));
    world.episodes.push_back(std::move(ep));
  }
  return world;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kWorldFormat = "syntaxnav.world/1";
constexpr std::string_view kEpisodeFormat = "syntaxnav.episode/1";

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

json environment_json(const EnvironmentGraph& env) {
  json vps = json::array();
  for (const Viewpoint& vp : env.viewpoints()) {
    vps.push_back({{"id", vp.id},
                   {"pos", {vp.position.x(), vp.position.y(), vp.position.z()}},
                   {"landmark", vp.landmark},
                   {"slices", vp.slices}});
  }
  json edges = json::array();
  for (const Edge& e : env.edges()) edges.push_back({{"a", e.a}, {"b", e.b}, {"len", e.length}});
  return {{"id", env.id()},
          {"split", env.split()},
          {"noise_seed", std::to_string(env.noise_seed())},
          {"viewpoints", std::move(vps)},
          {"edges", std::move(edges)}};
}

}  // namespace

std::string world_json(const World& world) {
  json envs = json::array();
  for (const auto& env : world.environments) envs.push_back(environment_json(env));
  const EnvironmentGraph& first = world.environments.at(0);
  json doc = {{"format", kWorldFormat},
              {"feature_dim", first.feature_dim()},
              {"noise_sigma", first.noise_sigma()},
              {"environments", std::move(envs)}};
  return doc.dump(1) + "\n";
}

std::string episodes_jsonl(const World& world) {
  std::string out;
  for (const Episode& ep : world.episodes) {
    json line = {{"format", kEpisodeFormat},
                 {"id", ep.id},
                 {"environment", ep.environment},
                 {"split", to_string(ep.split)},
                 {"language", ep.language},
                 {"start_heading", ep.start_heading},
                 {"instruction", join(ep.tokens)},
                 {"tokens", ep.tokens},
                 {"conllu", ep.tree.to_conllu()},
                 {"path", ep.path}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_world(const std::filesystem::path& dir, const World& world) {
  std::filesystem::create_directories(dir);
  for (auto [name, body] : {std::pair{"world.json", world_json(world)},
                            std::pair{"episodes.jsonl", episodes_jsonl(world)}}) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + (dir / name).string());
    out << body;
    if (!out) throw Error(Errc::Io, "write failed for " + (dir / name).string());
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

World read_world(const std::filesystem::path& dir) {
  World world;
  try {
    const json doc = json::parse(read_file(dir / "world.json"));
    if (doc.at("format").get<std::string>() != kWorldFormat) {
      throw Error(Errc::CorruptWorld, "unsupported world format '" + doc.at("format").get<std::string>() + "'");
    }
    const auto feature_dim = doc.at("feature_dim").get<Eigen::Index>();
    const auto sigma = doc.at("noise_sigma").get<double>();
    for (const json& e : doc.at("environments")) {
      std::vector<Viewpoint> vps;
      for (const json& v : e.at("viewpoints")) {
        Viewpoint vp;
        vp.id = v.at("id").get<int>();
        const auto pos = v.at("pos").get<std::vector<double>>();
        if (pos.size() != 3) throw Error(Errc::CorruptWorld, "viewpoint position must have 3 coordinates");
        vp.position = Eigen::Vector3d(pos[0], pos[1], pos[2]);
        vp.landmark = v.at("landmark").get<std::string>();
        const auto slices = v.at("slices").get<std::vector<std::string>>();
        if (slices.size() != kPanoramaSlices) throw Error(Errc::CorruptWorld, "panorama must have 36 slices");
        std::copy(slices.begin(), slices.end(), vp.slices.begin());
        vps.push_back(std::move(vp));
      }
      std::vector<Edge> edges;
      for (const json& ed : e.at("edges")) {
        edges.push_back(Edge{ed.at("a").get<int>(), ed.at("b").get<int>(), ed.at("len").get<double>()});
      }
      world.environments.emplace_back(e.at("id").get<std::string>(), e.at("split").get<std::string>(), feature_dim,
                                      sigma, std::stoull(e.at("noise_seed").get<std::string>()), std::move(vps),
                                      std::move(edges));
    }

    std::istringstream lines(read_file(dir / "episodes.jsonl"));
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = json::parse(line);
      if (j.at("format").get<std::string>() != kEpisodeFormat) {
        throw Error(Errc::CorruptWorld, "episodes.jsonl line " + std::to_string(line_no) + ": unsupported format");
      }
      Episode ep;
      ep.id = j.at("id").get<int>();
      ep.environment = j.at("environment").get<std::string>();
      ep.split = parse_split(j.at("split").get<std::string>());
      ep.language = j.value("language", std::string("en"));
      ep.start_heading = j.value("start_heading", 0.0);
      ep.tokens = j.at("tokens").get<std::vector<std::string>>();
      ep.path = j.at("path").get<std::vector<int>>();
      auto trees = parse_conllu(j.at("conllu").get<std::string>());
      if (trees.size() != 1) {
        throw Error(Errc::CorruptWorld, "episode " + std::to_string(ep.id) + " must embed exactly one tree");
      }
      ep.tree = std::move(trees.front());
      if (ep.tree.size() != ep.tokens.size()) {
        throw Error(Errc::CorruptWorld, "episode " + std::to_string(ep.id) + ": tree and instruction lengths differ");
      }
      const EnvironmentGraph& env = world.environment(ep.environment);
      if (ep.path.empty()) throw Error(Errc::CorruptWorld, "episode " + std::to_string(ep.id) + " has no path");
      for (std::size_t i = 0; i + 1 < ep.path.size(); ++i) {
        if (!env.adjacent(ep.path[i], ep.path[i + 1])) {
          throw Error(Errc::CorruptWorld, "episode " + std::to_string(ep.id) + ": path hop is not an edge");
        }
      }
      world.episodes.push_back(std::move(ep));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptWorld, std::string("malformed JSON: ") + e.what());
  } catch (const ParseError& e) {
    throw Error(Errc::CorruptWorld, std::string("bad embedded tree: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::Io || e.code() == Errc::CorruptWorld) throw;
    throw Error(Errc::CorruptWorld, e.what());
  }
  return world;
}

}  // namespace syntaxnav
