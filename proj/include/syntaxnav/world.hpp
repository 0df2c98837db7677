#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "syntaxnav/tensor.hpp"
#include "syntaxnav/treeio.hpp"

namespace syntaxnav {

inline constexpr int kHeadingSlices = 12;
inline constexpr int kElevationSlices = 3;
inline constexpr int kPanoramaSlices = kHeadingSlices * kElevationSlices;
inline constexpr int kOrientationDim = 4;
inline constexpr double kPi = 3.14159265358979323846;

// Slice p looks at heading (p % 12) * 30 deg and elevation (p / 12 - 1) * 30 deg.
double slice_heading(int slice) noexcept;
double slice_elevation(int slice) noexcept;

// (cos theta, sin theta, cos phi, sin phi)
Eigen::Vector4d orientation_feature(double heading, double elevation);

// Fixed projection of a landmark tag; identical for every world.
Vector landmark_feature(std::string_view tag, Eigen::Index dim);

struct Viewpoint {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::string landmark;
  std::array<std::string, kPanoramaSlices> slices;
};

struct Edge {
  int a = 0;
  int b = 0;
  double length = 0;
};

// One navigable environment (a "layout"). Immutable after construction.
class EnvironmentGraph {
 public:
  EnvironmentGraph(std::string id, std::string split, Eigen::Index feature_dim, double noise_sigma,
                   std::uint64_t noise_seed, std::vector<Viewpoint> viewpoints, std::vector<Edge> edges);

  const std::string& id() const noexcept { return id_; }
  const std::string& split() const noexcept { return split_; }
  Eigen::Index feature_dim() const noexcept { return feature_dim_; }
  Eigen::Index observation_dim() const noexcept { return feature_dim_ + kOrientationDim; }
  double noise_sigma() const noexcept { return noise_sigma_; }
  std::uint64_t noise_seed() const noexcept { return noise_seed_; }

  std::size_t size() const noexcept { return viewpoints_.size(); }
  const Viewpoint& viewpoint(int id) const;
  const std::vector<Viewpoint>& viewpoints() const noexcept { return viewpoints_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  // Neighbors in ascending id; this is also the candidate order.
  const std::vector<int>& neighbors(int id) const;
  bool adjacent(int a, int b) const;
  double edge_length(int a, int b) const;
  double heading(int from, int to) const;

  // Shortest-path metric distance; infinity when unreachable.
  double distance(int a, int b) const;

  // 36 x feature_dim base features of a viewpoint's panorama.
  const Tensor& slice_features(int id) const;

 private:
  void check(int id) const;

  std::string id_;
  std::string split_;
  Eigen::Index feature_dim_;
  double noise_sigma_;
  std::uint64_t noise_seed_;
  std::vector<Viewpoint> viewpoints_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  Tensor distances_;
  std::vector<Tensor> features_;
};

enum class Split { Train, Seen, Unseen };
std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view name);

struct Episode {
  int id = 0;
  std::string environment;
  Split split = Split::Train;
  std::string language = "en";
  std::vector<std::string> tokens;
  DependencyTree tree;
  std::vector<int> path;
  double start_heading = 0.0;

  int start() const { return path.front(); }
  int goal() const { return path.back(); }
};

struct WorldConfig {
  int grid_w = 6;
  int grid_h = 6;
  std::vector<std::string> landmarks = {"stairs", "hallway", "door",  "kitchen", "bedroom", "bathroom",
                                        "table",  "sofa",    "plant", "window",  "lamp",    "rug"};
  int episodes = 500;
  double unseen_fraction = 0.2;
  int train_layouts = 3;
  int unseen_layouts = 2;
  Eigen::Index feature_dim = 64;
  double noise_sigma = 0.1;
  double edge_length = 2.0;
  int min_hops = 1;
  int max_hops = 6;
  bool varied_templates = true;
};

struct World {
  std::vector<EnvironmentGraph> environments;
  std::vector<Episode> episodes;

  const EnvironmentGraph& environment(std::string_view id) const;
  const Episode& episode(int id) const;
  Eigen::Index feature_dim() const;
};

struct SplitCounts {
  int train = 0;
  int seen = 0;
  int unseen = 0;
};

// Held-out = round(unseen_fraction * episodes), split evenly between seen
// and unseen validation (odd remainder goes to unseen).
SplitCounts split_counts(int episodes, double unseen_fraction);

World generate_world(std::uint64_t seed, const WorldConfig& config);

struct GrammarOptions {
  bool varied = false;  // allow fronted "at the X turn right" clauses
};

struct Instruction {
  std::vector<std::string> tokens;
  DependencyTree tree;
};

// Template realization of a path. Throws PathTooShort / NoTemplateForPath.
Instruction generate_instruction(const EnvironmentGraph& graph, const std::vector<int>& path, double start_heading,
                                 const GrammarOptions& options, std::mt19937_64& rng);

struct NavState {
  int viewpoint = 0;
  double heading = 0.0;
  int steps = 0;
  bool done = false;
};

struct Observation {
  Tensor views;       // 36 x (feature_dim + 4)
  Tensor candidates;  // K x (feature_dim + 4), STOP last
  std::vector<int> candidate_viewpoints;

  int stop_index() const noexcept { return static_cast<int>(candidate_viewpoints.size()) - 1; }
  int size() const noexcept { return static_cast<int>(candidate_viewpoints.size()); }
};

Observation panorama(const EnvironmentGraph& graph, const NavState& state);

NavState step(const EnvironmentGraph& graph, const NavState& state, int action, int max_length);

struct PathResult {
  std::vector<int> path;
  double length = 0.0;
};

// Minimal metric length; ties go to the smallest next viewpoint id.
PathResult shortest_path(const EnvironmentGraph& graph, int from, int to);

int teacher_action(const EnvironmentGraph& graph, const NavState& state, int goal);

// world.json / episodes.jsonl
void write_world(const std::filesystem::path& dir, const World& world);
World read_world(const std::filesystem::path& dir);
std::string world_json(const World& world);
std::string episodes_jsonl(const World& world);

}  // namespace syntaxnav
