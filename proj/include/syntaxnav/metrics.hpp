#pragma once

#include <span>
#include <string>
#include <vector>

#include "syntaxnav/world.hpp"

namespace syntaxnav {

inline constexpr double kSuccessRadius = 3.0;

// Metric length of a viewpoint sequence along graph distances.
double path_length(const EnvironmentGraph& graph, std::span<const int> path);

// All functions take predicted Q and reference R; distances are graph metric.
bool success(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r,
             double threshold = kSuccessRadius);
double spl(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r,
           double threshold = kSuccessRadius);
double dtw(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r);
double ndtw(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r,
            double threshold = kSuccessRadius);
double sdtw(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r,
            double threshold = kSuccessRadius);
double cls(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r,
           double threshold = kSuccessRadius);

struct EpisodeScore {
  int episode_id = 0;
  Split split = Split::Train;
  bool success = false;
  double spl = 0.0;
  double ndtw = 0.0;
  double sdtw = 0.0;
  double cls = 0.0;
  double path_length_m = 0.0;
  std::vector<int> trajectory;
};

struct Aggregate {
  int episodes = 0;
  double sr = 0.0;  // fraction in [0, 1]
  double spl = 0.0;
  double ndtw = 0.0;
  double sdtw = 0.0;
  double cls = 0.0;
};

struct TrajectoryReport {
  std::vector<EpisodeScore> episodes;
  std::vector<std::pair<Split, Aggregate>> splits;  // only splits present, in enum order
  Aggregate overall;
};

EpisodeScore score_episode(const EnvironmentGraph& graph, const Episode& episode, std::span<const int> trajectory,
                           double threshold = kSuccessRadius);

// trajectories[i] belongs to episodes[i]. Throws LengthMismatch.
TrajectoryReport evaluate(const World& world, std::span<const Episode> episodes,
                          std::span<const std::vector<int>> trajectories, double threshold = kSuccessRadius);

Aggregate aggregate(std::span<const EpisodeScore> scores);

std::string report_json(const TrajectoryReport& report);
// Header "split,episodes,SR,SPL,nDTW,sDTW,CLS"; SR in percent.
std::string report_csv(const TrajectoryReport& report);

}  // namespace syntaxnav
