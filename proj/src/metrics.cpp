#include "syntaxnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "syntaxnav/error.hpp"

namespace syntaxnav {

namespace {

void require_path(std::span<const int> path, const char* which) {
  if (path.empty()) throw Error(Errc::EmptySequence, std::string(which) + " path is empty");
}

void require_threshold(double threshold) {
  if (!(threshold > 0)) throw Error(Errc::ConfigInvalid, "distance threshold must be positive");
}

}  // namespace

double path_length(const EnvironmentGraph& graph, std::span<const int> path) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) total += graph.distance(path[i], path[i + 1]);
  if (path.size() == 1) graph.distance(path[0], path[0]);
  return total;
}

bool success(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r, double threshold) {
  require_path(q, "predicted");
  require_path(r, "reference");
  return graph.distance(q.back(), r.back()) < threshold;
}

double spl(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r, double threshold) {
  if (!success(graph, q, r, threshold)) return 0.0;
  const double l = graph.distance(r.front(), r.back());
  const double p = path_length(graph, q);
  const double denom = std::max(p, l);
  return denom == 0.0 ? 1.0 : l / denom;
}

double dtw(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r) {
  require_path(q, "predicted");
  require_path(r, "reference");
  const auto n = static_cast<Eigen::Index>(q.size());
  const auto m = static_cast<Eigen::Index>(r.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  Tensor cost = Tensor::Constant(n, m, inf);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = graph.distance(q[static_cast<std::size_t>(i)], r[static_cast<std::size_t>(j)]);
      if (i == 0 && j == 0) {
        cost(i, j) = d;
        continue;
      }
      double best = inf;
      if (i > 0) best = std::min(best, cost(i - 1, j));
      if (j > 0) best = std::min(best, cost(i, j - 1));
      if (i > 0 && j > 0) best = std::min(best, cost(i - 1, j - 1));
      cost(i, j) = d + best;
    }
  }
  return cost(n - 1, m - 1);
}

double ndtw(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r, double threshold) {
  require_threshold(threshold);
  return std::exp(-dtw(graph, q, r) / (static_cast<double>(r.size()) * threshold));
}

double sdtw(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r, double threshold) {
  return success(graph, q, r, threshold) ? ndtw(graph, q, r, threshold) : 0.0;
}

double cls(const EnvironmentGraph& graph, std::span<const int> q, std::span<const int> r, double threshold) {
  require_threshold(threshold);
  require_path(q, "predicted");
  require_path(r, "reference");
  double coverage = 0.0;
  for (int rv : r) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int qv : q) nearest = std::min(nearest, graph.distance(qv, rv));
    coverage += std::exp(-nearest / threshold);
  }
  coverage /= static_cast<double>(r.size());
  const double epl = coverage * path_length(graph, r);
  const double p = path_length(graph, q);
  const double denom = epl + std::abs(epl - p);
  const double length_score = denom == 0.0 ? 1.0 : epl / denom;
  return coverage * length_score;
}

EpisodeScore score_episode(const EnvironmentGraph& graph, const Episode& episode, std::span<const int> trajectory,
                           double threshold) {
  const std::span<const int> ref(episode.path);
  EpisodeScore s;
  s.episode_id = episode.id;
  s.split = episode.split;
  s.success = success(graph, trajectory, ref, threshold);
  s.spl = spl(graph, trajectory, ref, threshold);
  s.ndtw = ndtw(graph, trajectory, ref, threshold);
  s.sdtw = s.success ? s.ndtw : 0.0;
  s.cls = cls(graph, trajectory, ref, threshold);
  s.path_length_m = path_length(graph, trajectory);
  s.trajectory.assign(trajectory.begin(), trajectory.end());
  return s;
}

Aggregate aggregate(std::span<const EpisodeScore> scores) {
  Aggregate a;
  a.episodes = static_cast<int>(scores.size());
  if (scores.empty()) return a;
  for (const EpisodeScore& s : scores) {
    a.sr += s.success ? 1.0 : 0.0;
    a.spl += s.spl;
    a.ndtw += s.ndtw;
    a.sdtw += s.sdtw;
    a.cls += s.cls;
  }
  const double n = static_cast<double>(scores.size());
  a.sr /= n;
  a.spl /= n;
  a.ndtw /= n;
  a.sdtw /= n;
  a.cls /= n;
  return a;
}

TrajectoryReport evaluate(const World& world, std::span<const Episode> episodes,
                          std::span<const std::vector<int>> trajectories, double threshold) {
  if (episodes.size() != trajectories.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(episodes.size()) + " episodes but " +
                                          std::to_string(trajectories.size()) + " trajectories");
  }
  TrajectoryReport report;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    report.episodes.push_back(
        score_episode(world.environment(episodes[i].environment), episodes[i], trajectories[i], threshold));
  }
  // Sorted copy so aggregates do not depend on episode order.
  std::vector<EpisodeScore> sorted = report.episodes;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.episode_id < b.episode_id; });
  for (Split split : {Split::Train, Split::Seen, Split::Unseen}) {
    std::vector<EpisodeScore> group;
    for (const auto& s : sorted) {
      if (s.split == split) group.push_back(s);
    }
    if (!group.empty()) report.splits.emplace_back(split, aggregate(group));
  }
  report.overall = aggregate(sorted);
  return report;
}

namespace {

nlohmann::json aggregate_json(const Aggregate& a) {
  return {{"episodes", a.episodes}, {"SR", a.sr}, {"SPL", a.spl}, {"nDTW", a.ndtw}, {"sDTW", a.sdtw}, {"CLS", a.cls}};
}

}  // namespace

std::string report_json(const TrajectoryReport& report) {
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [split, agg] : report.splits) splits[std::string(to_string(split))] = aggregate_json(agg);
  nlohmann::json rows = nlohmann::json::array();
  for (const EpisodeScore& s : report.episodes) {
    rows.push_back({{"episode_id", s.episode_id},
                    {"split", to_string(s.split)},
                    {"success", s.success},
                    {"spl", s.spl},
                    {"ndtw", s.ndtw},
                    {"sdtw", s.sdtw},
                    {"cls", s.cls},
                    {"path_length_m", s.path_length_m},
                    {"trajectory", s.trajectory}});
  }
  nlohmann::json doc = {{"format", "syntaxnav.report/1"},
                        {"success_radius_m", kSuccessRadius},
                        {"overall", aggregate_json(report.overall)},
                        {"splits", std::move(splits)},
                        {"episodes", std::move(rows)}};
  return doc.dump(1) + "\n";
}

std::string report_csv(const TrajectoryReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "split,episodes,SR,SPL,nDTW,sDTW,CLS\n";
  auto row = [&](std::string_view name, const Aggregate& a) {
    out << name << ',' << a.episodes << ',' << 100.0 * a.sr << ',' << a.spl << ',' << a.ndtw << ',' << a.sdtw << ','
        << a.cls << '\n';
  };
  for (const auto& [split, agg] : report.splits) row(to_string(split), agg);
  row("all", report.overall);
  return out.str();
}

}  // namespace syntaxnav
