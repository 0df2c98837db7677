#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "syntaxnav/metrics.hpp"

using namespace syntaxnav;

namespace {

std::vector<int> random_walk(const EnvironmentGraph& g, int start, std::size_t length, std::mt19937_64& rng) {
  std::vector<int> p{start};
  while (p.size() < length) {
    const auto& nb = g.neighbors(p.back());
    p.push_back(nb[rng() % nb.size()]);
  }
  return p;
}

std::vector<int> random_points(std::size_t n, int count, std::mt19937_64& rng) {
  std::vector<int> p(n);
  for (auto& v : p) v = static_cast<int>(rng() % static_cast<std::uint64_t>(count));
  return p;
}

}  // namespace

TEST_CASE("success threshold is strict") {
  const EnvironmentGraph line = fixtures::line_graph({0.0, 2.0, 3.0, 4.0});
  const std::vector<int> r{0, 1};
  CHECK(success(line, r, r));
  CHECK(success(line, std::vector<int>{0}, std::vector<int>{0, 1}));   // 2 m away
  CHECK(!success(line, std::vector<int>{0, 1, 2, 3}, std::vector<int>{0}));  // 4 m away
  CHECK(!success(line, std::vector<int>{0, 1, 2}, std::vector<int>{0}));     // exactly 3 m
  CHECK_THROWS_AS(success(line, std::vector<int>{}, r), Error);
}

TEST_CASE("spl examples") {
  // Reference 0 -> 3 is 6 m; the agent wanders 10 m but ends on the goal.
  const EnvironmentGraph line = fixtures::line_graph({0.0, 2.0, 4.0, 6.0});
  const std::vector<int> ref{0, 1, 2, 3};
  CHECK(spl(line, ref, ref) == 1.0);
  const std::vector<int> detour{0, 1, 0, 1, 2, 3};
  CHECK(path_length(line, detour) == 10.0);
  CHECK(spl(line, detour, ref) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(spl(line, std::vector<int>{0, 1, 0}, ref) == 0.0);
  CHECK(spl(line, std::vector<int>{2}, std::vector<int>{2}) == 1.0);
}

TEST_CASE("identity pairs score one on every metric") {
  const EnvironmentGraph g = fixtures::grid_graph(4, 4);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_walk(g, static_cast<int>(rng() % 16), 1 + rng() % 6, rng);
    CHECK(success(g, p, p));
    CHECK(spl(g, p, p) <= 1.0);
    CHECK(ndtw(g, p, p) == 1.0);
    CHECK(sdtw(g, p, p) == 1.0);
    CHECK(cls(g, p, p) == 1.0);
  }
  const auto sp = fixtures::all_pairs(g);
  const std::vector<int> straight{0, 1, 2, 3};
  CHECK(spl(g, straight, straight) == 1.0);
}

TEST_CASE("dtw equals exhaustive alignment enumeration") {
  const EnvironmentGraph g = fixtures::grid_graph(3, 3);
  const auto d = fixtures::all_pairs(g);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = random_points(1 + rng() % 4, 9, rng);
    const auto r = random_points(1 + rng() % 4, 9, rng);
    CHECK(std::abs(dtw(g, q, r) - fixtures::brute_dtw(d, q, r)) <= 1e-9);
    CHECK(std::abs(ndtw(g, q, r) - fixtures::oracle_ndtw(d, q, r)) <= 1e-9);
  }
}

TEST_CASE("a detour never raises ndtw") {
  const EnvironmentGraph g = fixtures::grid_graph(4, 4);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = random_walk(g, static_cast<int>(rng() % 16), 2 + rng() % 4, rng);
    auto q = r;
    const std::size_t at = rng() % q.size();
    const auto& nb = g.neighbors(q[at]);
    const int side = nb[rng() % nb.size()];
    q.insert(q.begin() + static_cast<std::ptrdiff_t>(at) + 1, {side, q[at]});
    CHECK(ndtw(g, q, r) <= ndtw(g, r, r));
  }
}

TEST_CASE("spl and cls match direct formulas") {
  const EnvironmentGraph g = fixtures::grid_graph(3, 3);
  const auto d = fixtures::all_pairs(g);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = random_walk(g, static_cast<int>(rng() % 9), 1 + rng() % 5, rng);
    const auto q = random_walk(g, r.front(), 1 + rng() % 6, rng);
    CHECK(std::abs(spl(g, q, r) - fixtures::oracle_spl(d, q, r)) <= 1e-9);
    CHECK(std::abs(cls(g, q, r) - fixtures::oracle_cls(d, q, r)) <= 1e-9);
    CHECK(sdtw(g, q, r) <= ndtw(g, q, r));
    CHECK(spl(g, q, r) <= (success(g, q, r) ? 1.0 : 0.0));
    if (success(g, q, r)) CHECK(sdtw(g, q, r) == ndtw(g, q, r));
    else CHECK(sdtw(g, q, r) == 0.0);
  }
  // Three nodes worked by hand: R = 0-1-2 on a 2 m line, Q = [0, 1].
  const EnvironmentGraph line = fixtures::line_graph({0.0, 2.0, 4.0});
  const double pc = (1.0 + 1.0 + std::exp(-2.0 / 3.0)) / 3.0;
  const double epl = pc * 4.0;
  const double ls = epl / (epl + std::abs(epl - 2.0));
  CHECK(std::abs(cls(line, std::vector<int>{0, 1}, std::vector<int>{0, 1, 2}) - pc * ls) <= 1e-12);
}

TEST_CASE("cls of a far single point tends to zero") {
  const EnvironmentGraph far = fixtures::line_graph({0.0, 100.0, 102.0});
  CHECK(cls(far, std::vector<int>{0}, std::vector<int>{1, 2}) < 1e-12);
}

TEST_CASE("evaluate aggregates and groups by split") {
  World w;
  w.environments.push_back(fixtures::grid_graph(3, 3, 2.0, 4));
  Episode a;
  a.id = 1;
  a.environment = "grid";
  a.split = Split::Seen;
  a.path = {0, 1, 2};
  Episode b = a;
  b.id = 2;
  b.path = {0, 3, 6};
  w.episodes = {a, b};

  const std::vector<std::vector<int>> traj{{0, 1, 2}, {0, 1, 2}};
  const TrajectoryReport rep = evaluate(w, w.episodes, traj);
  CHECK(rep.overall.episodes == 2);
  CHECK(rep.overall.sr == 0.5);
  CHECK(rep.overall.spl == 0.5);
  CHECK(rep.overall.sdtw == 0.5);
  REQUIRE(rep.splits.size() == 1);
  CHECK(rep.splits[0].first == Split::Seen);

  const std::vector<Episode> swapped{b, a};
  const std::vector<std::vector<int>> swapped_traj{{0, 1, 2}, {0, 1, 2}};
  const TrajectoryReport rep2 = evaluate(w, swapped, swapped_traj);
  CHECK(rep2.overall.ndtw == rep.overall.ndtw);
  CHECK(rep2.overall.cls == rep.overall.cls);

  const std::vector<std::vector<int>> perfect{{0, 1, 2}, {0, 3, 6}};
  const TrajectoryReport all = evaluate(w, w.episodes, perfect);
  CHECK(all.overall.sr == 1.0);
  CHECK(all.overall.cls == 1.0);
  CHECK(report_csv(all).find("seen,2,100.000000,1.000000,1.000000,1.000000,1.000000") != std::string::npos);
  CHECK(report_json(all).find("\"syntaxnav.report/1\"") != std::string::npos);

  try {
    evaluate(w, w.episodes, std::vector<std::vector<int>>{{0}});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LengthMismatch);
  }
}
