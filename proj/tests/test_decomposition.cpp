#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "copush/decomposition.hpp"
#include "copush/geometry.hpp"
#include "copush/mapf.hpp"

using namespace copush;
using decomposition::Decomposition;
using decomposition::segment_and_order;
using geom::Polygon;
using geom::Pose;
using mapf::TimedPath;

namespace {

TimedPath make_path(int object, const std::vector<Pose>& poses) {
  TimedPath p;
  p.object = object;
  for (std::size_t t = 0; t < poses.size(); ++t)
    p.steps.push_back({static_cast<int>(t), poses[t]});
  return p;
}

using Edge = std::pair<int, int>;

std::set<Edge> edge_set(const std::vector<Edge>& edges) {
  return {edges.begin(), edges.end()};
}

// Every object's slices must tile its whole timed path.
void check_partition(const Decomposition& d,
                     const std::vector<TimedPath>& paths) {
  for (std::size_t m = 0; m < paths.size(); ++m) {
    std::vector<const decomposition::Subtask*> mine;
    for (const auto& st : d.subtasks)
      if (st.object == static_cast<int>(m)) mine.push_back(&st);
    std::sort(mine.begin(), mine.end(),
              [](auto* a, auto* b) { return a->index < b->index; });
    REQUIRE(!mine.empty());
    CHECK(mine.front()->t_start == 0);
    CHECK(mine.back()->t_end ==
          static_cast<int>(paths[m].steps.size()) - 1);
    for (std::size_t k = 0; k < mine.size(); ++k) {
      CHECK(mine[k]->index == static_cast<int>(k));
      CHECK(mine[k]->t_end > mine[k]->t_start);
      CHECK(mine[k]->slice.size() ==
            static_cast<std::size_t>(mine[k]->t_end - mine[k]->t_start + 1));
      if (k > 0) CHECK(mine[k]->t_start == mine[k - 1]->t_end);
    }
  }
}

// Replays the subtasks in a random schedule that respects the partial
// order: every eligible subtask starts immediately, and each tick one
// random running object advances one path step. Any such interleaving must
// stay collision-free — that is the whole point of the ordering.
void check_replay_safety(const Decomposition& d,
                         const std::vector<TimedPath>& paths,
                         const std::vector<Polygon>& polys,
                         std::uint64_t seed) {
  const int n = d.order.count;
  std::mt19937_64 rng(seed);
  std::vector<bool> completed(static_cast<std::size_t>(n), false);
  std::vector<int> progress(paths.size(), 0);  // current step per object
  std::vector<int> running;  // subtask ids

  auto eligible = [&](int b) {
    if (completed[static_cast<std::size_t>(b)]) return false;
    if (std::find(running.begin(), running.end(), b) != running.end())
      return false;
    const auto& st = d.subtasks[static_cast<std::size_t>(b)];
    if (progress[static_cast<std::size_t>(st.object)] != st.t_start)
      return false;
    for (int a : d.order.pre[static_cast<std::size_t>(b)])
      if (!completed[static_cast<std::size_t>(a)]) return false;
    return true;
  };

  auto all_disjoint = [&] {
    for (std::size_t i = 0; i < paths.size(); ++i)
      for (std::size_t j = i + 1; j < paths.size(); ++j) {
        const Pose& pi =
            paths[i].steps[static_cast<std::size_t>(progress[i])].pose;
        const Pose& pj =
            paths[j].steps[static_cast<std::size_t>(progress[j])].pose;
        if (geom::collide(polys[i], pi, polys[j], pj)) return false;
      }
    return true;
  };

  REQUIRE(all_disjoint());
  int done = 0;
  int guard = 0;
  while (done < n) {
    REQUIRE(++guard < 100000);
    for (int b = 0; b < n; ++b)
      if (eligible(b)) running.push_back(b);
    REQUIRE(!running.empty());  // acyclic order cannot deadlock
    std::size_t pick = rng() % running.size();
    int b = running[pick];
    const auto& st = d.subtasks[static_cast<std::size_t>(b)];
    ++progress[static_cast<std::size_t>(st.object)];
    REQUIRE(all_disjoint());
    if (progress[static_cast<std::size_t>(st.object)] == st.t_end) {
      completed[static_cast<std::size_t>(b)] = true;
      running.erase(running.begin() + static_cast<std::ptrdiff_t>(pick));
      ++done;
    }
  }
  for (std::size_t m = 0; m < paths.size(); ++m)
    CHECK(progress[m] == static_cast<int>(paths[m].steps.size()) - 1);
}

}  // namespace

TEST_CASE("disjoint paths yield one unordered subtask each") {
  Polygon box = geom::make_box_polygon(0.5, 0.5);
  auto p0 = make_path(0, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  auto p1 = make_path(1, {{0, 5, 0}, {1, 5, 0}, {2, 5, 0}, {3, 5, 0}});

  auto d = segment_and_order({p0, p1}, {box, box});
  REQUIRE(d.subtasks.size() == 2);
  check_partition(d, {p0, p1});
  CHECK(d.order.direct.empty());
  CHECK(d.order.reduced.empty());
  CHECK(d.order.pre[0].empty());
  CHECK(d.order.pre[1].empty());
}

TEST_CASE("input validation") {
  Polygon box = geom::make_box_polygon(0.5, 0.5);
  auto p0 = make_path(0, {{0, 0, 0}, {1, 0, 0}});
  auto p1 = make_path(1, {{0, 5, 0}, {1, 5, 0}, {2, 5, 0}});
  CHECK_THROWS_AS(segment_and_order({p0}, {box, box}), std::invalid_argument);
  CHECK_THROWS_AS(segment_and_order({p0, p1}, {box, box}),
                  std::invalid_argument);
  CHECK(segment_and_order({}, {}).subtasks.empty());
}

TEST_CASE("crossing paths split at first-contact boundaries") {
  // Object 0 waits three steps, then drives east across the junction cell
  // (2,0); object 1 drives north through the same cell earlier. 0.5 m
  // squares on a 1 m grid only ever collide on identical cells.
  Polygon box = geom::make_box_polygon(0.5, 0.5);
  auto p0 = make_path(0, {{0, 0, 0},
                          {0, 0, 0},
                          {0, 0, 0},
                          {1, 0, 0},
                          {2, 0, 0},
                          {3, 0, 0},
                          {4, 0, 0},
                          {4, 0, 0}});
  auto p1 = make_path(1, {{2, -2, 0},
                          {2, -1, 0},
                          {2, 0, 0},
                          {2, 1, 0},
                          {2, 2, 0},
                          {2, 2, 0},
                          {2, 2, 0},
                          {2, 2, 0}});

  auto d = segment_and_order({p0, p1}, {box, box});
  check_partition(d, {p0, p1});

  // Object 0 splits where it first touches object 1's remaining sweep
  // (step 4, the junction); object 1 passes before that and stays whole.
  REQUIRE(d.subtasks.size() == 3);
  CHECK(d.subtasks[0].object == 0);
  CHECK(d.subtasks[0].t_start == 0);
  CHECK(d.subtasks[0].t_end == 4);
  CHECK(d.subtasks[1].object == 0);
  CHECK(d.subtasks[1].t_start == 4);
  CHECK(d.subtasks[1].t_end == 7);
  CHECK(d.subtasks[2].object == 1);
  CHECK(d.subtasks[2].t_start == 0);
  CHECK(d.subtasks[2].t_end == 7);

  // Object 1 must fully clear the junction before object 0 enters it:
  // its subtask precedes both of object 0's.
  CHECK(edge_set(d.order.direct) ==
        std::set<Edge>{{0, 1}, {2, 0}, {2, 1}});
  CHECK(edge_set(d.order.reduced) == std::set<Edge>{{0, 1}, {2, 0}});
  CHECK(d.order.pre[0] == std::vector<int>{2});
  CHECK(d.order.pre[1] == (std::vector<int>{0, 2}));
  CHECK(d.order.pre[2].empty());

  // The closure of the reduced edges equals the full closure.
  const int n = d.order.count;
  std::vector<std::vector<bool>> reach(
      static_cast<std::size_t>(n),
      std::vector<bool>(static_cast<std::size_t>(n), false));
  for (auto [a, b] : d.order.reduced) reach[a][b] = true;
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      if (reach[a][k])
        for (int b = 0; b < n; ++b)
          if (reach[k][b]) reach[a][b] = true;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      CHECK(reach[a][b] == d.order.closure[a][b]);

  for (std::uint64_t seed = 1; seed <= 8; ++seed)
    check_replay_safety(d, {p0, p1}, {box, box}, seed);
}

TEST_CASE("random planned instances stay safe under any admissible replay") {
  // End-to-end property: plan three objects in a shared workspace, segment
  // and order the result, then replay random order-respecting schedules and
  // demand zero collisions throughout.
  mapf::PlanConfig cfg;
  cfg.lattice.resolution = 0.5;
  cfg.eps_r = 0.0;
  cfg.robot_diameter = 0.1;  // inflation 0.1
  cfg.ws_min = {0, 0};
  cfg.ws_max = {5, 5};
  Polygon box = geom::make_box_polygon(0.4, 0.4);

  std::mt19937_64 rng(20260816);
  int built = 0;
  int attempts = 0;
  while (built < 10) {
    REQUIRE(++attempts < 200);
    // Six pairwise well-separated cells: three starts, three goals.
    std::vector<Pose> cells;
    int tries = 0;
    while (cells.size() < 6 && ++tries < 500) {
      Pose c{0.5 + 0.5 * static_cast<double>(rng() % 8),
             0.5 + 0.5 * static_cast<double>(rng() % 8), 0};
      bool ok = true;
      for (const auto& o : cells)
        ok = ok && (std::abs(c.x - o.x) > 0.9 || std::abs(c.y - o.y) > 0.9);
      if (ok) cells.push_back(c);
    }
    if (cells.size() < 6) continue;

    std::vector<mapf::PlanObject> objs;
    for (int m = 0; m < 3; ++m)
      objs.push_back({box, cells[static_cast<std::size_t>(m)],
                      cells[static_cast<std::size_t>(m + 3)]});
    std::vector<TimedPath> paths;
    try {
      paths = mapf::plan_all(objs, {}, cfg);
    } catch (const mapf::PlanFailure&) {
      continue;  // cramped instance; sample another
    }
    ++built;

    auto d = segment_and_order(paths, {box, box, box});
    check_partition(d, paths);
    CHECK(d.order.count == static_cast<int>(d.subtasks.size()));
    // direct and reduced edges are contained in the closure.
    for (auto [a, b] : d.order.direct) CHECK(d.order.closure[a][b]);
    for (auto [a, b] : d.order.reduced) CHECK(d.order.closure[a][b]);
    for (std::uint64_t seed = 1; seed <= 4; ++seed)
      check_replay_safety(d, paths, {box, box, box}, seed);
  }
}
