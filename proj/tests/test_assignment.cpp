#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "copush/assignment.hpp"
#include "copush/decomposition.hpp"

using namespace copush;
using assign::EstimateConfig;
using assign::ObjectModel;
using assign::RobotState;
using geom::Pose;
using geom::Vec2;

namespace {

ObjectModel std_box() {
  ObjectModel obj;
  obj.poly = geom::make_box_polygon(1.0, 1.0);
  obj.intr.mass = 10.0;
  obj.intr.inertia = 10.0 / 12.0 * 2.0;
  obj.intr.mu_ground = 0.8;
  obj.intr.mu_contact = 0.2;
  return obj;
}

// Ground friction force ~7.8 kN: beyond any subgroup the cap admits.
ObjectModel immovable_box() {
  ObjectModel obj = std_box();
  obj.intr.mass = 1000.0;
  obj.intr.inertia = 1000.0 / 12.0 * 2.0;
  return obj;
}

std::vector<RobotState> robots_at(const std::vector<Vec2>& positions) {
  std::vector<RobotState> out;
  for (const Vec2& p : positions) out.push_back({p, contact::RobotSpec{}});
  return out;
}

std::vector<Pose> straight_slice(Vec2 from, Vec2 to, int steps) {
  std::vector<Pose> slice;
  for (int i = 0; i <= steps; ++i) {
    double u = static_cast<double>(i) / steps;
    slice.push_back({from.x + u * (to.x - from.x),
                     from.y + u * (to.y - from.y), 0.0});
  }
  return slice;
}

decomposition::Subtask make_subtask(int object, std::vector<Pose> slice) {
  decomposition::Subtask st;
  st.object = object;
  st.index = 0;
  st.t_start = 0;
  st.t_end = static_cast<int>(slice.size()) - 1;
  st.slice = std::move(slice);
  return st;
}

// Brute-force oracle: enumerates every completion order and subgroup choice
// over the same candidate generator (arrival-sorted prefixes up to the cap)
// and returns the minimum makespan. With horizon = all, fixed total sweep
// length makes maximum efficiency equivalent to minimum makespan, so
// assign() must match this on small instances.
struct BruteForce {
  const std::vector<decomposition::Subtask>& sub;
  const std::vector<std::vector<int>>& pre;
  const std::vector<ObjectModel>& objects;
  const std::vector<RobotState>& robots;
  const EstimateConfig& cfg;
  assign::SufficiencyCache& cache;
  std::vector<double> push_time;
  double best = assign::kInfeasible;

  BruteForce(const std::vector<decomposition::Subtask>& sub_,
             const std::vector<std::vector<int>>& pre_,
             const std::vector<ObjectModel>& objects_,
             const std::vector<RobotState>& robots_,
             const EstimateConfig& cfg_, assign::SufficiencyCache& cache_)
      : sub(sub_), pre(pre_), objects(objects_), robots(robots_), cfg(cfg_),
        cache(cache_) {
    for (const auto& st : sub) {
      double radius =
          objects[static_cast<std::size_t>(st.object)].poly.bounding_radius();
      push_time.push_back(
          assign::slice_path_length(st.slice, radius) / cfg.push_speed +
          assign::switch_estimate(st.slice) * cfg.mean_switch_time);
    }
  }

  double travel(const Vec2& from, const Vec2& to,
                const contact::RobotSpec& spec) const {
    return geom::norm(to - from) / spec.v_max;
  }

  void run() {
    std::vector<char> done(sub.size(), 0);
    std::vector<double> free_t(robots.size(), 0.0);
    std::vector<Vec2> proxy;
    for (const auto& r : robots) proxy.push_back(r.position);
    std::vector<double> ends(sub.size(), 0.0);
    rec(done, free_t, proxy, ends, 0.0, 0);
  }

  void rec(std::vector<char>& done, std::vector<double>& free_t,
           std::vector<Vec2>& proxy, std::vector<double>& ends,
           double makespan, int n_done) {
    if (n_done == static_cast<int>(sub.size())) {
      best = std::min(best, makespan);
      return;
    }
    for (std::size_t k = 0; k < sub.size(); ++k) {
      if (done[k]) continue;
      bool ready = true;
      double pre_end = 0.0;
      for (int p : pre[k]) {
        if (!done[static_cast<std::size_t>(p)]) {
          ready = false;
          break;
        }
        pre_end = std::max(pre_end, ends[static_cast<std::size_t>(p)]);
      }
      if (!ready) continue;
      Vec2 start = sub[k].slice.front().xy();
      Vec2 goal = sub[k].slice.back().xy();
      std::vector<int> order(robots.size());
      for (std::size_t i = 0; i < robots.size(); ++i)
        order[i] = static_cast<int>(i);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        double ta = free_t[static_cast<std::size_t>(a)] +
                    travel(proxy[static_cast<std::size_t>(a)], start,
                           robots[static_cast<std::size_t>(a)].spec);
        double tb = free_t[static_cast<std::size_t>(b)] +
                    travel(proxy[static_cast<std::size_t>(b)], start,
                           robots[static_cast<std::size_t>(b)].spec);
        if (ta != tb) return ta < tb;
        return a < b;
      });
      int max_k = std::min<int>(cfg.n_cap, static_cast<int>(robots.size()));
      for (int size = 1; size <= max_k; ++size) {
        std::vector<int> subgroup(order.begin(), order.begin() + size);
        std::vector<contact::RobotSpec> specs;
        for (int id : subgroup)
          specs.push_back(robots[static_cast<std::size_t>(id)].spec);
        if (!cache.sufficient(objects[static_cast<std::size_t>(sub[k].object)],
                              specs))
          continue;
        double t0 = pre_end;
        double tr = 0.0;
        for (int id : subgroup) {
          auto i = static_cast<std::size_t>(id);
          t0 = std::max(t0, free_t[i]);
          tr = std::max(tr, travel(proxy[i], start, robots[i].spec));
        }
        double te = t0 + push_time[k] + tr;
        std::vector<double> saved_free;
        std::vector<Vec2> saved_proxy;
        for (int id : subgroup) {
          auto i = static_cast<std::size_t>(id);
          saved_free.push_back(free_t[i]);
          saved_proxy.push_back(proxy[i]);
          free_t[i] = te;
          proxy[i] = goal;
        }
        done[k] = 1;
        ends[k] = te;
        rec(done, free_t, proxy, ends, std::max(makespan, te), n_done + 1);
        done[k] = 0;
        for (std::size_t j = 0; j < subgroup.size(); ++j) {
          auto i = static_cast<std::size_t>(subgroup[j]);
          free_t[i] = saved_free[j];
          proxy[i] = saved_proxy[j];
        }
      }
    }
  }
};

}  // namespace

TEST_CASE("sweep length and switch estimates follow the slice geometry") {
  // Positional steps plus heading sweep at the bounding radius.
  std::vector<Pose> turn = {{0, 0, 0}, {1, 0, geom::kPi / 2}};
  CHECK(assign::slice_path_length(turn) == doctest::Approx(1.0));
  CHECK(assign::slice_path_length(turn, 0.5) ==
        doctest::Approx(1.0 + 0.5 * geom::kPi / 2));

  auto straight = straight_slice({0, 0}, {2, 0}, 4);
  CHECK(assign::switch_estimate(straight) == 0);

  std::vector<Pose> ell = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  CHECK(assign::switch_estimate(ell) == 1);

  // A wait step between moves does not add a switch.
  std::vector<Pose> waity = {{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  CHECK(assign::switch_estimate(waity) == 1);

  // Pure rotation is its own direction class.
  std::vector<Pose> spin = {{0, 0, 0}, {0, 0, 0.3}, {0, 0, 0.6}};
  CHECK(assign::switch_estimate(spin) == 0);
  std::vector<Pose> push_then_spin = {{0, 0, 0}, {1, 0, 0}, {1, 0, 0.5}};
  CHECK(assign::switch_estimate(push_then_spin) == 1);
}

TEST_CASE("completion estimates combine push time, switches and travel") {
  auto obj = std_box();
  auto st = make_subtask(0, straight_slice({0, 0}, {2, 0}, 4));
  auto robots = robots_at({{0, 0}, {0, 0}, {0, 3}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  // One standard robot cannot cancel ground friction on the 10 kg box.
  auto solo = assign::estimate_completion(st, {0}, robots, obj, cfg, cache);
  CHECK_FALSE(solo.feasible);
  CHECK(std::isinf(solo.duration));

  // Two robots already at the slice start: 2 m at 0.5 m/s, no switches.
  auto pair = assign::estimate_completion(st, {0, 1}, robots, obj, cfg, cache);
  REQUIRE(pair.feasible);
  CHECK(pair.duration == doctest::Approx(4.0));

  // Pulling in the distant robot adds its 3 s travel to the estimate.
  auto far = assign::estimate_completion(st, {0, 2}, robots, obj, cfg, cache);
  REQUIRE(far.feasible);
  CHECK(far.duration == doctest::Approx(7.0));
  CHECK(far.duration > pair.duration);

  // An L-shaped slice pays one mean switch time on top of the push.
  std::vector<Pose> ell = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  auto st_ell = make_subtask(0, ell);
  auto bent =
      assign::estimate_completion(st_ell, {0, 1}, robots, obj, cfg, cache);
  REQUIRE(bent.feasible);
  CHECK(bent.duration == doctest::Approx(2.0 / 0.5 + 4.0));
}

TEST_CASE("assignment picks the smallest sufficient subgroup") {
  std::vector<ObjectModel> objects = {std_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4))};
  std::vector<std::vector<int>> pre = {{}};
  auto robots = robots_at({{0, 0}, {0, 0}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  auto plan = assign::assign(subtasks, pre, objects, robots, 1, cfg, cache);
  REQUIRE(plan.by_subtask.size() == 1);
  CHECK(plan.by_subtask.at(0).robots == std::vector<int>{0, 1});
  CHECK(plan.by_subtask.at(0).t_start == doctest::Approx(0.0));
  CHECK(plan.by_subtask.at(0).t_end == doctest::Approx(4.0));
  CHECK(plan.makespan == doctest::Approx(4.0));
  CHECK(plan.efficiency == doctest::Approx(2.0 / 4.0));
  CHECK(plan.robot_timelines[0].size() == 1);
  CHECK(plan.robot_timelines[1].size() == 1);
  CHECK(plan.robot_timelines[0][0].second == 0);
  CHECK(assign::validate_plan(plan, subtasks, pre, objects, robots, cfg, cache)
            .empty());
}

TEST_CASE("horizon one assigns exactly one of several pending subtasks") {
  std::vector<ObjectModel> objects = {std_box(), std_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4)),
      make_subtask(1, straight_slice({6, 0}, {6, 2}, 4))};
  std::vector<std::vector<int>> pre = {{}, {}};
  // Robots sit on the first slice start; the second costs 1 s more travel,
  // so the first subtask is the more efficient single choice.
  auto robots = robots_at({{0, 0}, {0, 0}, {6, -1}, {6, -1}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  auto plan = assign::assign(subtasks, pre, objects, robots, 1, cfg, cache);
  REQUIRE(plan.by_subtask.size() == 1);
  CHECK(plan.by_subtask.count(0) == 1);
  CHECK(plan.makespan == doctest::Approx(4.0));
  CHECK(assign::validate_plan(plan, subtasks, pre, objects, robots, cfg, cache)
            .empty());
}

TEST_CASE("independent subtasks run in parallel on disjoint subgroups") {
  std::vector<ObjectModel> objects = {std_box(), std_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4)),
      make_subtask(1, straight_slice({6, 0}, {6, 2}, 4))};
  std::vector<std::vector<int>> pre = {{}, {}};
  auto robots = robots_at({{0, 0}, {0, 0}, {6, 0}, {6, 0}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  auto plan = assign::assign(subtasks, pre, objects, robots, 2, cfg, cache);
  REQUIRE(plan.by_subtask.size() == 2);
  CHECK(plan.by_subtask.at(0).robots == std::vector<int>{0, 1});
  CHECK(plan.by_subtask.at(1).robots == std::vector<int>{2, 3});
  // Both run concurrently; the makespan is the slower of the two, not the
  // sum.
  CHECK(plan.makespan == doctest::Approx(4.0));
  CHECK(plan.efficiency == doctest::Approx(4.0 / 4.0));
  CHECK(assign::validate_plan(plan, subtasks, pre, objects, robots, cfg, cache)
            .empty());
}

TEST_CASE("assignment matches exhaustive enumeration on a chained instance") {
  std::vector<ObjectModel> objects = {std_box(), std_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4)),
      make_subtask(0, straight_slice({2, 0}, {2, -2}, 4)),
      make_subtask(1, straight_slice({5, 0}, {5, 2}, 4))};
  std::vector<std::vector<int>> pre = {{}, {0}, {}};
  auto robots = robots_at({{0, -1}, {0, 1}, {5, -1}, {5, 1}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  auto plan = assign::assign(subtasks, pre, objects, robots,
                             static_cast<int>(subtasks.size()), cfg, cache);
  REQUIRE(plan.by_subtask.size() == 3);
  CHECK(assign::validate_plan(plan, subtasks, pre, objects, robots, cfg, cache)
            .empty());

  BruteForce oracle(subtasks, pre, objects, robots, cfg, cache);
  oracle.run();
  REQUIRE(std::isfinite(oracle.best));
  CHECK(plan.makespan == doctest::Approx(oracle.best).epsilon(1e-9));
  // Hand check: 2+2 split, chain finishes at 5 s (travel 1) + 4 s push.
  CHECK(plan.makespan == doctest::Approx(9.0));
  // The chained subtask starts only after its predecessor ends.
  CHECK(plan.by_subtask.at(1).t_start >=
        plan.by_subtask.at(0).t_end - 1e-9);
}

TEST_CASE("assignment matches exhaustive enumeration under robot scarcity") {
  // Three robots for two tasks force sharing; the oracle still agrees.
  std::vector<ObjectModel> objects = {std_box(), std_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4)),
      make_subtask(1, straight_slice({4, 0}, {4, 2}, 4))};
  std::vector<std::vector<int>> pre = {{}, {}};
  auto robots = robots_at({{0, 0}, {1, 1}, {4, 0}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  auto plan = assign::assign(subtasks, pre, objects, robots, 2, cfg, cache);
  REQUIRE(plan.by_subtask.size() == 2);
  CHECK(assign::validate_plan(plan, subtasks, pre, objects, robots, cfg, cache)
            .empty());

  BruteForce oracle(subtasks, pre, objects, robots, cfg, cache);
  oracle.run();
  REQUIRE(std::isfinite(oracle.best));
  CHECK(plan.makespan == doctest::Approx(oracle.best).epsilon(1e-9));
}

TEST_CASE("validator flags ordering, sufficiency and window violations") {
  std::vector<ObjectModel> objects = {std_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4)),
      make_subtask(0, straight_slice({2, 0}, {4, 0}, 4))};
  std::vector<std::vector<int>> pre = {{}, {0}};
  auto robots = robots_at({{0, 0}, {0, 0}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  auto plan = assign::assign(subtasks, pre, objects, robots, 2, cfg, cache);
  CHECK(assign::validate_plan(plan, subtasks, pre, objects, robots, cfg, cache)
            .empty());

  // (I) successor starting before its predecessor ends.
  auto bad_order = plan;
  bad_order.by_subtask.at(1).t_start = bad_order.by_subtask.at(0).t_end - 1.0;
  auto v1 = assign::validate_plan(bad_order, subtasks, pre, objects, robots,
                                  cfg, cache);
  REQUIRE_FALSE(v1.empty());
  CHECK(v1.front().find("predecessor") != std::string::npos);

  // (II) shrinking a subgroup below sufficiency.
  auto bad_group = plan;
  bad_group.by_subtask.at(0).robots = {0};
  auto v2 = assign::validate_plan(bad_group, subtasks, pre, objects, robots,
                                  cfg, cache);
  REQUIRE_FALSE(v2.empty());
  CHECK(v2.front().find("not mode-sufficient") != std::string::npos);

  // (III) overlapping windows on a shared robot.
  auto bad_windows = plan;
  bad_windows.by_subtask.at(1).t_start = 0.0;
  bad_windows.robot_timelines.assign(2, {});
  for (const auto& [k, a] : bad_windows.by_subtask)
    for (int id : a.robots)
      bad_windows.robot_timelines[static_cast<std::size_t>(id)].push_back(
          {a.t_start, k});
  for (auto& tl : bad_windows.robot_timelines)
    std::sort(tl.begin(), tl.end());
  auto v3 = assign::validate_plan(bad_windows, subtasks, pre, objects, robots,
                                  cfg, cache);
  REQUIRE_FALSE(v3.empty());
  bool overlap = false;
  for (const auto& s : v3)
    if (s.find("overlaps") != std::string::npos) overlap = true;
  CHECK(overlap);
}

TEST_CASE("replan triggers on completions, elapsed time or adapted failure") {
  assign::ReplanPolicy policy;
  CHECK_FALSE(assign::replan_trigger({0, 0.0, false}, policy));
  CHECK(assign::replan_trigger({2, 0.0, false}, policy));
  CHECK_FALSE(assign::replan_trigger({1, 79.9, false}, policy));
  CHECK(assign::replan_trigger({0, 80.0, false}, policy));
  CHECK(assign::replan_trigger({0, 0.0, true}, policy));
  assign::ReplanPolicy lax{5, 1000.0};
  CHECK_FALSE(assign::replan_trigger({4, 999.0, false}, lax));
}

TEST_CASE("failure names the frontier subtask no subgroup can push") {
  // Subtask 0 is pushable; its dependent subtask moves a 1 t object whose
  // friction exceeds the whole team's force budget.
  std::vector<ObjectModel> objects = {std_box(), immovable_box()};
  std::vector<decomposition::Subtask> subtasks = {
      make_subtask(0, straight_slice({0, 0}, {2, 0}, 4)),
      make_subtask(1, straight_slice({5, 0}, {7, 0}, 4))};
  std::vector<std::vector<int>> pre = {{}, {0}};
  auto robots = robots_at({{0, 0}, {0, 0}, {5, 0}, {5, 0}});
  EstimateConfig cfg;
  assign::SufficiencyCache cache;

  bool threw = false;
  try {
    assign::assign(subtasks, pre, objects, robots, 2, cfg, cache);
  } catch (const assign::AssignmentFailure& e) {
    threw = true;
    CHECK(e.subtask == 1);
    CHECK(std::string(e.what()).find("subtask 1") != std::string::npos);
    CHECK(std::string(e.what()).find("object 1") != std::string::npos);
  }
  CHECK(threw);
}
