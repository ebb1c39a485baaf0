#include "copush/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "copush/util.hpp"

namespace copush::assign {

namespace {

constexpr double kTimeTol = 1e-9;

double travel_time(const Vec2& from, const Vec2& to, const RobotSpec& spec) {
  return geom::norm(to - from) / std::max(1e-9, spec.v_max);
}

// Capability multiset hash: order-independent so that permuted subgroups
// with the same specs share one sufficiency verdict.
std::uint64_t specs_hash(std::vector<RobotSpec> specs) {
  std::sort(specs.begin(), specs.end(), [](const RobotSpec& a,
                                           const RobotSpec& b) {
    return std::tie(a.radius, a.f_max_robot, a.v_max, a.omega_max) <
           std::tie(b.radius, b.f_max_robot, b.v_max, b.omega_max);
  });
  std::uint64_t h = 1469598103934665603ull;
  for (const RobotSpec& s : specs) {
    h = fnv1a_add(h, s.radius);
    h = fnv1a_add(h, s.f_max_robot);
    h = fnv1a_add(h, s.v_max);
    h = fnv1a_add(h, s.omega_max);
  }
  return h;
}

}  // namespace

bool SufficiencyCache::sufficient(const ObjectModel& obj,
                                  const std::vector<RobotSpec>& specs) {
  std::uint64_t sig = contact::object_signature(obj.poly, obj.intr);
  auto key = std::make_pair(sig, specs_hash(specs));
  auto it = verdicts_.find(key);
  if (it != verdicts_.end()) return it->second;
  contact::SufficiencyConfig cfg;
  cfg.verify_rollout = false;  // estimate-level gate; hybrid verifies later
  bool ok = contact::mode_sufficient(specs, obj.poly, obj.intr, cfg).sufficient;
  verdicts_[key] = ok;
  return ok;
}

double slice_path_length(const std::vector<Pose>& slice, double radius) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < slice.size(); ++i) {
    len += geom::norm(slice[i + 1].xy() - slice[i].xy());
    len += radius * std::abs(geom::angle_diff(slice[i + 1].psi, slice[i].psi));
  }
  return len;
}

int switch_estimate(const std::vector<Pose>& slice) {
  constexpr double kEps = 1e-9;
  int switches = 0;
  int prev = -1;
  for (std::size_t i = 0; i + 1 < slice.size(); ++i) {
    Vec2 d = slice[i + 1].xy() - slice[i].xy();
    double dpsi = geom::angle_diff(slice[i + 1].psi, slice[i].psi);
    bool moving = geom::norm(d) > kEps;
    bool turning = std::abs(dpsi) > kEps;
    if (!moving && !turning) continue;  // wait step
    int cls;
    if (moving) {
      int sector = static_cast<int>(
          std::lround(std::atan2(d.y, d.x) / (geom::kPi / 4)));
      sector = ((sector % 8) + 8) % 8;
      int rot = turning ? (dpsi > 0 ? 1 : 2) : 0;
      cls = sector * 3 + rot;
    } else {
      cls = 24 + (dpsi > 0 ? 0 : 1);
    }
    if (prev >= 0 && cls != prev) ++switches;
    prev = cls;
  }
  return switches;
}

Estimate estimate_completion(const decomposition::Subtask& st,
                             const std::vector<int>& subgroup,
                             const std::vector<RobotState>& robots,
                             const ObjectModel& obj, const EstimateConfig& cfg,
                             SufficiencyCache& cache) {
  std::vector<RobotSpec> specs;
  specs.reserve(subgroup.size());
  for (int id : subgroup)
    specs.push_back(robots[static_cast<std::size_t>(id)].spec);
  if (!cache.sufficient(obj, specs)) return {false, kInfeasible};
  Estimate est;
  est.feasible = true;
  est.duration =
      slice_path_length(st.slice, obj.poly.bounding_radius()) /
          std::max(1e-9, cfg.push_speed) +
      switch_estimate(st.slice) * cfg.mean_switch_time;
  double travel = 0.0;
  for (int id : subgroup) {
    const RobotState& r = robots[static_cast<std::size_t>(id)];
    travel = std::max(
        travel, travel_time(r.position, st.slice.front().xy(), r.spec));
  }
  est.duration += travel;
  return est;
}

bool replan_trigger(const ExecutionEvents& events, const ReplanPolicy& policy) {
  if (events.failed_after_adaptation) return true;
  if (events.completed_since_plan >= policy.completions) return true;
  if (events.elapsed_since_plan >= policy.period) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Best-first assignment search
// ---------------------------------------------------------------------------

namespace {

struct Node {
  std::vector<char> assigned;      // per subtask
  std::vector<Assigned> slots;     // per subtask, valid where assigned
  std::vector<double> free_time;   // per robot
  std::vector<Vec2> proxy;         // per robot, position estimate
  double total_len = 0.0;
  double makespan = 0.0;
  int n_assigned = 0;
  double efficiency = 0.0;
  long seq = 0;
};

struct NodeWorse {
  bool operator()(const Node& a, const Node& b) const {
    if (a.efficiency != b.efficiency) return a.efficiency < b.efficiency;
    if (a.n_assigned != b.n_assigned) return a.n_assigned < b.n_assigned;
    return a.seq > b.seq;
  }
};

std::uint64_t node_state_hash(const Node& node) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t k = 0; k < node.assigned.size(); ++k) {
    if (!node.assigned[k]) continue;
    h = fnv1a_add(h, static_cast<double>(k));
    for (int id : node.slots[k].robots)
      h = fnv1a_add(h, static_cast<double>(id));
    h = fnv1a_add(h, node.slots[k].t_start);
    h = fnv1a_add(h, node.slots[k].t_end);
  }
  return h;
}

}  // namespace

TaskPlan assign(const std::vector<decomposition::Subtask>& subtasks,
                const std::vector<std::vector<int>>& pre,
                const std::vector<ObjectModel>& objects,
                const std::vector<RobotState>& robots, int horizon,
                const EstimateConfig& cfg, SufficiencyCache& cache) {
  const std::size_t m = subtasks.size();
  const std::size_t n = robots.size();
  if (pre.size() != m)
    throw std::invalid_argument("assign: pre size must match subtasks");
  if (n == 0) throw std::invalid_argument("assign: no robots");
  const int target = std::min<int>(horizon, static_cast<int>(m));

  // Per-subtask push time (travel excluded; it depends on the node) and
  // sweep length, computed once.
  std::vector<double> sweep_len(m), push_time(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& st = subtasks[k];
    double radius =
        objects[static_cast<std::size_t>(st.object)].poly.bounding_radius();
    sweep_len[k] = slice_path_length(st.slice, radius);
    push_time[k] = sweep_len[k] / std::max(1e-9, cfg.push_speed) +
                   switch_estimate(st.slice) * cfg.mean_switch_time;
  }

  Node root;
  root.assigned.assign(m, 0);
  root.slots.assign(m, {});
  root.free_time.assign(n, 0.0);
  root.proxy.reserve(n);
  for (const RobotState& r : robots) root.proxy.push_back(r.position);

  std::priority_queue<Node, std::vector<Node>, NodeWorse> open;
  long seq = 0;
  root.seq = seq++;
  open.push(root);
  std::set<std::uint64_t> seen;

  Node best;
  bool have_best = false;
  int expansions = 0;
  // Subtasks that were ready in some node but admitted no sufficient
  // subgroup of any size; reported if the search never completes a round.
  std::vector<char> blocked(m, 0);

  while (!open.empty() && expansions < cfg.node_budget) {
    Node cur = open.top();
    open.pop();
    ++expansions;

    if (cur.n_assigned >= target) {
      // Complete for this round; keep the most efficient one. Exploration
      // continues so the returned plan is the best over the whole tree
      // (matching exhaustive enumeration on small instances).
      if (!have_best || cur.efficiency > best.efficiency ||
          (cur.efficiency == best.efficiency &&
           cur.makespan < best.makespan - kTimeTol)) {
        best = std::move(cur);
        have_best = true;
      }
      continue;
    }

    for (std::size_t k = 0; k < m; ++k) {
      if (cur.assigned[k]) continue;
      bool ready = true;
      double pre_end = 0.0;
      for (int p : pre[k]) {
        if (!cur.assigned[static_cast<std::size_t>(p)]) {
          ready = false;
          break;
        }
        pre_end =
            std::max(pre_end, cur.slots[static_cast<std::size_t>(p)].t_end);
      }
      if (!ready) continue;
      bool any_candidate = false;

      const auto& st = subtasks[k];
      const ObjectModel& obj = objects[static_cast<std::size_t>(st.object)];
      Vec2 start = st.slice.front().xy();
      Vec2 goal = st.slice.back().xy();

      // Robots ordered by estimated arrival at the slice start.
      std::vector<int> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        double ta = cur.free_time[static_cast<std::size_t>(a)] +
                    travel_time(cur.proxy[static_cast<std::size_t>(a)], start,
                                robots[static_cast<std::size_t>(a)].spec);
        double tb = cur.free_time[static_cast<std::size_t>(b)] +
                    travel_time(cur.proxy[static_cast<std::size_t>(b)], start,
                                robots[static_cast<std::size_t>(b)].spec);
        if (ta != tb) return ta < tb;
        return a < b;
      });

      int max_k = std::min<int>(cfg.n_cap, static_cast<int>(n));
      for (int size = 1; size <= max_k; ++size) {
        std::vector<int> subgroup(order.begin(), order.begin() + size);
        std::sort(subgroup.begin(), subgroup.end());
        std::vector<RobotSpec> specs;
        for (int id : subgroup)
          specs.push_back(robots[static_cast<std::size_t>(id)].spec);
        if (!cache.sufficient(obj, specs)) continue;
        any_candidate = true;

        double t0 = pre_end;
        double travel = 0.0;
        for (int id : subgroup) {
          auto i = static_cast<std::size_t>(id);
          t0 = std::max(t0, cur.free_time[i]);
          travel = std::max(travel, travel_time(cur.proxy[i], start,
                                                robots[i].spec));
        }
        double te = t0 + push_time[k] + travel;

        Node child = cur;
        child.assigned[k] = 1;
        child.slots[k] = {subgroup, t0, te};
        for (int id : subgroup) {
          auto i = static_cast<std::size_t>(id);
          child.free_time[i] = te;
          child.proxy[i] = goal;
        }
        child.total_len += sweep_len[k];
        child.makespan = std::max(child.makespan, te);
        child.n_assigned = cur.n_assigned + 1;
        child.efficiency = child.total_len / std::max(1e-9, child.makespan);
        child.seq = seq++;
        if (seen.insert(node_state_hash(child)).second) {
          // Admissible prune when assigning everything: a descendant's
          // efficiency is at most total length / current makespan.
          if (have_best && target == static_cast<int>(m) &&
              child.makespan > 0.0) {
            double bound = (child.total_len +
                            [&] {
                              double rest = 0.0;
                              for (std::size_t q = 0; q < m; ++q)
                                if (!child.assigned[q]) rest += sweep_len[q];
                              return rest;
                            }()) /
                           child.makespan;
            if (bound <= best.efficiency + 1e-12) continue;
          }
          open.push(std::move(child));
        }
      }
      if (!any_candidate) blocked[k] = 1;
    }
  }

  if (!have_best) {
    for (std::size_t k = 0; k < m; ++k) {
      if (!blocked[k]) continue;
      std::ostringstream msg;
      msg << "assignment failure: no mode-sufficient subgroup for subtask "
          << k << " (object " << subtasks[k].object << ")";
      throw AssignmentFailure(static_cast<int>(k), msg.str());
    }
    throw AssignmentFailure(
        m > 0 ? 0 : -1, "assignment failure: no complete assignment found");
  }

  TaskPlan plan;
  plan.makespan = best.makespan;
  plan.efficiency = best.efficiency;
  plan.robot_timelines.resize(n);
  for (std::size_t k = 0; k < m; ++k) {
    if (!best.assigned[k]) continue;
    plan.by_subtask[static_cast<int>(k)] = best.slots[k];
    for (int id : best.slots[k].robots)
      plan.robot_timelines[static_cast<std::size_t>(id)].push_back(
          {best.slots[k].t_start, static_cast<int>(k)});
  }
  for (auto& tl : plan.robot_timelines) std::sort(tl.begin(), tl.end());
  return plan;
}

std::vector<std::string> validate_plan(
    const TaskPlan& plan, const std::vector<decomposition::Subtask>& subtasks,
    const std::vector<std::vector<int>>& pre,
    const std::vector<ObjectModel>& objects,
    const std::vector<RobotState>& robots, const EstimateConfig& cfg,
    SufficiencyCache& cache) {
  (void)cfg;
  std::vector<std::string> violations;
  auto complain = [&](const std::string& s) { violations.push_back(s); };

  // (I) ordering: predecessors end before successors start.
  for (const auto& [k, a] : plan.by_subtask) {
    for (int p : pre[static_cast<std::size_t>(k)]) {
      auto it = plan.by_subtask.find(p);
      if (it == plan.by_subtask.end()) {
        std::ostringstream m;
        m << "subtask " << k << " assigned before predecessor " << p;
        complain(m.str());
        continue;
      }
      if (it->second.t_end > a.t_start + kTimeTol) {
        std::ostringstream m;
        m << "subtask " << k << " starts at " << a.t_start
          << " before predecessor " << p << " ends at " << it->second.t_end;
        complain(m.str());
      }
    }
  }

  // (II) every assigned subgroup is mode-sufficient.
  for (const auto& [k, a] : plan.by_subtask) {
    const auto& st = subtasks[static_cast<std::size_t>(k)];
    std::vector<RobotSpec> specs;
    for (int id : a.robots)
      specs.push_back(robots[static_cast<std::size_t>(id)].spec);
    if (!cache.sufficient(objects[static_cast<std::size_t>(st.object)],
                          specs)) {
      std::ostringstream m;
      m << "subgroup for subtask " << k << " is not mode-sufficient";
      complain(m.str());
    }
  }

  // (III) per-robot windows are disjoint and cover the travel in.
  for (std::size_t i = 0; i < plan.robot_timelines.size(); ++i) {
    const auto& tl = plan.robot_timelines[i];
    Vec2 at = robots[i].position;
    double prev_end = -kInfeasible;
    for (const auto& [ts, k] : tl) {
      const Assigned& a = plan.by_subtask.at(k);
      const auto& st = subtasks[static_cast<std::size_t>(k)];
      if (ts < prev_end - kTimeTol) {
        std::ostringstream m;
        m << "robot " << i << " window for subtask " << k
          << " overlaps the previous one";
        complain(m.str());
      }
      double need = travel_time(at, st.slice.front().xy(), robots[i].spec);
      if (a.t_end - a.t_start + kTimeTol < need) {
        std::ostringstream m;
        m << "robot " << i << " cannot reach subtask " << k << " in time";
        complain(m.str());
      }
      prev_end = a.t_end;
      at = st.slice.back().xy();
    }
  }
  return violations;
}

}  // namespace copush::assign
