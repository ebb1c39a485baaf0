#include "copush/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

namespace copush::exec {

namespace {

using contact::PushingMode;
using geom::ArcMotion;
using geom::Polygon;
using hybrid::HybridPlan;
using hybrid::Keyframe;
using sim::ControlCommand;
using sim::WorldState;

Vec2 clip_norm(const Vec2& v, double cap) {
  double n = geom::norm(v);
  return n > cap ? v * (cap / n) : v;
}

double clip_abs(double v, double cap) { return std::clamp(v, -cap, cap); }

/// Signed distance from point `p` (world) to the polygon at `pose`:
/// negative inside.
double signed_dist(const Polygon& poly, const Pose& pose, const Vec2& p) {
  Vec2 local = pose.unapply(p);
  double s = poly.closest_boundary_s(local);
  double d = geom::norm(local - poly.boundary_point(s));
  return poly.contains(local) ? -d : d;
}

bool same_mode(const PushingMode& a, const PushingMode& b) {
  if (a.robots != b.robots || a.contacts.size() != b.contacts.size())
    return false;
  for (std::size_t i = 0; i < a.contacts.size(); ++i)
    if (std::abs(a.contacts[i].boundary_s - b.contacts[i].boundary_s) > 1e-9) return false;
  return true;
}

// --- approach grid ---------------------------------------------------------

struct Grid {
  Vec2 origin;
  double cell = 0.1;
  int nx = 0, ny = 0;
  std::vector<char> blocked;
  int idx(int x, int y) const { return y * nx + x; }
  bool in(int x, int y) const { return x >= 0 && x < nx && y >= 0 && y < ny; }
  Vec2 center(int x, int y) const {
    return {origin.x + x * cell, origin.y + y * cell};
  }
};

}  // namespace

std::vector<Vec2> plan_approach(const Vec2& from, const Vec2& to,
                                const sim::WorldModel& model,
                                const std::vector<Pose>& object_poses,
                                double robot_radius,
                                const EpisodeConfig& cfg) {
  const double inflate = robot_radius + cfg.nav_margin;

  // Grid extent: everything relevant plus padding, clamped to the
  // workspace so degenerate "infinite" bounds never blow the grid up.
  Vec2 lo = {std::min(from.x, to.x), std::min(from.y, to.y)};
  Vec2 hi = {std::max(from.x, to.x), std::max(from.y, to.y)};
  auto grow = [&](const Vec2& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  };
  for (const Polygon& obs : model.obstacles)
    for (const Vec2& v : obs.vertices()) grow(v);
  for (std::size_t o = 0; o < model.objects.size(); ++o) {
    double r = model.objects[o].poly.bounding_radius();
    grow(object_poses[o].xy() + Vec2{r, r});
    grow(object_poses[o].xy() - Vec2{r, r});
  }
  lo = lo - Vec2{1.0, 1.0};
  hi = hi + Vec2{1.0, 1.0};
  const bool ws_finite = geom::norm(model.ws_max - model.ws_min) < 1e8;
  if (ws_finite) {
    lo = {std::max(lo.x, model.ws_min.x), std::max(lo.y, model.ws_min.y)};
    hi = {std::min(hi.x, model.ws_max.x), std::min(hi.y, model.ws_max.y)};
  }

  Grid g;
  g.cell = cfg.nav_cell;
  g.origin = lo;
  g.nx = std::max(2, static_cast<int>(std::ceil((hi.x - lo.x) / g.cell)) + 1);
  g.ny = std::max(2, static_cast<int>(std::ceil((hi.y - lo.y) / g.cell)) + 1);
  g.blocked.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
  for (int y = 0; y < g.ny; ++y) {
    for (int x = 0; x < g.nx; ++x) {
      Vec2 c = g.center(x, y);
      bool b = false;
      if (ws_finite &&
          (c.x < model.ws_min.x + robot_radius ||
           c.x > model.ws_max.x - robot_radius ||
           c.y < model.ws_min.y + robot_radius ||
           c.y > model.ws_max.y - robot_radius))
        b = true;
      for (std::size_t i = 0; !b && i < model.obstacles.size(); ++i)
        if (signed_dist(model.obstacles[i], Pose{}, c) < inflate) b = true;
      for (std::size_t o = 0; !b && o < model.objects.size(); ++o)
        if (signed_dist(model.objects[o].poly, object_poses[o], c) < inflate)
          b = true;
      g.blocked[static_cast<std::size_t>(g.idx(x, y))] = b ? 1 : 0;
    }
  }

  // The robot physically stands at `from` (possibly hugging a surface it
  // just pushed): free its immediate neighborhood so the search can leave.
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x)
      if (geom::norm(g.center(x, y) - from) < inflate + 1.5 * g.cell)
        g.blocked[static_cast<std::size_t>(g.idx(x, y))] = 0;

  auto cell_of = [&](const Vec2& p) {
    int x = std::clamp(
        static_cast<int>(std::lround((p.x - g.origin.x) / g.cell)), 0,
        g.nx - 1);
    int y = std::clamp(
        static_cast<int>(std::lround((p.y - g.origin.y) / g.cell)), 0,
        g.ny - 1);
    return std::pair<int, int>{x, y};
  };
  auto [sx, sy] = cell_of(from);
  auto [gx, gy] = cell_of(to);

  // The goal hugs the pushed object and usually sits in an inflated cell:
  // retarget to the nearest free cell in a deterministic ring scan.
  if (g.blocked[static_cast<std::size_t>(g.idx(gx, gy))]) {
    bool found = false;
    for (int r = 1; r <= 8 && !found; ++r) {
      for (int dy = -r; dy <= r && !found; ++dy) {
        for (int dx = -r; dx <= r && !found; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
          int x = gx + dx, y = gy + dy;
          if (g.in(x, y) &&
              !g.blocked[static_cast<std::size_t>(g.idx(x, y))]) {
            gx = x;
            gy = y;
            found = true;
          }
        }
      }
    }
  }

  const int start = g.idx(sx, sy), goal = g.idx(gx, gy);
  const std::size_t n = g.blocked.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  using QE = std::tuple<double, double, int>;  // f, g, idx
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> open;
  auto heur = [&](int i) {
    int x = i % g.nx, y = i / g.nx;
    return geom::norm(g.center(x, y) - g.center(gx, gy));
  };
  dist[static_cast<std::size_t>(start)] = 0.0;
  open.push({heur(start), 0.0, start});
  const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double kSqrt2 = std::sqrt(2.0);
  while (!open.empty()) {
    auto [f, gc, i] = open.top();
    open.pop();
    if (gc > dist[static_cast<std::size_t>(i)] + 1e-12) continue;
    if (i == goal) break;
    int x = i % g.nx, y = i / g.nx;
    for (int k = 0; k < 8; ++k) {
      int x2 = x + dxs[k], y2 = y + dys[k];
      if (!g.in(x2, y2)) continue;
      int j = g.idx(x2, y2);
      if (g.blocked[static_cast<std::size_t>(j)]) continue;
      double step = g.cell * (k < 4 ? 1.0 : kSqrt2);
      double g2 = gc + step;
      if (g2 < dist[static_cast<std::size_t>(j)] - 1e-12) {
        dist[static_cast<std::size_t>(j)] = g2;
        parent[static_cast<std::size_t>(j)] = i;
        open.push({g2 + heur(j), g2, j});
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(goal)]) && goal != start)
    return {};

  std::vector<Vec2> path;
  for (int i = goal; i >= 0; i = parent[static_cast<std::size_t>(i)])
    path.push_back(g.center(i % g.nx, i / g.nx));
  std::reverse(path.begin(), path.end());
  path.push_back(to);  // exact staging point, inside the inflated ring
  return path;
}

namespace {

// --- per-active-subtask execution state -------------------------------------

struct ActiveSub {
  int id = -1;
  int object = -1;
  std::vector<int> subgroup;  ///< world robot ids, team order of the plan
  std::vector<Keyframe> stages;
  std::size_t stage = 0;  ///< executing arc stage -> stage+1
  std::optional<ArcMotion> planned_arc;  ///< failure-detection reference
  std::vector<sim::TimedPose> history;   ///< pushing poses, trailing window
  int adapt = 0;                         ///< hybrid replans consumed
  int pushed_stage = -1;                 ///< last stage counted as executed
  // Per contact slot of the current stage's mode:
  std::vector<char> staged;
  std::vector<char> ready;  ///< parked on-station within engagement slack
  bool pushing = false;     ///< latched once every slot armed for this stage
  std::vector<std::vector<Vec2>> path;
  std::vector<std::size_t> cursor;
  std::vector<double> path_t;

  void reset_slots(std::size_t n) {
    staged.assign(n, 0);
    ready.assign(n, 0);
    pushing = false;
    path.assign(n, {});
    cursor.assign(n, 0);
    path_t.assign(n, -1e18);
  }
};

double wall_between(std::chrono::steady_clock::time_point a,
                    std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

ExecutionReport run_episode(const EpisodeInput& input,
                            const EpisodeConfig& cfg,
                            std::vector<TraceRecord>* trace,
                            const std::map<int, HybridPlan>* initial_plans,
                            hybrid::PlanLibrary* library) {
  const std::size_t n_obj = input.world.objects.size();
  const std::size_t n_rob = input.world.robots.size();
  const std::size_t n_sub = input.subtasks.size();

  ExecutionReport report;
  report.outcomes.resize(n_sub);
  for (std::size_t k = 0; k < n_sub; ++k)
    report.outcomes[k].subtask = static_cast<int>(k);

  WorldState state;
  state.robots.resize(n_rob);
  for (std::size_t i = 0; i < n_rob; ++i)
    state.robots[i].pose = input.robot_starts[i];
  state.objects.resize(n_obj);
  for (std::size_t o = 0; o < n_obj; ++o)
    state.objects[o].pose = input.object_starts[o];

  hybrid::PlanLibrary local_lib;
  if (!library) library = &local_lib;
  hybrid::LibraryProposer proposer(*library);

  assign::SufficiencyCache suff_cache;
  std::vector<assign::ObjectModel> a_objects;
  for (const auto& om : input.world.objects)
    a_objects.push_back({om.poly, om.intr});
  // Sufficiency certificates computed by hybrid searches, reused across
  // replans of the same object/subgroup pairing.
  std::map<std::pair<int, std::vector<int>>, contact::SufficiencyResult>
      certificates;

  std::vector<char> done(n_sub, 0);
  std::vector<int> attempts(n_sub, 0);
  std::vector<int> owner(n_rob, -1);  ///< subtask id a robot executes, or -1
  std::vector<ActiveSub> active;

  struct DispatchEntry {
    double t0 = 0.0;
    int id = -1;
    std::vector<int> subgroup;
  };
  std::vector<DispatchEntry> dispatch;

  double last_round_time = 0.0;
  int completions_since_round = 0;
  bool failed_after_adaptation = false;
  bool need_round = true;
  bool defer_round = false;
  bool fatal = false;
  int done_count = 0;

  std::vector<ControlCommand> commands(n_rob);
  std::set<std::tuple<int, int, int>> touching;
  std::vector<std::string> events;
  auto note = [&](const std::string& s) { events.push_back(s); };
  auto fail_note = [&](const std::string& s) {
    report.notes.push_back(s);
    note(s);
  };

  auto is_active = [&](int id) {
    for (const ActiveSub& a : active)
      if (a.id == id) return true;
    return false;
  };
  auto pending_ids = [&]() {
    std::vector<int> out;
    for (std::size_t k = 0; k < n_sub; ++k)
      if (!done[k] && !is_active(static_cast<int>(k))) out.push_back((int)k);
    return out;
  };

  auto free_robots = [&]() {
    std::vector<int> out;
    for (std::size_t i = 0; i < n_rob; ++i)
      if (owner[i] < 0) out.push_back(static_cast<int>(i));
    return out;
  };

  // One receding-horizon assignment round over pending subtasks and free
  // robots. Active subtasks keep their subgroups; pre edges to done
  // predecessors are satisfied, edges to active/pending ones only shift the
  // window estimates (real gating happens at activation).
  auto run_round = [&]() {
    auto pend = pending_ids();
    if (pend.empty()) {
      need_round = false;
      return;
    }
    auto free = free_robots();
    if (free.empty()) {
      defer_round = true;
      return;
    }
    std::vector<decomposition::Subtask> local_sub;
    std::vector<std::vector<int>> local_pre;
    std::vector<int> local_to_global(pend.begin(), pend.end());
    std::map<int, int> global_to_local;
    for (std::size_t i = 0; i < pend.size(); ++i)
      global_to_local[pend[i]] = static_cast<int>(i);
    for (int id : pend) {
      local_sub.push_back(input.subtasks[static_cast<std::size_t>(id)]);
      std::vector<int> p;
      for (int q : input.pre[static_cast<std::size_t>(id)]) {
        auto it = global_to_local.find(q);
        if (it != global_to_local.end()) p.push_back(it->second);
      }
      local_pre.push_back(std::move(p));
    }
    std::vector<assign::RobotState> rstates;
    for (int r : free)
      rstates.push_back({state.robots[static_cast<std::size_t>(r)].pose.xy(),
                         input.world.robots[static_cast<std::size_t>(r)]});
    auto t0 = std::chrono::steady_clock::now();
    try {
      assign::TaskPlan plan =
          assign::assign(local_sub, local_pre, a_objects, rstates,
                         input.horizon, cfg.estimate, suff_cache);
      report.assign_wall_s +=
          wall_between(t0, std::chrono::steady_clock::now());
      ++report.assignment_rounds;
      dispatch.clear();
      for (const auto& [lk, a] : plan.by_subtask) {
        DispatchEntry e;
        e.t0 = a.t_start;
        e.id = local_to_global[static_cast<std::size_t>(lk)];
        for (int lr : a.robots)
          e.subgroup.push_back(free[static_cast<std::size_t>(lr)]);
        std::sort(e.subgroup.begin(), e.subgroup.end());
        dispatch.push_back(std::move(e));
      }
      std::sort(dispatch.begin(), dispatch.end(),
                [](const DispatchEntry& a, const DispatchEntry& b) {
                  if (a.t0 != b.t0) return a.t0 < b.t0;
                  return a.id < b.id;
                });
      std::ostringstream msg;
      msg << "round assigned=" << dispatch.size();
      note(msg.str());
      need_round = false;
      defer_round = false;
      last_round_time = state.time;
      completions_since_round = 0;
      failed_after_adaptation = false;
    } catch (const assign::AssignmentFailure& e) {
      report.assign_wall_s +=
          wall_between(t0, std::chrono::steady_clock::now());
      if (free.size() == n_rob) {
        // The whole team is available and still insufficient: permanent.
        fail_note(std::string("assignment: ") + e.what());
        fatal = true;
      } else {
        // A busy subgroup may unlock this later; retry after a change.
        defer_round = true;
      }
    }
  };

  // Plans one subtask with the hybrid search from the current object pose.
  auto plan_subtask = [&](int id,
                          const std::vector<int>& subgroup,
                          int attempt) -> std::optional<HybridPlan> {
    const auto& st = input.subtasks[static_cast<std::size_t>(id)];
    const auto& om = input.world.objects[static_cast<std::size_t>(st.object)];
    Pose cur = state.objects[static_cast<std::size_t>(st.object)].pose;

    std::vector<Pose> segment;
    segment.push_back(cur);
    // Remaining slice anchors: everything past the nearest slice pose.
    double radius = om.poly.bounding_radius();
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < st.slice.size(); ++j) {
      double d = sim::pose_distance(cur, st.slice[j], radius);
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    for (std::size_t j = nearest + 1; j < st.slice.size(); ++j) {
      // Skip wait duplicates; they carry no displacement.
      if (!segment.empty() &&
          sim::pose_distance(segment.back(), st.slice[j], radius) < 1e-9)
        continue;
      segment.push_back(st.slice[j]);
    }
    if (segment.size() < 2) segment.push_back(st.slice.back());

    hybrid::SearchContext ctx;
    ctx.poly = om.poly;
    ctx.intr = om.intr;
    ctx.ls = om.ls;
    for (int r : subgroup)
      ctx.team.push_back(
          input.world.robots[static_cast<std::size_t>(r)]);
    ctx.obstacles = input.world.obstacles;
    ctx.ws_min = input.world.ws_min;
    ctx.ws_max = input.world.ws_max;

    auto cert_key = std::make_pair(st.object, subgroup);
    if (auto it = certificates.find(cert_key); it != certificates.end())
      ctx.sufficiency = it->second;

    hybrid::SearchConfig scfg = cfg.search;
    scfg.seed = cfg.seed + 131u * static_cast<unsigned>(id) +
                17u * static_cast<unsigned>(attempt);
    auto t0 = std::chrono::steady_clock::now();
    hybrid::SearchResult res =
        hybrid::search(segment, ctx, library, &proposer, scfg);
    report.hybrid_wall_s += wall_between(t0, std::chrono::steady_clock::now());
    if (ctx.sufficiency) certificates[cert_key] = *ctx.sufficiency;
    return res.plan;
  };

  auto requeue = [&](int id) {
    need_round = true;
    defer_round = false;
    failed_after_adaptation = true;
    if (attempts[static_cast<std::size_t>(id)] >= cfg.max_attempts) {
      std::ostringstream msg;
      msg << "subtask " << id << " failed after "
          << attempts[static_cast<std::size_t>(id)] << " attempts";
      fail_note(msg.str());
      fatal = true;
    }
  };

  const double control_dt = cfg.sim.dt * cfg.sim.control_every;
  const int max_ticks =
      static_cast<int>(std::ceil(cfg.max_sim_time / control_dt));

  for (int tick = 0; tick < max_ticks; ++tick) {
    if (fatal || done_count == static_cast<int>(n_sub)) break;

    // --- (1) receding-horizon assignment -------------------------------
    assign::ExecutionEvents evt{completions_since_round,
                                state.time - last_round_time,
                                failed_after_adaptation};
    if (report.assignment_rounds > 0 && assign::replan_trigger(evt, cfg.replan))
      need_round = true;
    if (need_round && !defer_round) run_round();
    if (fatal) break;

    // --- (2) activations -------------------------------------------------
    for (std::size_t di = 0; di < dispatch.size();) {
      const DispatchEntry& e = dispatch[di];
      if (done[static_cast<std::size_t>(e.id)] || is_active(e.id)) {
        dispatch.erase(dispatch.begin() + static_cast<long>(di));
        continue;
      }
      bool gated = false;
      for (int p : input.pre[static_cast<std::size_t>(e.id)])
        if (!done[static_cast<std::size_t>(p)]) gated = true;
      for (int r : e.subgroup)
        if (owner[static_cast<std::size_t>(r)] >= 0) gated = true;
      if (gated) {
        ++di;
        continue;
      }

      DispatchEntry entry = e;
      dispatch.erase(dispatch.begin() + static_cast<long>(di));
      int att = ++attempts[static_cast<std::size_t>(entry.id)];
      ++report.outcomes[static_cast<std::size_t>(entry.id)].attempts;

      std::optional<HybridPlan> plan;
      if (att == 1 && initial_plans) {
        auto it = initial_plans->find(entry.id);
        if (it != initial_plans->end()) plan = it->second;
      }
      if (!plan) plan = plan_subtask(entry.id, entry.subgroup, att);
      if (!plan) {
        std::ostringstream msg;
        msg << "hybrid-failed " << entry.id;
        note(msg.str());
        ++report.reassignments;
        requeue(entry.id);
        if (fatal) break;
        continue;
      }

      ActiveSub a;
      a.id = entry.id;
      a.object = input.subtasks[static_cast<std::size_t>(entry.id)].object;
      a.subgroup = entry.subgroup;
      a.stages = plan->stages;
      a.stage = 0;
      if (a.stages.size() >= 2)
        a.planned_arc =
            geom::arc_from_poses(a.stages[0].pose, a.stages[1].pose);
      for (int r : a.subgroup) owner[static_cast<std::size_t>(r)] = a.id;
      std::ostringstream msg;
      msg << "activate " << a.id << " robots=";
      for (std::size_t i = 0; i < a.subgroup.size(); ++i)
        msg << (i ? "," : "") << a.subgroup[i];
      note(msg.str());
      active.push_back(std::move(a));
    }
    if (fatal) break;

    // --- (3) per-subtask control ----------------------------------------
    for (auto& c : commands) c = ControlCommand{};
    std::vector<std::size_t> retired;

    for (std::size_t ai = 0; ai < active.size(); ++ai) {
      ActiveSub& a = active[ai];
      const auto& om =
          input.world.objects[static_cast<std::size_t>(a.object)];
      const double radius = om.poly.bounding_radius();
      Pose cur = state.objects[static_cast<std::size_t>(a.object)].pose;

      // Advance through reached (and degenerate) keyframes.
      bool completed = false;
      while (true) {
        if (a.stage + 1 >= a.stages.size()) {
          completed = true;
          break;
        }
        const Pose& target = a.stages[a.stage + 1].pose;
        bool reached =
            geom::norm(cur.xy() - target.xy()) < cfg.goal_pos_tol &&
            std::abs(geom::angle_diff(cur.psi, target.psi)) <
                cfg.goal_psi_tol;
        if (!reached) break;
        const auto& prev_mode = a.stages[a.stage].mode;
        ++a.stage;
        if (a.stage + 1 < a.stages.size()) {
          a.planned_arc =
              geom::arc_from_poses(cur, a.stages[a.stage + 1].pose);
          a.history.clear();
          const auto& next_mode = a.stages[a.stage].mode;
          if (prev_mode && next_mode && !same_mode(*prev_mode, *next_mode)) {
            ++report.mode_switches;
            std::ostringstream msg;
            msg << "switch " << a.id;
            note(msg.str());
            a.reset_slots(next_mode->contacts.size());
          }
        }
      }

      if (completed) {
        done[static_cast<std::size_t>(a.id)] = 1;
        ++done_count;
        ++completions_since_round;
        auto& oc = report.outcomes[static_cast<std::size_t>(a.id)];
        oc.completed = true;
        oc.t_completed = state.time;
        report.makespan = state.time;
        for (int r : a.subgroup) owner[static_cast<std::size_t>(r)] = -1;
        std::ostringstream msg;
        msg << "complete " << a.id;
        note(msg.str());
        need_round = true;
        defer_round = false;
        retired.push_back(ai);
        continue;
      }

      // Escalation ladder shared by execution failures and plan gaps.
      auto ladder = [&](const char* kind) -> bool {
        std::ostringstream msg;
        msg << kind << " " << a.id;
        note(msg.str());
        if (a.adapt < 2) {
          auto plan = plan_subtask(a.id, a.subgroup,
                                   attempts[static_cast<std::size_t>(a.id)] *
                                           16 +
                                       a.adapt + 1);
          ++report.hybrid_replans;
          ++report.outcomes[static_cast<std::size_t>(a.id)].hybrid_replans;
          if (plan) {
            a.stages = plan->stages;
            a.stage = 0;
            a.history.clear();
            a.pushed_stage = -1;
            a.reset_slots(0);
            if (a.stages.size() >= 2)
              a.planned_arc =
                  geom::arc_from_poses(a.stages[0].pose, a.stages[1].pose);
            ++a.adapt;
            std::ostringstream ok;
            ok << "replan " << a.id << " ok";
            note(ok.str());
            return false;  // keep running with the fresh plan
          }
          std::ostringstream bad;
          bad << "replan " << a.id << " failed";
          note(bad.str());
        }
        // Escalate: hand the subtask back to the assignment layer.
        ++report.reassignments;
        std::ostringstream re;
        re << "reassign " << a.id;
        note(re.str());
        for (int r : a.subgroup) owner[static_cast<std::size_t>(r)] = -1;
        retired.push_back(ai);
        requeue(a.id);
        return true;  // retired
      };

      if (!a.stages[a.stage].mode) {
        // A non-degenerate arc without a mode cannot be executed. Whether
        // the ladder retires the subtask or swaps in a fresh plan, resume
        // control on the next tick (the fresh plan needs its degenerate
        // prefix skipped first).
        ladder("planless");
        continue;
      }
      const PushingMode& mode = *a.stages[a.stage].mode;
      const std::size_t n_c = mode.contacts.size();
      if (a.staged.size() != n_c) a.reset_slots(n_c);

      std::vector<int> slot_robot(n_c);
      std::vector<Vec2> slot_center(n_c);
      std::vector<double> slot_heading(n_c);
      for (std::size_t i = 0; i < n_c; ++i) {
        int world_robot =
            a.subgroup[static_cast<std::size_t>(mode.robots[i]) %
                       a.subgroup.size()];
        slot_robot[i] = world_robot;
        Vec2 c_world = cur.apply(mode.contacts[i].position);
        Vec2 n_in = geom::rotate(mode.contacts[i].normal, cur.psi);
        double r =
            input.world.robots[static_cast<std::size_t>(world_robot)].radius;
        slot_center[i] = c_world - n_in * r;
        slot_heading[i] = std::atan2(n_in.y, n_in.x);
      }

      // The stepper engages a pusher only within slip_threshold of its
      // assigned boundary station, so the pushing controller takes over
      // only once every slot is parked essentially on-station; the looser
      // handoff basin merely switches navigation modes. Hysteresis on the
      // ready flag avoids chattering at the threshold.
      const double ready_on = 0.2 * cfg.sim.slip_threshold;
      const double ready_off = cfg.sim.slip_threshold;
      bool all_staged = true;
      bool all_ready = true;
      for (std::size_t i = 0; i < n_c; ++i) {
        const auto& rst = state.robots[static_cast<std::size_t>(slot_robot[i])];
        double d = geom::norm(rst.pose.xy() - slot_center[i]);
        if (!a.staged[i] && d < cfg.handoff_dist) a.staged[i] = 1;
        if (a.staged[i] && d > 2.0 * cfg.handoff_dist) {
          a.staged[i] = 0;
          a.path[i].clear();
        }
        // Pushing must start from rest on-station for every slot: the
        // executed twist is fitted from actual contact-point velocities, so
        // any residual docking velocity - including rim velocity from a
        // still-turning robot, since the contact sits on the rim - tilts
        // the first fitted direction out of the mode's certified cone and
        // the feasibility gate freezes the object (which in turn clamps
        // the pressing robots and wedges the stage). Docking brakes inside
        // the ready basin to guarantee this.
        double rim = std::abs(rst.omega) *
                     input.world.robots[static_cast<std::size_t>(
                                            slot_robot[i])]
                         .radius;
        double head_err =
            std::abs(geom::angle_diff(slot_heading[i], rst.pose.psi));
        if (!a.ready[i] && d < ready_on && geom::norm(rst.vel) < 0.008 &&
            rim < 0.008 && head_err < 0.1)
          a.ready[i] = 1;
        if (a.ready[i] && d > ready_off) a.ready[i] = 0;
        if (!a.staged[i]) all_staged = false;
        if (!a.ready[i]) all_ready = false;
      }
      // Once armed, the push runs until the stage completes or the failure
      // detector intervenes: the stepper's own engagement handles transient
      // boundary drift (tangential pushers may briefly disengage while the
      // pressing ones creep-start the object).
      if (all_staged && all_ready) a.pushing = true;

      if (a.pushing) {
        // Track the stage-anchored arc; the controller picks the reference
        // by closest progress. Re-anchoring every tick would demand
        // corrective rotations the certified mode need not support.
        if (!a.planned_arc)
          a.planned_arc =
              geom::arc_from_poses(cur, a.stages[a.stage + 1].pose);
        auto per_robot = sim::controller_step(input.world, state, a.object,
                                              *a.planned_arc, mode,
                                              slot_robot, cfg.gains);
        for (auto& [rid, c] : per_robot)
          commands[static_cast<std::size_t>(rid)] = c;
        if (a.pushed_stage != static_cast<int>(a.stage)) {
          a.pushed_stage = static_cast<int>(a.stage);
          ++report.modes_executed;
          std::ostringstream msg;
          msg << "push " << a.id << " stage " << a.stage;
          note(msg.str());
        }
        a.history.push_back({state.time, cur});
        while (!a.history.empty() &&
               a.history.front().t < state.time - cfg.failure.t_c - 1.0)
          a.history.erase(a.history.begin());
        sim::FailureKind fk = sim::detect_failure(a.history, *a.planned_arc,
                                                  cfg.failure, radius);
        if (fk == sim::FailureKind::kStuck) {
          if (ladder("stuck")) continue;
        } else if (fk == sim::FailureKind::kDeviation) {
          if (ladder("deviation")) continue;
        }
      } else {
        // Stage robots: staged members hold and orient; the rest navigate.
        std::vector<Pose> opose;
        for (const auto& os : state.objects) opose.push_back(os.pose);
        for (std::size_t i = 0; i < n_c; ++i) {
          auto r = static_cast<std::size_t>(slot_robot[i]);
          const auto& spec = input.world.robots[r];
          const Pose& rp = state.robots[r].pose;
          ControlCommand& cmd = commands[r];
          if (a.staged[i]) {
            // Dock: converge straight onto the station so the engagement
            // drift starts well inside the stepper's slip tolerance, then
            // brake to rest inside the ready basin (see the ready gate).
            double d = geom::norm(slot_center[i] - rp.xy());
            cmd.v_hat = d < 0.2 * cfg.sim.slip_threshold
                            ? Vec2{0, 0}
                            : clip_norm((slot_center[i] - rp.xy()) *
                                            cfg.gains.k_vel,
                                        spec.v_max);
            cmd.omega_hat = clip_abs(
                cfg.gains.k_rot * geom::angle_diff(slot_heading[i], rp.psi),
                spec.omega_max);
            continue;
          }
          bool stale =
              a.path[i].empty() ||
              state.time - a.path_t[i] > cfg.nav_replan_period ||
              geom::norm(a.path[i].back() - slot_center[i]) > 0.3;
          if (stale) {
            a.path[i] = plan_approach(rp.xy(), slot_center[i], input.world,
                                      opose, spec.radius, cfg);
            if (a.path[i].empty()) a.path[i] = {slot_center[i]};
            a.cursor[i] = 0;
            a.path_t[i] = state.time;
          }
          while (a.cursor[i] + 1 < a.path[i].size() &&
                 geom::norm(rp.xy() - a.path[i][a.cursor[i]]) <
                     0.6 * cfg.nav_lookahead)
            ++a.cursor[i];
          Vec2 target = a.path[i][a.cursor[i]];
          cmd.v_hat = clip_norm((target - rp.xy()) * cfg.gains.k_vel,
                                spec.v_max);
          double want_psi =
              geom::norm(rp.xy() - slot_center[i]) < 2.0 * cfg.handoff_dist ||
                      geom::norm(cmd.v_hat) < 0.05
                  ? slot_heading[i]
                  : std::atan2(cmd.v_hat.y, cmd.v_hat.x);
          cmd.omega_hat = clip_abs(
              cfg.gains.k_rot * geom::angle_diff(want_psi, rp.psi),
              spec.omega_max);
        }
      }
    }

    for (auto it = retired.rbegin(); it != retired.rend(); ++it)
      active.erase(active.begin() + static_cast<long>(*it));
    if (fatal) break;

    // --- (4) reciprocal damping for non-pushing robots -------------------
    for (std::size_t i = 0; i < n_rob; ++i) {
      if (commands[i].push) continue;  // engaged pushers are exempt
      double vi = geom::norm(commands[i].v_hat);
      if (vi < 1e-9) continue;
      for (std::size_t j = 0; j < n_rob; ++j) {
        if (j == i) continue;
        // Docking mates of one subtask coordinate through their stations.
        if (owner[i] >= 0 && owner[i] == owner[j]) continue;
        Vec2 d = state.robots[j].pose.xy() - state.robots[i].pose.xy();
        double dist = geom::norm(d);
        double r_sum = input.world.robots[i].radius +
                       input.world.robots[j].radius;
        double act = 4.0 * r_sum, floor_d = 1.5 * r_sum;
        if (dist >= act || dist < 1e-9) continue;
        Vec2 dhat = d * (1.0 / dist);
        double closing = geom::dot(commands[i].v_hat, dhat);
        if (closing <= 0.0) continue;
        double keep = std::clamp((dist - floor_d) / (act - floor_d), 0.0,
                                 1.0);
        commands[i].v_hat = commands[i].v_hat - dhat * (closing * (1 - keep));
      }
    }

    // --- (5) physics ------------------------------------------------------
    std::set<int> engaged_union;
    std::vector<int> active_ids;
    for (const ActiveSub& a : active) active_ids.push_back(a.id);
    std::sort(active_ids.begin(), active_ids.end());
    for (int s = 0; s < cfg.sim.control_every; ++s) {
      sim::StepResult sr = sim::step(input.world, state, commands, cfg.sim);
      for (int r : sr.engaged_robots) engaged_union.insert(r);
      std::set<std::tuple<int, int, int>> now_touching;
      for (const sim::CollisionEvent& cev : sr.collisions) {
        auto key = std::make_tuple(static_cast<int>(cev.kind), cev.a, cev.b);
        now_touching.insert(key);
        if (!touching.count(key)) {
          ++report.collisions;
          std::ostringstream msg;
          const char* kinds[] = {"object-object", "object-obstacle",
                                 "robot-obstacle"};
          msg << "collision " << kinds[static_cast<int>(cev.kind)] << " "
              << cev.a << " " << cev.b;
          note(msg.str());
        }
      }
      touching = std::move(now_touching);
    }

    // --- (6) trace --------------------------------------------------------
    if (trace) {
      TraceRecord rec;
      rec.time = state.time;
      for (const auto& rs : state.robots) rec.robot_poses.push_back(rs.pose);
      for (const auto& os : state.objects)
        rec.object_poses.push_back(os.pose);
      for (const auto& c : commands) {
        rec.commands_v.push_back(c.v_hat);
        rec.commands_w.push_back(c.omega_hat);
      }
      rec.engaged.assign(engaged_union.begin(), engaged_union.end());
      rec.active_subtasks = active_ids;
      rec.events = std::move(events);
      trace->push_back(std::move(rec));
    }
    events.clear();
  }

  // --- wrap-up -------------------------------------------------------------
  report.success = done_count == static_cast<int>(n_sub) && !fatal;
  if (!report.success && !fatal &&
      done_count < static_cast<int>(n_sub)) {
    std::ostringstream msg;
    msg << "episode wall reached with " << (n_sub - done_count)
        << " subtasks left";
    report.notes.push_back(msg.str());
  }
  if (report.success && report.makespan == 0.0) report.makespan = state.time;
  for (std::size_t o = 0; o < n_obj; ++o) {
    const Pose& p = state.objects[o].pose;
    const Pose& g = input.object_goals[o];
    report.terminal_pos_err.push_back(geom::norm(p.xy() - g.xy()));
    report.terminal_psi_err.push_back(
        std::abs(geom::angle_diff(p.psi, g.psi)));
  }
  return report;
}

}  // namespace copush::exec
