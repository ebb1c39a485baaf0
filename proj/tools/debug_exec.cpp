#include <cstdio>

#include "copush/executor.hpp"

using namespace copush;
using geom::Pose;
using geom::Vec2;

int main() {
  exec::EpisodeInput in;
  sim::ObjectModel om;
  om.poly = geom::make_box_polygon(1.0, 1.0);
  om.intr.mass = 10.0;
  om.intr.inertia = 10.0 / 12.0 * 2.0;
  om.intr.mu_ground = 0.8;
  om.intr.mu_contact = 0.2;
  om.ls = contact::limit_surface_params(om.poly, om.intr);
  in.world.objects.push_back(om);
  in.world.robots.assign(2, contact::RobotSpec{});
  in.world.ws_min = {-2, -2};
  in.world.ws_max = {10, 6};
  in.object_starts = {{1, 1, 0}};
  in.object_goals = {{3, 1, 0}};
  in.robot_starts = {{0.5, -0.5, 0}, {1.5, -0.5, 0}};
  decomposition::Subtask st;
  st.object = 0;
  st.index = 0;
  st.t_start = 0;
  st.t_end = 8;
  for (int i = 0; i <= 8; ++i)
    st.slice.push_back({1.0 + 0.25 * i, 1.0, 0.0});
  in.subtasks = {st};
  in.pre = {{}};

  exec::EpisodeConfig cfg;
  cfg.seed = 7;
  std::vector<exec::TraceRecord> trace;
  auto report = exec::run_episode(in, cfg, &trace);
  std::printf("success=%d makespan=%.3f modes=%d switches=%d coll=%d rounds=%d replans=%d reass=%d\n",
              report.success ? 1 : 0, report.makespan, report.modes_executed,
              report.mode_switches, report.collisions,
              report.assignment_rounds, report.hybrid_replans,
              report.reassignments);
  std::printf("pos_err=%.4f psi_err=%.4f\n", report.terminal_pos_err[0],
              report.terminal_psi_err[0]);
  for (const auto& n : report.notes) std::printf("note: %s\n", n.c_str());
  int shown = 0;
  for (const auto& r : trace) {
    for (const auto& e : r.events) {
      std::printf("t=%.3f ev: %s\n", r.time, e.c_str());
      if (++shown > 60) break;
    }
    if (shown > 60) break;
  }
  if (!trace.empty()) {
    const auto& last = trace.back();
    std::printf("end t=%.3f obj=(%.3f,%.3f,%.3f)\n", last.time,
                last.object_poses[0].x, last.object_poses[0].y,
                last.object_poses[0].psi);
    for (std::size_t r = 0; r < last.robot_poses.size(); ++r)
      std::printf("  rob%zu=(%.3f,%.3f,%.3f)\n", r, last.robot_poses[r].x,
                  last.robot_poses[r].y, last.robot_poses[r].psi);
  }
  // Fine-grained motion log: one line per 0.25 s.
  double next_t = 0.0;
  for (const auto& r : trace) {
    if (r.time < next_t) continue;
    next_t = r.time + 0.25;
    std::printf(
        "t=%6.2f obj=(%7.4f,%7.4f,%7.4f) eng=%zu r0=(%6.3f,%6.3f) "
        "v0=(%5.2f,%5.2f) r1=(%6.3f,%6.3f) v1=(%5.2f,%5.2f)\n",
        r.time, r.object_poses[0].x, r.object_poses[0].y,
        r.object_poses[0].psi, r.engaged.size(), r.robot_poses[0].x,
        r.robot_poses[0].y, r.commands_v[0].x, r.commands_v[0].y,
        r.robot_poses[1].x, r.robot_poses[1].y, r.commands_v[1].x,
        r.commands_v[1].y);
    if (r.time > 12.0) break;
  }
  return 0;
}
