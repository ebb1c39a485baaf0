#include <cstdio>

#include "copush/hybrid.hpp"
#include "copush/mode_search.hpp"
#include "copush/sim_core.hpp"

using namespace copush;
using geom::Pose;
using geom::Vec2;

int main() {
  geom::Polygon poly = geom::make_box_polygon(1.0, 1.0);
  contact::ObjectIntrinsics intr;
  intr.mass = 10.0;
  intr.inertia = 10.0 / 12.0 * 2.0;
  intr.mu_ground = 0.8;
  intr.mu_contact = 0.2;
  auto ls = contact::limit_surface_params(poly, intr);
  std::vector<contact::RobotSpec> team(2);

  hybrid::SearchContext ctx;
  ctx.poly = poly;
  ctx.intr = intr;
  ctx.ls = ls;
  ctx.team = team;
  ctx.ws_min = {-2, -2};
  ctx.ws_max = {10, 6};

  std::vector<Pose> segment;
  for (int i = 0; i <= 8; ++i) segment.push_back({1.0 + 0.25 * i, 1.0, 0.0});
  hybrid::SearchConfig scfg;
  auto res = hybrid::search(segment, ctx, nullptr, nullptr, scfg);
  if (!res.plan) {
    std::printf("no plan\n");
    return 1;
  }
  const auto& plan = *res.plan;
  std::printf("stages=%zu cost=%.3f\n", plan.stages.size(), plan.cost);
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& kf = plan.stages[i];
    std::printf("stage %zu pose=(%.3f,%.3f,%.3f) mode=%s twist=(%.3f,%.3f,%.3f)\n",
                i, kf.pose.x, kf.pose.y, kf.pose.psi,
                kf.mode ? "yes" : "no", kf.mode_twist.vx, kf.mode_twist.vy,
                kf.mode_twist.omega);
    if (kf.mode) {
      for (std::size_t c = 0; c < kf.mode->contacts.size(); ++c) {
        const auto& cp = kf.mode->contacts[c];
        std::printf("  slot %zu robot=%d pos=(%.3f,%.3f) n=(%.3f,%.3f) s=%.3f\n",
                    c, kf.mode->robots[c], cp.position.x, cp.position.y,
                    cp.normal.x, cp.normal.y, cp.boundary_s);
      }
    }
  }

  // Roll out stage 0 -> 1 with the verified driver.
  const auto& kf0 = plan.stages[0];
  std::size_t nxt = 1;
  while (nxt < plan.stages.size() &&
         geom::norm(plan.stages[nxt].pose.xy() - kf0.pose.xy()) < 1e-9 &&
         std::abs(geom::angle_diff(plan.stages[nxt].pose.psi, kf0.pose.psi)) <
             1e-9)
    ++nxt;
  if (!kf0.mode || nxt >= plan.stages.size()) {
    std::printf("degenerate first stage\n");
    return 1;
  }
  geom::ArcMotion arc = geom::arc_from_poses(kf0.pose, plan.stages[nxt].pose);
  auto rr = modes::practical_feasibility(*kf0.mode, poly, intr, team, arc);
  std::printf("rollout success=%d max_dev=%.4f term_err=%.4f\n",
              rr.success ? 1 : 0, rr.max_deviation, rr.terminal_error);

  // Manual stepping with diagnostics for the first second.
  {
    using namespace copush::sim;
    WorldModel model;
    ObjectModel om{poly, intr, ls};
    model.objects.push_back(om);
    const auto& mode = *kf0.mode;
    for (std::size_t i = 0; i < mode.contacts.size(); ++i)
      model.robots.push_back(team[static_cast<std::size_t>(mode.robots[i])]);
    WorldState st;
    st.objects.resize(1);
    st.objects[0].pose = arc.start;
    st.robots.resize(model.robots.size());
    std::vector<int> slot_to_robot;
    for (std::size_t i = 0; i < mode.contacts.size(); ++i) {
      const auto& cp = mode.contacts[i];
      Vec2 c_world = arc.start.apply(cp.position);
      Vec2 n_in = geom::rotate(cp.normal, arc.start.psi);
      Vec2 center = c_world - n_in * model.robots[i].radius;
      st.robots[i].pose = {center.x, center.y, std::atan2(n_in.y, n_in.x)};
      slot_to_robot.push_back(static_cast<int>(i));
    }
    SimParams params;
    Gains gains;
    std::vector<ControlCommand> cmds(model.robots.size());
    for (int steps = 0; steps < 240; ++steps) {
      if (steps % params.control_every == 0) {
        auto per_robot =
            controller_step(model, st, 0, arc, mode, slot_to_robot, gains);
        for (auto& [rid, c] : per_robot)
          cmds[static_cast<std::size_t>(rid)] = c;
      }
      auto sr = step(model, st, cmds, params);
      if (steps % 24 == 0) {
        std::printf(
            "s=%3d obj=(%.4f,%.4f,%.4f) tw=(%.3f,%.3f,%.3f) eng=%zu", steps,
            st.objects[0].pose.x, st.objects[0].pose.y, st.objects[0].pose.psi,
            st.objects[0].twist.vx, st.objects[0].twist.vy,
            st.objects[0].twist.omega, sr.engaged_robots.size());
        for (std::size_t r = 0; r < st.robots.size(); ++r)
          std::printf(" r%zu=(%.3f,%.3f|v %.2f,%.2f|c %.2f,%.2f)", r,
                      st.robots[r].pose.x, st.robots[r].pose.y,
                      st.robots[r].vel.x, st.robots[r].vel.y,
                      cmds[r].v_hat.x, cmds[r].v_hat.y);
        std::printf("\n");
      }
    }
  }
  return 0;
}
