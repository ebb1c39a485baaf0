#include "copush/sim_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace copush::sim {

namespace {

Vec2 clip_norm(const Vec2& v, double cap) {
  double n = geom::norm(v);
  if (n <= cap || n < 1e-12) return v;
  return v * (cap / n);
}

double clip_abs(double v, double cap) { return std::clamp(v, -cap, cap); }

// Signed gap between a disk robot and an object boundary: negative means
// penetration. Also reports the closest boundary arc coordinate.
double disk_polygon_gap(const Vec2& center, double radius, const Polygon& poly,
                        const Pose& pose, double* boundary_s = nullptr) {
  Vec2 local = pose.unapply(center);
  double s = poly.closest_boundary_s(local);
  if (boundary_s) *boundary_s = s;
  double d = geom::norm(local - poly.boundary_point(s));
  if (poly.contains(local)) return -d - radius;
  return d - radius;
}

// Minimum gap between a disk and a world-frame polygon (identity pose).
double disk_obstacle_gap(const Vec2& center, double radius,
                         const Polygon& obs) {
  double s = obs.closest_boundary_s(center);
  double d = geom::norm(center - obs.boundary_point(s));
  if (obs.contains(center)) return -d - radius;
  return d - radius;
}

// Wrapped arc-length distance along a closed boundary.
double boundary_wrap_dist(double s1, double s2, double perimeter) {
  double d = std::abs(s1 - s2);
  return std::min(d, perimeter - d);
}

struct Engagement {
  int robot = -1;
  ContactPoint contact;  // body frame
};

// Least-squares sticking twist (about the object's com, world frame) from
// engaged robot contact velocities, with a tiny Tikhonov term so single
// contacts yield the minimum-norm solution deterministically.
void sticking_twist(const std::vector<Vec2>& arms,
                    const std::vector<Vec2>& velocities, Vec2& v_com,
                    double& omega) {
  // Unknowns z = (vx, vy, w). Rows per contact k:
  //   vx - w * arm_y = u_x
  //   vy + w * arm_x = u_y
  double a[3][3] = {{1e-9, 0, 0}, {0, 1e-9, 0}, {0, 0, 1e-9}};
  double b[3] = {0, 0, 0};
  for (std::size_t k = 0; k < arms.size(); ++k) {
    const Vec2& r = arms[k];
    const Vec2& u = velocities[k];
    // Row 1: [1, 0, -ry]
    a[0][0] += 1.0;
    a[0][2] += -r.y;
    a[2][0] += -r.y;
    a[2][2] += r.y * r.y;
    b[0] += u.x;
    b[2] += -r.y * u.x;
    // Row 2: [0, 1, rx]
    a[1][1] += 1.0;
    a[1][2] += r.x;
    a[2][1] += r.x;
    a[2][2] += r.x * r.x;
    b[1] += u.y;
    b[2] += r.x * u.y;
  }
  // Solve the 3x3 system by Gaussian elimination with partial pivoting.
  std::array<std::array<double, 4>, 3> m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = a[i][j];
    m[i][3] = b[i];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col || std::abs(m[col][col]) < 1e-30) continue;
      double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  double z[3];
  for (int i = 0; i < 3; ++i)
    z[i] = std::abs(m[i][i]) > 1e-30 ? m[i][3] / m[i][i] : 0.0;
  v_com = {z[0], z[1]};
  omega = z[2];
}

}  // namespace

double pose_distance(const Pose& a, const Pose& b, double radius) {
  return geom::norm(a.xy() - b.xy()) +
         radius * std::abs(geom::angle_diff(a.psi, b.psi));
}

StepResult step(const WorldModel& model, WorldState& state,
                const std::vector<ControlCommand>& commands,
                const SimParams& params) {
  StepResult result;
  const double dt = params.dt;
  const std::size_t nr = model.robots.size();
  const std::size_t no = model.objects.size();

  // --- Robot drive dynamics (tentative velocities) ---------------------
  for (std::size_t r = 0; r < nr; ++r) {
    const RobotSpec& spec = model.robots[r];
    RobotState& rs = state.robots[r];
    const ControlCommand& cmd = commands[r];

    Vec2 f = (cmd.v_hat - rs.vel) * params.drive_gain;
    f = clip_norm(f, spec.f_max_robot);
    rs.vel += f * (dt / params.robot_mass);
    rs.vel = clip_norm(rs.vel, spec.v_max);

    double inertia = std::max(0.1, 0.5 * params.robot_mass * spec.radius * spec.radius);
    double tau = params.yaw_gain * (cmd.omega_hat - rs.omega);
    tau = clip_abs(tau, spec.f_max_robot * std::max(spec.radius, 0.05));
    rs.omega += tau * (dt / inertia);
    rs.omega = clip_abs(rs.omega, spec.omega_max);
  }

  // --- Contact engagement ----------------------------------------------
  // A robot is engaged when its disk touches the object surface within
  // engage_tol of the gap and within slip_threshold of its assigned contact
  // along the boundary.
  std::vector<std::vector<Engagement>> engaged(no);
  for (std::size_t r = 0; r < nr; ++r) {
    const ControlCommand& cmd = commands[r];
    if (!cmd.push) continue;
    int oi = cmd.push->object;
    if (oi < 0 || static_cast<std::size_t>(oi) >= no) continue;
    const ObjectModel& om = model.objects[static_cast<std::size_t>(oi)];
    const Pose& opose = state.objects[static_cast<std::size_t>(oi)].pose;

    double s_actual = 0.0;
    double gap = disk_polygon_gap(state.robots[r].pose.xy(),
                                  model.robots[r].radius, om.poly, opose,
                                  &s_actual);
    double drift = boundary_wrap_dist(s_actual, cmd.push->contact.boundary_s,
                                      om.poly.perimeter());
    if (std::abs(gap) <= params.engage_tol && drift <= params.slip_threshold) {
      engaged[static_cast<std::size_t>(oi)].push_back(
          {static_cast<int>(r), cmd.push->contact});
      result.engaged_robots.push_back(static_cast<int>(r));
    }
  }

  // --- Quasi-static object twists --------------------------------------
  std::vector<Pose> new_poses(no);
  for (std::size_t o = 0; o < no; ++o) {
    const ObjectModel& om = model.objects[o];
    ObjectState& os = state.objects[o];
    new_poses[o] = os.pose;
    os.twist = {0, 0, 0};
    if (engaged[o].empty()) continue;

    const Vec2 com_world = os.pose.apply(om.poly.centroid());
    std::vector<Vec2> arms, vels;
    for (const Engagement& e : engaged[o]) {
      Vec2 c_world = os.pose.apply(e.contact.position);
      const RobotState& rs = state.robots[static_cast<std::size_t>(e.robot)];
      // Rigid velocity of the robot's material point at the contact.
      Vec2 u = rs.vel + rs.omega * geom::perp(c_world - rs.pose.xy());
      arms.push_back(c_world - com_world);
      vels.push_back(u);
    }
    Vec2 v_com_world;
    double omega;
    sticking_twist(arms, vels, v_com_world, omega);

    // Convert to a body twist about the com for the feasibility gate.
    Vec2 v_body = geom::rotate(v_com_world, -os.pose.psi);
    Twist p_com{v_body.x, v_body.y, omega};
    if (geom::twist_norm(p_com) < 1e-9) continue;
    if (geom::norm(v_body) * dt < 1e-12 && std::abs(omega) * dt < 1e-12)
      continue;

    // Gate: the wrench needed to sustain the twist must be achievable by
    // the engaged cones. The friction wrench depends only on the twist
    // direction, so an infeasible direction cannot be rescued by scaling
    // the magnitude down - the gate is pass/fail.
    PushingMode gate_mode;
    std::vector<RobotSpec> gate_team;
    for (const Engagement& e : engaged[o]) {
      gate_mode.robots.push_back(static_cast<int>(gate_team.size()));
      gate_mode.contacts.push_back(e.contact);
      gate_team.push_back(model.robots[static_cast<std::size_t>(e.robot)]);
    }
    auto feas = contact::force_feasibility_loss(gate_mode, p_com, om.ls,
                                                om.poly.centroid(), gate_team);
    if (feas.loss > params.feas_tol) continue;

    // Integrate the pose. The stored pose tracks the body origin; convert
    // the com twist to an origin twist (they differ when the body origin is
    // not the centroid).
    Vec2 r_co = -om.poly.centroid();  // com -> origin, body frame
    Vec2 v_origin_body = v_body + omega * geom::perp(r_co);
    Twist p_origin{v_origin_body.x, v_origin_body.y, omega};
    Pose cand = geom::integrate_twist(os.pose, p_origin, dt);

    // Blocking: object-obstacle and object-object penetrations revert the
    // motion (the obstruction supplies the reaction in a quasi-static
    // world) and are reported as collision events.
    bool blocked = false;
    for (std::size_t b = 0; b < model.obstacles.size() && !blocked; ++b) {
      if (geom::collide(om.poly, cand, model.obstacles[b], Pose{0, 0, 0})) {
        result.collisions.push_back(
            {CollisionKind::kObjectObstacle, static_cast<int>(o),
             static_cast<int>(b)});
        blocked = true;
      }
    }
    for (std::size_t o2 = 0; o2 < no && !blocked; ++o2) {
      if (o2 == o) continue;
      const Pose& other = (o2 < o) ? new_poses[o2] : state.objects[o2].pose;
      if (geom::collide(om.poly, cand, model.objects[o2].poly, other)) {
        result.collisions.push_back({CollisionKind::kObjectObject,
                                     static_cast<int>(o),
                                     static_cast<int>(o2)});
        blocked = true;
      }
    }
    if (blocked) continue;

    new_poses[o] = cand;
    os.twist = p_origin;
  }

  // --- Integrate robot poses with the contact constraint ---------------
  for (std::size_t r = 0; r < nr; ++r) {
    RobotState& rs = state.robots[r];
    const ControlCommand& cmd = commands[r];

    // Engaged robots may not move into the object faster than the surface
    // retreats: clamp the approach component of the velocity.
    if (cmd.push && cmd.push->object >= 0) {
      std::size_t oi = static_cast<std::size_t>(cmd.push->object);
      const ObjectModel& om = model.objects[oi];
      const Pose& opose = state.objects[oi].pose;
      double gap = disk_polygon_gap(rs.pose.xy(), model.robots[r].radius,
                                    om.poly, opose);
      if (gap <= params.engage_tol) {
        Vec2 c_world = opose.apply(cmd.push->contact.position);
        // Outward surface normal at the assigned contact.
        Vec2 n_out = -geom::rotate(cmd.push->contact.normal, opose.psi);
        // Surface point velocity under the executed object twist.
        const Twist& pt = state.objects[oi].twist;
        Vec2 com_world = opose.apply(om.poly.centroid());
        Vec2 v_surf =
            geom::rotate(pt.linear(), opose.psi) +
            pt.omega * geom::perp(c_world - com_world);
        // The robot may close the remaining gap within this step but not
        // penetrate: relative approach speed <= (gap + slack) / dt.
        double approach = geom::dot(rs.vel - v_surf, -n_out);
        double allowed = std::max(0.0, (gap + 1e-4) / params.dt);
        if (approach > allowed) {
          rs.vel += (approach - allowed) * n_out;
        }
      }
    }

    Vec2 cand = rs.pose.xy() + rs.vel * dt;

    // Robots never tunnel through obstacles; push the center out along the
    // closest boundary normal and report the contact.
    for (std::size_t b = 0; b < model.obstacles.size(); ++b) {
      double gap = disk_obstacle_gap(cand, model.robots[r].radius,
                                     model.obstacles[b]);
      if (gap < 0.0) {
        const Polygon& obs = model.obstacles[b];
        double s = obs.closest_boundary_s(cand);
        Vec2 q = obs.boundary_point(s);
        Vec2 out = obs.contains(cand) ? -obs.inward_normal(s)
                                      : geom::normalized(cand - q);
        cand += out * (-gap + 1e-6);
        if (gap < -1e-3)
          result.collisions.push_back({CollisionKind::kRobotObstacle,
                                       static_cast<int>(r),
                                       static_cast<int>(b)});
      }
    }
    // Nor through objects (non-assigned ones included): positional
    // projection only, no force coupling - navigation keeps clearance.
    for (std::size_t o = 0; o < no; ++o) {
      double gap = disk_polygon_gap(cand, model.robots[r].radius,
                                    model.objects[o].poly, new_poses[o]);
      if (gap < -1e-4) {
        Vec2 local = new_poses[o].unapply(cand);
        double s = model.objects[o].poly.closest_boundary_s(local);
        Vec2 q = new_poses[o].apply(model.objects[o].poly.boundary_point(s));
        Vec2 out;
        if (model.objects[o].poly.contains(local)) {
          out = -geom::rotate(model.objects[o].poly.inward_normal(s),
                              new_poses[o].psi);
        } else {
          out = geom::normalized(cand - q);
        }
        cand += out * (-gap + 1e-6);
      }
    }

    rs.pose.x = cand.x;
    rs.pose.y = cand.y;
    rs.pose.psi = geom::wrap_angle(rs.pose.psi + rs.omega * dt);
  }

  for (std::size_t o = 0; o < no; ++o) state.objects[o].pose = new_poses[o];
  state.time += dt;
  return result;
}

std::vector<std::pair<int, ControlCommand>> controller_step(
    const WorldModel& model, const WorldState& state, int object_idx,
    const ArcMotion& arc, const PushingMode& mode,
    const std::vector<int>& slot_to_robot, const Gains& gains) {
  const ObjectModel& om = model.objects[static_cast<std::size_t>(object_idx)];
  const Pose& opose = state.objects[static_cast<std::size_t>(object_idx)].pose;
  const double radius = om.poly.bounding_radius();

  // Reference: first arc state past the object's current progress that is
  // farther than the lookahead; the arc end if the remainder is shorter.
  // Sampled at fixed resolution for determinism.
  constexpr int kSamples = 256;
  int progress = 0;
  double best = 1e100;
  for (int k = 0; k <= kSamples; ++k) {
    double d = pose_distance(arc.at(arc.duration * k / kSamples), opose, radius);
    if (d < best) {
      best = d;
      progress = k;
    }
  }
  Pose ref = arc.end;
  for (int k = progress; k <= kSamples; ++k) {
    Pose s = arc.at(arc.duration * k / kSamples);
    if (pose_distance(s, opose, radius) > gains.lookahead) {
      ref = s;
      break;
    }
  }

  std::vector<std::pair<int, ControlCommand>> out;
  for (std::size_t slot = 0; slot < mode.contacts.size(); ++slot) {
    int robot = slot_to_robot[slot];
    const RobotSpec& spec = model.robots[static_cast<std::size_t>(robot)];
    const RobotState& rs = state.robots[static_cast<std::size_t>(robot)];
    const ContactPoint& cp = mode.contacts[slot];

    // Desired contact position at the reference pose, mapped to the robot
    // center through the outward normal.
    Vec2 c_hat = ref.apply(cp.position);
    Vec2 n_in_world = geom::rotate(cp.normal, ref.psi);
    Vec2 center_hat = c_hat - n_in_world * spec.radius;

    ControlCommand cmd;
    cmd.v_hat = clip_norm((center_hat - rs.pose.xy()) * gains.k_vel,
                          spec.v_max);
    double psi_hat = std::atan2(n_in_world.y, n_in_world.x);
    cmd.omega_hat = clip_abs(
        gains.k_rot * geom::angle_diff(psi_hat, rs.pose.psi), spec.omega_max);
    cmd.push = PushAssignment{object_idx, cp};
    out.emplace_back(robot, cmd);
  }
  return out;
}

FailureKind detect_failure(const std::vector<TimedPose>& history,
                           const ArcMotion& arc, const FailurePolicy& policy,
                           double object_radius) {
  if (history.empty()) return FailureKind::kNone;
  const double now = history.back().t;
  std::size_t begin = history.size();
  while (begin > 0 && history[begin - 1].t >= now - policy.t_c) --begin;

  // DEVIATION: any pose in the window strays delta_f or more from the arc.
  for (std::size_t i = begin; i < history.size(); ++i) {
    if (geom::dist_point_to_arc(history[i].pose.xy(), arc) >= policy.delta_f)
      return FailureKind::kDeviation;
  }

  // STUCK: only meaningful once the window spans the full horizon. The
  // pairwise check is strided to at most 64 samples; a trajectory that
  // wiggles less than r_stuck between strides is stuck for all purposes.
  if (begin > 0 || (history.back().t - history.front().t) >= policy.t_c) {
    std::size_t count = history.size() - begin;
    std::size_t stride = std::max<std::size_t>(1, count / 64);
    double max_d = 0.0;
    for (std::size_t i = begin; i < history.size(); i += stride)
      for (std::size_t j = i + stride; j < history.size(); j += stride)
        max_d = std::max(max_d, pose_distance(history[i].pose,
                                              history[j].pose, object_radius));
    max_d = std::max(max_d, pose_distance(history[begin].pose,
                                          history.back().pose, object_radius));
    if (max_d < policy.r_stuck) return FailureKind::kStuck;
  }
  return FailureKind::kNone;
}

}  // namespace copush::sim
