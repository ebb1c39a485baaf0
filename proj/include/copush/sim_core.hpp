#pragma once

// Quasi-static pushing simulator core: world stepping, the contact-tracking
// velocity controller, and execution failure detection.
//
// The physics contract is deliberately quasi-static: objects move only while
// robots push them, with the executed twist taken from a sticking
// least-squares fit of the engaged contact velocities, gated by the same
// force-feasibility LP the planner uses. Robots are second-order disks driven
// by clipped P-control forces. Nothing coasts: if the required friction
// wrench is outside the engaged contacts' cones, the object simply does not
// move (the wrench scales with twist direction only, so scaling the twist
// down cannot restore feasibility).

#include <optional>
#include <vector>

#include "copush/contact.hpp"
#include "copush/geometry.hpp"

namespace copush::sim {

using contact::ContactPoint;
using contact::LimitSurfaceParams;
using contact::ObjectIntrinsics;
using contact::PushingMode;
using contact::RobotSpec;
using geom::ArcMotion;
using geom::Polygon;
using geom::Pose;
using geom::Twist;
using geom::Vec2;

/// Static description of one pushed object.
struct ObjectModel {
  Polygon poly;  ///< body frame, loader re-centers the origin on the centroid
  ObjectIntrinsics intr;
  LimitSurfaceParams ls;
};

/// Immutable world description shared by planner and simulator.
struct WorldModel {
  std::vector<ObjectModel> objects;
  std::vector<RobotSpec> robots;
  std::vector<Polygon> obstacles;  ///< vertices already in world frame
  Vec2 ws_min{0, 0}, ws_max{10, 10};
};

struct RobotState {
  Pose pose;
  Vec2 vel;           ///< world-frame linear velocity
  double omega = 0.0;
};

struct ObjectState {
  Pose pose;
  Twist twist;  ///< body twist executed in the last step (diagnostic)
};

struct WorldState {
  double time = 0.0;
  std::vector<RobotState> robots;
  std::vector<ObjectState> objects;
};

/// Assignment of one robot to one contact of the currently executed mode.
struct PushAssignment {
  int object = -1;        ///< index into WorldModel::objects
  ContactPoint contact;   ///< body frame of that object
};

/// Per-robot command for one control period.
struct ControlCommand {
  Vec2 v_hat;              ///< commanded world velocity (already clipped)
  double omega_hat = 0.0;  ///< commanded yaw rate (already clipped)
  std::optional<PushAssignment> push;  ///< set while executing a mode
};

struct Gains {
  double k_vel = 5.0;      ///< 1/s, position-error to velocity
  double k_rot = 1.0;      ///< 1/s, heading-error to yaw rate
  double lookahead = 0.1;  ///< m, reference offset along the tracked arc
};

/// Fixed simulation constants (documented contract of the stepper).
struct SimParams {
  double dt = 1.0 / 240.0;        ///< physics step
  int control_every = 4;          ///< control at 60 Hz
  double engage_tol = 0.02;       ///< m, surface gap for contact engagement
  double slip_threshold = 0.05;   ///< m, boundary drift before disengaging
  double robot_mass = 5.0;        ///< kg (uniform; robots are small disks)
  double drive_gain = 400.0;      ///< N s/m, velocity-error force gain
  double yaw_gain = 20.0;         ///< N m s, yaw-rate-error torque gain
  double feas_tol = 1e-6;         ///< N, LP loss accepted as zero
};

enum class CollisionKind { kObjectObject, kObjectObstacle, kRobotObstacle };

struct CollisionEvent {
  CollisionKind kind;
  int a = -1;  ///< object or robot index
  int b = -1;  ///< other object / obstacle index
};

struct StepResult {
  /// Blocking contacts present during this step (one entry per touching
  /// pair per step; callers dedupe into transition events for counting).
  std::vector<CollisionEvent> collisions;
  std::vector<int> engaged_robots;  ///< robots pushing this step
};

/// Advance the world by one physics step. Robots integrate second-order
/// dynamics under clipped P-control forces; each object executes the
/// LP-gated sticking twist of its engaged contacts. Object motion that would
/// penetrate an obstacle or another object is blocked (pose reverts) and
/// reported.
StepResult step(const WorldModel& model, WorldState& state,
                const std::vector<ControlCommand>& commands,
                const SimParams& params);

/// Tracking commands for the robots executing `mode` on object `object_idx`
/// along `arc`. `slot_to_robot[i]` is the world robot index for mode slot i.
/// Commands steer each robot's footprint to its contact at a reference pose
/// `gains.lookahead` ahead of the object along the arc, facing the push
/// direction; outputs are clipped to the robot's velocity limits.
std::vector<std::pair<int, ControlCommand>> controller_step(
    const WorldModel& model, const WorldState& state, int object_idx,
    const ArcMotion& arc, const PushingMode& mode,
    const std::vector<int>& slot_to_robot, const Gains& gains);

/// Execution failure tests over a pose history window.
struct FailurePolicy {
  double delta_f = 0.3;    ///< m, max tolerated deviation from the arc
  double t_c = 5.0;        ///< s, observation window
  double r_stuck = 0.02;   ///< m, displacement below which we call it stuck
};

enum class FailureKind { kNone, kDeviation, kStuck };

struct TimedPose {
  double t = 0.0;
  Pose pose;
};

/// DEVIATION if any pose in the trailing window lies >= delta_f from the
/// arc trace; STUCK if the window spans t_c and every pair of poses in it is
/// closer than r_stuck (positions plus bounding-radius-scaled heading).
FailureKind detect_failure(const std::vector<TimedPose>& history,
                           const ArcMotion& arc, const FailurePolicy& policy,
                           double object_radius);

/// Pose metric used by stuck detection and keyframe completion checks:
/// planar distance plus heading difference scaled by the object radius.
double pose_distance(const Pose& a, const Pose& b, double radius);

}  // namespace copush::sim
