#pragma once

// Closed-loop episode executor: runs a full multi-object pushing episode by
// stitching together assignment rounds, per-subtask hybrid keyframe plans,
// grid-based approach navigation and the quasi-static simulator.
//
// The control loop runs at the simulator's control rate. Subtasks activate
// only when every predecessor has completed and their whole subgroup is
// free; within a subtask, robots first navigate to the staging poses of the
// current pushing mode, then track the live arc to the next keyframe.
// Execution failures (stuck / deviated) first trigger a hybrid replan from
// the current object pose; if that fails or repeats, the subtask is thrown
// back to the assignment layer for a new subgroup. Unrecoverable situations
// end the episode with a failure report, never an exception.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copush/assignment.hpp"
#include "copush/decomposition.hpp"
#include "copush/hybrid.hpp"
#include "copush/sim_core.hpp"

namespace copush::exec {

using geom::Pose;
using geom::Vec2;

/// Everything run_episode needs about one scenario instance. Object and
/// robot counts must match the world model; subtask indices refer to the
/// `subtasks` vector and `pre` holds closure predecessors per subtask.
struct EpisodeInput {
  sim::WorldModel world;
  std::vector<Pose> object_starts;
  std::vector<Pose> object_goals;
  std::vector<Pose> robot_starts;
  std::vector<decomposition::Subtask> subtasks;
  std::vector<std::vector<int>> pre;
  int horizon = 1 << 30;  ///< assignment horizon (subtasks per round)
};

struct EpisodeConfig {
  sim::SimParams sim;
  sim::Gains gains;
  sim::FailurePolicy failure;
  assign::EstimateConfig estimate;
  assign::ReplanPolicy replan;
  hybrid::SearchConfig search;
  double goal_pos_tol = 0.05;      ///< m, keyframe/subtask completion
  double goal_psi_tol = 0.15;      ///< rad
  double handoff_dist = 0.3;       ///< m, approach -> contact tracking
  double nav_cell = 0.1;           ///< m, approach grid resolution
  double nav_margin = 0.02;        ///< m, clearance margin over the radius
  double nav_lookahead = 0.35;     ///< m, waypoint pursuit distance
  double nav_replan_period = 2.0;  ///< s, approach path refresh
  double max_sim_time = 600.0;     ///< s, hard episode wall
  int max_attempts = 4;            ///< activation attempts per subtask
  unsigned seed = 1;
};

/// One control-tick snapshot. Events are id-based strings (no floats) so
/// traces are byte-stable across runs.
struct TraceRecord {
  double time = 0.0;
  std::vector<Pose> robot_poses;
  std::vector<Pose> object_poses;
  std::vector<Vec2> commands_v;      ///< per robot, commanded velocity
  std::vector<double> commands_w;    ///< per robot, commanded yaw rate
  std::vector<int> engaged;          ///< robots that pushed during the tick
  std::vector<int> active_subtasks;  ///< subtasks executing during the tick
  std::vector<std::string> events;   ///< decisions/collisions this tick
};

struct SubtaskOutcome {
  int subtask = -1;
  bool completed = false;
  double t_completed = 0.0;  ///< sim s
  int hybrid_replans = 0;
  int attempts = 0;  ///< activations consumed
};

struct ExecutionReport {
  bool success = false;
  std::vector<double> terminal_pos_err;  ///< per object, vs goal pose
  std::vector<double> terminal_psi_err;
  int modes_executed = 0;  ///< pushing stages entered
  int mode_switches = 0;   ///< stage transitions that changed contacts
  int collisions = 0;      ///< blocking-contact episodes, deduped
  double makespan = 0.0;   ///< sim time at the last completion
  int assignment_rounds = 0;
  int hybrid_replans = 0;
  int reassignments = 0;
  double assign_wall_s = 0.0;  ///< planning wall clock; report only
  double hybrid_wall_s = 0.0;
  std::vector<SubtaskOutcome> outcomes;  ///< index-aligned with subtasks
  std::vector<std::string> notes;        ///< failure diagnostics
};

/// Grid approach path from `from` to `to` that clears static obstacles and
/// all objects (at `object_poses`) by the robot radius plus margin. Both
/// endpoints may lie inside inflated regions (the staging pose hugs the
/// pushed object); the path then connects the nearest free cells and ends
/// exactly at `to`. Empty result = no route.
std::vector<Vec2> plan_approach(const Vec2& from, const Vec2& to,
                                const sim::WorldModel& model,
                                const std::vector<Pose>& object_poses,
                                double robot_radius, const EpisodeConfig& cfg);

/// Runs one episode. `trace` (optional) receives one record per control
/// tick. `initial_plans` (optional) seeds the hybrid plan of a subtask's
/// first activation verbatim -- fault-injection hook and replay aid; later
/// activations always plan fresh. `library` (optional) is used and filled
/// by all hybrid searches, enabling cross-episode reuse.
ExecutionReport run_episode(
    const EpisodeInput& input, const EpisodeConfig& cfg,
    std::vector<TraceRecord>* trace = nullptr,
    const std::map<int, hybrid::HybridPlan>* initial_plans = nullptr,
    hybrid::PlanLibrary* library = nullptr);

}  // namespace copush::exec
