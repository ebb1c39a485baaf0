#pragma once

// Receding-horizon assignment of subtasks to robot subgroups.
//
// Subtasks (timed path slices from the decomposition) are assigned one at
// a time by best-first node expansion: a node fixes subgroups, start and
// end estimates for a prefix of the partial order; expanding it assigns
// one more frontier subtask (all predecessors already assigned) to the
// nearest-available subgroup of each size up to the cap. At most H
// subtasks are assigned per planning round; the most time-efficient
// complete node (assigned sweep length per unit makespan) wins. Estimates
// come from the quasi-static push model: path length over push speed, plus
// estimated mode switches, plus robot travel to the segment start.

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "copush/contact.hpp"
#include "copush/decomposition.hpp"
#include "copush/geometry.hpp"

namespace copush::assign {

using contact::ObjectIntrinsics;
using contact::RobotSpec;
using geom::Polygon;
using geom::Pose;
using geom::Vec2;

/// Footprint and intrinsics of one pushable object, indexed by object id.
struct ObjectModel {
  Polygon poly;
  ObjectIntrinsics intr;
};

/// A robot available for assignment: where it is and what it can do.
struct RobotState {
  Vec2 position;
  RobotSpec spec;
};

struct EstimateConfig {
  double push_speed = 0.5;        ///< m/s, nominal object speed
  double mean_switch_time = 4.0;  ///< s per estimated mode switch
  int n_cap = 4;                  ///< max robots per subtask
  int node_budget = 20000;        ///< max assignment-node expansions
};

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

struct Estimate {
  bool feasible = false;
  double duration = kInfeasible;  ///< s; infinity when infeasible
};

/// Memoized mode-sufficiency verdicts keyed by object signature and the
/// subgroup's capability multiset. Verdicts skip rollout verification (the
/// hybrid layer verifies for real); they gate assignment feasibility only.
class SufficiencyCache {
 public:
  bool sufficient(const ObjectModel& obj, const std::vector<RobotSpec>& specs);

 private:
  std::map<std::pair<std::uint64_t, std::uint64_t>, bool> verdicts_;
};

/// Sweep length of a slice: positional step lengths plus the boundary
/// sweep of heading changes at `radius` (so rotation-only slices still
/// take time to push).
double slice_path_length(const std::vector<Pose>& slice, double radius = 0.0);

/// Estimated number of mode switches: direction-class changes between
/// consecutive moving steps (8 translation sectors x rotation sign, plus
/// pure-rotation classes). Waits are skipped.
int switch_estimate(const std::vector<Pose>& slice);

/// Feasibility and duration estimate for one subgroup pushing one subtask:
/// sufficiency from the cache; duration = sweep length / push_speed +
/// switch estimate * mean switch time + the slowest robot's travel to the
/// slice start.
Estimate estimate_completion(const decomposition::Subtask& st,
                             const std::vector<int>& subgroup,
                             const std::vector<RobotState>& robots,
                             const ObjectModel& obj, const EstimateConfig& cfg,
                             SufficiencyCache& cache);

/// One subtask's assignment: subgroup (world robot ids, ascending) and the
/// estimated execution window. Travel to the slice start happens inside
/// the window.
struct Assigned {
  std::vector<int> robots;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct TaskPlan {
  std::map<int, Assigned> by_subtask;  ///< subtask id -> assignment
  /// Per robot: (start estimate, subtask id), sorted by start time.
  std::vector<std::vector<std::pair<double, int>>> robot_timelines;
  double makespan = 0.0;    ///< max end estimate over assigned subtasks
  double efficiency = 0.0;  ///< assigned sweep length / makespan
};

struct AssignmentFailure : std::runtime_error {
  AssignmentFailure(int subtask_, const std::string& what)
      : std::runtime_error(what), subtask(subtask_) {}
  int subtask;
};

/// Assigns min(horizon, |subtasks|) subtasks to subgroups. `pre[k]` lists
/// the closure predecessors of subtask k within `subtasks` (indices align;
/// callers pass only pending subtasks with pre filtered accordingly).
/// Throws AssignmentFailure naming the first frontier subtask that no
/// candidate subgroup can push.
TaskPlan assign(const std::vector<decomposition::Subtask>& subtasks,
                const std::vector<std::vector<int>>& pre,
                const std::vector<ObjectModel>& objects,
                const std::vector<RobotState>& robots, int horizon,
                const EstimateConfig& cfg, SufficiencyCache& cache);

/// Independent validity check of a plan: (I) predecessors finish before
/// successors start, (II) every assigned subgroup is mode-sufficient,
/// (III) per-robot windows are disjoint and long enough to cover the travel
/// to each slice start. Returns human-readable violations; empty = valid.
std::vector<std::string> validate_plan(
    const TaskPlan& plan, const std::vector<decomposition::Subtask>& subtasks,
    const std::vector<std::vector<int>>& pre,
    const std::vector<ObjectModel>& objects,
    const std::vector<RobotState>& robots, const EstimateConfig& cfg,
    SufficiencyCache& cache);

struct ReplanPolicy {
  int completions = 2;    ///< replan after this many completions
  double period = 80.0;   ///< ... or this much simulated time
};

struct ExecutionEvents {
  int completed_since_plan = 0;
  double elapsed_since_plan = 0.0;
  /// A subtask failed even after the hybrid layer replanned it.
  bool failed_after_adaptation = false;
};

bool replan_trigger(const ExecutionEvents& events, const ReplanPolicy& policy);

}  // namespace copush::assign
