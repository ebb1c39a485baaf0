#pragma once

// Multi-object path finding on an SE(2) lattice. Objects are planned
// sequentially in ascending order of their single-object shortest path;
// each later object runs space-time A* against the reservations of all
// earlier paths (poses per step, parked at the goal after arrival). Waiting
// is a lattice motion, so temporal separation falls out of the search.
//
// Footprints are inflated by (1 + eps_r) * robot diameter so that the
// pushing robots always fit between an object and whatever it passes.

#include <stdexcept>
#include <vector>

#include "copush/geometry.hpp"

namespace copush::mapf {

using geom::Polygon;
using geom::Pose;
using geom::Vec2;

/// Discretization of SE(2): xy cells of `resolution` meters and
/// `heading_bins` evenly spaced headings. Motions are 8-connected
/// translation, rotation by one bin, and waiting.
struct Lattice {
  double resolution = 0.25;  ///< m per cell
  int heading_bins = 16;
};

struct PathStep {
  int t = 0;  ///< step index (uniform steps)
  Pose pose;
};

/// Timed lattice path of one object. Steps are consecutive (t = 0..L) and
/// each consecutive pose pair is one lattice motion.
struct TimedPath {
  int object = -1;
  std::vector<PathStep> steps;
};

/// One object instance to plan for.
struct PlanObject {
  Polygon poly;  ///< body frame footprint
  Pose start;
  Pose goal;
};

struct PlanConfig {
  Lattice lattice;
  double eps_r = 0.1;           ///< inflation margin factor
  double robot_diameter = 0.3;  ///< largest pushing robot diameter, m
  int horizon = 0;              ///< max steps; 0 picks one from path lengths
  Vec2 ws_min{0, 0};
  Vec2 ws_max{10, 10};
  /// Planning clearance added around each footprint.
  double inflation() const { return (1.0 + eps_r) * robot_diameter; }
};

/// Planning failed for one object (no path within the horizon, or its
/// start/goal is blocked).
struct PlanFailure : std::runtime_error {
  PlanFailure(int object_, const std::string& what)
      : std::runtime_error(what), object(object_) {}
  int object;
};

/// Steps of the single-object shortest lattice path from start to goal,
/// ignoring all other objects. Throws PlanFailure if unreachable.
int shortest_len(const PlanObject& obj, const std::vector<Polygon>& obstacles,
                 const PlanConfig& cfg, int object_id = -1);

/// Collision-free timed paths for all objects, one per input, padded with
/// waits to the common horizon. Output order matches the input order.
/// Throws PlanFailure naming the first object that cannot be planned.
std::vector<TimedPath> plan_all(const std::vector<PlanObject>& objects,
                                const std::vector<Polygon>& obstacles,
                                const PlanConfig& cfg);

/// World-frame convex loops of an object's inflated planning footprint at a
/// pose (exposed for tests and the segment-ordering checks).
std::vector<std::vector<Vec2>> inflated_loops(const Polygon& poly,
                                              double inflation,
                                              const Pose& pose);

}  // namespace copush::mapf
