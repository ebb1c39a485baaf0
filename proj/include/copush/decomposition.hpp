#pragma once

// Splits timed object paths into subtasks and orders them.
//
// Two objects whose paths sweep overlapping regions cannot be pushed
// through the overlap in arbitrary order: the path slices are cut at the
// first time instants where one object's footprint enters the other's
// remaining swept region, and the resulting subtasks are ordered so the
// earlier visitor goes first. Executing subtasks in any schedule that
// respects the order is then collision-free regardless of how long each
// push actually takes.

#include <vector>

#include "copush/geometry.hpp"
#include "copush/mapf.hpp"

namespace copush::decomposition {

using geom::Polygon;
using geom::Pose;

/// One path slice of one object. Slices of an object partition its timed
/// path: the end step of slice k is the start step of slice k+1.
struct Subtask {
  int object = -1;  ///< index into the paths/polygons arrays
  int index = 0;    ///< k, position within the object's slice sequence
  int t_start = 0;  ///< first step (inclusive)
  int t_end = 0;    ///< last step (inclusive), > t_start
  std::vector<Pose> slice;  ///< poses at steps t_start..t_end
};

/// Strict partial order over subtasks (indices into the subtask list).
struct PartialOrder {
  int count = 0;
  /// Edges from the ordering rules: same-object sequence plus cross-object
  /// first-collision comparisons (a precedes b).
  std::vector<std::pair<int, int>> direct;
  /// Transitive closure; closure[a][b] means a must finish before b starts.
  std::vector<std::vector<bool>> closure;
  /// Minimal edge set with the same closure (for reports/DOT export).
  std::vector<std::pair<int, int>> reduced;
  /// pre[b] lists every a with closure[a][b], ascending.
  std::vector<std::vector<int>> pre;
};

struct Decomposition {
  std::vector<Subtask> subtasks;
  PartialOrder order;
};

/// Implements the iterative segmentation: per object, track the largest
/// split step t*, find the next split as the smallest first-collision time
/// t^c (against any other object's remaining swept region) that exceeds the
/// other object's own first-collision time, cut there, and repeat until
/// every path is consumed. Ordering edges then compare first-collision
/// times between final segments; the closure must be acyclic (throws
/// std::logic_error otherwise — indicates a collision-time bug upstream).
/// polys[i] is the body-frame footprint for paths[i]; paths must be padded
/// to a common horizon and pairwise step-collision-free.
Decomposition segment_and_order(const std::vector<mapf::TimedPath>& paths,
                                const std::vector<Polygon>& polys);

}  // namespace copush::decomposition
