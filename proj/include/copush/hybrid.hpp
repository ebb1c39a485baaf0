#pragma once

// Keyframe-guided hybrid search.
//
// A path segment is pushed as a sequence of constant-twist arcs, each
// executed under a single pushing mode; a keyframe is an object pose where
// the mode may switch. Search starts from the two-keyframe plan
// (start, unassigned)(goal, unassigned) and repeatedly expands the
// cheapest open plan at its first unassigned stage: colliding arcs gain an
// intermediate keyframe from the segment's timed path, collision-free arcs
// get a mode from the plan library, the proposer, direct mode generation,
// or iterative keyframe sampling, and arcs that resist everything are
// bisected until short enough to approximate by chaining pre-validated
// primitive twists. The first complete plan that passes a full closed-loop
// rollout wins and is stored in the library for reuse.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copush/contact.hpp"
#include "copush/geometry.hpp"
#include "copush/mode_search.hpp"

namespace copush::hybrid {

using contact::LimitSurfaceParams;
using contact::ObjectIntrinsics;
using contact::PushingMode;
using contact::RobotSpec;
using geom::ArcMotion;
using geom::Polygon;
using geom::Pose;
using geom::Twist;
using geom::Vec2;

/// Pose of `to` expressed in `from`'s body frame. Invariant under rigid
/// in-plane transforms applied to both poses, which is what makes plans
/// reusable across displacements: compose_pose(from, relative_pose(from,
/// to)) == to.
Pose relative_pose(const Pose& from, const Pose& to);
Pose compose_pose(const Pose& base, const Pose& rel);

/// One stage boundary. The mode, when assigned, covers the arc leaving
/// this keyframe toward the next one; `mode_twist` is the body twist the
/// mode was certified for (meaningful only when `mode` is set).
struct Keyframe {
  Pose pose;
  std::optional<PushingMode> mode;
  Twist mode_twist;
};

/// Ordered keyframes spanning one segment: stages.front() is the segment
/// start, stages.back() the goal. Complete iff every keyframe with a
/// non-degenerate outgoing arc has a mode.
struct HybridPlan {
  std::vector<Keyframe> stages;
  double cost = 0.0;
};

bool plan_complete(const HybridPlan& plan);

struct SearchConfig {
  double w_s = 1.0;          ///< switching-cost weight
  double w_n = 1.0;          ///< navigation-cost weight
  double epsilon = 0.3;      ///< short-arc threshold for primitive chaining, m
  int h_max = 4;             ///< max sub-segments tried by iterative sampling
  int iter_rounds = 4;       ///< perturbation rounds per sampling depth
  double sigma0_frac = 0.1;  ///< initial perturbation, fraction of arc length
  int node_cap = 500;        ///< max expansions before the failure signal
  double push_speed = 0.5;   ///< nominal object speed for navigation cost, m/s
  int mode_budget = 6;       ///< multi-start budget per mode generation
  double feas_tol = 1e-6;    ///< LP loss accepted as zero
  unsigned seed = 1;
};

/// Object, team and world the search plans against. `anchors` holds the
/// segment's timed-path poses (collision-free by construction); they seed
/// keyframe insertion when a direct arc hits an obstacle. `sufficiency`
/// caches the primitive-twist certificate across searches for the same
/// object/team; search fills it on first need.
struct SearchContext {
  Polygon poly;
  ObjectIntrinsics intr;
  LimitSurfaceParams ls;
  std::vector<RobotSpec> team;
  std::vector<Polygon> obstacles;  ///< world frame
  Vec2 ws_min{-1e9, -1e9};
  Vec2 ws_max{1e9, 1e9};
  std::vector<Pose> anchors;
  std::optional<contact::SufficiencyResult> sufficiency;
};

/// Estimated plan cost: per stage, the multi-directional feasibility loss
/// of its mode for the stage arc (0 while unassigned), plus the weighted
/// mode-switch time (max over shared robots of boundary travel / v_max)
/// and the weighted navigation time (positional arc length / push_speed).
double plan_cost(const HybridPlan& plan, const SearchContext& ctx,
                 const SearchConfig& cfg);

/// Library of verified plans keyed by object signature, team size and
/// quantized start-to-goal displacement (in the start's body frame).
/// Stored stages are canonicalized relative to the plan start, so a hit
/// can be recomposed at any congruent query displacement.
class PlanLibrary {
 public:
  /// Stores a complete plan under its displacement key, keeping the lower
  /// cost on collision. Throws std::invalid_argument if the plan is
  /// incomplete (the library holds only verified plans).
  void insert(std::uint64_t signature, std::size_t team_size,
              const HybridPlan& plan);
  /// Entry whose stored displacement matches relative_pose(from, to)
  /// within `tol` per component, recomposed at `from` with the terminal
  /// pose snapped to `to`.
  std::optional<HybridPlan> query(std::uint64_t signature,
                                  std::size_t team_size, const Pose& from,
                                  const Pose& to, double tol = 1e-6) const;
  /// Closest entry for the signature/team whose displacement lies within
  /// `radius` of the query (|dxy| + |dpsi|), recomposed like query().
  /// Fuzzier than query(): callers must re-verify the result.
  std::optional<HybridPlan> nearest(std::uint64_t signature,
                                    std::size_t team_size, const Pose& from,
                                    const Pose& to, double radius) const;
  std::size_t size() const { return entries_.size(); }

  /// Versioned JSON serialization (format "copush-planlib-1").
  std::string serialize() const;
  static PlanLibrary deserialize(const std::string& text);

 private:
  struct Key {
    std::uint64_t signature = 0;
    std::uint64_t team = 0;
    long qx = 0, qy = 0, qpsi = 0;
    auto operator<=>(const Key&) const = default;
  };
  struct Entry {
    Pose rel;  ///< exact displacement the plan realizes
    std::vector<Keyframe> stages;  ///< poses relative to the plan start
    double cost = 0.0;
  };
  static Key make_key(std::uint64_t signature, std::size_t team_size,
                      const Pose& rel);
  std::optional<HybridPlan> recompose(const Entry& entry, const Pose& from,
                                      const Pose& to) const;
  std::map<Key, Entry> entries_;
};

/// Source of candidate keyframe fragments for a stage. Fragments are
/// suggestions only: the search re-verifies every mode before using one.
class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::vector<std::vector<Keyframe>> propose(
      std::uint64_t signature, std::size_t team_size, const Pose& from,
      const Pose& to) const = 0;
};

/// Library-backed stub: proposes the nearest library entry under the
/// canonicalized displacement, if any lies within `radius`.
class LibraryProposer : public Proposer {
 public:
  explicit LibraryProposer(const PlanLibrary& lib, double radius = 0.75)
      : lib_(&lib), radius_(radius) {}
  std::vector<std::vector<Keyframe>> propose(std::uint64_t signature,
                                             std::size_t team_size,
                                             const Pose& from,
                                             const Pose& to) const override;

 private:
  const PlanLibrary* lib_;
  double radius_;
};

/// Iterative keyframe sampling for one arc: for h = 2..h_max sub-segments,
/// place the intermediate keyframes uniformly along the arc, then perturb
/// them over cfg.iter_rounds rounds with variance shrinking by 0.7 per
/// round, generating a mode per sub-arc; the first candidate whose
/// sub-arcs are all collision-free and practically feasible is returned as
/// a fragment from s_a to s_b.
std::optional<HybridPlan> iter_samp(const Pose& s_a, const Pose& s_b,
                                    const SearchContext& ctx,
                                    const SearchConfig& cfg);

/// Last-resort approximation of a short arc by chaining pre-validated
/// primitive twists: picks coefficients lambda >= 0 with at most three
/// nonzeros solving arc.twist = sum lambda_j * primitive_j (minimizing the
/// total coefficient mass) and emits one stage per nonzero primitive with
/// duration lambda_j * arc.duration. The fragment's terminal pose is the
/// integrated endpoint, within O(arc length) of arc.end. Throws
/// std::logic_error if the primitives do not span the twist (violated
/// mode-sufficiency precondition).
HybridPlan seq_arc_approx(const ArcMotion& arc,
                          const std::vector<contact::PrimitiveTwist>& p_star);

struct SearchResult {
  std::optional<HybridPlan> plan;  ///< empty = failure signal
  int expansions = 0;
};

/// Best-first keyframe search over the segment (front() = start, back() =
/// goal; intermediate poses become collision-split anchors via
/// ctx.anchors, which is overwritten from `segment`). Returns the first
/// complete plan that passes a full closed-loop rollout, after storing it
/// in `library` (may be null). `proposer` may be null. Fails (empty plan)
/// once cfg.node_cap expansions are spent.
SearchResult search(const std::vector<Pose>& segment, SearchContext& ctx,
                    PlanLibrary* library, const Proposer* proposer,
                    const SearchConfig& cfg);

}  // namespace copush::hybrid
