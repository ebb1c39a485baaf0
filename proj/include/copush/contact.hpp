#pragma once

// Quasi-static contact model for planar pushing.
//
// An object sliding on the ground dissipates energy through an ellipsoidal
// limit surface: the friction wrench opposing a body twist p is
//
//   q(p) = -||D1 D2 p||^-1 * D2 p,   D1 = diag(f_max, f_max, m_max)^-1,
//                                    D2 = diag(1, 1, m_max^2 / f_max^2),
//
// where f_max is the maximum ground friction force and m_max the maximum
// friction moment about the center of mass. Robots push at boundary contact
// points through Coulomb cones; a pushing mode is force-feasible for a twist
// when the cone-constrained contact forces can cancel q(p) exactly, which is
// checked by a small L1 linear program.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "copush/geometry.hpp"

namespace copush::contact {

using geom::Polygon;
using geom::Pose;
using geom::Twist;
using geom::Vec2;

constexpr double kGravity = 9.81;

/// Mass properties and friction coefficients of a pushed object.
struct ObjectIntrinsics {
  double mass = 1.0;         ///< kg
  double inertia = 0.1;      ///< kg m^2, about the center of mass
  double mu_ground = 0.5;    ///< object-ground Coulomb coefficient
  double mu_contact = 0.3;   ///< robot-object Coulomb coefficient
};

/// Ellipsoidal limit-surface scales derived from an object's footprint,
/// plus the robot-object Coulomb coefficient the contact cones use (carried
/// here so feasibility checks travel with one struct).
struct LimitSurfaceParams {
  double f_max = 0.0;       ///< N, peak ground friction force
  double m_max = 0.0;       ///< N m, peak ground friction moment about com
  double mu_contact = 0.3;  ///< robot-object Coulomb coefficient
};

/// Single pushing contact on the object boundary, in body frame.
struct ContactPoint {
  Vec2 position;       ///< on the boundary
  Vec2 normal;         ///< unit, pointing into the object
  Vec2 tangent;        ///< unit, along the boundary (normal rotated -90 deg)
  double boundary_s = 0.0;  ///< arc-length coordinate on the boundary
};

/// Assignment of a robot subgroup to boundary contacts. Robot slot i pushes
/// at contacts[i]; ids refer to positions in the subgroup, not world robot
/// ids. Contacts are pairwise separated by at least one robot footprint
/// diameter along the boundary.
struct PushingMode {
  std::vector<int> robots;             ///< distinct slot ids, same length
  std::vector<ContactPoint> contacts;  ///< as robots
};

/// Generalized planar force on the object: net force and moment about com.
struct GeneralizedForce {
  double fx = 0.0;
  double fy = 0.0;
  double tau = 0.0;
};

/// Normal/tangential force magnitudes applied at one contact.
struct ContactForce {
  double normal = 0.0;      ///< >= 0
  double tangential = 0.0;  ///< |t| <= mu_contact * normal
};

/// Capabilities of one pushing robot. Footprints are treated as disks; the
/// scenario loader converts polygonal footprints to their bounding disk.
struct RobotSpec {
  double radius = 0.15;       ///< m, footprint radius
  double f_max_robot = 100.0; ///< N, max push force magnitude
  double v_max = 1.0;         ///< m/s
  double omega_max = 2.0;     ///< rad/s
};

/// Limit-surface scales for a polygonal footprint with uniform pressure:
/// f_max = mu_ground * M * g and m_max = mu_ground * g * (M/A) * the integral
/// of distance-to-com over the footprint (triangulated Gauss quadrature).
LimitSurfaceParams limit_surface_params(const Polygon& poly,
                                        const ObjectIntrinsics& intr);

/// Ground friction wrench opposing body twist p (see file header). The twist
/// only enters through its direction. Throws std::invalid_argument on a zero
/// twist, which has no defined opposing direction.
GeneralizedForce friction_wrench(const Twist& p, const LimitSurfaceParams& ls);

/// Net generalized force of per-contact forces applied at a mode's contacts,
/// with the moment taken about `com` (body frame).
GeneralizedForce wrench_from_forces(const PushingMode& mode,
                                    const std::vector<ContactForce>& forces,
                                    const Vec2& com);

struct FeasibilityResult {
  double loss = 0.0;  ///< L1 distance between achievable wrench and -q(p)
  std::vector<ContactForce> forces;  ///< an argmin force assignment
};

/// Minimum L1 residual || J F + q(p) ||_1 over cone-constrained contact
/// forces F. Zero means the mode can exactly sustain twist p quasi-statically.
/// `robots[mode.robots[i]]` bounds the normal force at contact i.
FeasibilityResult force_feasibility_loss(const PushingMode& mode,
                                         const Twist& p,
                                         const LimitSurfaceParams& ls,
                                         const Vec2& com,
                                         const std::vector<RobotSpec>& robots);

/// One twist direction with a weight, for multi-directional evaluation.
struct WeightedTwist {
  Twist twist;
  double weight = 1.0;
};

/// Default evaluation basis around a target twist: the target itself at
/// weight 4 plus four perturbations at weight 1 (linear part rotated by
/// +-15 degrees, angular part scaled by 1 +- 0.25).
std::vector<WeightedTwist> default_twist_basis(const Twist& p);

/// Weighted sum of force_feasibility_loss over a twist basis. The target
/// twist is expected to be the largest-weight entry.
double multi_directional_loss(const PushingMode& mode,
                              const std::vector<WeightedTwist>& basis,
                              const LimitSurfaceParams& ls, const Vec2& com,
                              const std::vector<RobotSpec>& robots);

/// True iff the twists positively span R^3: they span linearly and admit a
/// strictly positive combination summing to zero (so the origin is interior
/// to the convex hull of the normalized twists).
bool positively_spans(const std::vector<Twist>& twists);

/// A certified feasible twist direction with the mode that realizes it.
struct PrimitiveTwist {
  Twist twist;        ///< unit norm
  PushingMode mode;   ///< verified mode with zero feasibility loss
};

struct SufficiencyResult {
  bool sufficient = false;
  std::vector<PrimitiveTwist> primitives;  ///< certificate set P*
};

struct SufficiencyConfig {
  int max_candidates = 24;    ///< twist directions to try
  int mode_budget = 8;        ///< multi-start budget per direction
  unsigned seed = 1;
  bool verify_rollout = true; ///< also require a simulated rollout to track
};

/// Searches candidate twist directions, generates modes for each, and tests
/// whether the practically feasible ones positively span R^3. Defined in
/// mode_search.cpp (it drives mode generation).
SufficiencyResult mode_sufficient(const std::vector<RobotSpec>& team,
                                  const Polygon& poly,
                                  const ObjectIntrinsics& intr,
                                  const SufficiencyConfig& cfg = {});

/// Stable content hash of footprint + intrinsics; keys mode and plan
/// libraries.
std::uint64_t object_signature(const Polygon& poly,
                               const ObjectIntrinsics& intr);

/// Contact point (position, inward normal, tangent) at arc length s.
ContactPoint contact_at(const Polygon& poly, double s);

}  // namespace copush::contact
