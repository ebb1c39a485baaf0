#pragma once

// Planar geometry for pushing problems: SE(2) poses and twists, constant-twist
// arc motions, simple polygons with cached convex decompositions, and the
// collision / distance predicates the planners are built on.
//
// Conventions used throughout:
//  * world frame is x-right / y-up, angles are radians in (-pi, pi],
//  * polygons are simple, counter-clockwise, and expressed in body frame
//    with an arbitrary origin (the centroid need not be the origin),
//  * a twist (vx, vy, omega) is expressed in the body frame of the moving
//    object and held constant over an arc, which makes the world-frame
//    trace of the body origin a circular arc (or a straight segment).

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace copush::geom {

constexpr double kPi = 3.14159265358979323846;

/// Global tolerance for polygon contact: footprints closer than this count
/// as touching. Shared by collision checks so planner and simulator agree.
constexpr double kContactTol = 1e-3;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::sqrt(v.x * v.x + v.y * v.y); }
inline double norm2(const Vec2& v) { return v.x * v.x + v.y * v.y; }
inline Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }
inline Vec2 normalized(const Vec2& v) {
  double n = norm(v);
  return n > 0.0 ? Vec2{v.x / n, v.y / n} : Vec2{0.0, 0.0};
}
inline Vec2 rotate(const Vec2& v, double a) {
  double c = std::cos(a), s = std::sin(a);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Shortest signed angular difference b - a, in (-pi, pi].
inline double angle_diff(double b, double a) { return wrap_angle(b - a); }

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  ///< heading, radians in (-pi, pi]

  Pose() = default;
  Pose(double x_, double y_, double psi_) : x(x_), y(y_), psi(psi_) {}

  Vec2 xy() const { return {x, y}; }
  /// Body point -> world point.
  Vec2 apply(const Vec2& p) const { return xy() + rotate(p, psi); }
  /// World point -> body point.
  Vec2 unapply(const Vec2& p) const { return rotate(p - xy(), -psi); }
};

/// Body-frame twist held constant over an arc: linear (vx, vy) and angular
/// omega. Units are per-second when the arc has a physical duration, or
/// per-unit-time for normalized arcs.
struct Twist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Twist() = default;
  Twist(double vx_, double vy_, double om_) : vx(vx_), vy(vy_), omega(om_) {}

  Vec2 linear() const { return {vx, vy}; }
  Twist operator*(double s) const { return {vx * s, vy * s, omega * s}; }
  Twist operator-() const { return {-vx, -vy, -omega}; }
};

inline double twist_norm(const Twist& p) {
  return std::sqrt(p.vx * p.vx + p.vy * p.vy + p.omega * p.omega);
}

/// Pose reached after holding body twist `p` for time `t` starting at `s0`.
/// Closed form of the rotation-matrix integral; exact for all omega
/// including the omega -> 0 straight-line limit.
Pose integrate_twist(const Pose& s0, const Twist& p, double t);

/// Constant-twist arc between two poses. `twist` is normalized so that
/// integrating it for `duration` from `start` lands on `end` (cached).
struct ArcMotion {
  Pose start;
  Twist twist;        ///< body-frame twist, per unit time
  double duration = 1.0;
  Pose end;           ///< integrate_twist(start, twist, duration), cached

  ArcMotion() = default;
  ArcMotion(const Pose& s, const Twist& p, double t)
      : start(s), twist(p), duration(t), end(integrate_twist(s, p, t)) {}

  /// Pose at time u in [0, duration].
  Pose at(double u) const { return integrate_twist(start, twist, u); }
  /// Length of the positional trace (|linear velocity| * duration).
  double arc_length() const { return norm(twist.linear()) * duration; }
  /// Total heading change (|omega| * duration).
  double turn_angle() const { return std::abs(twist.omega) * duration; }
};

/// The unique unit-duration arc from s0 to s1 whose heading change is the
/// shortest signed angle (ties at pi resolve toward +pi).
ArcMotion arc_from_poses(const Pose& s0, const Pose& s1);

/// Minimum distance from a world point to the positional trace of an arc.
double dist_point_to_arc(const Vec2& p, const ArcMotion& arc);

/// Simple polygon in body frame. Vertices are normalized to CCW order on
/// construction; a convex decomposition (ear clipping + greedy merge) is
/// computed once and cached for collision tests.
class Polygon {
 public:
  Polygon() = default;
  /// Throws std::invalid_argument if fewer than 3 vertices, repeated
  /// vertices, or self-intersecting boundary.
  explicit Polygon(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return verts_; }
  std::size_t size() const { return verts_.size(); }

  double area() const { return area_; }
  Vec2 centroid() const { return centroid_; }
  double perimeter() const { return perimeter_; }
  /// Radius of the smallest origin-centered disk containing the polygon.
  double bounding_radius() const { return bound_radius_; }

  /// Convex pieces covering the polygon (each CCW, in body frame).
  const std::vector<std::vector<Vec2>>& convex_pieces() const { return pieces_; }

  /// Boundary point at arc length s (wrapped modulo perimeter), walking CCW
  /// from vertex 0.
  Vec2 boundary_point(double s) const;
  /// Index of the edge containing arc length s.
  std::size_t boundary_edge(double s) const;
  /// Inward unit normal of the edge containing arc length s.
  Vec2 inward_normal(double s) const;
  /// Unit tangent (CCW walking direction) of the edge containing arc length s.
  Vec2 boundary_tangent(double s) const;
  /// Arc length of the boundary point closest to a body-frame point.
  double closest_boundary_s(const Vec2& p) const;
  /// True if a body-frame point lies inside or on the polygon.
  bool contains(const Vec2& p) const;

 private:
  std::vector<Vec2> verts_;
  std::vector<double> cum_len_;  ///< cumulative arc length at each vertex
  std::vector<std::vector<Vec2>> pieces_;
  double area_ = 0.0;
  double perimeter_ = 0.0;
  double bound_radius_ = 0.0;
  Vec2 centroid_;
};

/// Convex polygon offset outward by radius r; vertex corners are rounded
/// with `arc_pts` intermediate samples. Used to grow planning footprints by
/// robot clearance.
std::vector<Vec2> inflate_convex(const std::vector<Vec2>& convex, double r,
                                 int arc_pts = 3);

/// True iff the two transformed polygons intersect or come within `tol` of
/// touching. Exact separating-axis test on the cached convex pieces.
bool collide(const Polygon& a, const Pose& pose_a, const Polygon& b,
             const Pose& pose_b, double tol = kContactTol);

/// Variant for raw convex loops already in world frame.
bool convex_collide(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                    double tol = kContactTol);

/// First index i such that polygon a at poses_a[i] intersects the union of
/// b's footprints over poses_b, or nullopt if the swept regions are disjoint.
std::optional<std::size_t> swept_region_intersects(
    const Polygon& a, const std::vector<Pose>& poses_a, const Polygon& b,
    const std::vector<Pose>& poses_b, double tol = kContactTol);

/// Convex hull (CCW) of a point set; used by plotting and footprint checks.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

/// Regular polygonization of a disk (CCW), used for circle-shaped bodies.
Polygon make_circle_polygon(double radius, int segments = 32);

/// Axis-aligned rectangle centered at the body origin.
Polygon make_box_polygon(double width, double height);

/// Distance from a point to a segment [a, b].
double dist_point_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace copush::geom
