#include "copush/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "copush/util.hpp"

namespace copush {

std::string hex_string(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace copush

namespace copush::geom {

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // in [-pi, pi]
  if (r <= -kPi) r = kPi;
  return r;
}

// ---------------------------------------------------------------------------
// Arc kinematics
// ---------------------------------------------------------------------------

// Entries of the integrated rotation matrix: integrating Rot(psi0 + w*tau)
// over tau in [0, t] gives Rot(psi0) * [a -b; b a] with a = sin(wt)/w and
// b = (1 - cos(wt))/w. Near w = 0 both expressions cancel catastrophically,
// so a series branch takes over; integrate_twist and arc_from_poses share
// this helper so forward and inverse kinematics agree to machine precision.
static void rot_integral(double w, double t, double& a, double& b) {
  const double u = w * t;
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    a = t * (1.0 - u2 / 6.0 + u2 * u2 / 120.0);
    b = t * (u * (0.5 - u2 / 24.0 + u2 * u2 / 720.0));
  } else {
    a = std::sin(u) / w;
    b = (1.0 - std::cos(u)) / w;
  }
}

static Vec2 displacement(double psi0, const Twist& p, double t) {
  double a, b;
  rot_integral(p.omega, t, a, b);
  Vec2 d_local{a * p.vx - b * p.vy, b * p.vx + a * p.vy};
  return rotate(d_local, psi0);
}

Pose integrate_twist(const Pose& s0, const Twist& p, double t) {
  Vec2 d = displacement(s0.psi, p, t);
  return {s0.x + d.x, s0.y + d.y, wrap_angle(s0.psi + p.omega * t)};
}

ArcMotion arc_from_poses(const Pose& s0, const Pose& s1) {
  const double dpsi = angle_diff(s1.psi, s0.psi);
  const double w = dpsi;  // unit duration
  // Solve the 2x2 linear system  M * (vx, vy) = world displacement, where M
  // is the integrated rotation matrix over unit time. M is invertible for
  // |dpsi| <= pi (its determinant is (2 - 2cos w) / w^2 > 0), which the
  // shortest-angle convention guarantees.
  const double dx = s1.x - s0.x, dy = s1.y - s0.y;
  double a, b;  // M = [a -b; b a] in the frame rotated by psi0
  rot_integral(w, 1.0, a, b);
  // Undo the initial rotation: d_body = Rot(-psi0) * d_world = M * v.
  Vec2 db = rotate({dx, dy}, -s0.psi);
  double det = a * a + b * b;
  double vx = (a * db.x + b * db.y) / det;
  double vy = (-b * db.x + a * db.y) / det;
  ArcMotion arc({s0.x, s0.y, wrap_angle(s0.psi)}, Twist{vx, vy, w}, 1.0);
  // Pin the endpoint exactly on the requested pose; integration reproduces
  // it to ~1e-12 and callers key on exact equality of stored keyframes.
  arc.end = Pose{s1.x, s1.y, wrap_angle(s1.psi)};
  return arc;
}

double dist_point_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = norm2(ab);
  if (len2 < 1e-30) return norm(p - a);
  double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

double dist_point_to_arc(const Vec2& p, const ArcMotion& arc) {
  const Twist& tw = arc.twist;
  const double T = arc.duration;
  const Vec2 start = arc.start.xy();
  const double lin = norm(tw.linear());

  if (std::abs(tw.omega) * T < 1e-9 || lin < 1e-12) {
    if (lin < 1e-12) {
      // Pure rotation (or rest): the body origin does not translate.
      return norm(p - start);
    }
    return dist_point_to_segment(p, start, arc.end.xy());
  }

  // The origin trace is a circular arc about the instantaneous center of
  // rotation. World velocity at t=0 is Rot(psi0) * v; the ICR sits at
  // start + perp(v_world) / omega.
  Vec2 v_world = rotate(tw.linear(), arc.start.psi);
  Vec2 icr = start + perp(v_world) * (1.0 / tw.omega);
  double radius = lin / std::abs(tw.omega);

  double theta0 = std::atan2(start.y - icr.y, start.x - icr.x);
  double sweep = tw.omega * T;  // signed angle subtended by the trace

  double ang = std::atan2(p.y - icr.y, p.x - icr.x);
  // Offset of the query angle from theta0, taken in the direction of the
  // sweep and wrapped to [0, 2pi).
  double off = (sweep >= 0.0) ? (ang - theta0) : (theta0 - ang);
  off = std::fmod(off, 2.0 * kPi);
  if (off < 0.0) off += 2.0 * kPi;
  if (off <= std::abs(sweep)) {
    return std::abs(norm(p - icr) - radius);
  }
  return std::min(norm(p - start), norm(p - arc.end.xy()));
}

// ---------------------------------------------------------------------------
// Polygon construction and decomposition
// ---------------------------------------------------------------------------

static bool segments_properly_intersect(const Vec2& a, const Vec2& b,
                                        const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    double v = cross(q - p, r - p);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

static double signed_area(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % v.size()];
    s += cross(p, q);
  }
  return 0.5 * s;
}

// Ear-clipping triangulation of a simple CCW polygon, followed by a greedy
// merge of triangles across shared diagonals while the union stays convex
// (Hertel-Mehlhorn style). Piece count is not minimal but is small enough
// for the SAT tests downstream.
static std::vector<std::vector<Vec2>> decompose_convex(
    const std::vector<Vec2>& poly) {
  std::vector<std::vector<Vec2>> tris;
  std::vector<int> idx(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) idx[i] = static_cast<int>(i);

  auto is_convex_corner = [&](int ia, int ib, int ic) {
    return cross(poly[ib] - poly[ia], poly[ic] - poly[ib]) > 1e-12;
  };
  auto point_in_tri = [&](const Vec2& p, const Vec2& a, const Vec2& b,
                          const Vec2& c) {
    double d1 = cross(b - a, p - a);
    double d2 = cross(c - b, p - b);
    double d3 = cross(a - c, p - c);
    return d1 >= -1e-12 && d2 >= -1e-12 && d3 >= -1e-12;
  };

  std::vector<std::array<int, 3>> tri_idx;
  int guard = static_cast<int>(poly.size()) * static_cast<int>(poly.size()) + 8;
  while (idx.size() > 3 && guard-- > 0) {
    bool clipped = false;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      int ia = idx[(k + idx.size() - 1) % idx.size()];
      int ib = idx[k];
      int ic = idx[(k + 1) % idx.size()];
      if (!is_convex_corner(ia, ib, ic)) continue;
      bool ear = true;
      for (int j : idx) {
        if (j == ia || j == ib || j == ic) continue;
        if (point_in_tri(poly[j], poly[ia], poly[ib], poly[ic])) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      tri_idx.push_back({ia, ib, ic});
      idx.erase(idx.begin() + static_cast<long>(k));
      clipped = true;
      break;
    }
    if (!clipped) break;  // numerically degenerate; fall through with hull
  }
  if (idx.size() == 3) tri_idx.push_back({idx[0], idx[1], idx[2]});

  // Greedy merge over shared edges.
  std::vector<std::vector<int>> pieces;
  pieces.reserve(tri_idx.size());
  for (auto& t : tri_idx) pieces.push_back({t[0], t[1], t[2]});

  auto merged_if_convex = [&](const std::vector<int>& p1,
                              const std::vector<int>& p2)
      -> std::optional<std::vector<int>> {
    // Find a shared directed edge (u, v) in p1 matching (v, u) in p2.
    for (std::size_t i = 0; i < p1.size(); ++i) {
      int u = p1[i], v = p1[(i + 1) % p1.size()];
      for (std::size_t j = 0; j < p2.size(); ++j) {
        if (p2[j] == v && p2[(j + 1) % p2.size()] == u) {
          std::vector<int> m;
          for (std::size_t k = 1; k < p1.size(); ++k)
            m.push_back(p1[(i + k) % p1.size()]);
          for (std::size_t k = 1; k < p2.size(); ++k)
            m.push_back(p2[(j + k) % p2.size()]);
          // Drop consecutive duplicates produced by collinear chains.
          for (std::size_t k = 0; k < m.size(); ++k) {
            std::size_t n = m.size();
            if (m[k] == m[(k + 1) % n]) {
              m.erase(m.begin() + static_cast<long>(k));
              --k;
            }
          }
          if (m.size() < 3) return std::nullopt;
          for (std::size_t k = 0; k < m.size(); ++k) {
            const Vec2& a = poly[m[(k + m.size() - 1) % m.size()]];
            const Vec2& b = poly[m[k]];
            const Vec2& c = poly[m[(k + 1) % m.size()]];
            if (cross(b - a, c - b) < -1e-12) return std::nullopt;
          }
          return m;
        }
      }
    }
    return std::nullopt;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pieces.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < pieces.size() && !changed; ++j) {
        if (auto m = merged_if_convex(pieces[i], pieces[j])) {
          pieces[i] = std::move(*m);
          pieces.erase(pieces.begin() + static_cast<long>(j));
          changed = true;
        }
      }
    }
  }

  for (auto& p : pieces) {
    std::vector<Vec2> piece;
    piece.reserve(p.size());
    for (int i : p) piece.push_back(poly[i]);
    tris.push_back(std::move(piece));
  }
  return tris;
}

Polygon::Polygon(std::vector<Vec2> vertices) : verts_(std::move(vertices)) {
  if (verts_.size() < 3)
    throw std::invalid_argument("polygon needs at least 3 vertices");
  if (signed_area(verts_) < 0.0) std::reverse(verts_.begin(), verts_.end());
  area_ = signed_area(verts_);
  if (area_ < 1e-12)
    throw std::invalid_argument("polygon area is degenerate");

  const std::size_t n = verts_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = verts_[i];
    const Vec2& b = verts_[(i + 1) % n];
    if (norm(b - a) < 1e-12)
      throw std::invalid_argument("polygon has repeated vertices");
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (sharing a vertex).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_properly_intersect(a, b, verts_[j], verts_[(j + 1) % n]))
        throw std::invalid_argument("polygon boundary self-intersects");
    }
  }

  cum_len_.resize(n + 1);
  cum_len_[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    cum_len_[i + 1] = cum_len_[i] + norm(verts_[(i + 1) % n] - verts_[i]);
  perimeter_ = cum_len_[n];

  // Centroid via the standard area-weighted formula.
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = verts_[i];
    const Vec2& q = verts_[(i + 1) % n];
    double w = cross(p, q);
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  centroid_ = {cx / (6.0 * area_), cy / (6.0 * area_)};

  for (const Vec2& v : verts_) bound_radius_ = std::max(bound_radius_, norm(v));

  pieces_ = decompose_convex(verts_);
}

std::size_t Polygon::boundary_edge(double s) const {
  double m = std::fmod(s, perimeter_);
  if (m < 0.0) m += perimeter_;
  auto it = std::upper_bound(cum_len_.begin(), cum_len_.end(), m);
  std::size_t e = static_cast<std::size_t>(it - cum_len_.begin()) - 1;
  return std::min(e, verts_.size() - 1);
}

Vec2 Polygon::boundary_point(double s) const {
  double m = std::fmod(s, perimeter_);
  if (m < 0.0) m += perimeter_;
  std::size_t e = boundary_edge(m);
  const Vec2& a = verts_[e];
  const Vec2& b = verts_[(e + 1) % verts_.size()];
  double seg = cum_len_[e + 1] - cum_len_[e];
  double t = seg > 0.0 ? (m - cum_len_[e]) / seg : 0.0;
  return a + t * (b - a);
}

Vec2 Polygon::boundary_tangent(double s) const {
  std::size_t e = boundary_edge(s);
  return normalized(verts_[(e + 1) % verts_.size()] - verts_[e]);
}

Vec2 Polygon::inward_normal(double s) const {
  // CCW boundary: the interior is to the left of the walking direction.
  return perp(boundary_tangent(s));
}

double Polygon::closest_boundary_s(const Vec2& p) const {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  const std::size_t n = verts_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = verts_[i];
    const Vec2& b = verts_[(i + 1) % n];
    Vec2 ab = b - a;
    double len2 = norm2(ab);
    double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    double d = norm(p - (a + t * ab));
    if (d < best_d) {
      best_d = d;
      best_s = cum_len_[i] + t * std::sqrt(len2);
    }
  }
  return std::fmod(best_s, perimeter_);
}

bool Polygon::contains(const Vec2& p) const {
  // Crossing-number test with on-boundary points counted inside.
  const std::size_t n = verts_.size();
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = verts_[j];
    const Vec2& b = verts_[i];
    if (dist_point_to_segment(p, a, b) < 1e-9) return true;
    if ((b.y > p.y) != (a.y > p.y)) {
      double xint = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < xint) in = !in;
    }
  }
  return in;
}

std::vector<Vec2> inflate_convex(const std::vector<Vec2>& convex, double r,
                                 int arc_pts) {
  const std::size_t n = convex.size();
  std::vector<Vec2> out;
  out.reserve(n * static_cast<std::size_t>(arc_pts + 2));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = convex[(i + n - 1) % n];
    const Vec2& cur = convex[i];
    const Vec2& next = convex[(i + 1) % n];
    // Outward normals of the incident edges (CCW loop: outward = -perp(t)).
    Vec2 n_in = -perp(normalized(cur - prev));
    Vec2 n_out = -perp(normalized(next - cur));
    double a0 = std::atan2(n_in.y, n_in.x);
    double sweep = wrap_angle(std::atan2(n_out.y, n_out.x) - a0);
    if (sweep < 0.0) sweep += 2.0 * kPi;  // convex corner turns CCW
    int steps = std::max(1, static_cast<int>(arc_pts * sweep / (0.5 * kPi)));
    for (int k = 0; k <= steps; ++k) {
      double a = a0 + sweep * static_cast<double>(k) / steps;
      out.push_back(cur + r * Vec2{std::cos(a), std::sin(a)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collision
// ---------------------------------------------------------------------------

static void project(const std::vector<Vec2>& pts, const Vec2& axis, double& lo,
                    double& hi) {
  lo = hi = dot(pts[0], axis);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double v = dot(pts[i], axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
}

bool convex_collide(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                    double tol) {
  auto separated_by_edges = [&](const std::vector<Vec2>& edges_of) {
    const std::size_t n = edges_of.size();
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 axis = normalized(perp(edges_of[(i + 1) % n] - edges_of[i]));
      if (norm2(axis) < 0.5) continue;  // zero-length edge
      double alo, ahi, blo, bhi;
      project(a, axis, alo, ahi);
      project(b, axis, blo, bhi);
      double gap = std::max(blo - ahi, alo - bhi);
      if (gap > tol) return true;
    }
    return false;
  };
  if (separated_by_edges(a)) return false;
  if (separated_by_edges(b)) return false;
  return true;
}

static std::vector<Vec2> transformed(const std::vector<Vec2>& pts,
                                     const Pose& pose) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  double c = std::cos(pose.psi), s = std::sin(pose.psi);
  for (const Vec2& p : pts)
    out.push_back({pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y});
  return out;
}

bool collide(const Polygon& a, const Pose& pose_a, const Polygon& b,
             const Pose& pose_b, double tol) {
  // Cheap bounding-circle reject first.
  double cd = norm(pose_b.xy() - pose_a.xy());
  if (cd > a.bounding_radius() + b.bounding_radius() + tol) return false;

  std::vector<std::vector<Vec2>> wa, wb;
  wa.reserve(a.convex_pieces().size());
  wb.reserve(b.convex_pieces().size());
  for (const auto& p : a.convex_pieces()) wa.push_back(transformed(p, pose_a));
  for (const auto& p : b.convex_pieces()) wb.push_back(transformed(p, pose_b));
  for (const auto& pa : wa)
    for (const auto& pb : wb)
      if (convex_collide(pa, pb, tol)) return true;
  return false;
}

std::optional<std::size_t> swept_region_intersects(
    const Polygon& a, const std::vector<Pose>& poses_a, const Polygon& b,
    const std::vector<Pose>& poses_b, double tol) {
  for (std::size_t i = 0; i < poses_a.size(); ++i) {
    for (const Pose& pb : poses_b) {
      if (collide(a, poses_a[i], b, pb, tol)) return i;
    }
  }
  return std::nullopt;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Vec2& p, const Vec2& q) {
    return p.x < q.x || (p.x == q.x && p.y < q.y);
  });
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

Polygon make_circle_polygon(double radius, int segments) {
  std::vector<Vec2> v;
  v.reserve(static_cast<std::size_t>(segments));
  for (int i = 0; i < segments; ++i) {
    double a = 2.0 * kPi * i / segments;
    v.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return Polygon(std::move(v));
}

Polygon make_box_polygon(double width, double height) {
  double hw = 0.5 * width, hh = 0.5 * height;
  return Polygon({{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}});
}

}  // namespace copush::geom
