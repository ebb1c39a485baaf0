#include "copush/contact.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "copush/lp.hpp"
#include "copush/util.hpp"

namespace copush::contact {

namespace {

// 7-point Gauss rule on a triangle, degree 5 (barycentric points/weights).
struct TriQuad {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> w;
};

const TriQuad& tri_quad7() {
  static const TriQuad q = [] {
    TriQuad t{};
    const double a1 = 0.0597158717897698, b1 = 0.4701420641051151;
    const double a2 = 0.7974269853530873, b2 = 0.1012865073234563;
    t.bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3},
               {a1, b1, b1},
               {b1, a1, b1},
               {b1, b1, a1},
               {a2, b2, b2},
               {b2, a2, b2},
               {b2, b2, a2}}};
    t.w = {0.225, 0.1323941527885062, 0.1323941527885062, 0.1323941527885062,
           0.1259391805448271, 0.1259391805448271, 0.1259391805448271};
    return t;
  }();
  return q;
}

// Quadrature of ||r - com|| over a single triangle.
double quad_dist_tri(const Vec2& a, const Vec2& b, const Vec2& c,
                     const Vec2& com) {
  const TriQuad& q = tri_quad7();
  double area = 0.5 * std::abs(geom::cross(b - a, c - a));
  double val = 0.0;
  for (int i = 0; i < 7; ++i) {
    Vec2 p = q.bary[i][0] * a + q.bary[i][1] * b + q.bary[i][2] * c;
    val += q.w[i] * geom::norm(p - com);
  }
  return val * area;
}

// Recursive 4-way subdivision. The integrand has a kink at the com, so the
// rule is refined a fixed number of levels; depth 4 (256 sub-triangles per
// fan triangle) is cross-checked against Monte Carlo in the tests.
double integrate_dist_tri(const Vec2& a, const Vec2& b, const Vec2& c,
                          const Vec2& com, int depth) {
  if (depth == 0) return quad_dist_tri(a, b, c, com);
  Vec2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  return integrate_dist_tri(a, ab, ca, com, depth - 1) +
         integrate_dist_tri(ab, b, bc, com, depth - 1) +
         integrate_dist_tri(ca, bc, c, com, depth - 1) +
         integrate_dist_tri(ab, bc, ca, com, depth - 1);
}

}  // namespace

LimitSurfaceParams limit_surface_params(const Polygon& poly,
                                        const ObjectIntrinsics& intr) {
  LimitSurfaceParams ls;
  ls.f_max = intr.mu_ground * intr.mass * kGravity;
  ls.mu_contact = intr.mu_contact;

  // m_max = mu * g * (M / A) * \int ||r - com|| dA, integrated per convex
  // piece via fan triangulation.
  const Vec2 com = poly.centroid();
  double integral = 0.0;
  for (const auto& piece : poly.convex_pieces()) {
    for (std::size_t i = 1; i + 1 < piece.size(); ++i) {
      integral += integrate_dist_tri(piece[0], piece[i], piece[i + 1], com, 4);
    }
  }
  ls.m_max = intr.mu_ground * kGravity * (intr.mass / poly.area()) * integral;
  return ls;
}

GeneralizedForce friction_wrench(const Twist& p, const LimitSurfaceParams& ls) {
  const double n = geom::twist_norm(p);
  if (n < 1e-12)
    throw std::invalid_argument(
        "friction_wrench: zero twist has no defined opposing direction");
  if (ls.f_max <= 0.0 || ls.m_max <= 0.0)
    throw std::invalid_argument("friction_wrench: limit surface degenerate");

  const double r2 = (ls.m_max * ls.m_max) / (ls.f_max * ls.f_max);
  // D2 p
  const double d2x = p.vx, d2y = p.vy, d2w = r2 * p.omega;
  // || D1 D2 p ||
  const double s = std::sqrt((d2x * d2x + d2y * d2y) / (ls.f_max * ls.f_max) +
                             (d2w * d2w) / (ls.m_max * ls.m_max));
  return {-d2x / s, -d2y / s, -d2w / s};
}

GeneralizedForce wrench_from_forces(const PushingMode& mode,
                                    const std::vector<ContactForce>& forces,
                                    const Vec2& com) {
  if (forces.size() != mode.contacts.size())
    throw std::invalid_argument("wrench_from_forces: force count mismatch");
  GeneralizedForce g;
  for (std::size_t i = 0; i < forces.size(); ++i) {
    const ContactPoint& c = mode.contacts[i];
    Vec2 f = forces[i].normal * c.normal + forces[i].tangential * c.tangent;
    g.fx += f.x;
    g.fy += f.y;
    g.tau += geom::cross(c.position - com, f);
  }
  return g;
}

FeasibilityResult force_feasibility_loss(const PushingMode& mode,
                                         const Twist& p,
                                         const LimitSurfaceParams& ls,
                                         const Vec2& com,
                                         const std::vector<RobotSpec>& robots) {
  const std::size_t n = mode.contacts.size();
  if (mode.robots.size() != n || n == 0)
    throw std::invalid_argument("force_feasibility_loss: malformed mode");

  const GeneralizedForce q = friction_wrench(p, ls);
  const double mu = ls.mu_contact;

  // Variables (all >= 0): fn_i, ft+_i, ft-_i per contact, then r+ (3) and
  // r- (3). Objective: sum(r+) + sum(r-) = || J F + q ||_1.
  const std::size_t nv = 3 * n + 6;
  std::vector<double> c(nv, 0.0);
  for (std::size_t k = 3 * n; k < nv; ++k) c[k] = 1.0;

  // Equalities: J F + r+ - r- = -q   (3 rows).
  std::vector<std::vector<double>> a_eq(3, std::vector<double>(nv, 0.0));
  std::vector<double> b_eq = {-q.fx, -q.fy, -q.tau};
  for (std::size_t i = 0; i < n; ++i) {
    const ContactPoint& cp = mode.contacts[i];
    Vec2 arm = cp.position - com;
    a_eq[0][i] = cp.normal.x;
    a_eq[1][i] = cp.normal.y;
    a_eq[2][i] = geom::cross(arm, cp.normal);
    a_eq[0][n + i] = cp.tangent.x;
    a_eq[1][n + i] = cp.tangent.y;
    a_eq[2][n + i] = geom::cross(arm, cp.tangent);
    a_eq[0][2 * n + i] = -cp.tangent.x;
    a_eq[1][2 * n + i] = -cp.tangent.y;
    a_eq[2][2 * n + i] = -geom::cross(arm, cp.tangent);
  }
  for (std::size_t r = 0; r < 3; ++r) {
    a_eq[r][3 * n + r] = 1.0;       // r+
    a_eq[r][3 * n + 3 + r] = -1.0;  // r-
  }

  // Inequalities: fn_i <= f_max of the pushing robot, and the Coulomb cone
  // ft+_i + ft-_i - mu * fn_i <= 0 (implies |ft| <= mu fn and is tight at
  // the optimum).
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
  for (std::size_t i = 0; i < n; ++i) {
    int slot = mode.robots[i];
    if (slot < 0 || static_cast<std::size_t>(slot) >= robots.size())
      throw std::invalid_argument("force_feasibility_loss: bad robot slot");
    std::vector<double> cap(nv, 0.0);
    cap[i] = 1.0;
    a_ub.push_back(std::move(cap));
    b_ub.push_back(robots[static_cast<std::size_t>(slot)].f_max_robot);

    std::vector<double> cone(nv, 0.0);
    cone[i] = -mu;
    cone[n + i] = 1.0;
    cone[2 * n + i] = 1.0;
    a_ub.push_back(std::move(cone));
    b_ub.push_back(0.0);
  }

  lp::Result r = lp::solve(c, a_ub, b_ub, a_eq, b_eq);
  if (r.status != lp::Status::kOptimal)
    throw std::runtime_error("force_feasibility_loss: LP did not solve");

  FeasibilityResult out;
  out.loss = std::max(0.0, r.objective);
  out.forces.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.forces[i].normal = r.x[i];
    out.forces[i].tangential = r.x[n + i] - r.x[2 * n + i];
  }
  return out;
}

std::vector<WeightedTwist> default_twist_basis(const Twist& p) {
  constexpr double kTilt = 15.0 * geom::kPi / 180.0;
  std::vector<WeightedTwist> basis;
  basis.reserve(5);
  basis.push_back({p, 4.0});
  Vec2 lin = p.linear();
  Vec2 lp = geom::rotate(lin, kTilt);
  Vec2 lm = geom::rotate(lin, -kTilt);
  basis.push_back({{lp.x, lp.y, p.omega}, 1.0});
  basis.push_back({{lm.x, lm.y, p.omega}, 1.0});
  basis.push_back({{p.vx, p.vy, p.omega * 1.25}, 1.0});
  basis.push_back({{p.vx, p.vy, p.omega * 0.75}, 1.0});
  return basis;
}

double multi_directional_loss(const PushingMode& mode,
                              const std::vector<WeightedTwist>& basis,
                              const LimitSurfaceParams& ls, const Vec2& com,
                              const std::vector<RobotSpec>& robots) {
  double sum = 0.0;
  for (const WeightedTwist& wt : basis) {
    if (geom::twist_norm(wt.twist) < 1e-12) continue;  // degenerate entry
    sum += wt.weight *
           force_feasibility_loss(mode, wt.twist, ls, com, robots).loss;
  }
  return sum;
}

bool positively_spans(const std::vector<Twist>& twists) {
  if (twists.size() < 4) return false;  // R^3 needs at least 4 directions

  // Normalize and check linear rank 3 by Gaussian elimination.
  std::vector<std::array<double, 3>> dirs;
  for (const Twist& t : twists) {
    double n = geom::twist_norm(t);
    if (n < 1e-12) continue;
    dirs.push_back({t.vx / n, t.vy / n, t.omega / n});
  }
  if (dirs.size() < 4) return false;

  {
    std::vector<std::array<double, 3>> m = dirs;
    int rank = 0;
    for (int col = 0; col < 3 && rank < static_cast<int>(m.size()); ++col) {
      int piv = -1;
      double best = 1e-9;
      for (int r = rank; r < static_cast<int>(m.size()); ++r) {
        if (std::abs(m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) > best) {
          best = std::abs(m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]);
          piv = r;
        }
      }
      if (piv < 0) continue;
      std::swap(m[static_cast<std::size_t>(rank)], m[static_cast<std::size_t>(piv)]);
      for (int r = 0; r < static_cast<int>(m.size()); ++r) {
        if (r == rank) continue;
        double f = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
                   m[static_cast<std::size_t>(rank)][static_cast<std::size_t>(col)];
        for (int cc = 0; cc < 3; ++cc)
          m[static_cast<std::size_t>(r)][static_cast<std::size_t>(cc)] -=
              f * m[static_cast<std::size_t>(rank)][static_cast<std::size_t>(cc)];
      }
      ++rank;
    }
    if (rank < 3) return false;
  }

  // Strictly positive combination summing to zero: maximize eps subject to
  // sum((mu_j + eps) d_j) = 0, sum(mu_j) + J*eps = 1, mu_j >= 0, eps >= 0.
  // eps > 0 iff the origin is interior to conv(d_j).
  const std::size_t jn = dirs.size();
  std::vector<double> c(jn + 1, 0.0);
  c[jn] = -1.0;  // maximize eps
  std::vector<std::vector<double>> a_eq(4, std::vector<double>(jn + 1, 0.0));
  std::vector<double> b_eq(4, 0.0);
  for (std::size_t j = 0; j < jn; ++j) {
    a_eq[0][j] = dirs[j][0];
    a_eq[1][j] = dirs[j][1];
    a_eq[2][j] = dirs[j][2];
    a_eq[3][j] = 1.0;
  }
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (const auto& d : dirs) {
    sx += d[0];
    sy += d[1];
    sw += d[2];
  }
  a_eq[0][jn] = sx;
  a_eq[1][jn] = sy;
  a_eq[2][jn] = sw;
  a_eq[3][jn] = static_cast<double>(jn);
  b_eq[3] = 1.0;

  lp::Result r = lp::solve(c, {}, {}, a_eq, b_eq);
  if (r.status != lp::Status::kOptimal) return false;
  return -r.objective > 1e-7;
}

std::uint64_t object_signature(const Polygon& poly,
                               const ObjectIntrinsics& intr) {
  std::uint64_t h = fnv1a("copush-object", 13);
  for (const Vec2& v : poly.vertices()) {
    h = fnv1a_add(h, v.x);
    h = fnv1a_add(h, v.y);
  }
  h = fnv1a_add(h, intr.mass);
  h = fnv1a_add(h, intr.inertia);
  h = fnv1a_add(h, intr.mu_ground);
  h = fnv1a_add(h, intr.mu_contact);
  return h;
}

ContactPoint contact_at(const Polygon& poly, double s) {
  ContactPoint cp;
  double per = poly.perimeter();
  double m = std::fmod(s, per);
  if (m < 0.0) m += per;
  cp.boundary_s = m;
  cp.position = poly.boundary_point(m);
  cp.normal = poly.inward_normal(m);
  cp.tangent = poly.boundary_tangent(m);
  return cp;
}

}  // namespace copush::contact
