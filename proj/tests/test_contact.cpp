#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "copush/contact.hpp"
#include "copush/util.hpp"

using namespace copush;
using namespace copush::contact;
using geom::kPi;
using geom::Polygon;
using geom::Twist;
using geom::Vec2;

namespace {

const ObjectIntrinsics kBox{10.0, 0.21, 0.8, 0.2};

Polygon unit_square() { return geom::make_box_polygon(1.0, 1.0); }

// Random simple polygon: radial star around the origin. Guaranteed simple
// because vertices are sorted by angle.
Polygon random_star(Rng& rng, int n = 8, double rmin = 0.2, double rmax = 0.8) {
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) {
    double a = 2.0 * kPi * i / n + uniform(rng, 0.0, 0.4 / n);
    double r = uniform(rng, rmin, rmax);
    v.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return Polygon(v);
}

// Monte-Carlo oracle for the distance integral behind m_max.
double mc_m_max(const Polygon& poly, const ObjectIntrinsics& intr,
                std::size_t samples, unsigned seed) {
  Rng rng(seed);
  double lo_x = 1e100, hi_x = -1e100, lo_y = 1e100, hi_y = -1e100;
  for (const Vec2& v : poly.vertices()) {
    lo_x = std::min(lo_x, v.x);
    hi_x = std::max(hi_x, v.x);
    lo_y = std::min(lo_y, v.y);
    hi_y = std::max(hi_y, v.y);
  }
  Vec2 com = poly.centroid();
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    Vec2 p{uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y)};
    if (!poly.contains(p)) continue;
    ++hits;
    sum += geom::norm(p - com);
  }
  double mean_dist = sum / static_cast<double>(hits);
  return intr.mu_ground * kGravity * intr.mass * mean_dist;
}

ContactPoint make_contact(Vec2 pos, Vec2 inward_normal) {
  ContactPoint c;
  c.position = pos;
  c.normal = geom::normalized(inward_normal);
  c.tangent = -geom::perp(c.normal);  // normal rotated -90 degrees
  return c;
}

}  // namespace

TEST_CASE("limit surface scales for the reference box") {
  auto ls = limit_surface_params(unit_square(), kBox);
  CHECK(ls.f_max == doctest::Approx(0.8 * 10.0 * kGravity));  // 78.48
  // Unit square: mean distance from center = (sqrt(2) + asinh(1)) / 6.
  double mean = (std::sqrt(2.0) + std::log(1.0 + std::sqrt(2.0))) / 6.0;
  CHECK(ls.m_max == doctest::Approx(ls.f_max * mean).epsilon(1e-6));
  CHECK(ls.m_max == doctest::Approx(30.03).epsilon(1e-3));
}

TEST_CASE("m_max quadrature matches Monte Carlo on random footprints") {
  Rng rng(2024);
  for (int i = 0; i < 4; ++i) {
    Polygon poly = random_star(rng);
    auto ls = limit_surface_params(poly, kBox);
    double mc = mc_m_max(poly, kBox, 2'000'000, 77 + static_cast<unsigned>(i));
    CHECK(ls.m_max == doctest::Approx(mc).epsilon(5e-3));
  }
}

TEST_CASE("friction wrench: pure translation and pure rotation") {
  auto ls = limit_surface_params(unit_square(), kBox);
  auto q1 = friction_wrench({1, 0, 0}, ls);
  CHECK(q1.fx == doctest::Approx(-ls.f_max));
  CHECK(q1.fy == doctest::Approx(0.0));
  CHECK(q1.tau == doctest::Approx(0.0));

  auto q2 = friction_wrench({0, 0, 1}, ls);
  CHECK(q2.fx == doctest::Approx(0.0));
  CHECK(q2.tau == doctest::Approx(-ls.m_max));

  CHECK_THROWS_AS(friction_wrench({0, 0, 0}, ls), std::invalid_argument);
}

TEST_CASE("friction wrench lies on the limit surface and dissipates") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Polygon poly = random_star(rng);
    auto ls = limit_surface_params(poly, kBox);
    for (int i = 0; i < 200; ++i) {
      Twist p{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -3, 3)};
      if (geom::twist_norm(p) < 1e-6) continue;
      auto q = friction_wrench(p, ls);
      // || D1 q || = 1: the wrench sits exactly on the limit surface.
      double m = std::sqrt((q.fx * q.fx + q.fy * q.fy) / (ls.f_max * ls.f_max) +
                           (q.tau * q.tau) / (ls.m_max * ls.m_max));
      CHECK(m == doctest::Approx(1.0).epsilon(1e-9));
      // q . p < 0: friction dissipates.
      CHECK(q.fx * p.vx + q.fy * p.vy + q.tau * p.omega < 0.0);
      // Scale invariance: only the direction of p matters.
      auto q3 = friction_wrench(p * 3.7, ls);
      CHECK(q3.fx == doctest::Approx(q.fx).epsilon(1e-9));
      CHECK(q3.tau == doctest::Approx(q.tau).epsilon(1e-9));
    }
  }
}

TEST_CASE("wrench_from_forces: worked example") {
  // Force (10, 0) applied at (-0.5, 0.2) about com (0, 0): torque is
  // cross((-0.5, 0.2), (10, 0)) = -2.
  PushingMode mode;
  mode.robots = {0};
  mode.contacts = {make_contact({-0.5, 0.2}, {1, 0})};
  std::vector<ContactForce> f = {{10.0, 0.0}};
  auto g = wrench_from_forces(mode, f, {0, 0});
  CHECK(g.fx == doctest::Approx(10.0));
  CHECK(g.fy == doctest::Approx(0.0));
  CHECK(g.tau == doctest::Approx(-2.0));
}

TEST_CASE("feasibility: symmetric two-contact straight push has zero loss") {
  auto ls = limit_surface_params(unit_square(), kBox);
  PushingMode mode;
  mode.robots = {0, 1};
  mode.contacts = {make_contact({-0.5, 0.2}, {1, 0}),
                   make_contact({-0.5, -0.2}, {1, 0})};
  std::vector<RobotSpec> team(2);
  team[0].f_max_robot = team[1].f_max_robot = 100.0;

  auto r = force_feasibility_loss(mode, {1, 0, 0}, ls, {0, 0}, team);
  CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-7));
  // The recovered forces must reproduce -q exactly.
  auto g = wrench_from_forces(mode, r.forces, {0, 0});
  CHECK(g.fx == doctest::Approx(ls.f_max).epsilon(1e-6));
  CHECK(std::abs(g.fy) < 1e-6);
  CHECK(std::abs(g.tau) < 1e-6);
  // Cone constraints hold.
  for (const auto& cf : r.forces) {
    CHECK(cf.normal >= -1e-9);
    CHECK(cf.normal <= 100.0 + 1e-9);
    CHECK(std::abs(cf.tangential) <= ls.mu_contact * cf.normal + 1e-9);
  }
}

TEST_CASE("feasibility: weak robot cannot move the box") {
  auto ls = limit_surface_params(unit_square(), kBox);
  PushingMode mode;
  mode.robots = {0};
  mode.contacts = {make_contact({-0.5, 0.0}, {1, 0})};
  std::vector<RobotSpec> team(1);
  team[0].f_max_robot = 10.0;  // far below f_max = 78.48

  auto r = force_feasibility_loss(mode, {1, 0, 0}, ls, {0, 0}, team);
  // Best the robot can do is 10 N of the needed 78.48 N.
  CHECK(r.loss == doctest::Approx(ls.f_max - 10.0).epsilon(1e-6));
}

TEST_CASE("feasibility LP matches brute-force grid search") {
  auto ls = limit_surface_params(unit_square(), kBox);
  Rng rng(99);
  std::vector<RobotSpec> team(2);
  team[0].f_max_robot = team[1].f_max_robot = 30.0;

  Polygon sq = unit_square();
  for (int trial = 0; trial < 8; ++trial) {
    PushingMode mode;
    mode.robots = {0, 1};
    double s1 = uniform(rng, 0.0, sq.perimeter());
    double s2 = std::fmod(s1 + uniform(rng, 0.8, 2.0), sq.perimeter());
    mode.contacts = {contact_at(sq, s1), contact_at(sq, s2)};
    Twist p{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    if (geom::twist_norm(p) < 0.1) p = {1, 0, 0};

    auto lp_res = force_feasibility_loss(mode, p, ls, {0, 0}, team);

    // Brute force on a 1 N grid (normals 0..30, tangentials on integers
    // inside the cone plus the cone edges).
    auto q = friction_wrench(p, ls);
    double best = 1e100;
    auto contact_wrenches = [&](const ContactPoint& cp) {
      std::vector<std::array<double, 3>> w;
      for (int fn = 0; fn <= 30; ++fn) {
        double cap = ls.mu_contact * fn;
        std::vector<double> fts;
        for (int ft = static_cast<int>(-std::floor(cap));
             ft <= static_cast<int>(std::floor(cap)); ++ft)
          fts.push_back(ft);
        fts.push_back(cap);
        fts.push_back(-cap);
        for (double ft : fts) {
          Vec2 f = static_cast<double>(fn) * cp.normal + ft * cp.tangent;
          w.push_back({f.x, f.y, geom::cross(cp.position, f)});
        }
      }
      return w;
    };
    auto w1 = contact_wrenches(mode.contacts[0]);
    auto w2 = contact_wrenches(mode.contacts[1]);
    for (const auto& a : w1) {
      for (const auto& b : w2) {
        double l = std::abs(a[0] + b[0] + q.fx) + std::abs(a[1] + b[1] + q.fy) +
                   std::abs(a[2] + b[2] + q.tau);
        best = std::min(best, l);
      }
    }

    // LP is a relaxation of the grid: never worse, and the grid can be off
    // by at most its resolution times the operator norm (~2 per 1 N step
    // for two contacts with lever arms < 1 m).
    CHECK(lp_res.loss <= best + 1e-6);
    CHECK(lp_res.loss >= best - 4.5);
  }
}

TEST_CASE("multi-directional loss prefers robust modes") {
  auto ls = limit_surface_params(unit_square(), kBox);
  std::vector<RobotSpec> team(2);
  team[0].f_max_robot = team[1].f_max_robot = 100.0;
  Twist target{1, 0, 0};
  auto basis = default_twist_basis(target);
  REQUIRE(basis.size() == 5);
  CHECK(basis[0].weight == doctest::Approx(4.0));

  // Aligned: both contacts on the trailing edge, pushing along +x.
  PushingMode aligned;
  aligned.robots = {0, 1};
  aligned.contacts = {make_contact({-0.5, 0.25}, {1, 0}),
                      make_contact({-0.5, -0.25}, {1, 0})};
  // Misaligned: contacts on opposite corners pushing crosswise.
  PushingMode crosswise;
  crosswise.robots = {0, 1};
  crosswise.contacts = {make_contact({0.0, 0.5}, {0, -1}),
                        make_contact({0.0, -0.5}, {0, 1})};

  double la = multi_directional_loss(aligned, basis, ls, {0, 0}, team);
  double lc = multi_directional_loss(crosswise, basis, ls, {0, 0}, team);
  CHECK(la < lc);
  // The target itself is exactly feasible for the aligned mode...
  CHECK(force_feasibility_loss(aligned, target, ls, {0, 0}, team).loss ==
        doctest::Approx(0.0).epsilon(1e-7));
  // ...but the +-15 degree perturbations exceed the mu = 0.2 cone
  // (tan 15 > 0.2), so the multi-directional loss is strictly positive:
  // it flags the mode as marginal, which is what the weighting is for.
  CHECK(la > 0.0);
}

TEST_CASE("positive span certificates") {
  auto ok = positively_spans({{1, 0, 0},
                              {-1, 0, 0},
                              {0, 1, 0},
                              {0, -1, 0},
                              {0, 0, 1},
                              {0, 0, -1}});
  CHECK(ok);
  // Minimal positive spanning set (simplex directions).
  CHECK(positively_spans(
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, -1, -1}}));
  // All twists in a halfspace: not spanning.
  CHECK_FALSE(positively_spans({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}}));
  // Rank deficient (planar): not spanning.
  CHECK_FALSE(positively_spans(
      {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}}));
  // Too few directions.
  CHECK_FALSE(positively_spans({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}}));
}

TEST_CASE("object signature is stable and shape-sensitive") {
  Polygon a = unit_square();
  Polygon b = unit_square();
  CHECK(object_signature(a, kBox) == object_signature(b, kBox));
  Polygon c = geom::make_box_polygon(1.0, 1.1);
  CHECK(object_signature(a, kBox) != object_signature(c, kBox));
  ObjectIntrinsics heavier = kBox;
  heavier.mass = 11.0;
  CHECK(object_signature(a, kBox) != object_signature(a, heavier));
}
