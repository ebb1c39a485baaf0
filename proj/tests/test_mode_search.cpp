#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "copush/contact.hpp"
#include "copush/mode_search.hpp"

using namespace copush;
using namespace copush::modes;

namespace {

geom::Polygon unit_square() { return geom::make_box_polygon(1.0, 1.0); }

contact::ObjectIntrinsics box_intrinsics() {
  contact::ObjectIntrinsics intr;
  intr.mass = 10.0;
  intr.inertia = 10.0 / 12.0 * 2.0;
  intr.mu_ground = 0.8;
  intr.mu_contact = 0.2;
  return intr;
}

std::vector<RobotSpec> robots(int n, double f_max = 100.0) {
  std::vector<RobotSpec> team(static_cast<std::size_t>(n));
  for (auto& r : team) r.f_max_robot = f_max;
  return team;
}

// Symmetric two-contact mode on the edge opposite to +x motion.
PushingMode trailing_edge_mode(const geom::Polygon& poly, double offset) {
  PushingMode mode;
  mode.robots = {0, 1};
  double s0 = poly.closest_boundary_s({-0.5, -offset});
  double s1 = poly.closest_boundary_s({-0.5, offset});
  mode.contacts = {contact::contact_at(poly, s0),
                   contact::contact_at(poly, s1)};
  return mode;
}

}  // namespace

TEST_CASE("generate_mode finds a zero-loss trailing-edge mode") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  auto team = robots(2);
  geom::Twist p{1, 0, 0};

  auto res = generate_mode(poly, intr, team, p, 8);
  REQUIRE(res.has_value());
  CHECK(res->force_feasible);
  CHECK(res->practically_feasible);

  // Re-evaluate the target-twist LP loss independently.
  auto ls = contact::limit_surface_params(poly, intr);
  auto feas = contact::force_feasibility_loss(res->mode, p, ls,
                                              poly.centroid(), team);
  CHECK(feas.loss <= 1e-6);

  // Sourcing the 78.5 N of +x friction needs a trailing-edge normal: the
  // other edges contribute at most mu_c * 2 * 100 N = 40 N of fx. (The
  // second contact may legally sit elsewhere — under the multi-directional
  // basis an off-edge contact hedges one rotation direction at zero cost.)
  REQUIRE(res->mode.contacts.size() == 2);
  bool trailing = false;
  for (const auto& c : res->mode.contacts)
    trailing = trailing ||
               (c.normal.x > 0.99 && std::abs(c.position.x + 0.5) < 1e-9);
  CHECK(trailing);

  // Slots are 0..N-1 and contacts are sorted by boundary coordinate.
  CHECK(res->mode.robots[0] == 0);
  CHECK(res->mode.robots[1] == 1);
  CHECK(res->mode.contacts[0].boundary_s <= res->mode.contacts[1].boundary_s);

  // Pairwise boundary separation of at least one footprint diameter.
  double per = poly.perimeter();
  double d = std::abs(res->mode.contacts[0].boundary_s -
                      res->mode.contacts[1].boundary_s);
  d = std::min(d, per - d);
  CHECK(d >= 2.0 * team[0].radius);
}

TEST_CASE("generate_mode degenerate inputs give none") {
  auto poly = unit_square();
  auto intr = box_intrinsics();

  CHECK_FALSE(generate_mode(poly, intr, robots(2), {1, 0, 0}, 0).has_value());
  CHECK_FALSE(
      generate_mode(poly, intr, robots(2, 0.0), {1, 0, 0}, 8).has_value());
  CHECK_FALSE(generate_mode(poly, intr, robots(2), {0, 0, 0}, 8).has_value());
}

TEST_CASE("generate_mode budget is monotone") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  auto team = robots(2);
  geom::Twist p{0, -1, 0};

  ModeGenConfig cfg;
  cfg.verify_rollout = false;  // isolates the search behavior
  auto small = generate_mode(poly, intr, team, p, 2, cfg);
  auto large = generate_mode(poly, intr, team, p, 6, cfg);
  REQUIRE(large.has_value());
  if (small) CHECK(large->loss <= small->loss + 1e-12);
}

TEST_CASE("practical_feasibility tracks a straight symmetric push") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  auto team = robots(2);
  auto mode = trailing_edge_mode(poly, 0.2);

  geom::ArcMotion arc({0, 0, 0}, {1, 0, 0}, 1.0);
  auto r = practical_feasibility(mode, poly, intr, team, arc);
  CHECK(r.success);
  CHECK(r.max_deviation < 0.3);
  CHECK(r.terminal_error < 0.05 + poly.bounding_radius() * 0.15);
}

TEST_CASE("practical_feasibility zero-length arc is trivially tracked") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  auto team = robots(2);
  auto mode = trailing_edge_mode(poly, 0.2);

  geom::ArcMotion arc({1, 2, 0.5}, {0, 0, 0}, 1.0);
  CHECK(practical_feasibility(mode, poly, intr, team, arc).success);
}

TEST_CASE("practical_feasibility rejects an impossible rotation") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  intr.mu_contact = 0.0;  // frictionless point contact
  auto team = robots(1);

  PushingMode mode;
  mode.robots = {0};
  mode.contacts = {contact::contact_at(poly, 0.1)};
  geom::ArcMotion arc({0, 0, 0}, {0, 0, 1}, 0.5);
  CHECK_FALSE(practical_feasibility(mode, poly, intr, team, arc).success);
}

TEST_CASE("rollout_stages chains verified stages") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  auto team = robots(2);

  geom::ArcMotion first({0, 0, 0}, {1, 0, 0}, 0.6);
  std::vector<StagePlan> stages;
  stages.push_back({first, trailing_edge_mode(poly, 0.2)});

  // Second stage pushes +y; its trailing edge is the bottom one.
  PushingMode up;
  up.robots = {0, 1};
  up.contacts = {
      contact::contact_at(poly, poly.closest_boundary_s({-0.2, -0.5})),
      contact::contact_at(poly, poly.closest_boundary_s({0.2, -0.5}))};
  geom::ArcMotion second(first.end, {0, 1, 0}, 0.6);
  stages.push_back({second, up});

  auto r = rollout_stages(poly, intr, team, stages);
  CHECK(r.success);
  CHECK(r.max_deviation < 0.3);
}

TEST_CASE("mode_sufficient certifies 3x100N on the square") {
  auto team = robots(3);
  auto res = contact::mode_sufficient(team, unit_square(), box_intrinsics());
  CHECK(res.sufficient);
  CHECK(res.primitives.size() >= 4);
  // The certificate twists positively span by construction; re-check.
  std::vector<geom::Twist> twists;
  for (const auto& pr : res.primitives) twists.push_back(pr.twist);
  CHECK(contact::positively_spans(twists));
  // Every certified mode re-evaluates to zero loss for its twist.
  auto poly = unit_square();
  auto ls = contact::limit_surface_params(poly, box_intrinsics());
  for (const auto& pr : res.primitives) {
    auto feas = contact::force_feasibility_loss(pr.mode, pr.twist, ls,
                                                poly.centroid(), team);
    CHECK(feas.loss <= 1e-6);
  }
}

TEST_CASE("mode_sufficient rejects an underpowered robot") {
  // One 10 N robot cannot cancel the 78.5 N ground friction force.
  auto team = robots(1, 10.0);
  contact::SufficiencyConfig cfg;
  cfg.verify_rollout = false;
  auto res = contact::mode_sufficient(team, unit_square(), box_intrinsics(), cfg);
  CHECK_FALSE(res.sufficient);
  CHECK(res.primitives.empty());
}

TEST_CASE("mode_sufficient with zero candidate budget is false") {
  contact::SufficiencyConfig cfg;
  cfg.max_candidates = 0;
  auto res =
      contact::mode_sufficient(robots(3), unit_square(), box_intrinsics(), cfg);
  CHECK_FALSE(res.sufficient);
}

TEST_CASE("mode library quantization and round trip") {
  auto poly = unit_square();
  auto intr = box_intrinsics();
  auto team = robots(2);
  auto sig = contact::object_signature(poly, intr);

  auto cand = generate_mode(poly, intr, team, {1, 0, 0}, 8);
  REQUIRE(cand.has_value());

  ModeLibrary lib;
  lib.insert(sig, *cand);
  CHECK(lib.size() == 1);

  // Identical twist hits; rotation by less than half an azimuth bin
  // (11.25 deg) stays in the same cell.
  CHECK(lib.query(sig, {1, 0, 0}).has_value());
  double a = 8.0 * geom::kPi / 180.0;
  auto near = lib.query(sig, {std::cos(a), std::sin(a), 0});
  REQUIRE(near.has_value());
  CHECK(near->mode.contacts[0].boundary_s ==
        cand->mode.contacts[0].boundary_s);

  // A quarter-turn away lands in an empty cell; so does another object.
  CHECK_FALSE(lib.query(sig, {0, 1, 0}).has_value());
  CHECK_FALSE(lib.query(sig + 1, {1, 0, 0}).has_value());

  // Serialization round trip preserves entries.
  ModeLibrary lib2 = ModeLibrary::deserialize(lib.serialize());
  CHECK(lib2.size() == lib.size());
  auto back = lib2.query(sig, {1, 0, 0});
  REQUIRE(back.has_value());
  CHECK(back->loss == doctest::Approx(cand->loss));
  REQUIRE(back->mode.contacts.size() == cand->mode.contacts.size());
  CHECK(back->mode.contacts[1].boundary_s ==
        doctest::Approx(cand->mode.contacts[1].boundary_s));

  // Unverified candidates are refused.
  ModeCandidate raw = *cand;
  raw.practically_feasible = false;
  CHECK_THROWS_AS(lib.insert(sig, raw), std::invalid_argument);
}
