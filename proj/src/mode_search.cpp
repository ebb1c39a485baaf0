#include "copush/mode_search.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace copush::modes {

namespace {

using contact::ContactPoint;
using geom::Pose;
using geom::Vec2;

// Largest robot footprint diameter: minimum boundary separation of contacts.
double min_separation(const std::vector<RobotSpec>& team) {
  double d = 0.0;
  for (const RobotSpec& r : team) d = std::max(d, 2.0 * r.radius);
  return d;
}

double wrap_dist(double a, double b, double per) {
  double d = std::abs(a - b);
  return std::min(d, per - d);
}

bool separated(const std::vector<double>& ss, double per, double min_sep) {
  for (std::size_t i = 0; i < ss.size(); ++i)
    for (std::size_t j = i + 1; j < ss.size(); ++j)
      if (wrap_dist(ss[i], ss[j], per) <= min_sep) return false;
  return true;
}

PushingMode mode_from_positions(const Polygon& poly, std::vector<double> ss) {
  std::sort(ss.begin(), ss.end());
  PushingMode mode;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    mode.robots.push_back(static_cast<int>(i));
    mode.contacts.push_back(contact::contact_at(poly, ss[i]));
  }
  return mode;
}

}  // namespace

RolloutResult practical_feasibility(const PushingMode& mode,
                                    const Polygon& poly,
                                    const ObjectIntrinsics& intr,
                                    const std::vector<RobotSpec>& team,
                                    const ArcMotion& arc) {
  using namespace copush::sim;

  WorldModel model;
  ObjectModel om;
  om.poly = poly;
  om.intr = intr;
  om.ls = contact::limit_surface_params(poly, intr);
  model.objects.push_back(om);
  for (std::size_t i = 0; i < mode.contacts.size(); ++i) {
    int slot = mode.robots[i];
    model.robots.push_back(team[static_cast<std::size_t>(slot)]);
  }

  WorldState st;
  st.objects.resize(1);
  st.objects[0].pose = arc.start;
  st.robots.resize(model.robots.size());
  std::vector<int> slot_to_robot;
  for (std::size_t i = 0; i < mode.contacts.size(); ++i) {
    const ContactPoint& cp = mode.contacts[i];
    Vec2 c_world = arc.start.apply(cp.position);
    Vec2 n_in = geom::rotate(cp.normal, arc.start.psi);
    Vec2 center = c_world - n_in * model.robots[i].radius;
    st.robots[i].pose = {center.x, center.y, std::atan2(n_in.y, n_in.x)};
    slot_to_robot.push_back(static_cast<int>(i));
  }

  // Conservative time budget from the robots' velocity caps.
  double v_cap = 1e9, w_cap = 1e9;
  for (const auto& r : model.robots) {
    v_cap = std::min(v_cap, r.v_max);
    w_cap = std::min(w_cap, r.omega_max);
  }
  Gains gains;
  double speed = std::min(v_cap, gains.k_vel * gains.lookahead);
  double est = arc.arc_length() / std::max(0.05, speed) +
               arc.turn_angle() / std::max(0.2, 0.5 * w_cap);
  double timeout = 3.0 * est + 5.0;

  SimParams params;
  FailurePolicy policy;
  const double radius = poly.bounding_radius();

  RolloutResult out;
  std::vector<ControlCommand> cmds(model.robots.size());
  int max_steps = static_cast<int>(timeout / params.dt);
  for (int steps = 0; steps < max_steps; ++steps) {
    if (steps % params.control_every == 0) {
      auto per_robot =
          controller_step(model, st, 0, arc, mode, slot_to_robot, gains);
      for (auto& [rid, c] : per_robot) cmds[static_cast<std::size_t>(rid)] = c;
    }
    step(model, st, cmds, params);
    double dev = geom::dist_point_to_arc(st.objects[0].pose.xy(), arc);
    out.max_deviation = std::max(out.max_deviation, dev);
    if (dev >= policy.delta_f) {
      out.terminal_error = pose_distance(st.objects[0].pose, arc.end, radius);
      return out;  // failure: strayed off the arc
    }
    const Pose& cur = st.objects[0].pose;
    if (geom::norm(cur.xy() - arc.end.xy()) < 0.05 &&
        std::abs(geom::angle_diff(cur.psi, arc.end.psi)) < 0.15) {
      out.success = true;
      out.terminal_error = pose_distance(cur, arc.end, radius);
      return out;
    }
  }
  out.terminal_error =
      pose_distance(st.objects[0].pose, arc.end, radius);
  return out;  // timed out
}

RolloutResult rollout_stages(const Polygon& poly, const ObjectIntrinsics& intr,
                             const std::vector<RobotSpec>& team,
                             const std::vector<StagePlan>& stages) {
  RolloutResult total;
  total.success = true;
  Pose cursor;
  bool first = true;
  for (const StagePlan& st : stages) {
    // Re-anchor each stage arc at the actual pose reached so far, keeping
    // the planned twist and duration (closed-loop execution does the same).
    ArcMotion arc = first ? st.arc
                          : ArcMotion(cursor, st.arc.twist, st.arc.duration);
    first = false;
    std::vector<RobotSpec> slot_team;
    for (int slot : st.mode.robots)
      slot_team.push_back(team[static_cast<std::size_t>(slot) %
                               team.size()]);
    PushingMode local = st.mode;
    for (std::size_t i = 0; i < local.robots.size(); ++i)
      local.robots[i] = static_cast<int>(i);
    RolloutResult r =
        practical_feasibility(local, poly, intr, slot_team, arc);
    total.max_deviation = std::max(total.max_deviation, r.max_deviation);
    total.terminal_error = r.terminal_error;
    if (!r.success) {
      total.success = false;
      return total;
    }
    // Advance the cursor to the planned stage end (tracking succeeded, so
    // the object is within tolerance of it).
    cursor = st.arc.end;
  }
  return total;
}

std::optional<ModeCandidate> generate_mode(const Polygon& poly,
                                           const ObjectIntrinsics& intr,
                                           const std::vector<RobotSpec>& team,
                                           const Twist& p, int budget,
                                           const ModeGenConfig& cfg) {
  if (team.empty() || budget <= 0) return std::nullopt;
  if (geom::twist_norm(p) < 1e-9) return std::nullopt;

  const double per = poly.perimeter();
  const double min_sep = min_separation(team);
  const std::size_t n = team.size();
  // The boundary must fit all contacts with separation.
  if (static_cast<double>(n) * min_sep >= per) return std::nullopt;

  const LimitSurfaceParams ls = contact::limit_surface_params(poly, intr);
  const Vec2 com = poly.centroid();
  const auto basis = contact::default_twist_basis(p);
  const ArcMotion unit_arc(Pose{0, 0, 0}, p, 1.0);

  Rng rng(cfg.seed);
  auto eval = [&](const std::vector<double>& ss) {
    PushingMode m = mode_from_positions(poly, ss);
    return contact::multi_directional_loss(m, basis, ls, com, team);
  };

  std::optional<ModeCandidate> best;
  for (int start = 0; start < budget; ++start) {
    // Random separated start configuration.
    std::vector<double> ss;
    bool ok = false;
    for (int tries = 0; tries < 64 && !ok; ++tries) {
      ss.clear();
      for (std::size_t i = 0; i < n; ++i) ss.push_back(uniform(rng, 0.0, per));
      ok = separated(ss, per, min_sep);
    }
    if (!ok) continue;

    double cost = eval(ss);
    double scale = cfg.sigma_frac * per;
    for (int round = 0; round < cfg.rounds; ++round) {
      bool improved = false;
      for (int prop = 0; prop < 8 && !improved; ++prop) {
        // Alternate joint moves with single-contact moves; the latter walk
        // a contact around corners without disturbing the rest.
        std::vector<double> cand = ss;
        if (prop % 2 == 0) {
          std::size_t k = uniform_index(rng, n);
          cand[k] = std::fmod(cand[k] + gaussian(rng) * scale, per);
          if (cand[k] < 0) cand[k] += per;
        } else {
          for (double& s : cand) {
            s = std::fmod(s + gaussian(rng) * scale, per);
            if (s < 0) s += per;
          }
        }
        if (!separated(cand, per, min_sep)) continue;
        double c2 = eval(cand);
        if (c2 < cost - 1e-12) {
          ss = cand;
          cost = c2;
          improved = true;
        }
      }
      if (!improved) scale *= 0.5;
    }

    // Hard gate: the target twist itself must be exactly feasible.
    PushingMode mode = mode_from_positions(poly, ss);
    auto feas = contact::force_feasibility_loss(mode, p, ls, com, team);
    if (feas.loss > cfg.feas_tol) continue;

    // Rollouts are expensive; only run them for candidates that would
    // improve on the best accepted so far.
    if (best && cost >= best->loss) continue;

    ModeCandidate cand;
    cand.mode = mode;
    cand.twist = p;
    cand.loss = cost;
    cand.force_feasible = true;
    if (cfg.verify_rollout) {
      RolloutResult r = practical_feasibility(mode, poly, intr, team, unit_arc);
      if (!r.success) continue;
      cand.practically_feasible = true;
      cand.tracking_error = r.terminal_error;
    }
    best = cand;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Library
// ---------------------------------------------------------------------------

ModeKey quantize_twist(std::uint64_t signature, const Twist& p) {
  ModeKey k;
  k.signature = signature;
  double az = std::atan2(p.vy, p.vx);  // 0 for pure rotations
  int az_bin = static_cast<int>(
      std::floor((az + geom::kPi) / (2.0 * geom::kPi / 16.0)));
  k.az_bin = std::clamp(az_bin, 0, 15);
  double lin = geom::norm(p.linear());
  double ratio = (lin + std::abs(p.omega)) < 1e-12
                     ? 0.0
                     : p.omega / (lin + std::abs(p.omega));
  int om_bin = static_cast<int>(std::floor((ratio + 1.0) / 2.0 * 5.0));
  k.om_bin = std::clamp(om_bin, 0, 4);
  return k;
}

void ModeLibrary::insert(std::uint64_t signature, const ModeCandidate& cand) {
  if (!cand.practically_feasible)
    throw std::invalid_argument("mode library: candidate not verified");
  ModeKey k = quantize_twist(signature, cand.twist);
  auto it = entries_.find(k);
  if (it == entries_.end() || cand.loss < it->second.loss)
    entries_[k] = cand;
}

std::optional<ModeCandidate> ModeLibrary::query(std::uint64_t signature,
                                                const Twist& p) const {
  auto it = entries_.find(quantize_twist(signature, p));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ModeLibrary::serialize() const {
  nlohmann::json root;
  root["format"] = "copush-modelib-1";
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [key, cand] : entries_) {
    nlohmann::json e;
    e["signature"] = key.signature;
    e["az_bin"] = key.az_bin;
    e["om_bin"] = key.om_bin;
    e["twist"] = {cand.twist.vx, cand.twist.vy, cand.twist.omega};
    e["loss"] = cand.loss;
    e["tracking_error"] = cand.tracking_error;
    e["robots"] = cand.mode.robots;
    nlohmann::json contacts = nlohmann::json::array();
    for (const auto& c : cand.mode.contacts) {
      contacts.push_back({{"s", c.boundary_s},
                          {"pos", {c.position.x, c.position.y}},
                          {"normal", {c.normal.x, c.normal.y}},
                          {"tangent", {c.tangent.x, c.tangent.y}}});
    }
    e["contacts"] = contacts;
    list.push_back(e);
  }
  root["entries"] = list;
  return root.dump(2);
}

ModeLibrary ModeLibrary::deserialize(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text);
  if (root.value("format", "") != "copush-modelib-1")
    throw std::runtime_error("mode library: unknown format");
  ModeLibrary lib;
  for (const auto& e : root["entries"]) {
    ModeCandidate cand;
    cand.twist = {e["twist"][0], e["twist"][1], e["twist"][2]};
    cand.loss = e["loss"];
    cand.force_feasible = true;  // only verified candidates are stored
    cand.practically_feasible = true;
    cand.tracking_error = e["tracking_error"];
    cand.mode.robots = e["robots"].get<std::vector<int>>();
    for (const auto& c : e["contacts"]) {
      ContactPoint cp;
      cp.boundary_s = c["s"];
      cp.position = {c["pos"][0], c["pos"][1]};
      cp.normal = {c["normal"][0], c["normal"][1]};
      cp.tangent = {c["tangent"][0], c["tangent"][1]};
      cand.mode.contacts.push_back(cp);
    }
    lib.insert(e["signature"].get<std::uint64_t>(), cand);
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Team sufficiency (declared in contact.hpp)
// ---------------------------------------------------------------------------

}  // namespace copush::modes

namespace copush::contact {

SufficiencyResult mode_sufficient(const std::vector<RobotSpec>& team,
                                  const Polygon& poly,
                                  const ObjectIntrinsics& intr,
                                  const SufficiencyConfig& cfg) {
  using geom::kPi;

  // Deterministic candidate directions: 8 planar headings, both pure
  // rotations, then heading/rotation blends.
  std::vector<Twist> candidates;
  for (int i = 0; i < 8; ++i) {
    double a = 2.0 * kPi * i / 8.0;
    candidates.push_back({std::cos(a), std::sin(a), 0.0});
  }
  candidates.push_back({0, 0, 1});
  candidates.push_back({0, 0, -1});
  for (int i = 0; i < 4; ++i) {
    double a = 2.0 * kPi * i / 4.0 + kPi / 4.0;
    candidates.push_back({std::cos(a), std::sin(a), 0.7});
    candidates.push_back({std::cos(a), std::sin(a), -0.7});
  }

  SufficiencyResult out;
  std::vector<Twist> feasible;
  int tried = 0;
  for (const Twist& cand : candidates) {
    if (tried++ >= cfg.max_candidates) break;
    modes::ModeGenConfig mg;
    mg.seed = cfg.seed + static_cast<unsigned>(tried) * 7919u;
    mg.verify_rollout = cfg.verify_rollout;
    auto res =
        modes::generate_mode(poly, intr, team, cand, cfg.mode_budget, mg);
    if (!res) continue;
    double n = geom::twist_norm(cand);
    out.primitives.push_back({cand * (1.0 / n), res->mode});
    feasible.push_back(cand);
    if (feasible.size() >= 4 && positively_spans(feasible)) {
      out.sufficient = true;
      return out;
    }
  }
  out.sufficient = positively_spans(feasible);
  return out;
}

}  // namespace copush::contact
