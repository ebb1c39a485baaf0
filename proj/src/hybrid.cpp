#include "copush/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "copush/lp.hpp"
#include "copush/util.hpp"

namespace copush::hybrid {

namespace {

constexpr double kZero = 1e-9;

bool zero_rel(const Pose& rel) {
  return std::abs(rel.x) < kZero && std::abs(rel.y) < kZero &&
         std::abs(rel.psi) < kZero;
}

bool stage_degenerate(const Keyframe& a, const Keyframe& b) {
  return zero_rel(relative_pose(a.pose, b.pose));
}

// Effective arc measure: positional length plus the boundary sweep of the
// rotation, so pure rotations are thresholded and split like translations.
double effective_length(const ArcMotion& arc, const Polygon& poly) {
  return arc.arc_length() + poly.bounding_radius() * arc.turn_angle();
}

bool pose_collides(const Pose& pose, const SearchContext& ctx) {
  for (const Vec2& v : ctx.poly.vertices()) {
    Vec2 w = pose.apply(v);
    if (w.x < ctx.ws_min.x || w.x > ctx.ws_max.x || w.y < ctx.ws_min.y ||
        w.y > ctx.ws_max.y)
      return true;
  }
  for (const Polygon& obs : ctx.obstacles)
    if (geom::collide(ctx.poly, pose, obs, Pose{})) return true;
  return false;
}

bool arc_collides(const ArcMotion& arc, const SearchContext& ctx) {
  double len = effective_length(arc, ctx.poly);
  int n = std::clamp(static_cast<int>(std::ceil(len / 0.05)), 1, 400);
  for (int i = 0; i <= n; ++i)
    if (pose_collides(arc.at(arc.duration * i / n), ctx)) return true;
  return false;
}

// Worst per-robot boundary travel between two consecutive modes, in seconds.
double switch_time(const PushingMode& a, const PushingMode& b,
                   const Polygon& poly, const std::vector<RobotSpec>& team) {
  double per = poly.perimeter();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.robots.size(); ++i) {
    for (std::size_t j = 0; j < b.robots.size(); ++j) {
      if (b.robots[j] != a.robots[i]) continue;
      double d = std::abs(a.contacts[i].boundary_s - b.contacts[j].boundary_s);
      double travel = std::min(d, per - d);
      double v_max =
          team[static_cast<std::size_t>(a.robots[i]) % team.size()].v_max;
      worst = std::max(worst, travel / std::max(1e-9, v_max));
    }
  }
  return worst;
}

// First stage (index into stages, excluding the terminal keyframe) that
// moves the object but has no mode yet; -1 if the plan is complete.
int first_unassigned(const HybridPlan& plan) {
  for (std::size_t l = 0; l + 1 < plan.stages.size(); ++l) {
    if (stage_degenerate(plan.stages[l], plan.stages[l + 1])) continue;
    if (!plan.stages[l].mode) return static_cast<int>(l);
  }
  return -1;
}

// Replace stages[l..l+1] with a fragment spanning the same poses. The
// fragment's terminal keyframe is dropped so the original keyframe at l+1
// (and with it the exact stage boundary) survives; primitive-chain
// fragments may end within O(epsilon) of it, which the full-plan rollout
// re-verifies.
HybridPlan splice(const HybridPlan& plan, int l,
                  const std::vector<Keyframe>& frag) {
  HybridPlan child;
  child.stages.reserve(plan.stages.size() + frag.size() - 2);
  child.stages.insert(child.stages.end(), plan.stages.begin(),
                      plan.stages.begin() + l);
  child.stages.insert(child.stages.end(), frag.begin(), frag.end() - 1);
  child.stages.insert(child.stages.end(), plan.stages.begin() + l + 1,
                      plan.stages.end());
  return child;
}

// Gate a candidate fragment before splicing: keyframe count, matching
// endpoints, collision-free sub-arcs, a zero feasibility certificate per
// mode, and (for unverified sources) a closed-loop rollout per stage.
// Certified twists are refreshed to the actual sub-arc twists.
bool fragment_usable(std::vector<Keyframe>& frag, const Pose& from,
                     const Pose& to, const SearchContext& ctx,
                     const SearchConfig& cfg, bool need_rollout) {
  if (frag.size() < 2) return false;
  if (!zero_rel(relative_pose(frag.front().pose, from))) return false;
  if (!zero_rel(relative_pose(frag.back().pose, to))) return false;
  const Vec2 com = ctx.poly.centroid();
  for (std::size_t j = 0; j + 1 < frag.size(); ++j) {
    if (stage_degenerate(frag[j], frag[j + 1])) continue;
    if (!frag[j].mode) return false;
    ArcMotion sub = geom::arc_from_poses(frag[j].pose, frag[j + 1].pose);
    if (arc_collides(sub, ctx)) return false;
    auto fr = contact::force_feasibility_loss(*frag[j].mode, sub.twist,
                                              ctx.ls, com, ctx.team);
    if (fr.loss > cfg.feas_tol) return false;
    if (need_rollout) {
      auto r = modes::practical_feasibility(*frag[j].mode, ctx.poly, ctx.intr,
                                            ctx.team, sub);
      if (!r.success) return false;
    }
    frag[j].mode_twist = sub.twist;
  }
  return true;
}

// Intermediate keyframe for a colliding arc: the timed-path pose halfway
// (by index) between the projections of the two stage endpoints, falling
// back to the arc midpoint when the path gives nothing usable.
Pose split_anchor(const Pose& sa, const Pose& sb, const ArcMotion& arc,
                  const SearchContext& ctx) {
  if (ctx.anchors.size() >= 3) {
    double rad = ctx.poly.bounding_radius();
    auto nearest_idx = [&](const Pose& p) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t i = 0; i < ctx.anchors.size(); ++i) {
        const Pose& a = ctx.anchors[i];
        double d = geom::norm(a.xy() - p.xy()) +
                   rad * std::abs(geom::angle_diff(a.psi, p.psi));
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      return best;
    };
    std::size_t ia = nearest_idx(sa), ib = nearest_idx(sb);
    if (ia > ib) std::swap(ia, ib);
    const Pose& cand = ctx.anchors[(ia + ib) / 2];
    if (!zero_rel(relative_pose(sa, cand)) &&
        !zero_rel(relative_pose(sb, cand)))
      return cand;
  }
  return arc.at(arc.duration * 0.5);
}

// Full verification of a complete plan: every moving stage has a mode with
// a zero feasibility certificate and a collision-free arc, and the chained
// closed-loop rollout tracks end to end.
bool verify_plan(const HybridPlan& plan, const SearchContext& ctx,
                 const SearchConfig& cfg) {
  const Vec2 com = ctx.poly.centroid();
  std::vector<modes::StagePlan> sp;
  for (std::size_t l = 0; l + 1 < plan.stages.size(); ++l) {
    if (stage_degenerate(plan.stages[l], plan.stages[l + 1])) continue;
    const Keyframe& kf = plan.stages[l];
    if (!kf.mode) return false;
    ArcMotion arc = geom::arc_from_poses(kf.pose, plan.stages[l + 1].pose);
    if (arc_collides(arc, ctx)) return false;
    Twist cert = geom::twist_norm(kf.mode_twist) > kZero ? kf.mode_twist
                                                         : arc.twist;
    auto fr =
        contact::force_feasibility_loss(*kf.mode, cert, ctx.ls, com, ctx.team);
    if (fr.loss > cfg.feas_tol) return false;
    sp.push_back({arc, *kf.mode});
  }
  if (sp.empty()) return true;  // degenerate segment: nothing to push
  return modes::rollout_stages(ctx.poly, ctx.intr, ctx.team, sp).success;
}

struct Node {
  HybridPlan plan;
  double cost = 0.0;
  std::size_t stages = 0;
  long seq = 0;
};

struct NodeWorse {
  bool operator()(const Node& a, const Node& b) const {
    if (a.cost != b.cost) return a.cost > b.cost;
    if (a.stages != b.stages) return a.stages > b.stages;
    return a.seq > b.seq;
  }
};

}  // namespace

Pose relative_pose(const Pose& from, const Pose& to) {
  Vec2 d = from.unapply(to.xy());
  return {d.x, d.y, geom::angle_diff(to.psi, from.psi)};
}

Pose compose_pose(const Pose& base, const Pose& rel) {
  Vec2 w = base.apply(rel.xy());
  return {w.x, w.y, geom::wrap_angle(base.psi + rel.psi)};
}

bool plan_complete(const HybridPlan& plan) {
  return !plan.stages.empty() && first_unassigned(plan) < 0;
}

double plan_cost(const HybridPlan& plan, const SearchContext& ctx,
                 const SearchConfig& cfg) {
  const Vec2 com = ctx.poly.centroid();
  double cost = 0.0;
  const PushingMode* prev = nullptr;
  for (std::size_t l = 0; l + 1 < plan.stages.size(); ++l) {
    const Keyframe& kf = plan.stages[l];
    if (stage_degenerate(kf, plan.stages[l + 1])) continue;
    ArcMotion arc = geom::arc_from_poses(kf.pose, plan.stages[l + 1].pose);
    cost += cfg.w_n * arc.arc_length() / std::max(1e-9, cfg.push_speed);
    if (kf.mode) {
      cost += contact::multi_directional_loss(
          *kf.mode, contact::default_twist_basis(arc.twist), ctx.ls, com,
          ctx.team);
      if (prev) cost += cfg.w_s * switch_time(*prev, *kf.mode, ctx.poly,
                                              ctx.team);
      prev = &*kf.mode;
    } else {
      prev = nullptr;  // unassigned: optimistic zero loss, zero switch
    }
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Plan library
// ---------------------------------------------------------------------------

PlanLibrary::Key PlanLibrary::make_key(std::uint64_t signature,
                                       std::size_t team_size,
                                       const Pose& rel) {
  constexpr double kBin = 0.02;  // m and rad; storage key only
  return {signature, static_cast<std::uint64_t>(team_size),
          std::lround(rel.x / kBin), std::lround(rel.y / kBin),
          std::lround(rel.psi / kBin)};
}

void PlanLibrary::insert(std::uint64_t signature, std::size_t team_size,
                         const HybridPlan& plan) {
  if (plan.stages.size() < 2 || !plan_complete(plan))
    throw std::invalid_argument(
        "plan library: only complete plans may be stored");
  const Pose& from = plan.stages.front().pose;
  Entry entry;
  entry.rel = relative_pose(from, plan.stages.back().pose);
  entry.cost = plan.cost;
  entry.stages.reserve(plan.stages.size());
  for (const Keyframe& kf : plan.stages)
    entry.stages.push_back(
        {relative_pose(from, kf.pose), kf.mode, kf.mode_twist});
  Key key = make_key(signature, team_size, entry.rel);
  auto it = entries_.find(key);
  if (it == entries_.end() || plan.cost < it->second.cost)
    entries_[key] = std::move(entry);
}

std::optional<HybridPlan> PlanLibrary::recompose(const Entry& entry,
                                                 const Pose& from,
                                                 const Pose& to) const {
  HybridPlan plan;
  plan.cost = entry.cost;
  plan.stages.reserve(entry.stages.size());
  for (const Keyframe& kf : entry.stages)
    plan.stages.push_back({compose_pose(from, kf.pose), kf.mode,
                           kf.mode_twist});
  plan.stages.back().pose = to;  // snap the O(tol) residual
  return plan;
}

std::optional<HybridPlan> PlanLibrary::query(std::uint64_t signature,
                                             std::size_t team_size,
                                             const Pose& from, const Pose& to,
                                             double tol) const {
  Pose rel = relative_pose(from, to);
  const Entry* best = nullptr;
  for (const auto& [key, entry] : entries_) {
    if (key.signature != signature ||
        key.team != static_cast<std::uint64_t>(team_size))
      continue;
    if (std::abs(entry.rel.x - rel.x) > tol ||
        std::abs(entry.rel.y - rel.y) > tol ||
        std::abs(geom::angle_diff(entry.rel.psi, rel.psi)) > tol)
      continue;
    if (!best || entry.cost < best->cost) best = &entry;
  }
  if (!best) return std::nullopt;
  return recompose(*best, from, to);
}

std::optional<HybridPlan> PlanLibrary::nearest(std::uint64_t signature,
                                               std::size_t team_size,
                                               const Pose& from,
                                               const Pose& to,
                                               double radius) const {
  Pose rel = relative_pose(from, to);
  const Entry* best = nullptr;
  double best_d = radius;
  for (const auto& [key, entry] : entries_) {
    if (key.signature != signature ||
        key.team != static_cast<std::uint64_t>(team_size))
      continue;
    double d = geom::norm(entry.rel.xy() - rel.xy()) +
               std::abs(geom::angle_diff(entry.rel.psi, rel.psi));
    if (d <= best_d) {
      best_d = d;
      best = &entry;
    }
  }
  if (!best) return std::nullopt;
  return recompose(*best, from, to);
}

std::string PlanLibrary::serialize() const {
  nlohmann::json root;
  root["format"] = "copush-planlib-1";
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [key, entry] : entries_) {
    nlohmann::json e;
    e["signature"] = key.signature;
    e["team"] = key.team;
    e["rel"] = {entry.rel.x, entry.rel.y, entry.rel.psi};
    e["cost"] = entry.cost;
    nlohmann::json stages = nlohmann::json::array();
    for (const Keyframe& kf : entry.stages) {
      nlohmann::json s;
      s["pose"] = {kf.pose.x, kf.pose.y, kf.pose.psi};
      s["twist"] = {kf.mode_twist.vx, kf.mode_twist.vy, kf.mode_twist.omega};
      if (kf.mode) {
        nlohmann::json m;
        m["robots"] = kf.mode->robots;
        nlohmann::json contacts = nlohmann::json::array();
        for (const auto& c : kf.mode->contacts) {
          contacts.push_back({{"s", c.boundary_s},
                              {"pos", {c.position.x, c.position.y}},
                              {"normal", {c.normal.x, c.normal.y}},
                              {"tangent", {c.tangent.x, c.tangent.y}}});
        }
        m["contacts"] = contacts;
        s["mode"] = m;
      } else {
        s["mode"] = nullptr;
      }
      stages.push_back(s);
    }
    e["stages"] = stages;
    list.push_back(e);
  }
  root["entries"] = list;
  return root.dump(2);
}

PlanLibrary PlanLibrary::deserialize(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text);
  if (root.value("format", "") != "copush-planlib-1")
    throw std::runtime_error("plan library: unknown format");
  PlanLibrary lib;
  for (const auto& e : root["entries"]) {
    HybridPlan plan;
    plan.cost = e["cost"];
    for (const auto& s : e["stages"]) {
      Keyframe kf;
      kf.pose = {s["pose"][0], s["pose"][1], s["pose"][2]};
      kf.mode_twist = {s["twist"][0], s["twist"][1], s["twist"][2]};
      if (!s["mode"].is_null()) {
        PushingMode mode;
        mode.robots = s["mode"]["robots"].get<std::vector<int>>();
        for (const auto& c : s["mode"]["contacts"]) {
          contact::ContactPoint cp;
          cp.boundary_s = c["s"];
          cp.position = {c["pos"][0], c["pos"][1]};
          cp.normal = {c["normal"][0], c["normal"][1]};
          cp.tangent = {c["tangent"][0], c["tangent"][1]};
          mode.contacts.push_back(cp);
        }
        kf.mode = std::move(mode);
      }
      plan.stages.push_back(std::move(kf));
    }
    lib.insert(e["signature"].get<std::uint64_t>(),
               e["team"].get<std::size_t>(), plan);
  }
  return lib;
}

std::vector<std::vector<Keyframe>> LibraryProposer::propose(
    std::uint64_t signature, std::size_t team_size, const Pose& from,
    const Pose& to) const {
  auto hit = lib_->nearest(signature, team_size, from, to, radius_);
  if (!hit) return {};
  return {hit->stages};
}

// ---------------------------------------------------------------------------
// Fragment generators
// ---------------------------------------------------------------------------

std::optional<HybridPlan> iter_samp(const Pose& s_a, const Pose& s_b,
                                    const SearchContext& ctx,
                                    const SearchConfig& cfg) {
  ArcMotion arc = geom::arc_from_poses(s_a, s_b);
  if (zero_rel(relative_pose(s_a, s_b))) return std::nullopt;
  Rng rng(cfg.seed);
  double rad = std::max(ctx.poly.bounding_radius(), 0.05);
  double sigma0 = cfg.sigma0_frac * effective_length(arc, ctx.poly);
  for (int h = 2; h <= cfg.h_max; ++h) {
    for (int r = 0; r < std::max(1, cfg.iter_rounds); ++r) {
      double sigma = sigma0 * std::pow(0.7, r);
      std::vector<Pose> kf(static_cast<std::size_t>(h) + 1);
      kf.front() = s_a;
      kf.back() = s_b;
      for (int j = 1; j < h; ++j) {
        Pose base = arc.at(arc.duration * j / h);
        if (r == 0) {
          kf[static_cast<std::size_t>(j)] = base;  // round 0: unperturbed
        } else {
          kf[static_cast<std::size_t>(j)] = {
              base.x + sigma * gaussian(rng),
              base.y + sigma * gaussian(rng),
              geom::wrap_angle(base.psi + sigma / rad * gaussian(rng))};
        }
      }
      std::vector<Keyframe> frag;
      bool ok = true;
      for (int j = 0; j < h && ok; ++j) {
        const Pose& a = kf[static_cast<std::size_t>(j)];
        const Pose& b = kf[static_cast<std::size_t>(j) + 1];
        if (zero_rel(relative_pose(a, b))) {
          frag.push_back({a, std::nullopt, {}});
          continue;
        }
        ArcMotion sub = geom::arc_from_poses(a, b);
        if (arc_collides(sub, ctx)) {
          ok = false;
          break;
        }
        modes::ModeGenConfig mg;
        mg.feas_tol = cfg.feas_tol;
        mg.seed = cfg.seed + 1000003u * static_cast<unsigned>(h) +
                  7919u * static_cast<unsigned>(r) +
                  97u * static_cast<unsigned>(j);
        auto cand = modes::generate_mode(ctx.poly, ctx.intr, ctx.team,
                                         sub.twist, cfg.mode_budget, mg);
        if (!cand || !cand->practically_feasible) {
          ok = false;
          break;
        }
        frag.push_back({a, std::move(cand->mode), cand->twist});
      }
      if (ok) {
        frag.push_back({s_b, std::nullopt, {}});
        HybridPlan out;
        out.stages = std::move(frag);
        return out;
      }
    }
  }
  return std::nullopt;
}

HybridPlan seq_arc_approx(const ArcMotion& arc,
                          const std::vector<contact::PrimitiveTwist>& p_star) {
  const std::size_t n = p_star.size();
  if (n == 0)
    throw std::logic_error(
        "primitive chaining requires a non-empty certificate set");
  // min sum(lambda) s.t. sum lambda_j * primitive_j = arc.twist, lambda >= 0.
  // A basic optimum has at most three nonzero coefficients (three rows).
  std::vector<double> c(n, 1.0);
  std::vector<std::vector<double>> a_eq(3, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    a_eq[0][j] = p_star[j].twist.vx;
    a_eq[1][j] = p_star[j].twist.vy;
    a_eq[2][j] = p_star[j].twist.omega;
  }
  std::vector<double> b_eq = {arc.twist.vx, arc.twist.vy, arc.twist.omega};
  lp::Result res = lp::solve(c, {}, {}, a_eq, b_eq);
  if (res.status != lp::Status::kOptimal)
    throw std::logic_error(
        "primitive chaining failed: certificate set does not span the twist "
        "(mode-sufficiency precondition violated)");
  HybridPlan frag;
  Pose cur = arc.start;
  for (std::size_t j = 0; j < n; ++j) {
    if (res.x[j] <= 1e-12) continue;
    frag.stages.push_back({cur, p_star[j].mode, p_star[j].twist});
    cur = geom::integrate_twist(cur, p_star[j].twist,
                                res.x[j] * arc.duration);
  }
  frag.stages.push_back({cur, std::nullopt, {}});
  return frag;
}

// ---------------------------------------------------------------------------
// Best-first keyframe search
// ---------------------------------------------------------------------------

SearchResult search(const std::vector<Pose>& segment, SearchContext& ctx,
                    PlanLibrary* library, const Proposer* proposer,
                    const SearchConfig& cfg) {
  if (segment.empty())
    throw std::invalid_argument("hybrid search: empty segment");
  SearchResult out;
  const Pose s0 = segment.front();
  const Pose sG = segment.back();
  ctx.anchors = segment;
  const std::uint64_t sig = contact::object_signature(ctx.poly, ctx.intr);

  std::priority_queue<Node, std::vector<Node>, NodeWorse> open;
  long seq = 0;
  auto push_plan = [&](HybridPlan plan) {
    Node node;
    node.cost = plan_cost(plan, ctx, cfg);
    node.stages = plan.stages.size();
    node.seq = seq++;
    node.plan = std::move(plan);
    open.push(std::move(node));
  };

  HybridPlan root;
  root.stages = {Keyframe{s0, std::nullopt, {}}, Keyframe{sG, std::nullopt, {}}};
  push_plan(std::move(root));

  while (!open.empty() && out.expansions < cfg.node_cap) {
    Node cur = open.top();
    open.pop();
    ++out.expansions;
    unsigned kseed = cfg.seed + 0x9e3779b9u * static_cast<unsigned>(out.expansions);

    int l = first_unassigned(cur.plan);
    if (l < 0) {
      // Complete candidate: accept on full verification, else discard.
      if (verify_plan(cur.plan, ctx, cfg)) {
        cur.plan.cost = plan_cost(cur.plan, ctx, cfg);
        if (library) library->insert(sig, ctx.team.size(), cur.plan);
        out.plan = std::move(cur.plan);
        return out;
      }
      continue;
    }

    const Pose sa = cur.plan.stages[static_cast<std::size_t>(l)].pose;
    const Pose sb = cur.plan.stages[static_cast<std::size_t>(l) + 1].pose;
    ArcMotion arc = geom::arc_from_poses(sa, sb);

    // (i) Colliding arc: insert a timed-path anchor between the endpoints.
    if (arc_collides(arc, ctx)) {
      HybridPlan child = cur.plan;
      child.stages.insert(child.stages.begin() + l + 1,
                          Keyframe{split_anchor(sa, sb, arc, ctx),
                                   std::nullopt, {}});
      push_plan(std::move(child));
      continue;
    }

    // (ii) Plan library, exact displacement. Modes were verified when the
    // entry was stored and the physics is pose-invariant, so only the
    // collision and certificate gates apply here.
    if (library) {
      if (auto hit = library->query(sig, ctx.team.size(), sa, sb)) {
        std::vector<Keyframe> frag = std::move(hit->stages);
        if (fragment_usable(frag, sa, sb, ctx, cfg, /*need_rollout=*/false)) {
          push_plan(splice(cur.plan, l, frag));
          continue;
        }
      }
    }

    // (iii) Proposer suggestions, re-verified per stage before use.
    if (proposer) {
      bool used = false;
      for (auto& frag : proposer->propose(sig, ctx.team.size(), sa, sb)) {
        if (fragment_usable(frag, sa, sb, ctx, cfg, /*need_rollout=*/true)) {
          push_plan(splice(cur.plan, l, frag));
          used = true;
          break;
        }
      }
      if (used) continue;
    }

    // (iv) Direct mode generation for the stage twist.
    {
      modes::ModeGenConfig mg;
      mg.feas_tol = cfg.feas_tol;
      mg.seed = kseed;
      auto cand = modes::generate_mode(ctx.poly, ctx.intr, ctx.team, arc.twist,
                                       cfg.mode_budget, mg);
      if (cand && cand->practically_feasible) {
        HybridPlan child = cur.plan;
        child.stages[static_cast<std::size_t>(l)].mode = std::move(cand->mode);
        child.stages[static_cast<std::size_t>(l)].mode_twist = cand->twist;
        push_plan(std::move(child));
        continue;
      }
    }

    // (v) Iterative keyframe sampling over the arc.
    {
      SearchConfig sub = cfg;
      sub.seed = kseed + 1;
      if (auto frag = iter_samp(sa, sb, ctx, sub)) {
        push_plan(splice(cur.plan, l, frag->stages));
        continue;
      }
    }

    // (vi)/(vii) Short arcs are approximated by chaining pre-validated
    // primitive twists; anything longer is bisected at the arc midpoint.
    if (effective_length(arc, ctx.poly) < cfg.epsilon) {
      if (!ctx.sufficiency) {
        contact::SufficiencyConfig sc;
        sc.seed = cfg.seed;
        ctx.sufficiency =
            contact::mode_sufficient(ctx.team, ctx.poly, ctx.intr, sc);
      }
      if (ctx.sufficiency->sufficient) {
        HybridPlan frag = seq_arc_approx(arc, ctx.sufficiency->primitives);
        bool clear = frag.stages.size() >= 2;
        for (std::size_t j = 0; j + 1 < frag.stages.size() && clear; ++j) {
          if (stage_degenerate(frag.stages[j], frag.stages[j + 1])) continue;
          if (arc_collides(geom::arc_from_poses(frag.stages[j].pose,
                                                frag.stages[j + 1].pose),
                           ctx))
            clear = false;
        }
        if (clear) {
          push_plan(splice(cur.plan, l, frag.stages));
          continue;
        }
      }
    }
    HybridPlan child = cur.plan;
    child.stages.insert(child.stages.begin() + l + 1,
                        Keyframe{arc.at(arc.duration * 0.5), std::nullopt, {}});
    push_plan(std::move(child));
  }
  return out;  // node cap exhausted or all candidates discarded: failure
}

}  // namespace copush::hybrid
