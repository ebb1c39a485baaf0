#include "copush/mapf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_map>

namespace copush::mapf {

namespace {

// Lattice state packed into one integer key. Coordinates are offset to
// stay positive; fields are sized for desk-scale workspaces.
constexpr int kCoordBias = 2048;

std::uint64_t pack(int ix, int iy, int ih, int t) {
  return (static_cast<std::uint64_t>(ix + kCoordBias) << 34) |
         (static_cast<std::uint64_t>(iy + kCoordBias) << 22) |
         (static_cast<std::uint64_t>(ih) << 16) |
         static_cast<std::uint64_t>(t);
}

struct Cell {
  int ix, iy, ih;
};

struct Motion {
  int dx, dy, dh;
};

std::vector<Motion> motions(const Lattice& lat, bool with_wait) {
  std::vector<Motion> out;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx != 0 || dy != 0) out.push_back({dx, dy, 0});
  out.push_back({0, 0, 1});
  out.push_back({0, 0, lat.heading_bins - 1});
  if (with_wait) out.push_back({0, 0, 0});
  return out;
}

double bin_angle(const Lattice& lat, int ih) {
  return geom::wrap_angle(2.0 * geom::kPi * ih / lat.heading_bins);
}

Cell snap(const Lattice& lat, const Pose& pose) {
  int ix = static_cast<int>(std::lround(pose.x / lat.resolution));
  int iy = static_cast<int>(std::lround(pose.y / lat.resolution));
  double frac = geom::wrap_angle(pose.psi) / (2.0 * geom::kPi) *
                lat.heading_bins;
  int ih = static_cast<int>(std::lround(frac)) % lat.heading_bins;
  if (ih < 0) ih += lat.heading_bins;
  return {ix, iy, ih};
}

Pose cell_pose(const Lattice& lat, const Cell& c) {
  return {c.ix * lat.resolution, c.iy * lat.resolution, bin_angle(lat, c.ih)};
}

int heading_dist(int a, int b, int bins) {
  int d = std::abs(a - b) % bins;
  return std::min(d, bins - d);
}

// Admissible step-count heuristic: diagonal moves cover one cell of
// chebyshev distance per step and rotations one bin, independently.
int heuristic(const Cell& a, const Cell& b, int bins) {
  int cheb = std::max(std::abs(a.ix - b.ix), std::abs(a.iy - b.iy));
  return std::max(cheb, heading_dist(a.ih, b.ih, bins));
}

Pose midpose(const Pose& a, const Pose& b) {
  return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y),
          a.psi + 0.5 * geom::angle_diff(b.psi, a.psi)};
}

// Cached per-object planning footprint: inflated convex loops plus a
// bounding radius for quick rejection.
struct Footprint {
  std::vector<std::vector<Vec2>> loops;  ///< body frame
  double radius = 0.0;
};

Footprint make_footprint(const Polygon& poly, double inflation) {
  Footprint fp;
  for (const auto& piece : poly.convex_pieces()) {
    auto loop = geom::inflate_convex(piece, inflation);
    for (const auto& v : loop) fp.radius = std::max(fp.radius, geom::norm(v));
    fp.loops.push_back(std::move(loop));
  }
  return fp;
}

std::vector<std::vector<Vec2>> place(const Footprint& fp, const Pose& pose) {
  std::vector<std::vector<Vec2>> out;
  out.reserve(fp.loops.size());
  for (const auto& loop : fp.loops) {
    std::vector<Vec2> w;
    w.reserve(loop.size());
    for (const auto& v : loop) w.push_back(pose.apply(v));
    out.push_back(std::move(w));
  }
  return out;
}

bool loops_collide(const std::vector<std::vector<Vec2>>& a,
                   const std::vector<std::vector<Vec2>>& b) {
  for (const auto& la : a)
    for (const auto& lb : b)
      if (geom::convex_collide(la, lb)) return true;
  return false;
}

// Static world seen by one object: obstacles plus workspace bounds, with a
// memoized free/blocked answer per lattice cell.
struct StaticWorld {
  const Lattice* lat;
  const Footprint* fp;
  const std::vector<Polygon>* obstacles;
  Vec2 ws_min, ws_max;
  mutable std::unordered_map<std::uint64_t, bool> memo;

  bool blocked_pose(const Pose& pose) const {
    auto loops = place(*fp, pose);
    for (const auto& loop : loops)
      for (const auto& v : loop)
        if (v.x < ws_min.x || v.y < ws_min.y || v.x > ws_max.x ||
            v.y > ws_max.y)
          return true;
    for (const auto& obs : *obstacles)
      for (const auto& piece : obs.convex_pieces())
        for (const auto& loop : loops)
          if (geom::convex_collide(loop, piece)) return true;
    return false;
  }

  bool blocked(const Cell& c) const {
    std::uint64_t key = pack(c.ix, c.iy, c.ih, 0);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    bool b = blocked_pose(cell_pose(*lat, c));
    memo.emplace(key, b);
    return b;
  }

  // Destination plus transition midpoint (guards corner cutting on
  // diagonals and sweep of long footprints while rotating). Midpoints live
  // on a half-resolution lattice, memoized separately.
  mutable std::unordered_map<std::uint64_t, bool> mid_memo;
  bool motion_blocked(const Cell& a, const Cell& b) const {
    if (blocked(b)) return true;
    if (a.ix == b.ix && a.iy == b.iy && a.ih == b.ih) return false;  // wait
    // Midpoint heading on a doubled circle, via the signed shortest bin
    // difference so the wrap seam (15 -> 0 vs 7 -> 8) stays unambiguous.
    int bins = lat->heading_bins;
    int dh = b.ih - a.ih;
    if (dh > bins / 2) dh -= bins;
    if (dh < -bins / 2) dh += bins;
    int ih2 = ((2 * a.ih + dh) % (2 * bins) + 2 * bins) % (2 * bins);
    std::uint64_t key = pack(a.ix + b.ix, a.iy + b.iy, 0, 1) ^
                        (static_cast<std::uint64_t>(ih2) << 50);
    auto it = mid_memo.find(key);
    if (it != mid_memo.end()) return it->second;
    bool blk = blocked_pose(midpose(cell_pose(*lat, a), cell_pose(*lat, b)));
    mid_memo.emplace(key, blk);
    return blk;
  }
};

// Reservations of already planned objects: world-frame loops per step,
// parked at the last pose from arrival on.
struct Reservation {
  std::vector<std::vector<std::vector<Vec2>>> loops_at;  ///< [t][loop][vert]
  std::vector<Pose> poses;
  double radius = 0.0;

  const std::vector<std::vector<Vec2>>& at(int t) const {
    return loops_at[std::min<std::size_t>(t, loops_at.size() - 1)];
  }
  const Pose& pose_at(int t) const {
    return poses[std::min<std::size_t>(t, poses.size() - 1)];
  }
  int parked_from() const { return static_cast<int>(poses.size()) - 1; }
};

struct OpenEntry {
  int f, h;
  std::uint64_t seq;
  std::uint64_t key;
};

struct OpenCompare {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.seq > b.seq;
  }
};

}  // namespace

std::vector<std::vector<Vec2>> inflated_loops(const Polygon& poly,
                                              double inflation,
                                              const Pose& pose) {
  return place(make_footprint(poly, inflation), pose);
}

int shortest_len(const PlanObject& obj, const std::vector<Polygon>& obstacles,
                 const PlanConfig& cfg, int object_id) {
  const Lattice& lat = cfg.lattice;
  Footprint fp = make_footprint(obj.poly, cfg.inflation());
  StaticWorld world{&lat, &fp, &obstacles, cfg.ws_min, cfg.ws_max, {}, {}};

  Cell start = snap(lat, obj.start);
  Cell goal = snap(lat, obj.goal);
  if (world.blocked(start))
    throw PlanFailure(object_id, "start pose blocked");
  if (world.blocked(goal)) throw PlanFailure(object_id, "goal pose blocked");

  auto key3 = [&](const Cell& c) { return pack(c.ix, c.iy, c.ih, 0); };
  std::unordered_map<std::uint64_t, int> g;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenCompare> open;
  std::uint64_t seq = 0;
  g[key3(start)] = 0;
  int h0 = heuristic(start, goal, lat.heading_bins);
  open.push({h0, h0, seq++, key3(start)});

  auto moves = motions(lat, /*with_wait=*/false);
  // Unpack helper for 3d keys.
  auto unpack3 = [&](std::uint64_t k) {
    Cell c;
    c.ix = static_cast<int>((k >> 34) & 0xFFF) - kCoordBias;
    c.iy = static_cast<int>((k >> 22) & 0xFFF) - kCoordBias;
    c.ih = static_cast<int>((k >> 16) & 0x3F);
    return c;
  };

  while (!open.empty()) {
    OpenEntry top = open.top();
    open.pop();
    Cell c = unpack3(top.key);
    int gc = g[top.key];
    if (top.f - top.h != gc) continue;  // stale entry
    if (c.ix == goal.ix && c.iy == goal.iy && c.ih == goal.ih) return gc;
    for (const auto& mv : moves) {
      Cell n{c.ix + mv.dx, c.iy + mv.dy,
             (c.ih + mv.dh) % lat.heading_bins};
      if (world.motion_blocked(c, n)) continue;
      std::uint64_t nk = key3(n);
      int ng = gc + 1;
      auto it = g.find(nk);
      if (it != g.end() && it->second <= ng) continue;
      g[nk] = ng;
      int h = heuristic(n, goal, lat.heading_bins);
      open.push({ng + h, h, seq++, nk});
    }
  }
  throw PlanFailure(object_id, "goal unreachable");
}

namespace {

TimedPath plan_one(const PlanObject& obj, int object_id,
                   const std::vector<Polygon>& obstacles,
                   const std::vector<Reservation>& reservations,
                   const std::vector<Footprint>& res_fps,
                   const PlanConfig& cfg, int horizon) {
  const Lattice& lat = cfg.lattice;
  Footprint fp = make_footprint(obj.poly, cfg.inflation());
  StaticWorld world{&lat, &fp, &obstacles, cfg.ws_min, cfg.ws_max, {}, {}};

  Cell start = snap(lat, obj.start);
  Cell goal = snap(lat, obj.goal);
  if (world.blocked(start))
    throw PlanFailure(object_id, "start pose blocked");
  if (world.blocked(goal)) throw PlanFailure(object_id, "goal pose blocked");

  // Motion conflict test against one reservation, endpoints plus midpoint.
  auto conflicts = [&](const Pose& a, const Pose& b, int t) {
    for (std::size_t j = 0; j < reservations.size(); ++j) {
      const Reservation& res = reservations[j];
      const Pose& ra = res.pose_at(t);
      const Pose& rb = res.pose_at(t + 1);
      // Slack covers one diagonal step of each body (2*sqrt(2)*res) plus
      // the midpoint case, so the cheap centre test never skips a real hit.
      double reach =
          fp.radius + res.radius + geom::kContactTol + 3.0 * lat.resolution;
      if (geom::norm(a.xy() - ra.xy()) > reach) continue;
      if (loops_collide(place(fp, b), res.at(t + 1))) return true;
      if (loops_collide(place(fp, midpose(a, b)),
                        place(res_fps[j], midpose(ra, rb))))
        return true;
    }
    return false;
  };

  // Parking at the goal must stay conflict-free for the rest of every
  // earlier path (they may still drive past the goal cell).
  Pose goal_pose = cell_pose(lat, goal);
  auto goal_loops = place(fp, goal_pose);
  auto parked_safe_from = [&](int t) {
    for (std::size_t j = 0; j < reservations.size(); ++j) {
      const Reservation& res = reservations[j];
      int last = res.parked_from();
      for (int u = t; u <= last; ++u) {
        if (geom::norm(goal_pose.xy() - res.pose_at(u).xy()) >
            fp.radius + res.radius + geom::kContactTol + lat.resolution)
          continue;
        if (loops_collide(goal_loops, res.at(u))) return false;
        if (u < last &&
            loops_collide(goal_loops,
                          place(res_fps[j],
                                midpose(res.pose_at(u), res.pose_at(u + 1)))))
          return false;
      }
    }
    return true;
  };

  std::unordered_map<std::uint64_t, int> g;
  std::unordered_map<std::uint64_t, std::uint64_t> parent;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenCompare> open;
  std::uint64_t seq = 0;

  std::uint64_t skey = pack(start.ix, start.iy, start.ih, 0);
  g[skey] = 0;
  int h0 = heuristic(start, goal, lat.heading_bins);
  open.push({h0, h0, seq++, skey});

  auto moves = motions(lat, /*with_wait=*/true);
  auto unpack = [&](std::uint64_t k, int& t) {
    Cell c;
    c.ix = static_cast<int>((k >> 34) & 0xFFF) - kCoordBias;
    c.iy = static_cast<int>((k >> 22) & 0xFFF) - kCoordBias;
    c.ih = static_cast<int>((k >> 16) & 0x3F);
    t = static_cast<int>(k & 0xFFFF);
    return c;
  };

  while (!open.empty()) {
    OpenEntry top = open.top();
    open.pop();
    int t;
    Cell c = unpack(top.key, t);
    if (top.f - top.h != g[top.key]) continue;  // stale
    if (c.ix == goal.ix && c.iy == goal.iy && c.ih == goal.ih &&
        parked_safe_from(t)) {
      // Reconstruct.
      std::vector<PathStep> steps;
      std::uint64_t k = top.key;
      while (true) {
        int tt;
        Cell cc = unpack(k, tt);
        steps.push_back({tt, cell_pose(lat, cc)});
        auto it = parent.find(k);
        if (it == parent.end()) break;
        k = it->second;
      }
      std::reverse(steps.begin(), steps.end());
      TimedPath path;
      path.object = object_id;
      path.steps = std::move(steps);
      return path;
    }
    if (t >= horizon) continue;
    Pose cp = cell_pose(lat, c);
    for (const auto& mv : moves) {
      Cell n{c.ix + mv.dx, c.iy + mv.dy,
             (c.ih + mv.dh) % lat.heading_bins};
      if (world.motion_blocked(c, n)) continue;
      Pose np = cell_pose(lat, n);
      if (conflicts(cp, np, t)) continue;
      std::uint64_t nk = pack(n.ix, n.iy, n.ih, t + 1);
      int ng = g[top.key] + 1;
      auto it = g.find(nk);
      if (it != g.end() && it->second <= ng) continue;
      g[nk] = ng;
      parent[nk] = top.key;
      int h = heuristic(n, goal, lat.heading_bins);
      open.push({ng + h, h, seq++, nk});
    }
  }
  throw PlanFailure(object_id, "no path within horizon");
}

}  // namespace

std::vector<TimedPath> plan_all(const std::vector<PlanObject>& objects,
                                const std::vector<Polygon>& obstacles,
                                const PlanConfig& cfg) {
  // Priority: ascending single-object shortest path, index tie-break.
  std::vector<std::pair<int, int>> order;  // (len, index)
  for (std::size_t i = 0; i < objects.size(); ++i)
    order.push_back(
        {shortest_len(objects[i], obstacles, cfg, static_cast<int>(i)),
         static_cast<int>(i)});
  std::sort(order.begin(), order.end());

  int horizon = cfg.horizon;
  if (horizon <= 0) {
    int longest = 0;
    for (const auto& [len, idx] : order) longest = std::max(longest, len);
    horizon = 4 * longest + 32;
  }
  horizon = std::min(horizon, 65000);  // key packing bound

  std::vector<Reservation> reservations;
  std::vector<Footprint> res_fps;
  std::vector<TimedPath> out(objects.size());
  for (const auto& [len, idx] : order) {
    TimedPath path = plan_one(objects[static_cast<std::size_t>(idx)], idx,
                              obstacles, reservations, res_fps, cfg, horizon);
    Footprint fp = make_footprint(objects[static_cast<std::size_t>(idx)].poly,
                                  cfg.inflation());
    Reservation res;
    for (const auto& st : path.steps) {
      res.poses.push_back(st.pose);
      res.loops_at.push_back(place(fp, st.pose));
    }
    res.radius = fp.radius;
    reservations.push_back(std::move(res));
    res_fps.push_back(std::move(fp));
    out[static_cast<std::size_t>(idx)] = std::move(path);
  }

  // Pad everything with waits to the common horizon.
  std::size_t t_l = 0;
  for (const auto& p : out) t_l = std::max(t_l, p.steps.size());
  for (auto& p : out)
    while (p.steps.size() < t_l)
      p.steps.push_back(
          {static_cast<int>(p.steps.size()), p.steps.back().pose});
  return out;
}

}  // namespace copush::mapf
