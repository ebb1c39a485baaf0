#include "copush/decomposition.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

namespace copush::decomposition {

namespace {

std::vector<Pose> slice_poses(const mapf::TimedPath& path, int from, int to) {
  std::vector<Pose> out;
  for (int t = from; t <= to; ++t)
    out.push_back(path.steps[static_cast<std::size_t>(t)].pose);
  return out;
}

// First step index in [from_a, to_a] whose footprint of `a` intersects the
// swept region of `b` over [from_b, to_b], or nullopt. Both windows are
// closed: a slice's boundary poses count for the slices on either side.
// (Cuts land on the first pose overlapping a contested region, so an object
// parks on a region boundary between slices; closed windows ensure that
// parked pose is covered by an ordering edge — the replay-safety guarantee
// fails with half-open probes.)
std::optional<int> first_collision(const mapf::TimedPath& pa,
                                   const Polygon& poly_a, int from_a,
                                   int to_a, const mapf::TimedPath& pb,
                                   const Polygon& poly_b, int from_b,
                                   int to_b) {
  if (from_a > to_a || from_b > to_b) return std::nullopt;
  auto poses_a = slice_poses(pa, from_a, to_a);
  auto poses_b = slice_poses(pb, from_b, to_b);
  auto hit = geom::swept_region_intersects(poly_a, poses_a, poly_b, poses_b);
  if (!hit) return std::nullopt;
  return from_a + static_cast<int>(*hit);
}

}  // namespace

Decomposition segment_and_order(const std::vector<mapf::TimedPath>& paths,
                                const std::vector<Polygon>& polys) {
  if (paths.size() != polys.size())
    throw std::invalid_argument("segment_and_order: paths/polys mismatch");
  const int m_count = static_cast<int>(paths.size());
  if (m_count == 0) return {};
  const int t_l = static_cast<int>(paths[0].steps.size()) - 1;
  for (const auto& p : paths)
    if (static_cast<int>(p.steps.size()) - 1 != t_l)
      throw std::invalid_argument("segment_and_order: unpadded paths");

  // --- Segmentation ------------------------------------------------------
  std::vector<int> t_star(static_cast<std::size_t>(m_count), 0);
  std::vector<std::vector<std::pair<int, int>>> cuts(
      static_cast<std::size_t>(m_count));  // (t_start, t_end) per object

  auto remaining = [&](int m) { return t_star[static_cast<std::size_t>(m)]; };

  // Lemma-backed bound on iterations: each pass either finishes an object
  // or consumes at least one pairwise collision event.
  int guard = m_count * (m_count * m_count + 4) + 8;
  bool open_objects = true;
  while (open_objects) {
    if (--guard < 0)
      throw std::logic_error("segment_and_order: iteration bound exceeded");
    open_objects = false;
    for (int m = 0; m < m_count; ++m) {
      if (remaining(m) >= t_l) continue;
      open_objects = true;
      // Next split: smallest first-collision time of m (within its
      // remaining path, against m''s remaining swept region) that is
      // strictly later than m''s own first-collision time against m.
      std::optional<int> t_split;
      for (int mp = 0; mp < m_count; ++mp) {
        if (mp == m) continue;
        auto tc_m = first_collision(paths[static_cast<std::size_t>(m)],
                                    polys[static_cast<std::size_t>(m)],
                                    remaining(m), t_l,
                                    paths[static_cast<std::size_t>(mp)],
                                    polys[static_cast<std::size_t>(mp)],
                                    remaining(mp), t_l);
        auto tc_mp = first_collision(paths[static_cast<std::size_t>(mp)],
                                     polys[static_cast<std::size_t>(mp)],
                                     remaining(mp), t_l,
                                     paths[static_cast<std::size_t>(m)],
                                     polys[static_cast<std::size_t>(m)],
                                     remaining(m), t_l);
        if (!tc_m || !tc_mp) continue;
        if (*tc_m > *tc_mp && (!t_split || *tc_m < *t_split))
          t_split = *tc_m;
      }
      int ts = t_split.value_or(t_l);
      if (ts == remaining(m)) continue;  // no progress for m this pass
      cuts[static_cast<std::size_t>(m)].push_back({remaining(m), ts});
      t_star[static_cast<std::size_t>(m)] = ts;
    }
  }

  Decomposition out;
  for (int m = 0; m < m_count; ++m) {
    int k = 0;
    for (const auto& [a, b] : cuts[static_cast<std::size_t>(m)]) {
      Subtask st;
      st.object = m;
      st.index = k++;
      st.t_start = a;
      st.t_end = b;
      st.slice = slice_poses(paths[static_cast<std::size_t>(m)], a, b);
      out.subtasks.push_back(std::move(st));
    }
  }

  // --- Ordering -----------------------------------------------------------
  const int n = static_cast<int>(out.subtasks.size());
  PartialOrder& ord = out.order;
  ord.count = n;
  std::vector<std::vector<bool>> rel(static_cast<std::size_t>(n),
                                     std::vector<bool>(static_cast<std::size_t>(n), false));

  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const Subtask& sa = out.subtasks[static_cast<std::size_t>(a)];
      const Subtask& sb = out.subtasks[static_cast<std::size_t>(b)];
      if (sa.object == sb.object) {
        if (sa.index < sb.index) rel[a][b] = true;
        continue;
      }
      if (a > b) continue;  // cross pairs handled once, both directions below
      auto tc_a = first_collision(
          paths[static_cast<std::size_t>(sa.object)],
          polys[static_cast<std::size_t>(sa.object)], sa.t_start, sa.t_end,
          paths[static_cast<std::size_t>(sb.object)],
          polys[static_cast<std::size_t>(sb.object)], sb.t_start, sb.t_end);
      auto tc_b = first_collision(
          paths[static_cast<std::size_t>(sb.object)],
          polys[static_cast<std::size_t>(sb.object)], sb.t_start, sb.t_end,
          paths[static_cast<std::size_t>(sa.object)],
          polys[static_cast<std::size_t>(sa.object)], sa.t_start, sa.t_end);
      if (!tc_a || !tc_b) continue;
      // Exact ties cannot arise from step-disjoint paths; break one
      // deterministically toward the lower (object, index) pair.
      if (*tc_a < *tc_b || (*tc_a == *tc_b && a < b))
        rel[a][b] = true;
      else
        rel[b][a] = true;
    }
  }

  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (rel[a][b]) ord.direct.push_back({a, b});

  // Transitive closure (rule III) via Floyd–Warshall reachability.
  ord.closure = rel;
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      if (ord.closure[a][k])
        for (int b = 0; b < n; ++b)
          if (ord.closure[k][b]) ord.closure[a][b] = true;

  // Strictness: the closure must stay irreflexive.
  for (int a = 0; a < n; ++a)
    if (ord.closure[a][a])
      throw std::logic_error("segment_and_order: ordering cycle detected");

  // Pre sets.
  ord.pre.assign(static_cast<std::size_t>(n), {});
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a)
      if (ord.closure[a][b]) ord.pre[static_cast<std::size_t>(b)].push_back(a);

  // Transitive reduction: drop any edge implied by a two-hop chain.
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (!ord.closure[a][b]) continue;
      bool implied = false;
      for (int k = 0; k < n && !implied; ++k)
        implied = k != a && k != b && ord.closure[a][k] && ord.closure[k][b];
      if (!implied) ord.reduced.push_back({a, b});
    }
  }
  return out;
}

}  // namespace copush::decomposition
