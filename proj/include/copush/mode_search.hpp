#pragma once

// Search for pushing modes: boundary contact placements that make a target
// twist force-feasible, found by multi-start local refinement of the
// multi-directional feasibility loss and verified by closed-loop rollout in
// the quasi-static simulator. A small keyed library caches verified modes
// per object and quantized twist direction.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copush/contact.hpp"
#include "copush/sim_core.hpp"
#include "copush/util.hpp"

namespace copush::modes {

using contact::LimitSurfaceParams;
using contact::ObjectIntrinsics;
using contact::PushingMode;
using contact::RobotSpec;
using geom::ArcMotion;
using geom::Polygon;
using geom::Twist;

/// A generated mode with its evaluation results. Invariant:
/// practically_feasible implies force_feasible.
struct ModeCandidate {
  PushingMode mode;
  Twist twist;                  ///< target twist it was generated for
  double loss = 0.0;            ///< multi-directional feasibility loss
  bool force_feasible = false;  ///< target-twist LP loss is zero
  bool practically_feasible = false;  ///< rollout tracked within tolerance
  double tracking_error = 0.0;  ///< terminal pose error of the rollout
};

struct ModeGenConfig {
  int rounds = 20;             ///< refinement rounds per start
  double sigma_frac = 0.05;    ///< initial perturbation, fraction of perimeter
  double feas_tol = 1e-6;      ///< N, LP loss accepted as zero
  bool verify_rollout = true;  ///< gate candidates by simulated tracking
  unsigned seed = 1;
};

/// Multi-start search for a mode making twist `p` feasible on `poly`.
/// `budget` is the number of random starts (the default caller budget is 8);
/// each start refines contact positions for cfg.rounds rounds with the
/// perturbation scale halved on non-improvement. A candidate is accepted
/// when the target-twist LP loss is zero and (if enabled) a rollout along
/// the unit arc of `p` tracks within tolerances; the best accepted candidate
/// by multi-directional loss is returned, or nullopt if none pass.
std::optional<ModeCandidate> generate_mode(const Polygon& poly,
                                           const ObjectIntrinsics& intr,
                                           const std::vector<RobotSpec>& team,
                                           const Twist& p, int budget,
                                           const ModeGenConfig& cfg = {});

struct RolloutResult {
  bool success = false;
  double terminal_error = 0.0;  ///< pose distance to the arc end
  double max_deviation = 0.0;   ///< max positional distance from the arc
};

/// Closed-loop tracking of `arc` with `mode` in an obstacle-free world:
/// robots spawn engaged on their contacts and the run succeeds if the object
/// reaches the arc end within 0.05 m / 0.15 rad without deviating by the
/// failure threshold, inside a conservative time budget.
RolloutResult practical_feasibility(const PushingMode& mode,
                                    const Polygon& poly,
                                    const ObjectIntrinsics& intr,
                                    const std::vector<RobotSpec>& team,
                                    const ArcMotion& arc);

/// Rollout of a chained stage sequence (mode switches reposition the robots
/// directly onto their next contacts; free-space repositioning around an
/// object is always kinematically feasible for disk robots and is executed
/// properly by the episode runner).
struct StagePlan {
  ArcMotion arc;
  PushingMode mode;
};
RolloutResult rollout_stages(const Polygon& poly, const ObjectIntrinsics& intr,
                             const std::vector<RobotSpec>& team,
                             const std::vector<StagePlan>& stages);

/// Library key: object signature plus quantized twist direction
/// (16 azimuth bins x 5 rotation-ratio bins).
struct ModeKey {
  std::uint64_t signature = 0;
  int az_bin = 0;
  int om_bin = 0;
  auto operator<=>(const ModeKey&) const = default;
};

ModeKey quantize_twist(std::uint64_t signature, const Twist& p);

class ModeLibrary {
 public:
  /// Stores the candidate under its quantized twist key, keeping the lower
  /// loss on collision. Throws std::invalid_argument unless the candidate
  /// is practically feasible (the library holds only verified modes).
  void insert(std::uint64_t signature, const ModeCandidate& cand);
  /// Entry whose quantized key matches the query twist, if any.
  std::optional<ModeCandidate> query(std::uint64_t signature,
                                     const Twist& p) const;
  std::size_t size() const { return entries_.size(); }

  /// Versioned JSON serialization (format "copush-modelib-1").
  std::string serialize() const;
  static ModeLibrary deserialize(const std::string& text);

 private:
  std::map<ModeKey, ModeCandidate> entries_;
};

}  // namespace copush::modes
