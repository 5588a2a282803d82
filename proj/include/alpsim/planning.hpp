#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alpsim/bayes_model.hpp"
#include "alpsim/geometry.hpp"
#include "alpsim/mapping.hpp"
#include "alpsim/rng.hpp"
#include "alpsim/terrain.hpp"

namespace alpsim::planning {

// Rest-to-rest point mass with constant acceleration/deceleration and a
// speed cap.
struct MotionModel {
  double accel = 2.0;      // m/s^2
  double max_speed = 2.0;  // m/s
};

// Trapezoidal profile when d >= v^2/a, triangular otherwise.
double flight_time(double distance_m, const MotionModel& motion);
double flight_time(const Pose& a, const Pose& b, const MotionModel& motion);

struct Path {
  std::vector<Pose> positions;
  double cost_s = 0.0;  // sum of leg flight times, including the entry leg
};

struct Budget {
  double total_s = 0.0;
  double spent_s = 0.0;
  double remaining_s() const { return total_s - spent_s; }
};

// Immutable per-mission planning inputs. `area` restricts every proposed
// footprint.
struct PlannerContext {
  const terrain::TerrainRaster* raster = nullptr;
  const terrain::CameraConfig* camera = nullptr;
  CellRect area;
  MotionModel motion;
  double altitude_m = 30.0;
};

// Lawnmower sweep with per-mission orientation (0/90 degrees alternating)
// and lateral offset phase, truncated so the path cost from `start` fits
// the budget.
Path plan_coverage(int mission_index, const PlannerContext& ctx,
                   const Pose& start, double budget_s);

struct ImagePlannerParams {
  double step_m = 50.0;
  int edge_px = 10;
};

// Moves towards the image edge with the largest uncertainty-per-hit sum.
// Falls back to a seeded random direction when no prediction exists yet.
Pose plan_image_based(const model::PredictiveOutput* last_output,
                      const mapping::BeliefMaps& maps,
                      const PlannerContext& ctx, const Pose& current,
                      const ImagePlannerParams& params, Rng& rng);

struct FrontierParams {
  double sample_dist_m = 15.0;
};

// Picks the equidistantly subsampled frontier candidate with the highest
// footprint uncertainty over smoothed hit count. Falls back to a seeded
// random in-bounds pose when the frontier set is empty.
Pose plan_frontier(const mapping::BeliefMaps& maps, const PlannerContext& ctx,
                   const Pose& current, const FrontierParams& params,
                   Rng& rng);

struct GridSearchParams {
  int horizon = 5;
  double grid_spacing_m = 0.0;    // 0 = one footprint side
  double min_leg_fraction = 0.1;  // of the footprint side
};

// Sequential greedy argmax of footprint uncertainty over forward-simulated
// smoothed hits times leg flight time, over a uniform candidate grid.
// Self-candidates closer than the minimum leg are excluded.
Path greedy_grid_search(const mapping::BeliefMaps& maps,
                        const PlannerContext& ctx, const Pose& start,
                        const GridSearchParams& params);

// Path-level objective refined by CMA-ES: sum of footprint uncertainties
// over the sum of smoothed forward-simulated hits times leg flight times.
// Positions are clamped into the valid-pose rectangle; leg distances are
// floored at the minimum leg for the cost term.
double path_objective(const mapping::BeliefMaps& maps,
                      const PlannerContext& ctx, const Pose& start,
                      const std::vector<Pose>& positions,
                      double min_leg_fraction = 0.1);

struct CmaesRefineParams {
  double sigma0_m = 0.0;   // 0 = half footprint side
  long long max_evals = 800;
  int lambda_pop = 0;      // 0 = CMA-ES default
  int patience = 20;
  double min_leg_fraction = 0.1;
};

// Continuous refinement of the greedy path; the greedy seed is the initial
// mean and the incumbent, so the returned objective never degrades. A zero
// evaluation budget returns the greedy path unchanged.
Path refine_path_cmaes(const mapping::BeliefMaps& maps,
                       const PlannerContext& ctx, const Pose& start,
                       const Path& greedy, const CmaesRefineParams& params,
                       std::uint64_t seed);

enum class PlannerKind { coverage, image_based, frontier, fixed_horizon };

PlannerKind planner_kind_from_string(const std::string& name);
std::string to_string(PlannerKind kind);

struct PlannerParams {
  PlannerKind kind = PlannerKind::coverage;
  ImagePlannerParams image;
  FrontierParams frontier;
  GridSearchParams grid;
  CmaesRefineParams cmaes;
  bool execute_full_horizon = false;  // fixed-horizon: false = receding
};

// Stateful per-mission dispatcher. next_measurement returns the next pose
// and charges its leg to the budget, or nullopt once the budget cannot
// afford the next leg (mission complete).
class Planner {
 public:
  Planner(const PlannerParams& params, const PlannerContext& ctx,
          int mission_index, std::uint64_t seed);

  std::optional<Pose> next_measurement(
      const mapping::BeliefMaps& maps,
      const model::PredictiveOutput* last_output, const Pose& current,
      Budget& budget);

 private:
  PlannerParams params_;
  PlannerContext ctx_;
  int mission_index_ = 0;
  std::uint64_t seed_ = 0;
  Rng rng_;
  long long step_ = 0;
  bool coverage_planned_ = false;
  std::vector<Pose> queue_;  // coverage waypoints / pending horizon poses
  std::size_t queue_next_ = 0;

  std::optional<Pose> propose(const mapping::BeliefMaps& maps,
                              const model::PredictiveOutput* last_output,
                              const Pose& current, const Budget& budget);
};

}  // namespace alpsim::planning
