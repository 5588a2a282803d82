#include "alpsim/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "alpsim/cmaes.hpp"

namespace alpsim::planning {

double flight_time(double distance_m, const MotionModel& motion) {
  if (motion.accel <= 0.0 || motion.max_speed <= 0.0)
    throw std::invalid_argument("motion model must have positive accel/speed");
  if (distance_m < 0.0) throw std::invalid_argument("distance must be >= 0");
  const double cruise_threshold = motion.max_speed * motion.max_speed / motion.accel;
  if (distance_m >= cruise_threshold)
    return distance_m / motion.max_speed + motion.max_speed / motion.accel;
  return 2.0 * std::sqrt(distance_m / motion.accel);
}

double flight_time(const Pose& a, const Pose& b, const MotionModel& motion) {
  return flight_time(distance(a, b), motion);
}

namespace {

double footprint_side_m(const PlannerContext& ctx) {
  return std::min(ctx.camera->footprint_width_m(),
                  ctx.camera->footprint_height_m());
}

terrain::PoseBounds bounds_of(const PlannerContext& ctx) {
  return terrain::valid_pose_bounds(*ctx.camera, *ctx.raster, ctx.area);
}

Pose clamped(const PlannerContext& ctx, const Pose& pose) {
  return terrain::clamp_pose(pose, bounds_of(ctx));
}

CellRect footprint_at(const PlannerContext& ctx, const Pose& pose) {
  return terrain::footprint_cells(*ctx.camera, pose, *ctx.raster);
}

}  // namespace

Path plan_coverage(int mission_index, const PlannerContext& ctx,
                   const Pose& start, double budget_s) {
  const auto bounds = bounds_of(ctx);  // throws if the footprint cannot fit
  const double track_x = ctx.camera->footprint_width_m();
  const double track_y = ctx.camera->footprint_height_m();
  const bool along_x = mission_index % 2 == 0;
  const double offset_fraction = ((mission_index / 2) % 4) / 4.0;

  // Sweep coordinates along one axis, capture positions along the other;
  // a final clamped line keeps the far rim covered.
  auto line_coords = [](double lo, double hi, double spacing, double offset) {
    std::vector<double> coords;
    for (double v = lo + offset; v <= hi + 1e-9; v += spacing)
      coords.push_back(std::min(v, hi));
    if (coords.empty() || coords.back() < hi - 1e-9) coords.push_back(hi);
    return coords;
  };

  const auto sweep = along_x
                         ? line_coords(bounds.y_min, bounds.y_max, track_y,
                                       track_y * offset_fraction)
                         : line_coords(bounds.x_min, bounds.x_max, track_x,
                                       track_x * offset_fraction);
  const auto along = along_x ? line_coords(bounds.x_min, bounds.x_max, track_x, 0.0)
                             : line_coords(bounds.y_min, bounds.y_max, track_y, 0.0);

  std::vector<Pose> waypoints;
  for (std::size_t row = 0; row < sweep.size(); ++row) {
    for (std::size_t i = 0; i < along.size(); ++i) {
      const double a = row % 2 == 0 ? along[i] : along[along.size() - 1 - i];
      waypoints.push_back(along_x ? Pose{a, sweep[row], ctx.altitude_m}
                                  : Pose{sweep[row], a, ctx.altitude_m});
    }
  }

  Path path;
  Pose previous = start;
  for (const Pose& wp : waypoints) {
    const double leg = flight_time(previous, wp, ctx.motion);
    if (path.cost_s + leg > budget_s) break;
    path.cost_s += leg;
    path.positions.push_back(wp);
    previous = wp;
  }
  return path;
}

Pose plan_image_based(const model::PredictiveOutput* last_output,
                      const mapping::BeliefMaps& maps,
                      const PlannerContext& ctx, const Pose& current,
                      const ImagePlannerParams& params, Rng& rng) {
  if (last_output == nullptr) {
    const double angle = rng.uniform(0.0, 6.28318530717958647692);
    return clamped(ctx, {current.x_m + params.step_m * std::cos(angle),
                         current.y_m + params.step_m * std::sin(angle),
                         ctx.altitude_m});
  }

  const int w = last_output->width_px;
  const int h = last_output->height_px;
  if (params.edge_px < 1 || params.edge_px > std::min(w, h) / 2)
    throw std::invalid_argument("edge_px must lie in [1, min(W, H)/2]");
  const CellRect fp = footprint_at(ctx, current);

  // Pixel range per edge, fixed tie-break order N, E, S, W.
  struct Edge {
    int px0, px1, py0, py1;  // inclusive pixel ranges
    double dx, dy;
  };
  const Edge edges[4] = {
      {0, w - 1, h - params.edge_px, h - 1, 0.0, 1.0},   // N
      {w - params.edge_px, w - 1, 0, h - 1, 1.0, 0.0},   // E
      {0, w - 1, 0, params.edge_px - 1, 0.0, -1.0},      // S
      {0, params.edge_px - 1, 0, h - 1, -1.0, 0.0},      // W
  };

  double best_score = -std::numeric_limits<double>::infinity();
  const Edge* best = nullptr;
  for (const Edge& edge : edges) {
    double mi_sum = 0.0;
    for (int py = edge.py0; py <= edge.py1; ++py)
      for (int px = edge.px0; px <= edge.px1; ++px)
        mi_sum += last_output->mi[static_cast<std::size_t>(py) * w + px];

    // Cells spanned by the strip, each counted once.
    const auto sx0 = terrain::pixel_cell_span(edge.px0, w, fp.width).first;
    const auto sx1 = terrain::pixel_cell_span(edge.px1, w, fp.width).last;
    const auto sy0 = terrain::pixel_cell_span(edge.py0, h, fp.height).first;
    const auto sy1 = terrain::pixel_cell_span(edge.py1, h, fp.height).last;
    const CellRect strip{fp.x0 + sx0, fp.y0 + sy0, sx1 - sx0 + 1,
                         sy1 - sy0 + 1};
    const auto sums = mapping::region_sums(maps, strip);
    const double score =
        mi_sum / static_cast<double>(sums.sum_hits + strip.area());
    if (score > best_score) {
      best_score = score;
      best = &edge;
    }
  }

  return clamped(ctx, {current.x_m + params.step_m * best->dx,
                       current.y_m + params.step_m * best->dy,
                       ctx.altitude_m});
}

Pose plan_frontier(const mapping::BeliefMaps& maps, const PlannerContext& ctx,
                   const Pose& current, const FrontierParams& params,
                   Rng& rng) {
  (void)current;
  const auto bounds = bounds_of(ctx);
  const auto frontier = mapping::frontier_cells(maps);
  if (frontier.empty()) {
    return {rng.uniform(bounds.x_min, bounds.x_max),
            rng.uniform(bounds.y_min, bounds.y_max), ctx.altitude_m};
  }

  // Equidistant subsampling along the (index-ordered) frontier.
  const double res = ctx.raster->resolution_m;
  std::vector<std::pair<int, Pose>> candidates;
  for (const int cell : frontier) {
    const int ix = cell % maps.width;
    const int iy = cell / maps.width;
    const Pose p{(ix + 0.5) * res, (iy + 0.5) * res, ctx.altitude_m};
    bool spaced = true;
    for (const auto& [idx, kept] : candidates) {
      if (distance(kept, p) < params.sample_dist_m) {
        spaced = false;
        break;
      }
    }
    if (spaced) candidates.emplace_back(cell, p);
  }

  double best_score = -std::numeric_limits<double>::infinity();
  Pose best_pose = clamped(ctx, candidates.front().second);
  for (const auto& [cell, raw] : candidates) {
    const Pose pose = clamped(ctx, raw);
    const CellRect fp = footprint_at(ctx, pose);
    const auto sums = mapping::region_sums(maps, fp);
    const double score = sums.sum_uncertainty /
                         static_cast<double>(sums.sum_hits + fp.area());
    if (score > best_score) {  // ties keep the lowest cell index
      best_score = score;
      best_pose = pose;
    }
  }
  return best_pose;
}

namespace {

std::vector<Pose> candidate_grid(const PlannerContext& ctx, double spacing) {
  const auto bounds = bounds_of(ctx);
  std::vector<Pose> grid;
  for (double y = bounds.y_min; y <= bounds.y_max + 1e-9; y += spacing)
    for (double x = bounds.x_min; x <= bounds.x_max + 1e-9; x += spacing)
      grid.push_back({std::min(x, bounds.x_max), std::min(y, bounds.y_max),
                      ctx.altitude_m});
  return grid;
}

void stamp_hits(std::vector<int>& hits, int map_width, const CellRect& fp) {
  for (int iy = fp.y0; iy <= fp.y1(); ++iy)
    for (int ix = fp.x0; ix <= fp.x1(); ++ix) ++hits[iy * map_width + ix];
}

}  // namespace

Path greedy_grid_search(const mapping::BeliefMaps& maps,
                        const PlannerContext& ctx, const Pose& start,
                        const GridSearchParams& params) {
  if (params.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const double side = footprint_side_m(ctx);
  const double spacing = params.grid_spacing_m > 0.0 ? params.grid_spacing_m : side;
  const double min_leg = params.min_leg_fraction * side;
  const auto grid = candidate_grid(ctx, spacing);
  if (grid.empty()) throw std::invalid_argument("candidate grid is empty");

  std::vector<int> simulated = maps.hits;
  Path path;
  Pose previous = start;
  for (int step = 0; step < params.horizon; ++step) {
    double best_score = -std::numeric_limits<double>::infinity();
    const Pose* best = nullptr;
    CellRect best_fp;
    for (const Pose& cand : grid) {
      const double d = distance(previous, cand);
      if (d < min_leg) continue;  // staying put would have near-zero cost
      const CellRect fp = footprint_at(ctx, cand);
      const auto sums = mapping::region_sums_simulated(maps, fp, simulated);
      const double score =
          sums.sum_uncertainty /
          (static_cast<double>(sums.sum_hits + fp.area()) *
           flight_time(d, ctx.motion));
      if (score > best_score) {
        best_score = score;
        best = &cand;
        best_fp = fp;
      }
    }
    if (best == nullptr) break;
    path.cost_s += flight_time(previous, *best, ctx.motion);
    path.positions.push_back(*best);
    stamp_hits(simulated, maps.width, best_fp);
    previous = *best;
  }
  return path;
}

double path_objective(const mapping::BeliefMaps& maps,
                      const PlannerContext& ctx, const Pose& start,
                      const std::vector<Pose>& positions,
                      double min_leg_fraction) {
  const double min_leg = min_leg_fraction * footprint_side_m(ctx);
  std::vector<int> simulated = maps.hits;
  double uncertainty_sum = 0.0;
  double cost_weighted_hits = 0.0;
  Pose previous = start;
  for (const Pose& raw : positions) {
    const Pose pose = clamped(ctx, raw);
    const CellRect fp = footprint_at(ctx, pose);
    const auto sums = mapping::region_sums_simulated(maps, fp, simulated);
    uncertainty_sum += sums.sum_uncertainty;
    const double leg = std::max(distance(previous, pose), min_leg);
    cost_weighted_hits += static_cast<double>(sums.sum_hits + fp.area()) *
                          flight_time(leg, ctx.motion);
    stamp_hits(simulated, maps.width, fp);
    previous = pose;
  }
  return uncertainty_sum / cost_weighted_hits;
}

Path refine_path_cmaes(const mapping::BeliefMaps& maps,
                       const PlannerContext& ctx, const Pose& start,
                       const Path& greedy, const CmaesRefineParams& params,
                       std::uint64_t seed) {
  if (greedy.positions.empty()) return greedy;
  if (params.max_evals <= 0) return greedy;

  const int n = static_cast<int>(greedy.positions.size());
  Eigen::VectorXd x0(2 * n);
  for (int i = 0; i < n; ++i) {
    x0[2 * i] = greedy.positions[i].x_m;
    x0[2 * i + 1] = greedy.positions[i].y_m;
  }

  auto decode = [&](const Eigen::VectorXd& v) {
    std::vector<Pose> poses(n);
    for (int i = 0; i < n; ++i)
      poses[i] = clamped(ctx, {v[2 * i], v[2 * i + 1], ctx.altitude_m});
    return poses;
  };
  auto objective = [&](const Eigen::VectorXd& v) {
    return path_objective(maps, ctx, start, decode(v),
                          params.min_leg_fraction);
  };

  const double greedy_value =
      path_objective(maps, ctx, start, greedy.positions,
                     params.min_leg_fraction);

  const double sigma0 =
      params.sigma0_m > 0.0 ? params.sigma0_m : 0.5 * footprint_side_m(ctx);
  cmaes::OptimizeOptions options;
  options.lambda_pop = params.lambda_pop;
  options.stagnation_patience = params.patience;
  long long max_evals = params.max_evals;
  {
    // optimize() requires at least one full generation.
    cmaes::CmaesState probe = cmaes::init(x0, sigma0, params.lambda_pop, seed);
    if (max_evals < probe.lambda) max_evals = probe.lambda;
  }
  const auto result = cmaes::optimize(objective, x0, sigma0, max_evals, seed,
                                      options);

  // The greedy seed stays the incumbent unless the optimizer beats it.
  if (result.best_f <= greedy_value) return greedy;
  Path refined;
  refined.positions = decode(result.best_x);
  Pose previous = start;
  for (const Pose& pose : refined.positions) {
    refined.cost_s += flight_time(previous, pose, ctx.motion);
    previous = pose;
  }
  return refined;
}

PlannerKind planner_kind_from_string(const std::string& name) {
  if (name == "coverage") return PlannerKind::coverage;
  if (name == "image") return PlannerKind::image_based;
  if (name == "frontier") return PlannerKind::frontier;
  if (name == "fixed_horizon") return PlannerKind::fixed_horizon;
  throw std::invalid_argument("unknown planner kind: " + name);
}

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::coverage: return "coverage";
    case PlannerKind::image_based: return "image";
    case PlannerKind::frontier: return "frontier";
    case PlannerKind::fixed_horizon: return "fixed_horizon";
  }
  throw std::logic_error("unreachable planner kind");
}

Planner::Planner(const PlannerParams& params, const PlannerContext& ctx,
                 int mission_index, std::uint64_t seed)
    : params_(params),
      ctx_(ctx),
      mission_index_(mission_index),
      seed_(seed),
      rng_(mix_seed(seed, 0x9A7 + static_cast<std::uint64_t>(mission_index))) {}

std::optional<Pose> Planner::propose(const mapping::BeliefMaps& maps,
                                     const model::PredictiveOutput* last_output,
                                     const Pose& current,
                                     const Budget& budget) {
  switch (params_.kind) {
    case PlannerKind::coverage: {
      if (!coverage_planned_) {
        const Path path =
            plan_coverage(mission_index_, ctx_, current, budget.remaining_s());
        queue_ = path.positions;
        queue_next_ = 0;
        coverage_planned_ = true;
      }
      if (queue_next_ >= queue_.size()) return std::nullopt;
      return queue_[queue_next_++];
    }
    case PlannerKind::image_based:
      return plan_image_based(last_output, maps, ctx_, current, params_.image,
                              rng_);
    case PlannerKind::frontier:
      return plan_frontier(maps, ctx_, current, params_.frontier, rng_);
    case PlannerKind::fixed_horizon: {
      if (params_.execute_full_horizon && queue_next_ < queue_.size())
        return queue_[queue_next_++];
      const Path greedy = greedy_grid_search(maps, ctx_, current, params_.grid);
      if (greedy.positions.empty()) return std::nullopt;
      const Path refined = refine_path_cmaes(
          maps, ctx_, current, greedy, params_.cmaes,
          mix_seed(seed_, 0xF1E + static_cast<std::uint64_t>(step_)));
      if (params_.execute_full_horizon) {
        queue_ = refined.positions;
        queue_next_ = 0;
        return queue_[queue_next_++];
      }
      return refined.positions.front();  // receding horizon
    }
  }
  return std::nullopt;
}

std::optional<Pose> Planner::next_measurement(
    const mapping::BeliefMaps& maps,
    const model::PredictiveOutput* last_output, const Pose& current,
    Budget& budget) {
  ++step_;
  const auto next = propose(maps, last_output, current, budget);
  if (!next.has_value()) return std::nullopt;
  const double leg = flight_time(current, *next, ctx_.motion);
  if (budget.spent_s + leg > budget.total_s) return std::nullopt;
  budget.spent_s += leg;
  return next;
}

}  // namespace alpsim::planning
