#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "alpsim/bayes_model.hpp"
#include "alpsim/geometry.hpp"

namespace alpsim::mapping {

// Global terrain belief: per-class semantic mean/variance fused by
// independent scalar Kalman filters, a latest-estimate model-uncertainty
// layer, and a hit-count layer. One fusion pipeline mutates; read-only
// queries may run between fusion steps.
struct BeliefMaps {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  double prior_var = 1.0;  // epsilon in (0, 1]
  double u_prior = 1.0;    // uncertainty assumed in unknown regions
  std::vector<double> semantic_mean;  // cell-major, C inner, init 1/C
  std::vector<double> semantic_var;   // cell-major, C inner, init epsilon
  std::vector<double> uncertainty;    // cell-major, init u_prior
  std::vector<int> hits;              // cell-major, init 0

  int cell_index(int ix, int iy) const { return iy * width + ix; }
  CellRect full_rect() const { return {0, 0, width, height}; }
};

BeliefMaps make_belief_maps(int width, int height, int num_classes,
                            double prior_var, double u_prior);

// Cell-space measurement produced by projecting a prediction through the
// camera footprint. Values are stored row-major over the footprint.
struct Measurement {
  CellRect footprint;
  int num_classes = 0;
  std::vector<double> probs;     // per covered cell, C inner, rows sum to 1
  std::vector<double> mi;        // per covered cell, in [0, 1]
  std::vector<double> variance;  // per covered cell, C inner, >= r_min

  int local_index(int ix, int iy) const {
    return (iy - footprint.y0) * footprint.width + (ix - footprint.x0);
  }
};

inline constexpr double kDefaultMeasurementVarFloor = 1e-4;

// Cell aggregation of a pixel-space prediction: per-cell mean of the
// covering pixels' probs (renormalized), mi, and mc_variance clamped below
// by r_min.
Measurement project_prediction(const model::PredictiveOutput& output,
                               const CellRect& footprint,
                               double r_min = kDefaultMeasurementVarFloor);

// Per cell and class scalar Kalman update K = P/(P+R), mu += K(s - mu),
// P = (1-K)P. Cells outside the footprint are untouched.
void fuse_semantic(BeliefMaps& maps, const Measurement& m);

// Latest-estimate overwrite of the uncertainty layer plus hit increment.
void update_uncertainty(BeliefMaps& maps, const Measurement& m);

struct RegionSums {
  double sum_uncertainty = 0.0;
  long long sum_hits = 0;
};

// Entrywise sums over a footprint; unknown cells (hits == 0) contribute
// u_prior to the uncertainty sum and 0 to the hit sum.
RegionSums region_sums(const BeliefMaps& maps, const CellRect& footprint);

// As region_sums, but hit counts are read from an explicit grid; used by
// planners that forward-simulate hits. The uncertainty sum still treats
// cells by the maps' own hit layer.
RegionSums region_sums_simulated(const BeliefMaps& maps,
                                 const CellRect& footprint,
                                 const std::vector<int>& simulated_hits);

// Observed cells (hits > 0) 4-adjacent to at least one unobserved cell,
// as ascending row-major cell indices.
std::vector<int> frontier_cells(const BeliefMaps& maps);

}  // namespace alpsim::mapping
