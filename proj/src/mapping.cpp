#include "alpsim/mapping.hpp"

#include <algorithm>

#include "alpsim/terrain.hpp"

namespace alpsim::mapping {

BeliefMaps make_belief_maps(int width, int height, int num_classes,
                            double prior_var, double u_prior) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("belief map dimensions must be positive");
  if (num_classes < 2)
    throw std::invalid_argument("belief map needs at least 2 classes");
  if (prior_var <= 0.0 || prior_var > 1.0)
    throw std::invalid_argument("prior variance must lie in (0, 1]");
  if (u_prior < 0.0 || u_prior > 1.0)
    throw std::invalid_argument("u_prior must lie in [0, 1]");

  BeliefMaps maps;
  maps.width = width;
  maps.height = height;
  maps.num_classes = num_classes;
  maps.prior_var = prior_var;
  maps.u_prior = u_prior;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  maps.semantic_mean.assign(n * num_classes, 1.0 / num_classes);
  maps.semantic_var.assign(n * num_classes, prior_var);
  maps.uncertainty.assign(n, u_prior);
  maps.hits.assign(n, 0);
  return maps;
}

Measurement project_prediction(const model::PredictiveOutput& output,
                               const CellRect& footprint, double r_min) {
  if (footprint.width < 1 || footprint.height < 1)
    throw std::invalid_argument("empty footprint");
  if (r_min <= 0.0) throw std::invalid_argument("r_min must be positive");

  const int c = output.num_classes;
  Measurement m;
  m.footprint = footprint;
  m.num_classes = c;
  const std::size_t cells = static_cast<std::size_t>(footprint.area());
  m.probs.assign(cells * c, 0.0);
  m.mi.assign(cells, 0.0);
  m.variance.assign(cells * c, 0.0);
  std::vector<int> cover(cells, 0);

  for (int py = 0; py < output.height_px; ++py) {
    const auto span_y =
        terrain::pixel_cell_span(py, output.height_px, footprint.height);
    for (int px = 0; px < output.width_px; ++px) {
      const auto span_x =
          terrain::pixel_cell_span(px, output.width_px, footprint.width);
      const long long pi =
          static_cast<long long>(py) * output.width_px + px;
      for (int cy = span_y.first; cy <= span_y.last; ++cy) {
        for (int cx = span_x.first; cx <= span_x.last; ++cx) {
          const std::size_t cell =
              static_cast<std::size_t>(cy) * footprint.width + cx;
          ++cover[cell];
          m.mi[cell] += output.mi[pi];
          for (int k = 0; k < c; ++k) {
            m.probs[cell * c + k] += output.probs[pi * c + k];
            m.variance[cell * c + k] += output.mc_variance[pi * c + k];
          }
        }
      }
    }
  }

  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (cover[cell] == 0)
      throw std::logic_error("footprint cell not covered by any pixel");
    m.mi[cell] /= cover[cell];
    double sum = 0.0;
    for (int k = 0; k < c; ++k) {
      m.probs[cell * c + k] /= cover[cell];
      sum += m.probs[cell * c + k];
      m.variance[cell * c + k] =
          std::max(m.variance[cell * c + k] / cover[cell], r_min);
    }
    for (int k = 0; k < c; ++k) m.probs[cell * c + k] /= sum;
  }
  return m;
}

namespace {

void check_footprint(const BeliefMaps& maps, const CellRect& fp) {
  if (fp.x0 < 0 || fp.y0 < 0 || fp.x1() >= maps.width ||
      fp.y1() >= maps.height)
    throw std::out_of_range("footprint outside the belief map");
}

}  // namespace

void fuse_semantic(BeliefMaps& maps, const Measurement& m) {
  check_footprint(maps, m.footprint);
  if (m.num_classes != maps.num_classes)
    throw std::invalid_argument("measurement class count mismatch");
  const int c = maps.num_classes;
  for (int iy = m.footprint.y0; iy <= m.footprint.y1(); ++iy) {
    for (int ix = m.footprint.x0; ix <= m.footprint.x1(); ++ix) {
      const std::size_t cell = maps.cell_index(ix, iy);
      const std::size_t local = m.local_index(ix, iy);
      for (int k = 0; k < c; ++k) {
        const double r = m.variance[local * c + k];
        if (r <= 0.0)
          throw std::invalid_argument("measurement variance must be > 0");
        double& mu = maps.semantic_mean[cell * c + k];
        double& p = maps.semantic_var[cell * c + k];
        const double gain = p / (p + r);
        mu += gain * (m.probs[local * c + k] - mu);
        p *= 1.0 - gain;
      }
    }
  }
}

void update_uncertainty(BeliefMaps& maps, const Measurement& m) {
  check_footprint(maps, m.footprint);
  for (int iy = m.footprint.y0; iy <= m.footprint.y1(); ++iy) {
    for (int ix = m.footprint.x0; ix <= m.footprint.x1(); ++ix) {
      const std::size_t cell = maps.cell_index(ix, iy);
      maps.uncertainty[cell] = m.mi[m.local_index(ix, iy)];
      ++maps.hits[cell];
    }
  }
}

RegionSums region_sums(const BeliefMaps& maps, const CellRect& footprint) {
  return region_sums_simulated(maps, footprint, maps.hits);
}

RegionSums region_sums_simulated(const BeliefMaps& maps,
                                 const CellRect& footprint,
                                 const std::vector<int>& simulated_hits) {
  check_footprint(maps, footprint);
  RegionSums sums;
  for (int iy = footprint.y0; iy <= footprint.y1(); ++iy) {
    for (int ix = footprint.x0; ix <= footprint.x1(); ++ix) {
      const std::size_t cell = maps.cell_index(ix, iy);
      sums.sum_uncertainty +=
          maps.hits[cell] > 0 ? maps.uncertainty[cell] : maps.u_prior;
      sums.sum_hits += simulated_hits[cell];
    }
  }
  return sums;
}

std::vector<int> frontier_cells(const BeliefMaps& maps) {
  std::vector<int> frontier;
  for (int iy = 0; iy < maps.height; ++iy) {
    for (int ix = 0; ix < maps.width; ++ix) {
      const int cell = maps.cell_index(ix, iy);
      if (maps.hits[cell] == 0) continue;
      const bool unknown_neighbor =
          (ix > 0 && maps.hits[cell - 1] == 0) ||
          (ix + 1 < maps.width && maps.hits[cell + 1] == 0) ||
          (iy > 0 && maps.hits[cell - maps.width] == 0) ||
          (iy + 1 < maps.height && maps.hits[cell + maps.width] == 0);
      if (unknown_neighbor) frontier.push_back(cell);
    }
  }
  return frontier;
}

}  // namespace alpsim::mapping
