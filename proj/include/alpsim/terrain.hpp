#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "alpsim/geometry.hpp"

namespace alpsim::terrain {

// Ground-truth world: per-cell class labels plus the appearance features the
// camera observes. Immutable after construction.
struct TerrainRaster {
  int width_cells = 0;
  int height_cells = 0;
  double resolution_m = 1.0;
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<std::uint8_t> labels;  // row-major, iy * width_cells + ix
  std::vector<double> appearance;    // row-major, feature_dim per cell

  int cell_index(int ix, int iy) const { return iy * width_cells + ix; }
  std::uint8_t label(int ix, int iy) const { return labels[cell_index(ix, iy)]; }
  std::span<const double> appearance_at(int ix, int iy) const {
    return {appearance.data() +
                static_cast<std::size_t>(cell_index(ix, iy)) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
  }
  double width_m() const { return width_cells * resolution_m; }
  double height_m() const { return height_cells * resolution_m; }
  CellRect full_rect() const { return {0, 0, width_cells, height_cells}; }
};

// Downward-facing camera over flat terrain. The footprint is a flat
// orthographic projection; gsd_m and the raster resolution must have an
// integer ratio in one direction or the other so the pixel/cell mapping is
// exact.
struct CameraConfig {
  int image_width_px = 100;
  int image_height_px = 100;
  double gsd_m = 0.15;
  double altitude_m = 30.0;
  double noise_sigma = 0.0;

  double footprint_width_m() const { return image_width_px * gsd_m; }
  double footprint_height_m() const { return image_height_px * gsd_m; }
};

// One simulated capture: per-pixel features with sensor noise, noiseless
// ground-truth labels, and the grid footprint. Pixel (px, py) is stored at
// py * width_px + px with py increasing towards +y (north) and px towards
// +x (east).
struct ImageSample {
  Pose pose;
  int width_px = 0;
  int height_px = 0;
  int feature_dim = 0;
  std::vector<double> features;        // pixel-major, feature_dim inner
  std::vector<std::uint8_t> gt_labels; // pixel-major
  CellRect footprint;

  int pixel_index(int px, int py) const { return py * width_px + px; }
  std::span<const double> features_at(int px, int py) const {
    return {features.data() +
                static_cast<std::size_t>(pixel_index(px, py)) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
  }
};

struct CaptureError : std::runtime_error {
  CaptureError(const std::string& msg, Pose clamp)
      : std::runtime_error(msg), suggested_clamp(clamp) {}
  Pose suggested_clamp;  // nearest pose whose footprint fits
};

// Range of footprint cells covered by pixel px, for an image axis of
// image_px pixels spanning side_cells cells. Exact integer mapping; when a
// pixel covers an even block of cells the centre is the lower-middle cell.
struct PixelCellSpan {
  int first = 0;
  int last = 0;
};
PixelCellSpan pixel_cell_span(int px, int image_px, int side_cells);
int pixel_center_cell(int px, int image_px, int side_cells);

// Throws std::invalid_argument if gsd_m and resolution_m do not have an
// exact integer ratio in either direction.
void check_camera_raster(const CameraConfig& cam, const TerrainRaster& raster);

// Footprint rectangle in cell indices: round(image_px * gsd / res) cells per
// side, centred at the cell containing (pose.x, pose.y). Throws
// std::out_of_range when the rectangle leaves the raster.
CellRect footprint_cells(const CameraConfig& cam, const Pose& pose,
                         const TerrainRaster& raster);

// Deterministic blobby terrain: Voronoi regions of class-balanced seed
// points, class prototype appearance per cell. Every class is guaranteed to
// occupy at least 1% of the cells.
TerrainRaster generate_synthetic_terrain(std::uint64_t seed, int width_cells,
                                         int height_cells, int num_classes,
                                         double blob_scale, int feature_dim = 3,
                                         double resolution_m = 1.0);

// Well-separated appearance prototypes, one per class. For feature_dim == 3
// these are fixed hue-wheel colours; otherwise seeded farthest-point samples
// in [0,1]^D.
std::vector<std::vector<double>> class_prototypes(int num_classes,
                                                  int feature_dim,
                                                  std::uint64_t seed);

// Pure function of its inputs plus seed. Features are the appearance of the
// pixel's centre cell plus zero-mean gaussian noise (noise_sigma); labels
// are the noiseless centre-cell classes. Throws CaptureError with a clamp
// suggestion when the footprint leaves the raster.
ImageSample capture_image(const TerrainRaster& raster, const CameraConfig& cam,
                          const Pose& pose, std::uint64_t rng_seed);

// Range of valid pose coordinates (cell centres) keeping the footprint
// inside `region`.
struct PoseBounds {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
};
PoseBounds valid_pose_bounds(const CameraConfig& cam,
                             const TerrainRaster& raster,
                             const CellRect& region);
Pose clamp_pose(const Pose& pose, const PoseBounds& bounds);

// Plain-text raster format, documented in the README.
void save_raster(const TerrainRaster& raster, const std::string& path);
TerrainRaster load_raster(const std::string& path);

}  // namespace alpsim::terrain
