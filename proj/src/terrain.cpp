#include "alpsim/terrain.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "alpsim/rng.hpp"

namespace alpsim::terrain {

namespace {

int side_cells_for(int image_px, double gsd_m, double resolution_m) {
  return static_cast<int>(std::llround(image_px * gsd_m / resolution_m));
}

// hue in [0, 360), s and v in [0, 1]
std::vector<double> hsv_to_rgb(double hue, double s, double v) {
  const double c = v * s;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

}  // namespace

PixelCellSpan pixel_cell_span(int px, int image_px, int side_cells) {
  const long long first =
      static_cast<long long>(px) * side_cells / image_px;
  const long long last =
      (static_cast<long long>(px + 1) * side_cells - 1) / image_px;
  return {static_cast<int>(first), static_cast<int>(last)};
}

int pixel_center_cell(int px, int image_px, int side_cells) {
  const PixelCellSpan span = pixel_cell_span(px, image_px, side_cells);
  const int block = span.last - span.first + 1;
  return span.first + (block - 1) / 2;
}

void check_camera_raster(const CameraConfig& cam, const TerrainRaster& raster) {
  if (cam.image_width_px <= 0 || cam.image_height_px <= 0)
    throw std::invalid_argument("camera image dimensions must be positive");
  if (cam.gsd_m <= 0.0)
    throw std::invalid_argument("camera gsd_m must be positive");
  const double ratio = cam.gsd_m / raster.resolution_m;
  const double cells_per_px = std::round(ratio);
  const double px_per_cell = std::round(1.0 / ratio);
  const bool ok = (cells_per_px >= 1.0 && std::fabs(ratio - cells_per_px) < 1e-9) ||
                  (px_per_cell >= 1.0 && std::fabs(1.0 / ratio - px_per_cell) < 1e-9);
  if (!ok)
    throw std::invalid_argument(
        "gsd_m and resolution_m must have an exact integer ratio");
}

CellRect footprint_cells(const CameraConfig& cam, const Pose& pose,
                         const TerrainRaster& raster) {
  check_camera_raster(cam, raster);
  const int side_x = side_cells_for(cam.image_width_px, cam.gsd_m, raster.resolution_m);
  const int side_y = side_cells_for(cam.image_height_px, cam.gsd_m, raster.resolution_m);
  const int cx = cell_of(pose.x_m, raster.resolution_m);
  const int cy = cell_of(pose.y_m, raster.resolution_m);
  const CellRect rect{cx - side_x / 2, cy - side_y / 2, side_x, side_y};
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x1() >= raster.width_cells ||
      rect.y1() >= raster.height_cells) {
    throw std::out_of_range("camera footprint leaves the terrain");
  }
  return rect;
}

std::vector<std::vector<double>> class_prototypes(int num_classes,
                                                  int feature_dim,
                                                  std::uint64_t seed) {
  std::vector<std::vector<double>> protos;
  protos.reserve(num_classes);
  if (feature_dim == 3) {
    for (int c = 0; c < num_classes; ++c) {
      const double hue = 360.0 * c / num_classes;
      protos.push_back(hsv_to_rgb(hue, 0.9, 0.95));
    }
    return protos;
  }
  // Farthest-point darts keep the prototypes separable for any dimension.
  Rng rng(mix_seed(seed, 0xC1A55u));
  std::vector<double> first(feature_dim);
  for (double& v : first) v = rng.uniform();
  protos.push_back(first);
  while (static_cast<int>(protos.size()) < num_classes) {
    std::vector<double> best;
    double best_dist = -1.0;
    for (int trial = 0; trial < 64; ++trial) {
      std::vector<double> cand(feature_dim);
      for (double& v : cand) v = rng.uniform();
      double min_d = 1e300;
      for (const auto& p : protos) {
        double d = 0;
        for (int k = 0; k < feature_dim; ++k)
          d += (cand[k] - p[k]) * (cand[k] - p[k]);
        min_d = std::min(min_d, d);
      }
      if (min_d > best_dist) {
        best_dist = min_d;
        best = cand;
      }
    }
    protos.push_back(best);
  }
  return protos;
}

TerrainRaster generate_synthetic_terrain(std::uint64_t seed, int width_cells,
                                         int height_cells, int num_classes,
                                         double blob_scale, int feature_dim,
                                         double resolution_m) {
  if (num_classes < 2)
    throw std::invalid_argument("num_classes must be at least 2");
  if (width_cells < 16 || height_cells < 16)
    throw std::invalid_argument("terrain must be at least 16 cells per side");
  if (blob_scale <= 0.0)
    throw std::invalid_argument("blob_scale must be positive");
  if (feature_dim < 1)
    throw std::invalid_argument("feature_dim must be positive");
  if (resolution_m <= 0.0)
    throw std::invalid_argument("resolution_m must be positive");

  const long long total = static_cast<long long>(width_cells) * height_cells;
  const long long min_count = std::max<long long>(1, total / 100);
  const int num_seeds = std::max<int>(
      num_classes,
      static_cast<int>(std::llround(total / (blob_scale * blob_scale))));

  TerrainRaster raster;
  raster.width_cells = width_cells;
  raster.height_cells = height_cells;
  raster.resolution_m = resolution_m;
  raster.num_classes = num_classes;
  raster.feature_dim = feature_dim;
  raster.labels.assign(total, 0);

  // Voronoi regions of class-balanced seed points; retry with a derived
  // seed until every class holds >= 1% of the cells.
  bool ok = false;
  for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
    Rng rng(mix_seed(seed, 0xB10B + attempt));
    std::vector<int> sx(num_seeds), sy(num_seeds), sc(num_seeds);
    for (int i = 0; i < num_seeds; ++i) {
      sx[i] = rng.uniform_int(0, width_cells - 1);
      sy[i] = rng.uniform_int(0, height_cells - 1);
      sc[i] = i % num_classes;
    }
    std::vector<long long> counts(num_classes, 0);
    for (int iy = 0; iy < height_cells; ++iy) {
      for (int ix = 0; ix < width_cells; ++ix) {
        long long best_d = -1;
        int best_c = 0;
        for (int i = 0; i < num_seeds; ++i) {
          const long long dx = ix - sx[i];
          const long long dy = iy - sy[i];
          const long long d = dx * dx + dy * dy;
          if (best_d < 0 || d < best_d) {
            best_d = d;
            best_c = sc[i];
          }
        }
        raster.labels[raster.cell_index(ix, iy)] =
            static_cast<std::uint8_t>(best_c);
        ++counts[best_c];
      }
    }
    ok = true;
    for (int c = 0; c < num_classes; ++c)
      if (counts[c] < min_count) ok = false;
  }
  if (!ok)
    throw std::runtime_error(
        "could not generate terrain with >= 1% share per class");

  const auto protos = class_prototypes(num_classes, feature_dim, seed);
  raster.appearance.resize(total * feature_dim);
  for (long long i = 0; i < total; ++i) {
    const auto& p = protos[raster.labels[i]];
    for (int k = 0; k < feature_dim; ++k)
      raster.appearance[i * feature_dim + k] = p[k];
  }
  return raster;
}

ImageSample capture_image(const TerrainRaster& raster, const CameraConfig& cam,
                          const Pose& pose, std::uint64_t rng_seed) {
  CellRect fp;
  try {
    fp = footprint_cells(cam, pose, raster);
  } catch (const std::out_of_range&) {
    const PoseBounds bounds =
        valid_pose_bounds(cam, raster, raster.full_rect());
    const Pose clamped = clamp_pose(pose, bounds);
    std::ostringstream msg;
    msg << "footprint out of bounds at (" << pose.x_m << ", " << pose.y_m
        << "); nearest valid pose (" << clamped.x_m << ", " << clamped.y_m
        << ")";
    throw CaptureError(msg.str(), clamped);
  }

  ImageSample img;
  img.pose = pose;
  img.width_px = cam.image_width_px;
  img.height_px = cam.image_height_px;
  img.feature_dim = raster.feature_dim;
  img.footprint = fp;
  const long long n_px =
      static_cast<long long>(img.width_px) * img.height_px;
  img.features.resize(n_px * raster.feature_dim);
  img.gt_labels.resize(n_px);

  Rng rng(rng_seed);
  for (int py = 0; py < img.height_px; ++py) {
    const int cy = fp.y0 + pixel_center_cell(py, img.height_px, fp.height);
    for (int px = 0; px < img.width_px; ++px) {
      const int cx = fp.x0 + pixel_center_cell(px, img.width_px, fp.width);
      const int pi = img.pixel_index(px, py);
      img.gt_labels[pi] = raster.label(cx, cy);
      const auto app = raster.appearance_at(cx, cy);
      for (int k = 0; k < raster.feature_dim; ++k) {
        double v = app[k];
        if (cam.noise_sigma > 0.0) v += rng.normal(0.0, cam.noise_sigma);
        img.features[static_cast<std::size_t>(pi) * raster.feature_dim + k] = v;
      }
    }
  }
  return img;
}

PoseBounds valid_pose_bounds(const CameraConfig& cam,
                             const TerrainRaster& raster,
                             const CellRect& region) {
  const int side_x = side_cells_for(cam.image_width_px, cam.gsd_m, raster.resolution_m);
  const int side_y = side_cells_for(cam.image_height_px, cam.gsd_m, raster.resolution_m);
  const int cx_min = region.x0 + side_x / 2;
  const int cx_max = region.x0 + region.width - side_x + side_x / 2;
  const int cy_min = region.y0 + side_y / 2;
  const int cy_max = region.y0 + region.height - side_y + side_y / 2;
  if (cx_max < cx_min || cy_max < cy_min)
    throw std::invalid_argument("camera footprint larger than the region");
  const double res = raster.resolution_m;
  return {(cx_min + 0.5) * res, (cx_max + 0.5) * res,
          (cy_min + 0.5) * res, (cy_max + 0.5) * res};
}

Pose clamp_pose(const Pose& pose, const PoseBounds& b) {
  return {clamp(pose.x_m, b.x_min, b.x_max), clamp(pose.y_m, b.y_min, b.y_max),
          pose.z_m};
}

void save_raster(const TerrainRaster& raster, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "alpsim-raster 1\n";
  out << raster.width_cells << " " << raster.height_cells << " "
      << raster.num_classes << " " << raster.feature_dim << " ";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", raster.resolution_m);
  out << buf << "\n";
  for (int iy = 0; iy < raster.height_cells; ++iy) {
    for (int ix = 0; ix < raster.width_cells; ++ix) {
      if (ix) out << " ";
      out << static_cast<int>(raster.label(ix, iy));
    }
    out << "\n";
  }
  const long long total =
      static_cast<long long>(raster.width_cells) * raster.height_cells;
  for (long long i = 0; i < total; ++i) {
    for (int k = 0; k < raster.feature_dim; ++k) {
      if (k) out << " ";
      std::snprintf(buf, sizeof(buf), "%.17g",
                    raster.appearance[i * raster.feature_dim + k]);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

TerrainRaster load_raster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "alpsim-raster" || version != 1)
    throw std::runtime_error(path + ": not an alpsim raster file");
  TerrainRaster raster;
  in >> raster.width_cells >> raster.height_cells >> raster.num_classes >>
      raster.feature_dim >> raster.resolution_m;
  if (raster.width_cells <= 0 || raster.height_cells <= 0 ||
      raster.num_classes <= 0 || raster.feature_dim <= 0 ||
      raster.resolution_m <= 0)
    throw std::runtime_error(path + ": invalid raster header");
  const long long total =
      static_cast<long long>(raster.width_cells) * raster.height_cells;
  raster.labels.resize(total);
  for (long long i = 0; i < total; ++i) {
    int v = 0;
    in >> v;
    if (v < 0 || v >= raster.num_classes)
      throw std::runtime_error(path + ": label out of range");
    raster.labels[i] = static_cast<std::uint8_t>(v);
  }
  raster.appearance.resize(total * raster.feature_dim);
  for (auto& v : raster.appearance) in >> v;
  if (!in) throw std::runtime_error(path + ": truncated raster file");
  return raster;
}

}  // namespace alpsim::terrain
