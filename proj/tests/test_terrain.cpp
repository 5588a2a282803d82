#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "alpsim/rng.hpp"
#include "alpsim/terrain.hpp"

using namespace alpsim;
using namespace alpsim::terrain;

namespace {

CameraConfig make_camera(int px, double gsd, double sigma = 0.0) {
  CameraConfig cam;
  cam.image_width_px = px;
  cam.image_height_px = px;
  cam.gsd_m = gsd;
  cam.altitude_m = 30.0;
  cam.noise_sigma = sigma;
  return cam;
}

}  // namespace

TEST_CASE("synthetic terrain: every class covers at least 1% of cells") {
  const auto raster = generate_synthetic_terrain(7, 128, 128, 4, 20.0);
  std::vector<long long> counts(4, 0);
  for (auto l : raster.labels) ++counts[l];
  const long long total = 128LL * 128;
  for (int c = 0; c < 4; ++c) CHECK(counts[c] >= total / 100);
  CHECK(raster.appearance.size() == static_cast<std::size_t>(total) * 3);
}

TEST_CASE("synthetic terrain: deterministic for a fixed seed") {
  const auto a = generate_synthetic_terrain(7, 64, 64, 3, 12.0);
  const auto b = generate_synthetic_terrain(7, 64, 64, 3, 12.0);
  CHECK(a.labels == b.labels);
  CHECK(a.appearance == b.appearance);
  const auto c = generate_synthetic_terrain(8, 64, 64, 3, 12.0);
  CHECK(a.labels != c.labels);
}

TEST_CASE("synthetic terrain: preconditions rejected") {
  CHECK_THROWS_AS(generate_synthetic_terrain(7, 128, 128, 1, 20.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_terrain(7, 8, 128, 4, 20.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_terrain(7, 128, 8, 4, 20.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_terrain(7, 128, 128, 4, 0.0),
                  std::invalid_argument);
}

TEST_CASE("class prototypes are pairwise separable") {
  for (int dim : {3, 5}) {
    const auto protos = class_prototypes(4, dim, 11);
    REQUIRE(protos.size() == 4);
    for (std::size_t i = 0; i < protos.size(); ++i) {
      for (std::size_t j = i + 1; j < protos.size(); ++j) {
        double d = 0;
        for (int k = 0; k < dim; ++k)
          d += (protos[i][k] - protos[j][k]) * (protos[i][k] - protos[j][k]);
        CHECK(std::sqrt(d) > 0.3);
      }
    }
  }
}

TEST_CASE("footprint: 100 px at 0.15 m GSD on 0.15 m cells is 100x100 cells") {
  const auto raster = generate_synthetic_terrain(7, 128, 128, 2, 20.0, 3, 0.15);
  const auto cam = make_camera(100, 0.15);
  const Pose pose{(64 + 0.5) * 0.15, (64 + 0.5) * 0.15, 30.0};
  const CellRect fp = footprint_cells(cam, pose, raster);
  CHECK(fp.width == 100);
  CHECK(fp.height == 100);
  CHECK(fp.x0 == 64 - 50);
  CHECK(fp.y0 == 64 - 50);
}

TEST_CASE("footprint: 50 px at 0.3 m GSD on 0.15 m cells is 100x100 cells") {
  const auto raster = generate_synthetic_terrain(7, 128, 128, 2, 20.0, 3, 0.15);
  const auto cam = make_camera(50, 0.3);
  const Pose pose{(64 + 0.5) * 0.15, (64 + 0.5) * 0.15, 30.0};
  const CellRect fp = footprint_cells(cam, pose, raster);
  CHECK(fp.width == 100);
  CHECK(fp.height == 100);
}

TEST_CASE("footprint: exact cell boundary resolves to the lower cell") {
  const auto raster = generate_synthetic_terrain(7, 128, 128, 2, 20.0);
  const auto cam = make_camera(16, 1.0);
  // x = 64.0 sits on the boundary between cells 63 and 64.
  const CellRect on_boundary =
      footprint_cells(cam, Pose{64.0, 64.0, 30.0}, raster);
  const CellRect in_cell_63 =
      footprint_cells(cam, Pose{63.5, 63.5, 30.0}, raster);
  const CellRect in_cell_64 =
      footprint_cells(cam, Pose{64.5, 64.5, 30.0}, raster);
  CHECK(on_boundary == in_cell_63);
  CHECK(on_boundary.x0 + 1 == in_cell_64.x0);
}

TEST_CASE("footprint: out of bounds pose rejected") {
  const auto raster = generate_synthetic_terrain(7, 128, 128, 2, 20.0);
  const auto cam = make_camera(16, 1.0);
  CHECK_THROWS_AS(footprint_cells(cam, Pose{2.0, 64.0, 30.0}, raster),
                  std::out_of_range);
  CHECK_THROWS_AS(footprint_cells(cam, Pose{64.0, 126.0, 30.0}, raster),
                  std::out_of_range);
}

TEST_CASE("footprint rejects a non-integer gsd/resolution ratio") {
  const auto raster = generate_synthetic_terrain(7, 128, 128, 2, 20.0);
  const auto cam = make_camera(16, 0.7);
  CHECK_THROWS_AS(footprint_cells(cam, Pose{64.0, 64.0, 30.0}, raster),
                  std::invalid_argument);
}

TEST_CASE("capture: zero sensor noise reproduces cell appearance exactly") {
  const auto raster = generate_synthetic_terrain(3, 64, 64, 4, 10.0);
  const auto cam = make_camera(16, 1.0, 0.0);
  const Pose pose{32.5, 32.5, 30.0};
  const auto img = capture_image(raster, cam, pose, 99);
  for (int py = 0; py < img.height_px; ++py) {
    for (int px = 0; px < img.width_px; ++px) {
      const int cx =
          img.footprint.x0 + pixel_center_cell(px, img.width_px, img.footprint.width);
      const int cy =
          img.footprint.y0 + pixel_center_cell(py, img.height_px, img.footprint.height);
      const auto app = raster.appearance_at(cx, cy);
      const auto feat = img.features_at(px, py);
      for (int k = 0; k < 3; ++k) CHECK(feat[k] == app[k]);
    }
  }
}

TEST_CASE("capture: footprint overflow raises an error with a clamp hint") {
  const auto raster = generate_synthetic_terrain(3, 64, 64, 4, 10.0);
  const auto cam = make_camera(16, 1.0);
  try {
    capture_image(raster, cam, Pose{1.0, 1.0, 30.0}, 99);
    FAIL("expected CaptureError");
  } catch (const CaptureError& e) {
    // The suggested pose must itself be capturable.
    CHECK_NOTHROW(footprint_cells(cam, e.suggested_clamp, raster));
  }
}

TEST_CASE("capture: bit-reproducible for a fixed seed") {
  const auto raster = generate_synthetic_terrain(3, 64, 64, 4, 10.0);
  const auto cam = make_camera(16, 1.0, 0.2);
  const Pose pose{32.5, 32.5, 30.0};
  const auto a = capture_image(raster, cam, pose, 1234);
  const auto b = capture_image(raster, cam, pose, 1234);
  CHECK(a.features == b.features);
  CHECK(a.gt_labels == b.gt_labels);
  const auto c = capture_image(raster, cam, pose, 1235);
  CHECK(a.features != c.features);
}

// Sample-statistics oracle: the per-pixel deviation from the noiseless
// appearance must have an empirical std within 5% of noise_sigma.
TEST_CASE("capture: sensor noise magnitude matches noise_sigma") {
  const auto raster = generate_synthetic_terrain(3, 128, 128, 4, 20.0);
  const auto cam = make_camera(64, 1.0, 0.1);
  const Pose pose{64.5, 64.5, 30.0};
  const auto img = capture_image(raster, cam, pose, 2024);
  double sum = 0.0, sum_sq = 0.0;
  long long n = 0;
  for (int py = 0; py < img.height_px; ++py) {
    for (int px = 0; px < img.width_px; ++px) {
      const int cx =
          img.footprint.x0 + pixel_center_cell(px, img.width_px, img.footprint.width);
      const int cy =
          img.footprint.y0 + pixel_center_cell(py, img.height_px, img.footprint.height);
      const auto app = raster.appearance_at(cx, cy);
      const auto feat = img.features_at(px, py);
      for (int k = 0; k < 3; ++k) {
        const double d = feat[k] - app[k];
        sum += d;
        sum_sq += d * d;
        ++n;
      }
    }
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(stddev == doctest::Approx(0.1).epsilon(0.05));
}

namespace {

// cell_of with a tolerance for boundaries that are inexact in binary
// (e.g. multiples of 0.15 m); ties resolve to the lower cell.
int cell_of_tolerant(double v_m, double resolution_m) {
  const double q = v_m / resolution_m;
  const double r = std::round(q);
  if (std::fabs(q - r) < 1e-9) {
    const int idx = static_cast<int>(r);
    return idx > 0 ? idx - 1 : idx;
  }
  return static_cast<int>(std::floor(q));
}

}  // namespace

// Independent projection oracle: recompute each pixel's cell through world
// coordinates (snapped footprint origin + pixel centre + boundary tie rule)
// and check the captured label matches the raster.
TEST_CASE("capture: pixel/cell label round trip across pixel-cell ratios") {
  const auto raster = generate_synthetic_terrain(5, 128, 128, 4, 14.0, 3, 0.15);
  struct Case {
    int px;
    double gsd;
  };
  for (const Case c : {Case{16, 0.15}, Case{8, 0.3}, Case{32, 0.075}}) {
    const auto cam = make_camera(c.px, c.gsd);
    Rng rng(77);
    const auto bounds = valid_pose_bounds(cam, raster, raster.full_rect());
    for (int trial = 0; trial < 20; ++trial) {
      const Pose pose = clamp_pose(
          Pose{rng.uniform(0.0, raster.width_m()),
               rng.uniform(0.0, raster.height_m()), 30.0},
          bounds);
      const auto img = capture_image(raster, cam, pose, trial);
      for (int py = 0; py < img.height_px; ++py) {
        for (int px = 0; px < img.width_px; ++px) {
          const double wx =
              img.footprint.x0 * raster.resolution_m + (px + 0.5) * cam.gsd_m;
          const double wy =
              img.footprint.y0 * raster.resolution_m + (py + 0.5) * cam.gsd_m;
          const int cx = cell_of_tolerant(wx, raster.resolution_m);
          const int cy = cell_of_tolerant(wy, raster.resolution_m);
          REQUIRE(img.gt_labels[img.pixel_index(px, py)] ==
                  raster.label(cx, cy));
        }
      }
    }
  }
}

TEST_CASE("pose clamping keeps random footprints inside the raster") {
  const auto raster = generate_synthetic_terrain(9, 96, 64, 3, 12.0);
  const auto cam = make_camera(16, 1.0);
  const auto bounds = valid_pose_bounds(cam, raster, raster.full_rect());
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose raw{rng.uniform(-50.0, 150.0), rng.uniform(-50.0, 120.0), 30.0};
    const Pose pose = clamp_pose(raw, bounds);
    CHECK_NOTHROW(footprint_cells(cam, pose, raster));
  }
}

TEST_CASE("raster file round trip") {
  const auto raster = generate_synthetic_terrain(21, 32, 24, 3, 8.0, 2, 0.5);
  const auto path =
      (std::filesystem::temp_directory_path() / "alpsim_raster_test.txt")
          .string();
  save_raster(raster, path);
  const auto loaded = load_raster(path);
  CHECK(loaded.width_cells == raster.width_cells);
  CHECK(loaded.height_cells == raster.height_cells);
  CHECK(loaded.num_classes == raster.num_classes);
  CHECK(loaded.feature_dim == raster.feature_dim);
  CHECK(loaded.resolution_m == raster.resolution_m);
  CHECK(loaded.labels == raster.labels);
  CHECK(loaded.appearance == raster.appearance);
  std::remove(path.c_str());
}

TEST_CASE("load_raster rejects malformed files") {
  const auto path =
      (std::filesystem::temp_directory_path() / "alpsim_bad_raster.txt")
          .string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("not-a-raster 1\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_raster(path), std::runtime_error);
  std::remove(path.c_str());
}
