#pragma once

#include <algorithm>
#include <cmath>

namespace alpsim {

// World frame: x east, y north, z up, all in metres. Grid cell (ix, iy)
// covers [ix*res, (ix+1)*res) x [iy*res, (iy+1)*res).
struct Pose {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;
};

inline double distance(const Pose& a, const Pose& b) {
  const double dx = b.x_m - a.x_m;
  const double dy = b.y_m - a.y_m;
  const double dz = b.z_m - a.z_m;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Axis-aligned rectangle of grid cells, inclusive on both ends.
struct CellRect {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  int x1() const { return x0 + width - 1; }
  int y1() const { return y0 + height - 1; }
  long long area() const { return static_cast<long long>(width) * height; }

  bool contains(int ix, int iy) const {
    return ix >= x0 && ix <= x1() && iy >= y0 && iy <= y1();
  }
  bool intersects(const CellRect& o) const {
    return x0 <= o.x1() && o.x0 <= x1() && y0 <= o.y1() && o.y0 <= y1();
  }
  bool operator==(const CellRect& o) const = default;
};

// Cell index containing coordinate v. Points lying exactly on a cell
// boundary belong to the lower cell, except at v = 0.
inline int cell_of(double v_m, double resolution_m) {
  const double q = v_m / resolution_m;
  const double f = std::floor(q);
  int idx = static_cast<int>(f);
  if (q == f && idx > 0) --idx;
  return idx;
}

inline double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

}  // namespace alpsim
