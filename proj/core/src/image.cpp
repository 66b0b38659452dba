#include "cail/image.hpp"

#include <algorithm>
#include <cstdlib>

namespace cail::raster {

namespace {
inline void put(Frame& f, int y, int x) {
  if (y >= 0 && y < kFrameSize && x >= 0 && x < kFrameSize) f.at(y, x) = 255;
}
}  // namespace

void stamp3x3(Frame& f, int y, int x) {
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) put(f, y + dy, x + dx);
}

void thick_line(Frame& f, int y0, int x0, int y1, int x1) {
  int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    stamp3x3(f, y0, x0);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void disc(Frame& f, int cy, int cx, int r) {
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dy * dy + dx * dx <= r * r) put(f, cy + dy, cx + dx);
}

void rect(Frame& f, int y0, int x0, int y1, int x1) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) put(f, y, x);
}

}  // namespace cail::raster
