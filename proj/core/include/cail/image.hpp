#pragma once

#include <array>
#include <cstdint>
#include <cstring>

namespace cail {

inline constexpr int kFrameSize = 64;          // H == W
inline constexpr int kFramePixels = kFrameSize * kFrameSize;
inline constexpr int kFrameStack = 3;          // F most recent frames

// Single 64x64 grayscale frame, row-major. Background 0, geometry 255.
struct Frame {
  std::array<std::uint8_t, kFramePixels> px{};

  std::uint8_t& at(int y, int x) { return px[y * kFrameSize + x]; }
  std::uint8_t at(int y, int x) const { return px[y * kFrameSize + x]; }
  bool operator==(const Frame&) const = default;
};

// Stack of the F most recent frames, oldest first.
struct VisualState {
  std::array<Frame, kFrameStack> frames{};

  bool operator==(const VisualState&) const = default;

  // Scales pixels to [0, 1] floats in HWC layout (channel = frame index,
  // oldest first). `out` must hold kFramePixels * kFrameStack values.
  template <typename S>
  void to_float(S* out) const {
    constexpr S inv = S(1) / S(255);
    for (int p = 0; p < kFramePixels; ++p)
      for (int f = 0; f < kFrameStack; ++f)
        out[p * kFrameStack + f] = S(frames[f].px[p]) * inv;
  }
};

namespace raster {

// Integer-deterministic primitives; every touched pixel is set to 255 and
// clipped at the frame border. No anti-aliasing anywhere.

void stamp3x3(Frame& f, int y, int x);

// Bresenham line from (y0,x0) to (y1,x1), thickened by a 3x3 stamp at each
// line pixel.
void thick_line(Frame& f, int y0, int x0, int y1, int x1);

// Filled disc: all pixels with dy*dy + dx*dx <= r*r.
void disc(Frame& f, int cy, int cx, int r);

// Filled axis-aligned rectangle, inclusive bounds.
void rect(Frame& f, int y0, int x0, int y1, int x1);

}  // namespace raster
}  // namespace cail
