#include "cail/augment.hpp"

#include <algorithm>

#include "cail/errors.hpp"

namespace cail {

namespace {

constexpr int kPad = 4;

enum class PadKind { Replicate, Zero };

// Crop a kFrameSize window out of the padded image at offset (ox, oy) in
// [0, 2*kPad]^2; offset (kPad, kPad) is the identity.
void pad_crop(const Frame& in, Frame& out, int ox, int oy, PadKind pad) {
  for (int y = 0; y < kFrameSize; ++y) {
    const int sy = y + oy - kPad;
    for (int x = 0; x < kFrameSize; ++x) {
      const int sx = x + ox - kPad;
      if (pad == PadKind::Replicate) {
        const int cy = std::clamp(sy, 0, kFrameSize - 1);
        const int cx = std::clamp(sx, 0, kFrameSize - 1);
        out.at(y, x) = in.at(cy, cx);
      } else {
        out.at(y, x) = (sy >= 0 && sy < kFrameSize && sx >= 0 && sx < kFrameSize)
                           ? in.at(sy, sx)
                           : 0;
      }
    }
  }
}

void cutout(Frame& f, int y0, int x0, int side) {
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) f.at(y, x) = 0;
}

}  // namespace

AugMode aug_mode_from_name(const std::string& name) {
  if (name == "none") return AugMode::None;
  if (name == "shift") return AugMode::Shift;
  if (name == "crop") return AugMode::Crop;
  if (name == "cutout") return AugMode::Cutout;
  if (name == "composite") return AugMode::Composite;
  throw ConfigError("unknown augmentation mode: " + name);
}

std::string aug_mode_name(AugMode mode) {
  switch (mode) {
    case AugMode::None: return "none";
    case AugMode::Shift: return "shift";
    case AugMode::Crop: return "crop";
    case AugMode::Cutout: return "cutout";
    case AugMode::Composite: return "composite";
  }
  return "none";
}

VisualState augment(const VisualState& v, AugMode mode, RngStream& rng) {
  switch (mode) {
    case AugMode::None:
      return v;
    case AugMode::Shift:
    case AugMode::Crop: {
      const int ox = static_cast<int>(rng.uniform_index(2 * kPad + 1));
      const int oy = static_cast<int>(rng.uniform_index(2 * kPad + 1));
      const PadKind pad =
          mode == AugMode::Shift ? PadKind::Replicate : PadKind::Zero;
      VisualState out;
      for (int f = 0; f < kFrameStack; ++f)
        pad_crop(v.frames[f], out.frames[f], ox, oy, pad);
      return out;
    }
    case AugMode::Cutout: {
      static constexpr int kSides[3] = {8, 12, 16};
      const int side = kSides[rng.uniform_index(3)];
      const int x0 = static_cast<int>(rng.uniform_index(kFrameSize - side + 1));
      const int y0 = static_cast<int>(rng.uniform_index(kFrameSize - side + 1));
      VisualState out = v;
      for (auto& frame : out.frames) cutout(frame, y0, x0, side);
      return out;
    }
    case AugMode::Composite: {
      VisualState shifted = augment(v, AugMode::Shift, rng);
      return augment(shifted, AugMode::Cutout, rng);
    }
  }
  return v;
}

ViewBatch make_views(const std::vector<VisualState>& agent_states,
                     const std::vector<VisualState>& expert_states,
                     AugMode mode, RngStream& rng) {
  const std::size_t n = agent_states.size();
  if (n != expert_states.size())
    throw BatchTooSmallError("agent and expert batches must have equal size");
  if (n < 2) throw BatchTooSmallError("view batch needs N >= 2");

  ViewBatch batch;
  batch.agent_views.reserve(2 * n);
  batch.pair.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.agent_views.push_back(augment(agent_states[i], mode, rng));
    batch.agent_views.push_back(augment(agent_states[i], mode, rng));
    batch.pair[2 * i] = static_cast<int>(2 * i + 1);
    batch.pair[2 * i + 1] = static_cast<int>(2 * i);
  }
  batch.expert_views.reserve(n);
  for (const auto& e : expert_states)
    batch.expert_views.push_back(augment(e, mode, rng));
  return batch;
}

}  // namespace cail
