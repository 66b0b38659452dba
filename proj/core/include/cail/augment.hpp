#pragma once

#include <string>
#include <vector>

#include "cail/image.hpp"
#include "cail/rng.hpp"

namespace cail {

enum class AugMode { None, Shift, Crop, Cutout, Composite };

AugMode aug_mode_from_name(const std::string& name);  // throws ConfigError
std::string aug_mode_name(AugMode mode);

// Deterministic building blocks. Offsets live on [0, 8]^2 with (4, 4) the
// identity; the same offset / square applies to every frame of the stack.
VisualState shift_view(const VisualState& v, int ox, int oy, bool replicate_pad);
VisualState cutout_view(const VisualState& v, int y0, int x0, int side);

// One augmented view of a frame stack. Mode none draws nothing from `rng`.
//   shift:     replicate-pad 4 px, crop 64x64 at offset ~ U[0,8]^2
//   crop:      zero-pad 4 px, crop likewise
//   cutout:    zero one square, side ~ U{8,12,16}, uniform position inside
//   composite: shift then cutout
VisualState augment(const VisualState& v, AugMode mode, RngStream& rng);

// The paper's batch construction: two independent augmentations per agent
// state (pair indices 2i and 2i+1), one per expert state.
struct ViewBatch {
  std::vector<VisualState> agent_views;   // 2N
  std::vector<VisualState> expert_views;  // N
  std::vector<int> pair;                  // pair[i] = sibling view of i

  int n() const { return static_cast<int>(expert_views.size()); }
};

// Throws BatchTooSmallError when n < 2 (the supervised loss needs at least
// one positive besides the anchor).
ViewBatch make_views(const std::vector<VisualState>& agent_states,
                     const std::vector<VisualState>& expert_states,
                     AugMode mode, RngStream& rng);

}  // namespace cail
