#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cail/image.hpp"
#include "cail/rng.hpp"

namespace cail {

// One expert episode: the frame of the state each action was taken in, and
// (optionally) the action itself. frames.size() == T * height * width.
struct DemoTrajectory {
  std::uint32_t length = 0;  // T
  std::uint32_t height = kFrameSize;
  std::uint32_t width = kFrameSize;
  std::vector<std::uint8_t> frames;
  std::optional<std::vector<float>> actions;  // T values when present
};

// Expert demonstration set (the D_e the discriminator samples from).
struct DemoSet {
  std::string env_name;
  std::uint64_t seed = 0;  // provenance only; not serialized
  std::vector<DemoTrajectory> trajectories;

  std::size_t total_frames() const;
  bool has_actions() const;

  // Frame stack ending at step t of trajectory `traj`, replicating the
  // first frame at the episode start (same rule as PixelEnv::reset).
  VisualState stack_at(std::size_t traj, std::size_t t) const;

  // Uniform-with-replacement draw of a (traj, t) stack.
  VisualState sample_stack(RngStream& rng) const;
};

// Binary demo format, little-endian:
//   magic "CAILDEM1" | u32 version=1 | u8 name_len | name bytes |
//   u32 num_traj | per trajectory: u32 T, u32 H, u32 W, u8 has_actions,
//   T*H*W u8 frames, then T f32 actions if has_actions.
void save_demos(const DemoSet& demos, const std::string& path);
DemoSet load_demos(const std::string& path);  // throws CorruptFileError

}  // namespace cail
