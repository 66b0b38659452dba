#include "cail/demo.hpp"

#include <cstring>
#include <fstream>

#include "cail/errors.hpp"

namespace cail {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'I', 'L', 'D', 'E', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CorruptFileError("truncated demo file");
  return v;
}

}  // namespace

std::size_t DemoSet::total_frames() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length;
  return n;
}

bool DemoSet::has_actions() const {
  if (trajectories.empty()) return false;
  for (const auto& t : trajectories)
    if (!t.actions) return false;
  return true;
}

VisualState DemoSet::stack_at(std::size_t traj, std::size_t t) const {
  const auto& tr = trajectories[traj];
  VisualState v;
  for (int f = 0; f < kFrameStack; ++f) {
    const std::size_t src =
        t + 1 >= std::size_t(kFrameStack - f) ? t - (kFrameStack - 1 - f) : 0;
    std::memcpy(v.frames[f].px.data(), tr.frames.data() + src * kFramePixels,
                kFramePixels);
  }
  return v;
}

VisualState DemoSet::sample_stack(RngStream& rng) const {
  const std::size_t flat = rng.uniform_index(total_frames());
  std::size_t remaining = flat;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (remaining < trajectories[i].length) return stack_at(i, remaining);
    remaining -= trajectories[i].length;
  }
  return stack_at(trajectories.size() - 1, trajectories.back().length - 1);
}

void save_demos(const DemoSet& demos, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StorageError("cannot open for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(demos.env_name.size()));
  os.write(demos.env_name.data(), static_cast<std::streamsize>(demos.env_name.size()));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(demos.trajectories.size()));
  for (const auto& tr : demos.trajectories) {
    write_pod<std::uint32_t>(os, tr.length);
    write_pod<std::uint32_t>(os, tr.height);
    write_pod<std::uint32_t>(os, tr.width);
    write_pod<std::uint8_t>(os, tr.actions ? 1 : 0);
    os.write(reinterpret_cast<const char*>(tr.frames.data()),
             static_cast<std::streamsize>(tr.frames.size()));
    if (tr.actions)
      os.write(reinterpret_cast<const char*>(tr.actions->data()),
               static_cast<std::streamsize>(tr.actions->size() * sizeof(float)));
  }
  if (!os) throw StorageError("write failed: " + path);
}

DemoSet load_demos(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptFileError("cannot open demo file: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CorruptFileError("bad demo magic: " + path);
  if (read_pod<std::uint32_t>(is) != kVersion)
    throw CorruptFileError("unsupported demo version: " + path);

  DemoSet demos;
  const auto name_len = read_pod<std::uint8_t>(is);
  demos.env_name.resize(name_len);
  is.read(demos.env_name.data(), name_len);
  if (!is) throw CorruptFileError("truncated demo file");

  const auto num_traj = read_pod<std::uint32_t>(is);
  demos.trajectories.resize(num_traj);
  for (auto& tr : demos.trajectories) {
    tr.length = read_pod<std::uint32_t>(is);
    tr.height = read_pod<std::uint32_t>(is);
    tr.width = read_pod<std::uint32_t>(is);
    if (tr.length == 0) throw CorruptFileError("empty trajectory");
    const auto has_actions = read_pod<std::uint8_t>(is);
    const std::size_t nbytes =
        std::size_t(tr.length) * tr.height * tr.width;
    tr.frames.resize(nbytes);
    is.read(reinterpret_cast<char*>(tr.frames.data()),
            static_cast<std::streamsize>(nbytes));
    if (!is) throw CorruptFileError("truncated frame payload");
    if (has_actions) {
      tr.actions.emplace(tr.length);
      is.read(reinterpret_cast<char*>(tr.actions->data()),
              static_cast<std::streamsize>(tr.length * sizeof(float)));
      if (!is) throw CorruptFileError("truncated action payload");
    }
  }
  return demos;
}

}  // namespace cail
