#ifndef MIRL_IO_HPP_
#define MIRL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mirl/env.hpp"
#include "mirl/net.hpp"

namespace mirl {

// Shortest representation that round-trips.
std::string format_double(double v);

// Binary layout: "MIRL1\n", u32 n_layers, u32 (in, out) per layer, u32 extra
// scalar count, f64 parameters, u64 config hash. All little-endian.
struct Checkpoint {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> layers;
  std::uint32_t extra = 0;
  FlatParams params;
  std::uint64_t config_hash = 0;

  std::size_t expected_param_count() const;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws ConfigError on bad magic, truncation, or dimension mismatch.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const Mlp& net, std::uint64_t config_hash);
Checkpoint to_checkpoint(const GaussianPolicy& policy, std::uint64_t config_hash);
Mlp mlp_from_checkpoint(const Checkpoint& ckpt);
GaussianPolicy policy_from_checkpoint(const Checkpoint& ckpt, double mean_scale);

// FNV-1a over the bytes.
std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a(const std::string& s);

// Header "episode,t,sx,sy,ax,ay"; the final state row of each episode has
// empty action fields.
void write_demos(std::ostream& out, const DemoSet& demos);
void write_demos(const std::filesystem::path& path, const DemoSet& demos);
// Throws ConfigError naming the offending line.
DemoSet read_demos(std::istream& in);
DemoSet read_demos(const std::filesystem::path& path);

// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mirl

#endif  // MIRL_IO_HPP_
