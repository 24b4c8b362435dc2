#include "mirl/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include "mirl/error.hpp"

namespace mirl {
namespace {

constexpr char kMagic[] = "MIRL1\n";
constexpr std::size_t kMagicSize = 6;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint64_t take(int n) {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

double parse_double(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ConfigError("demo file line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

long parse_int(const std::string& field, std::size_t line) {
  long v = 0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ConfigError("demo file line " + std::to_string(line) + ": bad integer '" + field + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericError("format: cannot format number");
  return std::string(buf.data(), ptr);
}

std::size_t Checkpoint::expected_param_count() const {
  std::size_t n = extra;
  for (const auto& [in, out] : layers) n += (static_cast<std::size_t>(in) + 1) * out;
  return n;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.params.size() != ckpt.expected_param_count()) {
    throw ConfigError("checkpoint: parameter count does not match dimensions");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicSize);
  put_u32(out, static_cast<std::uint32_t>(ckpt.layers.size()));
  for (const auto& [in, o] : ckpt.layers) {
    put_u32(out, in);
    put_u32(out, o);
  }
  put_u32(out, ckpt.extra);
  for (double p : ckpt.params) put_u64(out, std::bit_cast<std::uint64_t>(p));
  put_u64(out, ckpt.config_hash);
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagicSize || std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) {
    throw ConfigError("checkpoint: bad magic");
  }
  Reader r(bytes);
  r.skip(kMagicSize);
  Checkpoint ckpt;
  const std::uint32_t n_layers = r.u32();
  if (n_layers > 64) throw ConfigError("checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    if (i > 0 && ckpt.layers.back().second != in) {
      throw ConfigError("checkpoint: layer dimensions do not chain");
    }
    ckpt.layers.emplace_back(in, out);
  }
  ckpt.extra = r.u32();
  const std::size_t n = ckpt.expected_param_count();
  const std::size_t expected_bytes = n * 8 + 8;
  if (r.remaining() != expected_bytes) {
    throw ConfigError("checkpoint: expected " + std::to_string(expected_bytes) +
                      " payload bytes, found " + std::to_string(r.remaining()));
  }
  ckpt.params.resize(n);
  for (std::size_t i = 0; i < n; ++i) ckpt.params[i] = std::bit_cast<double>(r.u64());
  ckpt.config_hash = r.u64();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  write_text_file(path, std::string(bytes.begin(), bytes.end()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint to_checkpoint(const Mlp& net, std::uint64_t config_hash) {
  const MlpSpec& s = net.spec();
  Checkpoint ckpt;
  ckpt.layers = {{static_cast<std::uint32_t>(s.in_dim), static_cast<std::uint32_t>(s.hidden_dim)},
                 {static_cast<std::uint32_t>(s.hidden_dim), static_cast<std::uint32_t>(s.out_dim)}};
  ckpt.params.assign(net.params().begin(), net.params().end());
  ckpt.config_hash = config_hash;
  return ckpt;
}

Checkpoint to_checkpoint(const GaussianPolicy& policy, std::uint64_t config_hash) {
  Checkpoint ckpt = to_checkpoint(policy.mean_net(), config_hash);
  ckpt.extra = static_cast<std::uint32_t>(policy.action_dim());
  ckpt.params = policy.flat();
  return ckpt;
}

namespace {

MlpSpec spec_of(const Checkpoint& ckpt) {
  if (ckpt.layers.size() != 2) throw ConfigError("checkpoint: expected a two-layer network");
  return MlpSpec{ckpt.layers[0].first, ckpt.layers[0].second, ckpt.layers[1].second};
}

}  // namespace

Mlp mlp_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.extra != 0) throw ConfigError("checkpoint: holds a policy, not a network");
  return Mlp(spec_of(ckpt), ckpt.params);
}

GaussianPolicy policy_from_checkpoint(const Checkpoint& ckpt, double mean_scale) {
  const MlpSpec spec = spec_of(ckpt);
  if (ckpt.extra != spec.out_dim) {
    throw ConfigError("checkpoint: log_std count " + std::to_string(ckpt.extra) +
                      " does not match action dim " + std::to_string(spec.out_dim));
  }
  const std::size_t n = spec.param_count();
  GaussianPolicy policy(Mlp(spec, FlatParams(ckpt.params.begin(), ckpt.params.begin() + n)),
                        std::vector<double>(ckpt.params.begin() + n, ckpt.params.end()),
                        mean_scale);
  return policy;
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

void write_demos(std::ostream& out, const DemoSet& demos) {
  out << "episode,t,sx,sy,ax,ay\n";
  for (std::size_t e = 0; e < demos.trajectories.size(); ++e) {
    const Trajectory& traj = demos.trajectories[e];
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      out << e << ',' << t << ',' << format_double(traj.states[t][0]) << ','
          << format_double(traj.states[t][1]) << ',';
      if (t < traj.actions.size()) {
        out << format_double(traj.actions[t][0]) << ',' << format_double(traj.actions[t][1]);
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
}

void write_demos(const std::filesystem::path& path, const DemoSet& demos) {
  std::ostringstream ss;
  write_demos(ss, demos);
  write_text_file(path, ss.str());
}

DemoSet read_demos(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ConfigError("demo file line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "episode,t,sx,sy,ax,ay") {
    throw ConfigError("demo file line 1: expected header episode,t,sx,sy,ax,ay");
  }
  DemoSet demos;
  bool episode_open = false;
  auto fail = [&](const std::string& msg) {
    throw ConfigError("demo file line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 6) fail("expected 6 fields, found " + std::to_string(f.size()));
    const long episode = parse_int(f[0], line_no);
    const long t = parse_int(f[1], line_no);
    const Vec2 s{parse_double(f[2], line_no), parse_double(f[3], line_no)};
    const bool final_row = f[4].empty() && f[5].empty();
    if (f[4].empty() != f[5].empty()) fail("action fields must both be present or both empty");
    if (!episode_open) {
      if (episode != static_cast<long>(demos.trajectories.size())) fail("episodes out of order");
      if (t != 0) fail("episode must start at t=0");
      demos.trajectories.emplace_back();
      episode_open = true;
    } else if (episode != static_cast<long>(demos.trajectories.size()) - 1) {
      fail("episode ended without a final state row");
    }
    Trajectory& traj = demos.trajectories.back();
    if (t != static_cast<long>(traj.states.size())) fail("timesteps out of order");
    traj.states.push_back(s);
    if (final_row) {
      episode_open = false;
    } else {
      traj.actions.push_back({parse_double(f[4], line_no), parse_double(f[5], line_no)});
    }
  }
  if (episode_open) throw ConfigError("demo file: last episode has no final state row");
  if (demos.trajectories.empty()) throw ConfigError("demo file: no episodes");
  return demos;
}

DemoSet read_demos(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("demo file: cannot open " + path.string());
  return read_demos(in);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ConfigError("cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mirl
