#include "nspnp/snapshot.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "nspnp/errors.hpp"

namespace nspnp {

namespace {

constexpr char kMagic[7] = {'N', 'S', 'P', 'N', 'P', '1', '\0'};

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
  void array(std::span<const double> values) {
    for (double v : values) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n, const char* section) const {
    if (pos_ + n > in_.size()) {
      std::ostringstream msg;
      msg << "snapshot truncated at offset " << pos_ << " while reading " << section << " (need "
          << n << " bytes, " << in_.size() - pos_ << " available)";
      throw FormatError(msg.str());
    }
  }
  std::uint8_t u8(const char* section) {
    need(1, section);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32(const char* section) {
    need(4, section);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * b);
    return v;
  }
  double f64(const char* section) {
    need(8, section);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * b);
    return std::bit_cast<double>(bits);
  }
  void array(std::span<double> values, const char* section) {
    need(values.size() * 8, section);
    for (double& v : values) v = f64(section);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  const std::string& data() const { return in_; }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

[[noreturn]] void fail(std::size_t offset, const std::string& what) {
  throw FormatError("snapshot offset " + std::to_string(offset) + ": " + what);
}

}  // namespace

std::string snapshot_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%06zu.nspnp", index);
  return buf;
}

std::string encode_snapshot(const State& state, double time) {
  const GridSpec& g = state.grid();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(static_cast<std::uint32_t>(g.dims));
  for (int a = 0; a < g.dims; ++a) w.u32(static_cast<std::uint32_t>(g.cells[a]));
  for (int a = 0; a < g.dims; ++a) w.f64(g.lengths[a]);
  w.u8(static_cast<std::uint8_t>(g.bc));
  w.f64(time);
  for (int a = 0; a < g.dims; ++a) w.array(state.u.component(a));
  w.array(state.pressure.values());
  w.array(state.n_plus.values());
  w.array(state.n_minus.values());
  w.array(state.psi.values());
  return w.take();
}

Snapshot decode_snapshot(const std::string& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) fail(0, "bad magic or version in magic");
  for (std::size_t n = 0; n < sizeof kMagic; ++n) r.u8("magic");

  GridSpec g;
  const std::size_t dims_at = r.pos();
  const std::uint32_t dims = r.u32("dims");
  if (dims != 2 && dims != 3) fail(dims_at, "dims must be 2 or 3");
  g.dims = static_cast<int>(dims);
  g.cells = {1, 1, 1};
  g.lengths = {1.0, 1.0, 1.0};
  for (int a = 0; a < g.dims; ++a) {
    const std::size_t at = r.pos();
    const std::uint32_t n = r.u32("cell counts");
    if (n < 8 || n > (1u << 16)) fail(at, "cell count out of range");
    g.cells[a] = static_cast<int>(n);
  }
  for (int a = 0; a < g.dims; ++a) g.lengths[a] = r.f64("lengths");
  const std::size_t bc_at = r.pos();
  const std::uint8_t bc = r.u8("boundary code");
  if (bc > 1) fail(bc_at, "unknown boundary code");
  g.bc = static_cast<Boundary>(bc);
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    fail(dims_at, std::string("invalid grid header: ") + e.what());
  }
  Snapshot out;
  out.time = r.f64("time");
  out.state = State::zero(g);
  static const char* kComponents[3] = {"velocity component 0", "velocity component 1",
                                       "velocity component 2"};
  for (int a = 0; a < g.dims; ++a) r.array(out.state.u.component(a), kComponents[a]);
  r.array(out.state.pressure.values(), "pressure");
  r.array(out.state.n_plus.values(), "n_plus");
  r.array(out.state.n_minus.values(), "n_minus");
  r.array(out.state.psi.values(), "psi");
  if (r.remaining() != 0) fail(r.pos(), "trailing bytes after psi");
  return out;
}

void write_snapshot(const std::filesystem::path& path, const State& state, double time) {
  const std::string bytes = encode_snapshot(state, time);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open snapshot " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_snapshot(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.filename().string() + ": " + e.what());
  }
}

void checkpoint(const FieldHistory& history, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t n = 0; n < history.size(); ++n)
    write_snapshot(dir / snapshot_name(n), *history[n].state, history[n].time);
}

FieldHistory restore(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("snap_", 0) == 0 && entry.path().extension() == ".nspnp")
      files.push_back(entry.path());
  }
  if (files.empty()) throw FormatError("no snapshots in " + dir.string());
  std::sort(files.begin(), files.end());
  FieldHistory history;
  for (const auto& f : files) {
    Snapshot s = read_snapshot(f);
    history.push(s.time, std::move(s.state));
  }
  return history;
}

}  // namespace nspnp
