#include "psim/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace psim {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'I', 'M', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error(path + ": " + why);
}

// --- little-endian buffer codec ---

struct Writer {
  std::string out;
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out += s;
  }
  void tensor(const Tensor& t) {
    u32(static_cast<uint32_t>(t.rank()));
    for (int d : t.shape) u32(static_cast<uint32_t>(d));
    for (double v : t.data) f64(v);
  }
  void rng(const RngStream& r) {
    for (uint64_t w : r.state()) u64(w);
  }
  void adam(const AdamState& a) {
    f64(a.cfg.lr);
    f64(a.cfg.beta1);
    f64(a.cfg.beta2);
    f64(a.cfg.eps_hat);
    i64(a.step);
    u64(a.slots.size());
    for (const auto& [name, slot] : a.slots) {
      str(name);
      tensor(slot.m);
      tensor(slot.v);
    }
  }
  void net(const NetBlob& n) {
    u64(n.params.size());
    for (const auto& [name, t] : n.params) {
      str(name);
      tensor(t);
    }
    adam(n.opt);
  }
};

struct Reader {
  const std::string& path;
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) {
    if (pos + n > buf.size()) fail(path, "truncated checkpoint payload");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const uint64_t n = u64();
    if (n > buf.size()) fail(path, "corrupt string length");
    need(static_cast<size_t>(n));
    std::string s = buf.substr(pos, static_cast<size_t>(n));
    pos += static_cast<size_t>(n);
    return s;
  }
  Tensor tensor() {
    const uint32_t rank = u32();
    if (rank > 4) fail(path, "corrupt tensor rank");
    std::vector<int> shape;
    int64_t numel = rank == 0 ? 0 : 1;
    for (uint32_t i = 0; i < rank; ++i) {
      const uint32_t d = u32();
      if (d == 0 || d > (1u << 24)) fail(path, "corrupt tensor dimension");
      shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    Tensor t(rank == 0 ? std::vector<int>{1} : shape);
    if (rank == 0) t.data.clear(), t.shape.clear();
    for (int64_t i = 0; i < numel; ++i) t[i] = f64();
    return t;
  }
  RngStream rng() {
    std::array<uint64_t, 4> s{};
    for (auto& w : s) w = u64();
    RngStream r(0);
    r.set_state(s);
    return r;
  }
  AdamState adam() {
    AdamState a;
    a.cfg.lr = f64();
    a.cfg.beta1 = f64();
    a.cfg.beta2 = f64();
    a.cfg.eps_hat = f64();
    a.step = i64();
    const uint64_t n = u64();
    for (uint64_t i = 0; i < n; ++i) {
      const std::string name = str();
      AdamSlot slot;
      slot.m = tensor();
      slot.v = tensor();
      a.slots.emplace(name, std::move(slot));
    }
    return a;
  }
  NetBlob net() {
    NetBlob b;
    const uint64_t n = u64();
    for (uint64_t i = 0; i < n; ++i) {
      const std::string name = str();
      b.params.emplace(name, tensor());
    }
    b.opt = adam();
    return b;
  }
};

NetBlob blob_of(const OptimNet& on) {
  NetBlob b;
  b.params = on.net.params;
  b.opt = on.opt;
  return b;
}

void restore_net(const std::string& role, const NetBlob& b, OptimNet& on) {
  if (b.params.size() != on.net.params.size())
    throw std::runtime_error("checkpoint restore: network '" + role + "' has " +
                             std::to_string(b.params.size()) + " parameters, expected " +
                             std::to_string(on.net.params.size()));
  for (const auto& [name, t] : b.params) {
    auto it = on.net.params.find(name);
    if (it == on.net.params.end())
      throw std::runtime_error("checkpoint restore: network '" + role +
                               "' has no parameter '" + name + "'");
    if (!it->second.same_shape(t))
      throw std::runtime_error("checkpoint restore: parameter '" + role + "." + name +
                               "' shape " + shape_str(t.shape) + " does not match " +
                               shape_str(it->second.shape));
    it->second = t;
  }
  on.opt = b.opt;
}

}  // namespace

CheckpointData snapshot(const TrainState& state, uint64_t config_hash, const DataCursor& cursor) {
  CheckpointData d;
  d.config_hash = config_hash;
  d.iteration = state.iteration;
  d.gate_threshold = state.gate_threshold;
  d.discriminator_active = state.discriminator_active;
  d.has_discr = state.has_discr;
  for (const auto& [role, part] : state.gen_parts) d.gen_parts.emplace(role, blob_of(part));
  if (state.has_discr) d.discr = blob_of(state.discr);
  d.dropout_state = state.dropout_rng.state();
  d.eps_state = state.eps_rng.state();
  d.cursor = cursor;
  return d;
}

void restore(const CheckpointData& data, TrainState& state, DataCursor& cursor) {
  if (data.gen_parts.size() != state.gen_parts.size() || data.has_discr != state.has_discr)
    throw std::runtime_error("checkpoint restore: network roster does not match the config");
  for (const auto& [role, blob] : data.gen_parts) {
    auto it = state.gen_parts.find(role);
    if (it == state.gen_parts.end())
      throw std::runtime_error("checkpoint restore: config has no generator part '" + role + "'");
    restore_net(role, blob, it->second);
  }
  if (data.has_discr) restore_net("discriminator", data.discr, state.discr);
  state.iteration = data.iteration;
  state.gate_threshold = data.gate_threshold;
  state.discriminator_active = data.discriminator_active;
  state.dropout_rng.set_state(data.dropout_state);
  state.eps_rng.set_state(data.eps_state);
  cursor = data.cursor;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  Writer w;
  w.u64(data.config_hash);
  w.i64(data.iteration);
  w.f64(data.gate_threshold);
  w.u32(data.discriminator_active ? 1 : 0);
  w.u32(data.has_discr ? 1 : 0);
  w.u64(data.gen_parts.size());
  for (const auto& [role, blob] : data.gen_parts) {
    w.str(role);
    w.net(blob);
  }
  if (data.has_discr) w.net(data.discr);
  for (uint64_t s : data.dropout_state) w.u64(s);
  for (uint64_t s : data.eps_state) w.u64(s);
  w.u64(data.cursor.order.size());
  for (int32_t i : data.cursor.order) w.u32(static_cast<uint32_t>(i));
  w.i64(data.cursor.pos);
  w.rng(data.cursor.shuffle_rng);
  w.rng(data.cursor.crop_rng);

  std::string file(kMagic, sizeof kMagic);
  Writer head;
  head.u32(kVersion);
  file += head.out;
  file += w.out;
  Writer sum;
  sum.u64(fnv1a64(w.out));
  file += sum.out;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open temporary file for writing");
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) fail(path, "short write");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(path, "rename failed: " + ec.message());
}

CheckpointData load_checkpoint(const std::string& path, uint64_t expected_config_hash,
                               bool allow_config_mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open checkpoint");
  std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (file.size() < sizeof kMagic + 4 + 8) fail(path, "file too short to be a checkpoint");
  if (std::memcmp(file.data(), kMagic, sizeof kMagic) != 0) fail(path, "bad checkpoint magic");
  const std::string body = file.substr(sizeof kMagic);

  Reader head{path, body};
  const uint32_t version = head.u32();
  if (version != kVersion)
    fail(path, "checkpoint version " + std::to_string(version) + " unsupported (want " +
                   std::to_string(kVersion) + ")");
  const std::string payload = body.substr(4, body.size() - 4 - 8);
  Reader tail{path, body};
  tail.pos = body.size() - 8;
  const uint64_t stored_sum = tail.u64();
  if (fnv1a64(payload) != stored_sum) fail(path, "checksum mismatch: corrupt or truncated file");

  Reader r{path, payload};
  CheckpointData d;
  d.config_hash = r.u64();
  if (d.config_hash != expected_config_hash && !allow_config_mismatch) {
    char want[32], got[32];
    std::snprintf(want, sizeof want, "%016llx", static_cast<unsigned long long>(expected_config_hash));
    std::snprintf(got, sizeof got, "%016llx", static_cast<unsigned long long>(d.config_hash));
    fail(path, std::string("config hash mismatch: checkpoint ") + got + " vs current " + want +
                   " (pass --allow-config-mismatch to override)");
  }
  d.iteration = r.i64();
  d.gate_threshold = r.f64();
  d.discriminator_active = r.u32() != 0;
  d.has_discr = r.u32() != 0;
  const uint64_t nparts = r.u64();
  for (uint64_t i = 0; i < nparts; ++i) {
    const std::string role = r.str();
    d.gen_parts.emplace(role, r.net());
  }
  if (d.has_discr) d.discr = r.net();
  for (auto& s : d.dropout_state) s = r.u64();
  for (auto& s : d.eps_state) s = r.u64();
  const uint64_t norder = r.u64();
  if (norder > payload.size()) fail(path, "corrupt cursor length");
  d.cursor.order.resize(static_cast<size_t>(norder));
  for (auto& idx : d.cursor.order) idx = static_cast<int32_t>(r.u32());
  d.cursor.pos = r.i64();
  d.cursor.shuffle_rng = r.rng();
  d.cursor.crop_rng = r.rng();
  if (r.pos != payload.size()) fail(path, "trailing bytes after checkpoint payload");
  return d;
}

}  // namespace psim
