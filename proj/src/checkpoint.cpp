#include "promind/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace promind::num {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'T', 'C'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated data");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::string str(size_t n) {
    need(n);
    std::string s(buf.begin() + pos, buf.begin() + pos + n);
    pos += n;
    return s;
  }
  std::vector<uint8_t> bytes(size_t n) {
    need(n);
    std::vector<uint8_t> b(buf.begin() + pos, buf.begin() + pos + n);
    pos += n;
    return b;
  }
};

template <typename T>
std::vector<uint8_t> to_raw(const std::vector<T>& v) {
  std::vector<uint8_t> raw(v.size() * sizeof(T));
  std::memcpy(raw.data(), v.data(), raw.size());
  return raw;
}

template <typename T>
std::vector<T> from_raw(const std::vector<uint8_t>& raw) {
  if (raw.size() % sizeof(T) != 0) throw std::runtime_error("checkpoint: bad payload size");
  std::vector<T> v(raw.size() / sizeof(T));
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor32& t) {
  entries_[name] = Entry{0, t.shape(), to_raw(t.values())};
}

void Checkpoint::put(const std::string& name, const Tensor64& t) {
  entries_[name] = Entry{1, t.shape(), to_raw(t.values())};
}

bool Checkpoint::has(const std::string& name) const { return entries_.count(name) > 0; }

Tensor32 Checkpoint::get_f32(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
  if (it->second.dtype != 0) throw std::runtime_error("checkpoint: dtype mismatch for " + name);
  return Tensor32::from(it->second.shape, from_raw<float>(it->second.raw));
}

Tensor64 Checkpoint::get_f64(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
  if (it->second.dtype != 1) throw std::runtime_error("checkpoint: dtype mismatch for " + name);
  return Tensor64::from(it->second.shape, from_raw<double>(it->second.raw));
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<uint8_t> Checkpoint::serialize() const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(e.dtype);
    put_u32(out, static_cast<uint32_t>(e.shape.size()));
    for (size_t d : e.shape) put_u64(out, d);
    out.insert(out.end(), e.raw.begin(), e.raw.end());
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (r.str(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic");
  uint32_t version = r.u32();
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  uint32_t count = r.u32();
  Checkpoint ck;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    Entry e;
    e.dtype = r.u8();
    if (e.dtype > 1) throw std::runtime_error("checkpoint: unknown dtype");
    uint32_t ndim = r.u32();
    size_t numel = 1;
    for (uint32_t j = 0; j < ndim; ++j) {
      size_t d = static_cast<size_t>(r.u64());
      e.shape.push_back(d);
      numel *= d;
    }
    size_t width = e.dtype == 0 ? sizeof(float) : sizeof(double);
    e.raw = r.bytes(numel * width);
    ck.entries_[name] = std::move(e);
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

uint64_t fnv1a64(const uint8_t* data, size_t len) {
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checksum: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

std::string checksum_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h &  0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace promind::num
