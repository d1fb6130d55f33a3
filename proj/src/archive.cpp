#include "cartoon/archive.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace cr {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'R', 'W', 'A', 'R', 'C', 'H', '\0'};

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  std::vector<unsigned char> out;

  template <typename U>
  void pod(U v) {
    unsigned char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out.insert(out.end(), buf, buf + sizeof(U));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out.insert(out.end(), b, b + n);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& b, std::size_t end, const std::string& origin)
      : b_(b), end_(end), origin_(origin) {}

  template <typename U>
  U pod(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, b_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint32_t>(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<unsigned char> raw(std::uint64_t n, const char* what) {
    need(n, what);
    std::vector<unsigned char> v(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }
  std::size_t pos() const { return pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(origin_ + ": " + msg + " (offset " + std::to_string(pos_) + ")");
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > end_ - pos_) fail(std::string("truncated archive while reading ") + what);
  }
  const std::vector<unsigned char>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const std::string& origin_;
};

template <typename T>
ArchiveTensor encode(const Tensor<T>& t, std::uint8_t dtype) {
  ArchiveTensor a;
  a.dtype = dtype;
  const Shape& s = t.shape();
  a.dims = {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.c), static_cast<std::uint64_t>(s.h),
            static_cast<std::uint64_t>(s.w)};
  const auto* p = reinterpret_cast<const unsigned char*>(t.data());
  a.payload.assign(p, p + static_cast<std::size_t>(t.numel()) * sizeof(T));
  return a;
}

}  // namespace

void WeightArchive::put(const std::string& name, const Tensor<float>& t) { tensors[name] = encode(t, 1); }
void WeightArchive::put(const std::string& name, const Tensor<double>& t) { tensors[name] = encode(t, 2); }

Tensor<float> WeightArchive::get_f32(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("archive has no tensor '" + name + "'");
  const ArchiveTensor& a = it->second;
  if (a.dtype != 1) throw DataError("tensor '" + name + "' is not float32");
  if (a.dims.size() != 4) throw DataError("tensor '" + name + "' has rank " + std::to_string(a.dims.size()));
  Tensor<float> t(static_cast<std::int64_t>(a.dims[0]), static_cast<std::int64_t>(a.dims[1]),
                  static_cast<std::int64_t>(a.dims[2]), static_cast<std::int64_t>(a.dims[3]));
  if (a.payload.size() != static_cast<std::size_t>(t.numel()) * sizeof(float)) {
    throw DataError("tensor '" + name + "' payload size disagrees with its extents");
  }
  std::memcpy(t.data(), a.payload.data(), a.payload.size());
  return t;
}

const std::string& WeightArchive::meta_at(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw DataError("archive metadata lacks '" + key + "'");
  return it->second;
}

std::vector<unsigned char> WeightArchive::serialize() const {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod(kArchiveVersion);
  w.pod(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.pod(t.dtype);
    w.pod(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.pod(d);
    w.pod(static_cast<std::uint64_t>(t.payload.size()));
    w.bytes(t.payload.data(), t.payload.size());
  }
  w.pod(fnv1a(w.out.data(), w.out.size()));
  return std::move(w.out);
}

WeightArchive WeightArchive::parse(const std::vector<unsigned char>& bytes, const std::string& origin) {
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError(origin + ": not a weight archive (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a(bytes.data(), body)) throw DataError(origin + ": checksum mismatch (file corrupt or truncated)");

  Reader r(bytes, body, origin);
  r.raw(sizeof kMagic, "magic");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kArchiveVersion) {
    r.fail("unsupported format version " + std::to_string(version) + " (expected " +
           std::to_string(kArchiveVersion) + ")");
  }
  WeightArchive ar;
  const auto nmeta = r.pod<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str("metadata key");
    ar.meta[k] = r.str("metadata value");
  }
  const auto ntensors = r.pod<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    const std::string name = r.str("tensor name");
    ArchiveTensor t;
    t.dtype = r.pod<std::uint8_t>("dtype");
    if (t.dtype != 1 && t.dtype != 2) r.fail("tensor '" + name + "' has unknown dtype " + std::to_string(t.dtype));
    const auto rank = r.pod<std::uint8_t>("rank");
    std::uint64_t count = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.pod<std::uint64_t>("extent"));
      count *= t.dims.back();
    }
    const auto nbytes = r.pod<std::uint64_t>("payload length");
    if (nbytes != count * (t.dtype == 1 ? 4u : 8u)) r.fail("tensor '" + name + "' payload length mismatch");
    t.payload = r.raw(nbytes, "payload");
    ar.tensors[name] = std::move(t);
  }
  if (r.pos() != body) r.fail("trailing bytes after tensor section");
  return ar;
}

void WeightArchive::save(const std::string& path) const {
  const auto bytes = serialize();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

WeightArchive WeightArchive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open archive " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes, path);
}

void store_params(WeightArchive& ar, const ParamList<float>& params) {
  for (const auto& p : params) ar.put(p.name, p.var.value());
}

void load_params(const WeightArchive& ar, const ParamList<float>& params) {
  for (auto p : params) {
    Tensor<float> t = ar.get_f32(p.name);
    if (t.shape() != p.var.shape()) {
      throw DataError("parameter '" + p.name + "' has shape " + t.shape().str() + " in archive, model expects " +
                      p.var.shape().str());
    }
    p.var.mutable_value() = std::move(t);
  }
}

std::string fnv1a_hex(const std::vector<unsigned char>& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return buf;
}

}  // namespace cr
