#include "helio/htns.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace helio::htns {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::size_t width(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
  }
  throw IoError("unknown dtype");
}

template <typename U>
void put_le(std::vector<unsigned char>& out, U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  out.insert(out.end(), b, b + sizeof(U));
}

template <typename U>
U get_le(const unsigned char* p) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  U v;
  std::memcpy(&v, b, sizeof(U));
  return v;
}

template <typename T>
void encode(std::vector<unsigned char>& out, DType dtype, const Tensor<T>& t) {
  out.reserve(t.size() * width(dtype));
  for (T v : t.data()) {
    switch (dtype) {
      case DType::f32: put_le(out, static_cast<float>(v)); break;
      case DType::f64: put_le(out, static_cast<double>(v)); break;
      case DType::u8: put_le(out, static_cast<std::uint8_t>(v)); break;
    }
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : b_(b) {}
  const unsigned char* take(std::size_t n) {
    if (pos_ + n > b_.size()) throw IoError("HTNS: truncated data");
    const unsigned char* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U read() {
    return get_le<U>(take(sizeof(U)));
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

bool Container::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

template <typename T>
void Container::add(const std::string& name, const Tensor<T>& t) {
  if (contains(name)) throw IoError("HTNS: duplicate entry '" + name + "'");
  Entry e{name, t.dims(), {}};
  encode(e.bytes, dtype_, t);
  entries_.push_back(std::move(e));
}

template <typename T>
Tensor<T> Container::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name != name) continue;
    const std::size_t n = shape_size(e.dims);
    std::vector<T> values(n);
    const unsigned char* p = e.bytes.data();
    for (std::size_t i = 0; i < n; ++i) {
      switch (dtype_) {
        case DType::f32: values[i] = static_cast<T>(get_le<float>(p + 4 * i)); break;
        case DType::f64: values[i] = static_cast<T>(get_le<double>(p + 8 * i)); break;
        case DType::u8: values[i] = static_cast<T>(p[i]); break;
      }
    }
    return Tensor<T>(e.dims, std::move(values));
  }
  throw IoError("HTNS: no entry named '" + name + "'");
}

std::vector<unsigned char> Container::serialize() const {
  std::vector<unsigned char> out{'H', 'T', 'N', 'S', kVersion, static_cast<unsigned char>(dtype_)};
  put_le(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_le(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_le(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put_le(out, static_cast<std::uint32_t>(d));
    out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  }
  return out;
}

Container Container::deserialize(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  const unsigned char* magic = r.take(4);
  if (std::memcmp(magic, "HTNS", 4) != 0) throw IoError("HTNS: bad magic");
  const auto version = r.read<std::uint8_t>();
  if (version != kVersion) throw IoError("HTNS: unsupported version " + std::to_string(version));
  const auto dtype_byte = r.read<std::uint8_t>();
  if (dtype_byte > 2) throw IoError("HTNS: unknown dtype " + std::to_string(dtype_byte));
  Container c(static_cast<DType>(dtype_byte));
  const auto count = r.read<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    Entry e;
    const auto name_len = r.read<std::uint32_t>();
    const unsigned char* name = r.take(name_len);
    e.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto ndim = r.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < ndim; ++i) {
      const auto d = r.read<std::uint32_t>();
      if (d == 0) throw IoError("HTNS: zero extent in '" + e.name + "'");
      e.dims.push_back(d);
    }
    const std::size_t nbytes = shape_size(e.dims) * width(c.dtype_);
    const unsigned char* data = r.take(nbytes);
    e.bytes.assign(data, data + nbytes);
    c.entries_.push_back(std::move(e));
  }
  if (!r.done()) throw IoError("HTNS: trailing bytes");
  return c;
}

void Container::save(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

Container Container::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

template void Container::add(const std::string&, const Tensor<float>&);
template void Container::add(const std::string&, const Tensor<double>&);
template void Container::add(const std::string&, const Tensor<std::uint8_t>&);
template Tensor<float> Container::get(const std::string&) const;
template Tensor<double> Container::get(const std::string&) const;
template Tensor<std::uint8_t> Container::get(const std::string&) const;

}  // namespace helio::htns
