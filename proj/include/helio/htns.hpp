// "HTNS" binary tensor container.
//
// Layout, all integers little-endian:
//   magic "HTNS" | version u8 (=1) | dtype u8 | count u32
//   count x { name_len u32 | name (UTF-8) | ndim u32 | dims u32[ndim] | data }
// dtype: 0 = f32, 1 = f64, 2 = u8. Data is row-major in the file dtype.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "helio/tensor.hpp"

namespace helio::htns {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

inline constexpr std::uint8_t kVersion = 1;

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }
template <>
constexpr DType dtype_of<std::uint8_t>() { return DType::u8; }

struct Entry {
  std::string name;
  Shape dims;
  std::vector<unsigned char> bytes;  ///< little-endian payload
};

class Container {
 public:
  explicit Container(DType dtype) : dtype_(dtype) {}

  DType dtype() const { return dtype_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool contains(const std::string& name) const;

  /// Stores `t` converted to the container dtype.
  template <typename T>
  void add(const std::string& name, const Tensor<T>& t);

  /// Reads an entry converted to T. Throws IoError if absent.
  template <typename T>
  Tensor<T> get(const std::string& name) const;

  void save(const std::string& path) const;
  static Container load(const std::string& path);

  std::vector<unsigned char> serialize() const;
  static Container deserialize(const std::vector<unsigned char>& bytes);

 private:
  DType dtype_;
  std::vector<Entry> entries_;
};

}  // namespace helio::htns
