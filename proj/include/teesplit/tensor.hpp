#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "teesplit/error.hpp"

namespace teesplit {

using Shape = std::vector<std::size_t>;

/// Bytes per element used for all exposed-tensor accounting (32-bit reals).
inline constexpr std::size_t kElementBytes = 4;

inline std::size_t shape_elements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

/// Parses "3x224x224" (also accepts ',' as separator).
inline Shape parse_shape(const std::string& text) {
  Shape out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) throw InvalidArgument("malformed shape '" + text + "'");
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(token, &pos);
    } catch (const std::exception&) {
      throw InvalidArgument("malformed shape '" + text + "'");
    }
    if (pos != token.size() || v <= 0)
      throw InvalidArgument("shape extents must be positive integers: '" +
                            text + "'");
    out.push_back(static_cast<std::size_t>(v));
    token.clear();
  };
  for (char ch : text) {
    if (ch == 'x' || ch == 'X' || ch == ',') {
      flush();
    } else if (ch != ' ') {
      token.push_back(ch);
    }
  }
  flush();
  return out;
}

/// Dense row-major tensor of 64-bit reals.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_elements(shape_), fill) {
    check_shape();
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_elements(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t bytes() const { return data_.size() * kElementBytes; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Element access for rank-3 (C, H, W) tensors.
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Same data under a new shape with the same element count.
  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  void check_shape() const {
    for (std::size_t e : shape_)
      if (e == 0) throw ShapeError("tensor extents must be positive");
  }

  Shape shape_;
  std::vector<double> data_;
};

// Flat binary wire format: u64 LE rank, u64 LE extents, f32 LE elements.

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8))
    throw InvalidArgument("truncated tensor stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
  return v;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor& t) {
  detail::put_u64(os, t.rank());
  for (std::size_t e : t.shape()) detail::put_u64(os, e);
  for (double v : t.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    char buf[4];
    for (int i = 0; i < 4; ++i)
      buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 4);
  }
}

inline Tensor read_tensor(std::istream& is) {
  const std::uint64_t rank = detail::get_u64(is);
  if (rank == 0 || rank > 8) throw InvalidArgument("implausible tensor rank");
  Shape shape(rank);
  for (auto& e : shape) {
    e = detail::get_u64(is);
    if (e == 0 || e > (std::uint64_t{1} << 32))
      throw InvalidArgument("implausible tensor extent");
  }
  std::vector<double> data(shape_elements(shape));
  for (double& v : data) {
    unsigned char buf[4];
    if (!is.read(reinterpret_cast<char*>(buf), 4))
      throw InvalidArgument("truncated tensor stream");
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= std::uint32_t{buf[i]} << (8 * i);
    v = static_cast<double>(std::bit_cast<float>(bits));
  }
  return Tensor(std::move(shape), std::move(data));
}

inline std::string encode_tensor(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  return os.str();
}

inline Tensor load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open tensor file " + path);
  return read_tensor(in);
}

}  // namespace teesplit
