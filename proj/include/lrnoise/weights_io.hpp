#pragma once

// NRWT weight files:
//   "NRWT" | u32 version=1 | u32 tensor_count
//   per tensor: u16 name_len | name (UTF-8) | u8 dtype (0=f32, 1=f64)
//               | u8 ndim | ndim x u32 dims | row-major payload
//   u32 CRC32 of all preceding bytes
// All integers and floats little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <zlib.h>

#include "lrnoise/network.hpp"

namespace lrnoise {

static_assert(std::endian::native == std::endian::little, "NRWT I/O assumes a little-endian host");

enum class WeightFileErrc {
  io,
  truncated,
  bad_magic,
  unsupported_version,
  checksum_mismatch,
  bad_dtype,
  dtype_mismatch,
  shape_mismatch,
};

class WeightFileError : public std::runtime_error {
 public:
  WeightFileError(WeightFileErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  WeightFileErrc code() const noexcept { return code_; }

 private:
  WeightFileErrc code_;
};

inline constexpr char kWeightMagic[4] = {'N', 'R', 'W', 'T'};
inline constexpr std::uint32_t kWeightVersion = 1;

/// One tensor as stored on disk, in either precision.
struct WeightRecord {
  std::string name;
  std::variant<Tensor<float>, Tensor<double>> tensor;

  const Shape& shape() const {
    return std::visit([](const auto& t) -> const Shape& { return t.shape(); }, tensor);
  }
  std::uint8_t dtype() const { return tensor.index() == 0 ? 0 : 1; }
};

template <typename T>
constexpr std::uint8_t dtype_code() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 0 : 1;
}

namespace detail {

inline std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes, std::size_t len) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(len)));
}

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename U>
  U get() {
    U value;
    std::memcpy(&value, take(sizeof(U)), sizeof(U));
    return value;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > end_ - pos_)
      throw WeightFileError(WeightFileErrc::truncated,
                            "weight file truncated at byte offset " + std::to_string(pos_));
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, const Tensor<T>& t) {
  if (name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long: " + name);
  if (t.rank() > 0xFF) throw std::invalid_argument("tensor rank too large: " + name);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put<std::uint8_t>(out, dtype_code<T>());
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
  out.insert(out.end(), p, p + t.size() * sizeof(T));
}

template <typename T>
Tensor<T> get_payload(Reader& in, Shape shape, const std::string& name) {
  std::vector<T> data(shape_size(shape));
  std::memcpy(data.data(), in.take(data.size() * sizeof(T)), data.size() * sizeof(T));
  return Tensor<T>(std::move(shape), std::move(data), name);
}

}  // namespace detail

/// Serializes named tensors (in the given order) to the NRWT byte layout.
template <typename T>
std::vector<std::uint8_t> encode_weights(const ParamMap<T>& params) {
  std::vector<std::uint8_t> out(std::begin(kWeightMagic), std::end(kWeightMagic));
  detail::put<std::uint32_t>(out, kWeightVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) detail::put_tensor(out, name, t);
  detail::put<std::uint32_t>(out, detail::crc32_of(out, out.size()));
  return out;
}

inline std::vector<WeightRecord> decode_weights(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeader = 12, kTrailer = 4;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kWeightMagic, 4) != 0)
    throw WeightFileError(WeightFileErrc::bad_magic, "not an NRWT file (bad magic)");
  if (bytes.size() < kHeader + kTrailer)
    throw WeightFileError(WeightFileErrc::truncated,
                          "weight file truncated: " + std::to_string(bytes.size()) + " bytes");
  detail::Reader in(bytes, bytes.size() - kTrailer);
  in.take(4);
  const auto version = in.get<std::uint32_t>();
  if (version != kWeightVersion)
    throw WeightFileError(WeightFileErrc::unsupported_version,
                          "unsupported NRWT version " + std::to_string(version));
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - kTrailer, 4);
  if (stored != detail::crc32_of(bytes, bytes.size() - kTrailer))
    throw WeightFileError(WeightFileErrc::checksum_mismatch,
                          "weight file checksum mismatch (corrupt or truncated)");
  const auto count = in.get<std::uint32_t>();
  std::vector<WeightRecord> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint16_t>();
    const auto* name_ptr = in.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_ptr), name_len);
    const std::size_t dtype_at = in.pos();
    const auto dtype = in.get<std::uint8_t>();
    const auto ndim = in.get<std::uint8_t>();
    Shape shape(ndim);
    for (auto& d : shape) d = in.get<std::uint32_t>();
    try {
      check_shape(shape);
    } catch (const std::invalid_argument& e) {
      throw WeightFileError(WeightFileErrc::shape_mismatch, name + ": " + e.what());
    }
    if (dtype == 0)
      records.push_back({name, detail::get_payload<float>(in, std::move(shape), name)});
    else if (dtype == 1)
      records.push_back({name, detail::get_payload<double>(in, std::move(shape), name)});
    else
      throw WeightFileError(WeightFileErrc::bad_dtype, "unknown dtype byte " + std::to_string(dtype) +
                                                           " at offset " + std::to_string(dtype_at));
  }
  if (in.pos() != bytes.size() - kTrailer)
    throw WeightFileError(WeightFileErrc::truncated, "trailing bytes after last tensor");
  return records;
}

inline std::vector<WeightRecord> read_weight_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WeightFileError(WeightFileErrc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), {});
  return decode_weights(bytes);
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WeightFileError(WeightFileErrc::io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw WeightFileError(WeightFileErrc::io, "write failed: " + path.string());
}

/// Writes every parameter tensor, running statistics included.
template <typename T>
void save_weights(const Network<T>& net, const std::filesystem::path& path) {
  write_bytes(path, encode_weights(net.params()));
}

/// Replaces the network's parameters with the file contents. The file must
/// hold exactly the network's tensors with matching shapes and precision;
/// on any error the network is left untouched.
template <typename T>
void load_weights(Network<T>& net, const std::filesystem::path& path) {
  const auto records = read_weight_file(path);
  ParamMap<T> staged;
  for (const auto& r : records) {
    auto it = net.params().find(r.name);
    if (it == net.params().end())
      throw WeightFileError(WeightFileErrc::shape_mismatch, "unexpected tensor '" + r.name + "'");
    if (r.shape() != it->second.shape())
      throw WeightFileError(WeightFileErrc::shape_mismatch,
                            r.name + ": file shape " + shape_string(r.shape()) +
                                " vs network " + shape_string(it->second.shape()));
    if (r.dtype() != dtype_code<T>())
      throw WeightFileError(WeightFileErrc::dtype_mismatch,
                            r.name + ": stored dtype does not match network precision");
    staged.emplace(r.name, std::get<Tensor<T>>(r.tensor));
  }
  if (staged.size() != net.params().size())
    throw WeightFileError(WeightFileErrc::shape_mismatch, "weight file is missing tensors");
  for (auto& [name, t] : staged) net.param(name) = std::move(t);
}

}  // namespace lrnoise
