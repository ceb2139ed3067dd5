#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrnoise/batch.hpp"
#include "lrnoise/rng.hpp"

namespace lrnoise {

template <typename T>
struct Dataset {
  Batch<T> train;
  Batch<T> test;
  std::size_t classes = 0;
  std::string name;
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// --- CIFAR-10 binary ------------------------------------------------------

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;  // 3073
inline constexpr std::size_t kCifarClasses = 10;

/// Parses 3073-byte records (label byte, then R, G, B 32x32 planes) into
/// NHWC float images scaled to [0, 1]. At most `limit` records are kept
/// (0 = all); the whole buffer is validated either way.
inline Batch<float> parse_cifar10_records(const std::vector<std::uint8_t>& bytes,
                                          std::size_t limit = 0) {
  if (bytes.empty() || bytes.size() % kCifarRecord != 0)
    throw DatasetError("CIFAR-10 data length " + std::to_string(bytes.size()) +
                           " is not a positive multiple of 3073",
                       bytes.size() - bytes.size() % kCifarRecord);
  std::size_t n = bytes.size() / kCifarRecord;
  for (std::size_t i = 0; i < n; ++i)
    if (bytes[i * kCifarRecord] >= kCifarClasses)
      throw DatasetError("CIFAR-10 label byte " + std::to_string(bytes[i * kCifarRecord]) +
                             " is not in [0, 10)",
                         i * kCifarRecord);
  if (limit) n = std::min(n, limit);
  std::vector<float> pixels(n * 3 * kCifarPlane);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecord;
    labels[i] = rec[0];
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < kCifarPlane; ++p)
        pixels[(i * kCifarPlane + p) * 3 + c] = static_cast<float>(rec[1 + c * kCifarPlane + p]) / 255.0f;
  }
  return {Tensor<float>({n, kCifarSide, kCifarSide, 3}, std::move(pixels)), std::move(labels)};
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), {}};
}

inline Batch<float> read_cifar10_file(const std::filesystem::path& path, std::size_t limit = 0) {
  try {
    return parse_cifar10_records(read_file_bytes(path), limit);
  } catch (const DatasetError& e) {
    throw DatasetError(path.filename().string() + ": " + e.what(), e.offset());
  }
}

/// Subtracts per-channel means computed on `reference` from both batches.
inline void subtract_channel_mean(Batch<float>& reference, Batch<float>& other) {
  const std::size_t c = reference.inputs.shape().back();
  std::vector<double> mean(c, 0.0);
  const auto px = reference.inputs.values();
  for (std::size_t i = 0; i < px.size(); ++i) mean[i % c] += px[i];
  for (auto& m : mean) m /= static_cast<double>(px.size() / c);
  for (Batch<float>* b : {&reference, &other})
    for (std::size_t i = 0; i < b->inputs.size(); ++i)
      b->inputs[i] -= static_cast<float>(mean[i % c]);
}

struct CifarOptions {
  std::size_t train_limit = 0;  // 0 = all 50,000
  std::size_t test_limit = 0;   // 0 = all 10,000
  bool mean_subtract = true;
};

/// Loads data_batch_1..5.bin and test_batch.bin from `dir`.
inline Dataset<float> load_cifar10_binary(const std::filesystem::path& dir, const CifarOptions& opt = {}) {
  Dataset<float> ds;
  ds.classes = kCifarClasses;
  ds.name = "cifar10";
  bool first = true;
  for (int k = 1; k <= 5; ++k) {
    const std::size_t have = first ? 0 : ds.train.size();
    if (opt.train_limit && have >= opt.train_limit) break;
    auto part = read_cifar10_file(dir / ("data_batch_" + std::to_string(k) + ".bin"),
                                  opt.train_limit ? opt.train_limit - have : 0);
    ds.train = first ? std::move(part) : concat(ds.train, part);
    first = false;
  }
  ds.test = read_cifar10_file(dir / "test_batch.bin", opt.test_limit);
  if (opt.mean_subtract) subtract_channel_mean(ds.train, ds.test);
  return ds;
}

/// Serializes NHWC [0,1] images back to CIFAR-10 records (for fixtures).
inline std::vector<std::uint8_t> encode_cifar10_records(const Batch<float>& batch) {
  std::vector<std::uint8_t> out;
  out.reserve(batch.size() * kCifarRecord);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(batch.labels[i]));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < kCifarPlane; ++p) {
        const float v = batch.inputs[(i * kCifarPlane + p) * 3 + c];
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
      }
  }
  return out;
}

// --- synthetic Gaussian clusters ------------------------------------------

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t dim = 16;
  std::size_t per_class = 250;
  double separation = 3.0;  // distance between class centroids
  std::uint64_t seed = 7;
};

inline std::string synthetic_name(const SyntheticSpec& s) {
  std::ostringstream os;
  os << "synthetic-c" << s.classes << "-d" << s.dim << "-n" << s.per_class << "-s" << s.separation;
  return os.str();
}

/// Unit-variance isotropic Gaussian clusters. Centroids are separation/sqrt(2)
/// times a random orthonormal frame (plain random unit directions when
/// classes > dim), so centroid pairs sit `separation` apart. Each class is split 80/20 into
/// train/test and both splits are shuffled.
inline Dataset<float> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("generate_synthetic: classes must be >= 2");
  if (spec.dim == 0 || spec.per_class < 2)
    throw std::invalid_argument("generate_synthetic: dim >= 1 and per_class >= 2 required");
  const RngStream root(spec.seed, fnv1a64("synthetic"));
  const double radius = spec.separation / std::sqrt(2.0);
  std::vector<std::vector<double>> centroids(spec.classes, std::vector<double>(spec.dim, 0.0));
  RngStream dir_rng = root.derive("centroids");
  // Unit directions: orthonormalized (Gram-Schmidt) while k < dim, so
  // centroid pairs sit exactly `separation` apart.
  for (std::size_t k = 0; k < spec.classes; ++k) {
    auto& c = centroids[k];
    for (auto& v : c) v = dir_rng.normal();
    if (k < spec.dim)
      for (std::size_t j = 0; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < spec.dim; ++d) dot += c[d] * centroids[j][d];
        for (std::size_t d = 0; d < spec.dim; ++d) c[d] -= dot * centroids[j][d];
      }
    double norm = 0.0;
    for (double v : c) norm += v * v;
    for (auto& v : c) v /= std::sqrt(norm);
  }
  for (auto& c : centroids)
    for (auto& v : c) v *= radius;
  const std::size_t n_train = spec.per_class * 4 / 5;
  std::vector<float> xs[2];
  std::vector<int> ys[2];
  RngStream sample_rng = root.derive("samples");
  for (std::size_t k = 0; k < spec.classes; ++k)
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      const int part = i < n_train ? 0 : 1;
      for (std::size_t d = 0; d < spec.dim; ++d)
        xs[part].push_back(static_cast<float>(centroids[k][d] + sample_rng.normal()));
      ys[part].push_back(static_cast<int>(k));
    }
  Dataset<float> ds;
  ds.classes = spec.classes;
  ds.name = synthetic_name(spec);
  RngStream shuffle_rng = root.derive("shuffle");
  for (int part = 0; part < 2; ++part) {
    const std::size_t n = ys[part].size();
    Batch<float> ordered{Tensor<float>({n, spec.dim}, std::move(xs[part])), std::move(ys[part])};
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[shuffle_rng.below(i + 1)]);
    (part == 0 ? ds.train : ds.test) = gather(ordered, std::span<const std::size_t>(perm));
  }
  return ds;
}

// --- CSV (label,x0,x1,...) ------------------------------------------------

inline void write_csv_batch(const Batch<float>& batch, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const std::size_t d = batch.inputs.size() / batch.size();
  f << "label";
  for (std::size_t j = 0; j < d; ++j) f << ",x" << j;
  f << '\n';
  f << std::setprecision(9);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    f << batch.labels[i];
    for (std::size_t j = 0; j < d; ++j) f << ',' << batch.inputs[i * d + j];
    f << '\n';
  }
}

inline Batch<float> read_csv_batch(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(f, line);  // header
  std::vector<float> xs;
  std::vector<int> ys;
  std::size_t width = 0, lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (cols == 0)
          ys.push_back(std::stoi(cell));
        else
          xs.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
      ++cols;
    }
    if (width == 0) width = cols - 1;
    if (cols - 1 != width || width == 0)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": inconsistent column count");
  }
  if (ys.empty()) throw std::runtime_error(path.string() + ": no examples");
  const std::size_t n = ys.size();
  return {Tensor<float>({n, width}, std::move(xs)), std::move(ys)};
}

}  // namespace lrnoise
