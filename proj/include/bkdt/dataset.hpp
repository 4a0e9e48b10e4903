#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bkdt/core.hpp"

namespace bkdt {

enum class DataFormat { Binary, Csv };

/// "bin"/"binary" or "csv"; anything else throws std::invalid_argument.
DataFormat parse_format(const std::string& name);
/// Binary when the extension is .bin or .bknn, CSV otherwise.
DataFormat format_from_path(const std::filesystem::path& path);

/// Malformed input. The message names the byte offset or line of the fault.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout, little-endian:
//   "BKNN" | u32 version (=1) | u64 n | u32 d | u32 reserved | n*d float32, row-major
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 24;

PointMatrix load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const std::filesystem::path& path, const PointMatrix& points, DataFormat format);

PointMatrix parse_csv(const std::string& text);
std::vector<unsigned char> encode_binary(const PointMatrix& points);
PointMatrix decode_binary(const std::vector<unsigned char>& bytes);

enum class SyntheticKind { Uniform, GaussianMixture };
SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticData {
  PointMatrix points;
  std::vector<Index> labels;  // mixture component per point; empty for uniform
  PointMatrix centers;        // component means; empty for uniform
};

/// Deterministic for a fixed seed. Uniform draws every coordinate from
/// [0, 1); the mixture draws `components` means from [0, 1)^d and adds
/// isotropic noise of standard deviation `spread`.
SyntheticData gen_synthetic(SyntheticKind kind, Index n, Index d, std::uint64_t seed,
                            Index components = 4, float spread = 0.05f);

/// Gaussian mixture of n - num_outliers points followed by num_outliers
/// points placed far from the mixture and from each other. The planted
/// points occupy the last num_outliers rows.
SyntheticData gen_planted_outliers(Index n, Index d, Index num_outliers, std::uint64_t seed);

}  // namespace bkdt
